import math

import numpy as np
import pytest

import shapeqmc as sq


def test_field_identity_endpoint():
    field = sq.PerturbationField.paper_radial(10)
    x = np.array([0.3, -0.2])
    assert np.array_equal(field.evaluate_map(x, [-0.5] * 10), x)
    jac = field.jacobian(x, [0.1] * 10)
    a = sq.diffusion_matrix(jac)
    assert np.allclose(a, a.T)
    assert np.all(np.linalg.eigvalsh(a) > 0)


def test_mesh_arrays():
    mesh = sq.build_disk_mesh(2)
    assert mesh.nodes.shape == (61, 2)
    assert mesh.triangles.shape == (96, 3)
    assert len(mesh.boundary_nodes) == 24


def test_lattice_api():
    assert sq.choose_lambda(0.49, 2.0, 0.05) == pytest.approx(1 / 1.9)
    with pytest.raises(sq.InvalidArgument):
        sq.choose_lambda(0.55, 2.0, 0.05)
    assert sq.riemann_zeta(2.0) == pytest.approx(math.pi**2 / 6, rel=1e-15)
    w = sq.pod_weights(sq.GevreyProfile(), 1 / 1.9, 5)
    z = sq.cbc_construct(67, 5, w)
    assert z[0] == 1 and len(z) == 5
    assert sq.shift_averaged_wce(z, 67, w) <= sq.error_bound(w, 67, 1 / 1.9)
    pts = np.array(sq.lattice_points(5, [2], [0.0]))
    assert sorted(pts[:, 0] + 0.5) == pytest.approx([0, 0.2, 0.4, 0.6, 0.8])
    assert sq.next_prime(128020) == 128021


def test_config_round_trip_and_fem_rates():
    cfg = sq.ExperimentConfig.parse("fem_levels = 1, 2, 3\nfem_ref_level = 4\n")
    assert sq.ExperimentConfig.parse(cfg.to_text()).to_text() == cfg.to_text()
    analytic, _ = sq.fem_rates(cfg)
    assert all(1.5 < r < 2.5 for r in analytic)
