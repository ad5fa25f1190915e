"""Independent transcription of the POD weight formula and the lattice
error bound, used to freeze expected values in the C++ unit tests."""
import itertools
import math

import mpmath as mp

mp.mp.dps = 40


def zeta_factor(lam):
    return 2 * mp.zeta(2 * lam) / (2 * mp.pi**2) ** lam


def gamma_u(u, b, beta, lam, c6=1):
    """Direct evaluation of gamma_u for a subset u (1-based indices)."""
    prod = mp.mpf(1)
    for j in u:
        prod *= c6 * b[j - 1] / mp.sqrt(zeta_factor(lam))
    return (mp.factorial(len(u) + 1) ** beta * prod) ** (2 / (1 + lam))


def error_bound(b, beta, lam, n):
    s = len(b)
    total = mp.mpf(0)
    zf = zeta_factor(lam)
    # order-grouped elementary symmetric sums are an algebraic shortcut; the
    # oracle enumerates subsets explicitly for small s and groups by order
    # only through the e_k recursion below for large s.
    coords = [gamma_u([j], b, beta, lam) / (mp.factorial(2) ** (beta * 2 / (1 + lam))) for j in range(1, s + 1)]
    e = [mp.mpf(1)] + [mp.mpf(0)] * s
    for c in coords:
        for k in range(s, 0, -1):
            e[k] += e[k - 1] * c**lam
    for k in range(1, s + 1):
        big_gamma = mp.factorial(k + 1) ** (beta * 2 / (1 + lam))
        total += big_gamma**lam * e[k] * zf**k
    return (total / (n - 1)) ** (1 / (2 * lam))


def error_bound_enum(b, beta, lam, n):
    s = len(b)
    zf = zeta_factor(lam)
    total = mp.mpf(0)
    for k in range(1, s + 1):
        for u in itertools.combinations(range(1, s + 1), k):
            total += gamma_u(u, b, beta, lam) ** lam * zf**k
    return (total / (n - 1)) ** (1 / (2 * lam))


if __name__ == "__main__":
    b = [mp.mpf(1), mp.mpf(2) ** mp.mpf(-2.1)]
    print("gamma_{1,2} b=(1,2^-2.1) beta=2 lam=0.6:", mp.nstr(gamma_u([1, 2], b, 2, mp.mpf("0.6")), 20))
    print("gamma_{1} same:", mp.nstr(gamma_u([1], b, 2, mp.mpf("0.6")), 20))
    lam = 1 / (2 - 2 * mp.mpf("0.05"))
    b20 = [mp.mpf(j) ** mp.mpf(-2.1) for j in range(1, 21)]
    print("lambda default:", mp.nstr(lam, 20))
    print("bound s=20 n=67:", mp.nstr(error_bound(b20, 2, lam, 67), 20))
    b8 = b20[:8]
    print("bound s=8 n=67 (grouped):", mp.nstr(error_bound(b8, 2, lam, 67), 20))
    print("bound s=8 n=67 (enumerated):", mp.nstr(error_bound_enum(b8, 2, lam, 67), 20))
    print("zeta(2*lam):", mp.nstr(mp.zeta(2 * lam), 20))
