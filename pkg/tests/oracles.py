"""Literal-loop reference implementations, written straight from the definitions.

Nothing here touches the package's array code; weights are evaluated
pointwise with math.sin / min so the oracle does not share the polynomial
machinery either.  Sums use math.fsum: the rho combinations cancel, and
plain left-to-right summation alone drifts past 1e-12 relative.

With ``exact=True`` the same loops run in 60-digit mpmath arithmetic on the
float inputs (increments and weight values as the package sees them), which
removes the oracle's own rounding from ill-conditioned comparisons.
"""

import math
from fractions import Fraction

import mpmath

_MP = mpmath.mp.clone()
_MP.dps = 60


def _arith(exact):
    if exact:
        return _MP.mpf, _MP.fsum
    return float, math.fsum


def triangle(x):
    return min(x, 1.0 - x) if 0.0 <= x <= 1.0 else 0.0


def sine(x):
    return math.sin(math.pi * x) if 0.0 <= x <= 1.0 else 0.0


WEIGHTS = {"triangle": triangle, "sine": sine}


def zbar(z, g, k, i, exact=False):
    num, fsum = _arith(exact)
    return fsum(num(g(j / k)) * (num(z[i + j]) - num(z[i + j - 1])) for j in range(1, k))


def zhat(z, g, k, i, exact=False):
    num, fsum = _arith(exact)
    return fsum(((num(g(j / k)) - num(g((j - 1) / k))) * (num(z[i + j]) - num(z[i + j - 1]))) ** 2
                for j in range(1, k + 1))


def power(x, p):
    return 1 if p == 0 else abs(x) ** p


def v_stat(z, g, k, p, r, m=None, exact=False):
    _, fsum = _arith(exact)
    m = len(z) - 1 if m is None else m
    return fsum(power(zbar(z, g, k, i, exact), p) * power(zhat(z, g, k, i, exact), r) for i in range(m - k + 1))


def rho(p):
    """Solve sum_l rho_l 2^l m_{2j-2l} C(p-2l, 2j-2l) = 0 for j >= 1, rho_0 = 1, by brute force."""
    def gm(q):
        out = 1
        for a in range(q - 1, 0, -2):
            out *= a
        return out

    r = [Fraction(1)]
    for j in range(1, p // 2 + 1):
        s = sum(r[l] * 2**l * gm(2 * j - 2 * l) * math.comb(p - 2 * l, 2 * j - 2 * l) for l in range(j))
        r.append(-s / 2**j)
    return r


def vbar_stat(z, g, k, p, m=None, exact=False):
    num, fsum = _arith(exact)
    rr = [num(x.numerator) / num(x.denominator) for x in rho(p)]
    m = len(z) - 1 if m is None else m
    # per-window combination first, then one compensated sum over windows
    return fsum(
        fsum(rr[l] * power(zbar(z, g, k, i, exact), p - 2 * l) * power(zhat(z, g, k, i, exact), l)
             for l in range(p // 2 + 1))
        for i in range(m - k + 1))


def m_stat(z, g, h, k, p, m=None, exact=False):
    num, fsum = _arith(exact)
    m = len(z) - 1 if m is None else m
    rr = [num(x.numerator) / num(x.denominator) for x in rho(p)]
    zb = lambda w, i: zbar(z, w, k, i, exact)  # noqa: E731
    zh = lambda w, i: zhat(z, w, k, i, exact)  # noqa: E731
    terms = []
    for r in range(p // 2 + 1):
        for r2 in range(p // 2 + 1):
            for i in range(m - 3 * k + 1):
                avg = fsum(power(zb(h, i + j), p - 2 * r2) for j in range(1, 2 * k + 1)) / k
                term = (power(zb(g, i + k), p - 2 * r) * avg
                        - 2 * power(zb(g, i), p - 2 * r) * power(zb(h, i + k), p - 2 * r2))
                terms.append(rr[r] * rr[r2] * zh(g, i) ** r * zh(h, i) ** r2 * term)
    return fsum(terms)
