"""Weight functions and the deterministic constants built from them.

Everything here is a pure function of the weight functions involved.  Integrals
are computed by composite Gauss-Legendre rules split at every point where the
integrand may lose smoothness, so piecewise-polynomial weights are integrated
exactly up to rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError, NumericalError, QuadratureError

__all__ = [
    "Piece",
    "WeightFunction",
    "DiscreteWeights",
    "RhoCoefficients",
    "KernelSet",
    "get_weight",
    "register_weight",
    "weight_from_json",
    "signed_power",
    "integrate_piecewise",
    "gaussian_abs_moment",
    "solve_rho",
    "continuous_norm",
    "overlap",
    "bivariate_gaussian_moment",
    "gaussian_power_moment",
    "mu_kernels",
    "m_pq",
    "mu_bar_eval",
    "mu_bar_4_closed",
    "mu_bar_coefficients",
    "psi_matrices",
    "psd_sqrt",
]

QUAD_TOL = 1e-10
_EDGE_TOL = 1e-12


# ---------------------------------------------------------------------------
# weight functions


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    g: Callable[[np.ndarray], np.ndarray]
    dg: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A continuous, piecewise C^1 weight on [0, 1], zero outside.

    ``pieces`` must tile [0, 1] in order.  The derivative is evaluated from the
    right at interior breakpoints; integrals never see the difference.
    """

    name: str
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise ConfigError(f"weight {self.name!r}: no pieces")
        if abs(self.pieces[0].lo) > _EDGE_TOL or abs(self.pieces[-1].hi - 1.0) > _EDGE_TOL:
            raise ConfigError(f"weight {self.name!r}: pieces must cover [0, 1]")
        for a, b in zip(self.pieces, self.pieces[1:]):
            if abs(a.hi - b.lo) > _EDGE_TOL:
                raise ConfigError(f"weight {self.name!r}: gap or overlap at {a.hi}")
            left = float(a.g(np.array([a.hi]))[0])
            right = float(b.g(np.array([b.lo]))[0])
            if abs(left - right) > 1e-9:
                raise ConfigError(f"weight {self.name!r}: discontinuous at {a.hi} ({left} vs {right})")
        for p in self.pieces:
            if not p.hi > p.lo:
                raise ConfigError(f"weight {self.name!r}: empty piece [{p.lo}, {p.hi}]")
        g0 = float(self.pieces[0].g(np.array([0.0]))[0])
        g1 = float(self.pieces[-1].g(np.array([1.0]))[0])
        if abs(g0) > 1e-12 or abs(g1) > 1e-12:
            raise ConfigError(f"weight {self.name!r}: g(0)={g0}, g(1)={g1}; both must vanish")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = {0.0, 1.0}
        for p in self.pieces:
            pts.add(float(p.lo))
            pts.add(float(p.hi))
        return tuple(sorted(pts))

    def _eval(self, x, which: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        last = len(self.pieces) - 1
        for n, p in enumerate(self.pieces):
            if n == last:
                mask = (x >= p.lo) & (x <= p.hi)
            else:
                mask = (x >= p.lo) & (x < p.hi)
            if which == "dg" and n == last:
                mask &= x < p.hi
            if np.any(mask):
                out[mask] = getattr(p, which)(x[mask])
        return out

    def __call__(self, x) -> np.ndarray:
        return self._eval(x, "g")

    def derivative(self, x) -> np.ndarray:
        return self._eval(x, "dg")

    def __repr__(self) -> str:
        return f"WeightFunction({self.name!r})"


def _poly_piece(lo: float, hi: float, coeffs: Sequence[float]) -> Piece:
    poly = Polynomial(np.asarray(coeffs, dtype=float))
    deriv = poly.deriv()
    return Piece(float(lo), float(hi), poly, deriv)


def piecewise_polynomial(name: str, pieces: Iterable[tuple[float, float, Sequence[float]]]) -> WeightFunction:
    """Weight from ``(lo, hi, coeffs)`` triples; coefficients ascend in powers of x."""
    return WeightFunction(name, tuple(_poly_piece(lo, hi, c) for lo, hi, c in pieces))


def _triangle() -> WeightFunction:
    return piecewise_polynomial("triangle", [(0.0, 0.5, [0.0, 1.0]), (0.5, 1.0, [1.0, -1.0])])


def _sine() -> WeightFunction:
    return WeightFunction(
        "sine",
        (Piece(0.0, 1.0, lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x)),),
    )


_REGISTRY: dict[str, WeightFunction] = {}


def register_weight(g: WeightFunction) -> WeightFunction:
    _REGISTRY[g.name] = g
    return g


register_weight(_triangle())
register_weight(_sine())


def weight_from_json(spec: dict | str | Path, name: str | None = None) -> WeightFunction:
    """Build a weight from ``{"pieces": [{"lo", "hi", "coeffs"}, ...]}``."""
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        try:
            spec = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read weight spec {path}: {exc}") from exc
        name = name or path.stem
    if not isinstance(spec, dict) or "pieces" not in spec:
        raise ConfigError("weight spec must be an object with a 'pieces' list")
    try:
        triples = [(float(p["lo"]), float(p["hi"]), [float(c) for c in p["coeffs"]]) for p in spec["pieces"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed weight piece: {exc}") from exc
    g = piecewise_polynomial(name or spec.get("name", "custom"), triples)
    if continuous_norm(g, 2.0) <= 0.0:
        raise ConfigError(f"weight {g.name!r} has zero L2 norm")
    return g


def get_weight(name: str | WeightFunction) -> WeightFunction:
    """Registry lookup; a path to a JSON weight spec is accepted too."""
    if isinstance(name, WeightFunction):
        return name
    if name in _REGISTRY:
        return _REGISTRY[name]
    if name.endswith(".json") and Path(name).exists():
        return weight_from_json(name)
    known = ", ".join(sorted(_REGISTRY))
    raise ConfigError(f"unknown weight function {name!r} (known: {known}, or a JSON spec path)")


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _gl(f, a: float, b: float, n: int) -> float:
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return half * float(np.dot(w, f(0.5 * (a + b) + half * x)))


def _adaptive(f, a, b, tol, n, depth):
    coarse = _gl(f, a, b, n)
    fine = _gl(f, a, b, 2 * n)
    err = abs(fine - coarse)
    if err <= tol or depth == 0:
        return fine, err
    m = 0.5 * (a + b)
    lv, le = _adaptive(f, a, m, 0.5 * tol, n, depth - 1)
    rv, re = _adaptive(f, m, b, 0.5 * tol, n, depth - 1)
    return lv + rv, le + re


def integrate_piecewise(f, a: float, b: float, breakpoints: Iterable[float] = (),
                        tol: float = QUAD_TOL, n: int = 24, max_depth: int = 16) -> float:
    """Integrate vectorized ``f`` over [a, b], splitting at ``breakpoints``.

    Raises QuadratureError if the summed error estimate exceeds ``tol``.
    """
    if b <= a:
        return 0.0
    pts = sorted({a, b} | {float(p) for p in breakpoints if a < p < b})
    total = 0.0
    err = 0.0
    span = b - a
    for lo, hi in zip(pts, pts[1:]):
        if hi - lo <= 1e-15:
            continue
        v, e = _adaptive(f, lo, hi, tol * (hi - lo) / span, n, max_depth)
        total += v
        err += e
    if err > tol:
        raise QuadratureError(f"integral over [{a}, {b}] did not converge", err)
    return total


def signed_power(x, p: float) -> np.ndarray:
    """{x}^p = |x|^p sign(x), safe for negative bases and fractional p."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** p


# ---------------------------------------------------------------------------
# Gaussian moments and the bias-correction coefficients


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def gaussian_abs_moment(p: float) -> float:
    """E|N(0,1)|^p."""
    if p < 0:
        raise ValueError(f"p must be nonnegative, got {p}")
    if float(p).is_integer() and int(p) % 2 == 0:
        return float(_double_factorial(int(p) - 1))
    return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


@dataclass(frozen=True)
class RhoCoefficients:
    p: int
    exact: tuple[Fraction, ...]

    @property
    def rho(self) -> np.ndarray:
        return np.array([float(r) for r in self.exact])

    def __getitem__(self, l: int) -> float:
        return float(self.exact[l])

    def __len__(self) -> int:
        return len(self.exact)


@lru_cache(maxsize=None)
def solve_rho(p: int) -> RhoCoefficients:
    """Coefficients turning V(p-2l, l) combinations into pure volatility powers.

    Solved by forward substitution in rational arithmetic.
    """
    if int(p) != p or p < 2 or int(p) % 2:
        raise ValueError(f"p must be an even integer >= 2, got {p}")
    p = int(p)
    m = [_double_factorial(q - 1) if q % 2 == 0 else 0 for q in range(p + 1)]
    rho = [Fraction(1)]
    for j in range(1, p // 2 + 1):
        acc = sum(Fraction(2**l * m[2 * j - 2 * l] * math.comb(p - 2 * l, 2 * j - 2 * l)) * rho[l]
                  for l in range(j))
        rho.append(-acc / (2**j * m[0] * math.comb(p - 2 * j, 0)))
    return RhoCoefficients(p, tuple(rho))


# ---------------------------------------------------------------------------
# continuous norms and overlaps


@lru_cache(maxsize=4096)
def continuous_norm(g: WeightFunction, p: float, derivative: bool = False) -> float:
    """The integral of |g|^p (or |g'|^p) over [0, 1]."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    fn = g.derivative if derivative else g
    return integrate_piecewise(lambda s: np.abs(fn(s)) ** p, 0.0, 1.0, g.breakpoints)


def overlap(g: WeightFunction, h: WeightFunction, t: float, derivative: bool = False) -> float:
    """The integral of g(s) h(s - t) ds (derivatives under ``derivative``)."""
    t = float(t)
    if t >= 1.0 or t <= -1.0:
        return 0.0
    fg = g.derivative if derivative else g
    fh = h.derivative if derivative else h
    lo, hi = max(0.0, t), min(1.0, 1.0 + t)
    pts = list(g.breakpoints) + [b + t for b in h.breakpoints]
    return integrate_piecewise(lambda s: fg(s) * fh(s - t), lo, hi, pts)


def _lag_kinks(g: WeightFunction, h: WeightFunction) -> list[float]:
    """Lags where t -> overlap(g, h, t) may fail to be smooth."""
    return sorted({a - b for a in g.breakpoints for b in h.breakpoints})


def _gl_nodes(edges: Sequence[float], n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(n)
    nodes, weights = [], []
    for lo, hi in zip(edges, edges[1:]):
        if hi - lo <= 1e-15:
            continue
        half = 0.5 * (hi - lo)
        nodes.append(0.5 * (lo + hi) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# Gaussian moment kernels


def _dfact_or_zero(n: int) -> int:
    return 0 if n % 2 else _double_factorial(n - 1)


def bivariate_gaussian_moment(p: int, q: int, var_x: float, var_y: float, cov) -> np.ndarray | float:
    """E[X^p Y^q] for centred jointly Gaussian (X, Y), by Isserlis pairings.

    ``cov`` may be an array; the result then has its shape.
    """
    if p < 0 or q < 0 or int(p) != p or int(q) != q:
        raise ValueError("p and q must be nonnegative integers")
    p, q = int(p), int(q)
    cov_arr = np.asarray(cov, dtype=float)
    if var_x < 0 or var_y < 0:
        raise ValueError("variances must be nonnegative")
    scale = max(var_x * var_y, 1e-300)
    if np.any(cov_arr**2 > var_x * var_y + 1e-12 * scale + 1e-300):
        raise ValueError("covariance matrix is not positive semidefinite")
    out = np.zeros_like(cov_arr)
    for k in range(min(p, q) + 1):
        if (p - k) % 2 or (q - k) % 2:
            continue
        coef = (math.comb(p, k) * math.comb(q, k) * math.factorial(k)
                * _dfact_or_zero(p - k) * _dfact_or_zero(q - k))
        out = out + coef * cov_arr**k * var_x ** ((p - k) // 2) * var_y ** ((q - k) // 2)
    return float(out) if out.ndim == 0 else out


def gaussian_power_moment(g: WeightFunction, p: int, eta: float, zeta: float) -> float:
    """E[(eta L(g)_0 + zeta L'(g)_0)^p] from the binomial closed form."""
    if p % 2:
        return 0.0
    a = eta**2 * continuous_norm(g, 2.0)
    b = zeta**2 * continuous_norm(g, 2.0, True)
    return sum(math.comb(p, 2 * v) * a**v * b ** (p // 2 - v)
               * gaussian_abs_moment(2 * v) * gaussian_abs_moment(p - 2 * v)
               for v in range(p // 2 + 1))


@lru_cache(maxsize=256)
def _cov_table(g: WeightFunction, h: WeightFunction, n: int = 64):
    """Nodes on [0, 2] with the plain and derivative overlaps at lag t - 1."""
    kinks = [1.0 + d for d in _lag_kinks(g, h)]
    edges = sorted({0.0, 1.0, 2.0} | {k for k in kinks if 0.0 < k < 2.0})
    t, w = _gl_nodes(edges, n)
    plain = np.array([overlap(g, h, ti - 1.0) for ti in t])
    deriv = np.array([overlap(g, h, ti - 1.0, True) for ti in t])
    return t, w, plain, deriv


def _m_pq(g, h, p, q, eta, zeta) -> float:
    """Time-integrated joint moment of the two Gaussian mixtures over [0, 2]."""
    _, w, plain, deriv = _cov_table(g, h)
    var_x = eta**2 * continuous_norm(g, 2.0) + zeta**2 * continuous_norm(g, 2.0, True)
    var_y = eta**2 * continuous_norm(h, 2.0) + zeta**2 * continuous_norm(h, 2.0, True)
    cov = eta**2 * plain + zeta**2 * deriv
    lim = math.sqrt(var_x * var_y)
    cov = np.clip(cov, -lim, lim)
    return float(np.dot(w, bivariate_gaussian_moment(p, q, var_x, var_y, cov)))


def m_pq(g: WeightFunction | str, h: WeightFunction | str, p: int, q: int, eta: float, zeta: float) -> float:
    """m_{p,q}(g, h; eta, zeta): the window at 1 against windows at t in [0, 2]."""
    if min(p, q) < 0 or int(p) != p or int(q) != q:
        raise ValueError("p and q must be nonnegative integers")
    if eta < 0 or zeta < 0:
        raise ValueError("eta and zeta must be nonnegative")
    return _m_pq(get_weight(g), get_weight(h), int(p), int(q), float(eta), float(zeta))


def _mu_p(g, p, eta, zeta) -> float:
    rho = solve_rho(p).rho
    c = 2.0 * zeta**2 * continuous_norm(g, 2.0, True)
    return float(sum(rho[r] * c**r * gaussian_power_moment(g, p - 2 * r, eta, zeta)
                     for r in range(p // 2 + 1)))


def mu_kernels(g: WeightFunction, h: WeightFunction, p: int, eta: float, zeta: float):
    """Return (mu_p(g), mu_p(h), mu_2p(g, h), mu_bar_2p(g, h)) at (eta, zeta)."""
    if p < 2 or p % 2:
        raise ValueError(f"p must be an even integer >= 2, got {p}")
    if eta < 0 or zeta < 0:
        raise ValueError("eta and zeta must be nonnegative")
    rho = solve_rho(p).rho
    cg = 2.0 * zeta**2 * continuous_norm(g, 2.0, True)
    ch = 2.0 * zeta**2 * continuous_norm(h, 2.0, True)
    half = p // 2
    mu2p = 0.0
    for r in range(half + 1):
        for rr in range(half + 1):
            mu2p += rho[r] * rho[rr] * cg**r * ch**rr * _m_pq(g, h, p - 2 * r, p - 2 * rr, eta, zeta)
    mug = _mu_p(g, p, eta, zeta)
    muh = _mu_p(h, p, eta, zeta)
    return mug, muh, mu2p, mu2p - 2.0 * mug * muh


def mu_bar_4_closed(g: WeightFunction, eta: float, zeta: float) -> float:
    """4 * int_0^1 (eta^2 (gg)(s) + zeta^2 (g'g')(s))^2 ds by direct quadrature."""
    kinks = [k for k in _lag_kinks(g, g) if 0.0 < k < 1.0]

    def integrand(s):
        return np.array([(eta**2 * overlap(g, g, si) + zeta**2 * overlap(g, g, si, True)) ** 2 for si in s])

    return 4.0 * integrate_piecewise(integrand, 0.0, 1.0, kinks, n=32)


@lru_cache(maxsize=256)
def mu_bar_coefficients(g: WeightFunction, h: WeightFunction, p: int) -> np.ndarray:
    """c with mu_bar_2p(g, h; eta, zeta) = sum_v c[v] eta^(2v) zeta^(2(p-v)).

    mu_bar_2p is a homogeneous polynomial in (eta^2, zeta^2) of degree p, so
    p + 1 evaluations on the unit quarter circle pin it down.
    """
    phis = (np.arange(p + 1) + 0.5) * (0.5 * np.pi / (p + 1))
    e, z = np.cos(phis), np.sin(phis)
    a = np.array([[ei ** (2 * v) * zi ** (2 * (p - v)) for v in range(p + 1)] for ei, zi in zip(e, z)])
    b = np.array([mu_kernels(g, h, p, ei, zi)[3] for ei, zi in zip(e, z)])
    return np.linalg.solve(a, b)


def mu_bar_eval(coeffs: np.ndarray, eta, zeta) -> np.ndarray:
    """Evaluate the polynomial from ``mu_bar_coefficients`` elementwise."""
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    p = len(coeffs) - 1
    return sum(c * eta ** (2 * v) * zeta ** (2 * (p - v)) for v, c in enumerate(coeffs))


# ---------------------------------------------------------------------------
# jump-CLT covariance matrices


def _psi_inner(g: WeightFunction, p: float, t: float, side: str, deriv: bool) -> float:
    second = g.derivative if deriv else g
    if side == "-":
        lo, hi = t, 1.0
        pts = list(g.breakpoints) + [b + t for b in g.breakpoints]
        f = lambda s: signed_power(g(s), p - 1.0) * second(s - t)  # noqa: E731
    else:
        lo, hi = 0.0, 1.0 - t
        pts = list(g.breakpoints) + [b - t for b in g.breakpoints]
        f = lambda s: signed_power(g(s), p - 1.0) * second(s + t)  # noqa: E731
    return integrate_piecewise(f, lo, hi, pts)


@lru_cache(maxsize=64)
def _psi_cached(family: tuple[WeightFunction, ...], p: float):
    kinks = set()
    for a in family:
        for b in family:
            kinks.update(k for k in _lag_kinks(a, b) if 0.0 < k < 1.0)
            kinks.update(-k for k in _lag_kinks(a, b) if 0.0 < -k < 1.0)
    edges = sorted({0.0, 1.0} | kinks)
    out = []
    for side, deriv in (("-", False), ("+", False), ("-", True), ("+", True)):
        def vec(t, side=side, deriv=deriv):
            return np.array([[_psi_inner(g, p, ti, side, deriv) for g in family] for ti in t])

        # Product of inner integrals is smooth between lag kinks; 48 nodes per piece,
        # checked against 96 nodes.
        t48, w48 = _gl_nodes(edges, 48)
        t96, w96 = _gl_nodes(edges, 96)
        i48, i96 = vec(t48), vec(t96)
        m48 = np.einsum("n,ni,nj->ij", w48, i48, i48)
        m96 = np.einsum("n,ni,nj->ij", w96, i96, i96)
        err = float(np.max(np.abs(m96 - m48)))
        if err > QUAD_TOL:
            raise QuadratureError("jump covariance matrix outer integral", err)
        out.append(_check_psd(m96, "jump covariance"))
    return tuple(out)


def _check_psd(m: np.ndarray, what: str, tol: float = 1e-9) -> np.ndarray:
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym >= tol:
        raise NumericalError(f"{what} matrix asymmetric by {asym:.2e}")
    m = 0.5 * (m + m.T)
    vals, vecs = np.linalg.eigh(m)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals.min() < -tol * scale:
        raise NumericalError(f"{what} matrix indefinite (min eigenvalue {vals.min():.3e})")
    if vals.min() < 0:
        m = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return m


def psi_matrices(family: Sequence[WeightFunction], p: float):
    """Return (Psi_minus, Psi_plus, Psibar_minus, Psibar_plus) for the family."""
    family = tuple(get_weight(g) for g in family)
    if not family:
        raise ValueError("family must be nonempty")
    if not (p == 2 or p > 3):
        raise ValueError(f"p must be 2 or greater than 3, got {p}")
    return tuple(m.copy() for m in _psi_cached(family, float(p)))


def psd_sqrt(m, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root via the spectral decomposition."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    if vals.min() < -tol * scale:
        raise ValueError(f"matrix is indefinite (min eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


# ---------------------------------------------------------------------------
# discrete weights and the cached kernel set


@dataclass(frozen=True)
class DiscreteWeights:
    g: WeightFunction
    k_n: int
    g_vals: np.ndarray = field(repr=False)
    g_diffs: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, g: WeightFunction, k_n: int) -> "DiscreteWeights":
        if k_n < 2:
            raise ValueError(f"window length must be >= 2, got {k_n}")
        vals = g(np.arange(k_n + 1) / k_n)
        vals[0] = 0.0
        vals[-1] = 0.0
        return cls(g, int(k_n), vals, np.diff(vals))

    def norm(self, p: float) -> float:
        return float(np.sum(np.abs(self.g_vals[1:]) ** p))

    def dnorm(self, p: float) -> float:
        return float(np.sum(np.abs(self.g_diffs) ** p))


class KernelSet:
    """Analytic constants for a family of weights, cached on first use."""

    def __init__(self, family: Sequence[WeightFunction | str]):
        self.family = tuple(get_weight(g) for g in family)
        if not self.family:
            raise ValueError("family must be nonempty")

    def norm(self, i: int, p: float, derivative: bool = False) -> float:
        return continuous_norm(self.family[i], float(p), derivative)

    def overlap(self, i: int, j: int, t: float, derivative: bool = False) -> float:
        return overlap(self.family[i], self.family[j], t, derivative)

    def rho(self, p: int) -> RhoCoefficients:
        return solve_rho(p)

    def mu(self, i: int, j: int, p: int, eta: float, zeta: float):
        return mu_kernels(self.family[i], self.family[j], p, eta, zeta)

    def mu_bar_matrix(self, p: int, eta: float, zeta: float) -> np.ndarray:
        d = len(self.family)
        out = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                out[i, j] = mu_kernels(self.family[i], self.family[j], p, eta, zeta)[3]
        return out

    def psi(self, p: float):
        return psi_matrices(self.family, p)
