"""Equilibrium measures of the Coulomb gas with external field Q.

For charge n the equilibrium density lives on [-beta_n, beta_n] with

    sigma_n(w) = (n / beta_n) (1/2pi) h_n(w/beta_n) sqrt(1 - (w/beta_n)^2),

where beta_n (the Mhaskar-Rakhmanov-Saff number) solves

    (1/2pi) int_{-1}^{1} beta s Q'(beta s) / sqrt(1 - s^2) ds = n,

and h_n(x) = (1/pi) int (V'(s) - V'(x)) / (s - x) ds / sqrt(1 - s^2) with
V'(s) = beta_n Q'(beta_n s) / n. All integrals use s = sin(theta) and a
Gauss-Legendre rule on panels graded geometrically towards s = 0, where
potentials may be steep (sech) or non-analytic (|w|^p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.special import roots_legendre

from .errors import NoBracket, QuadratureNonConvergent, ValidationError
from .weights import WeightSpec

ROOT_RTOL = 1e-12
COINCIDENCE = 1e-4
FD_STEP = 1e-4
GRADING_LEVELS = 40
BETA_CAP = 1e12


@lru_cache(maxsize=8)
def _theta_rule(order: int, levels: int = GRADING_LEVELS) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for int_0^{pi/2} d theta, graded towards theta = 0."""
    t, w = roots_legendre(order)
    edges = np.concatenate([[0.0], (math.pi / 2) * 2.0 ** -np.arange(levels, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (1 + t))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _levels(spec: WeightSpec) -> int:
    k = spec.kink_exponent
    if k is None or k >= 2:
        return GRADING_LEVELS
    # int_0^eps |s|^(k-2) ds ~ eps^(k-1) must fall below 1e-11.
    return int(min(400, max(GRADING_LEVELS, math.ceil(11 * math.log2(10) / max(k - 1, 0.03)))))


def _sym_rule(order: int, levels: int = GRADING_LEVELS) -> tuple[np.ndarray, np.ndarray]:
    th, w = _theta_rule(order, levels)
    return np.concatenate([-th[::-1], th]), np.concatenate([w[::-1], w])


def _charge(spec: WeightSpec, beta: float, order: int = 16) -> float:
    th, w = _theta_rule(order)
    s = np.sin(th)
    # even integrand: (1/2pi) * 2 * int_0^{pi/2}
    return float(np.sum(w * beta * s * spec.potential_deriv(beta * s)) / math.pi)


def mrs_number(spec: WeightSpec, n: float) -> float:
    """beta_n: root of the charge equation, bracketed then refined by Brent's method."""
    if not n > 0:
        raise ValidationError("n must be positive")
    if spec.support is not None:
        raise ValidationError("compactly supported weights have no MRS number")
    p = spec.growth[0] if spec.growth else 1.0
    lo = 1.0
    while _charge(spec, lo) > n:
        lo *= 0.5
        if lo < 1e-12:
            raise NoBracket("charge stays above n as beta -> 0")
    hi = max(2.0 * n ** (1.0 / p), 2.0 * lo)
    while _charge(spec, hi) < n:
        hi *= 2.0
        if hi > BETA_CAP:
            raise NoBracket(f"charge never reaches n = {n} for beta up to {BETA_CAP:g}")
    return float(optimize.brentq(lambda b: _charge(spec, b) - n, lo, hi, rtol=ROOT_RTOL, xtol=1e-300))


def _second_deriv(spec: WeightSpec, w: np.ndarray) -> np.ndarray:
    if spec.potential_second is not None:
        return spec.potential_second(w)
    h = FD_STEP * np.maximum(1.0, np.abs(w))
    d = spec.potential_deriv
    return (-d(w + 2 * h) + 8 * d(w + h) - 8 * d(w - h) + d(w - 2 * h)) / (12 * h)


def _h_quadrature(spec: WeightSpec, n: float, beta: float, x: np.ndarray, order: int) -> np.ndarray:
    th, w = _sym_rule(order, _levels(spec))
    s = np.sin(th)[:, None]
    xx = x[None, :]
    vs = beta * spec.potential_deriv(beta * s) / n
    vx = beta * spec.potential_deriv(beta * xx) / n
    diff = s - xx
    # The cutoff shrinks with beta: a steep potential varies on the scale 1/beta in s.
    near = np.abs(diff) < COINCIDENCE * (1.0 + np.abs(xx)) / max(1.0, beta)
    if spec.kink_exponent is not None:
        # The Taylor branch is invalid across the kink at s = 0.
        near &= np.abs(xx) > 2 * COINCIDENCE
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = (vs - vx) / diff
    if near.any():
        # V'' at the midpoint equals V''(x) + V'''(x)(s-x)/2 to O(delta^2).
        mid = 0.5 * (s + xx)
        vpp = beta**2 * _second_deriv(spec, beta * np.broadcast_to(mid, near.shape)[near]) / n
        quot[near] = vpp
    return np.sum(w[:, None] * quot, axis=0) / math.pi


def h_function(spec: WeightSpec, n: float, x, beta: float | None = None, check: bool = True):
    """h_n(x) for x in [-1, 1] (vectorised)."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(xa) > 1):
        raise ValidationError("h_n is defined for |x| <= 1")
    b = mrs_number(spec, n) if beta is None else float(beta)
    val = _h_quadrature(spec, n, b, xa, 16)
    if check:
        alt = _h_quadrature(spec, n, b, xa, 11)
        err = np.max(np.abs(alt - val) / np.maximum(np.abs(val), 1e-300))
        if err > 1e-7:
            raise QuadratureNonConvergent(f"h_n quadrature unresolved (rel change {err:.2e})")
    return float(val[0]) if np.ndim(x) == 0 else val


@dataclass(frozen=True)
class EquilibriumMeasure:
    """sigma_n and I_n(w) = int_0^w sigma_n on a grid in [0, beta_n]."""

    n: float
    beta_n: float
    grid: np.ndarray
    sigma: np.ndarray
    cumulative: np.ndarray
    h: np.ndarray | None = None

    def rescaled(self) -> tuple[np.ndarray, np.ndarray]:
        """x = w/beta_n and psi_n(x) = (beta_n/n) sigma_n(beta_n x)."""
        return self.grid / self.beta_n, self.beta_n / self.n * self.sigma


def cumulative_trapezoid(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    return integrate.cumulative_trapezoid(y, x, initial=0.0)


def equilibrium_density(spec: WeightSpec, n: float, grid=None, points: int = 2001,
                        beta: float | None = None) -> EquilibriumMeasure:
    """sigma_n on ``grid`` (default: ``points`` uniform nodes on [0, beta_n])."""
    b = mrs_number(spec, n) if beta is None else float(beta)
    w = np.linspace(0.0, b, points) if grid is None else np.asarray(grid, dtype=float)
    if np.any(w < 0) or np.any(w > b * (1 + 1e-12)):
        raise ValidationError("grid must lie in [0, beta_n]")
    x = np.clip(w / b, 0.0, 1.0)
    h = h_function(spec, n, x, beta=b)
    sigma = (n / b) / (2 * math.pi) * h * np.sqrt(1.0 - x * x)
    return EquilibriumMeasure(float(n), b, w, sigma, cumulative_trapezoid(sigma, w), h)


def ullman(p: float, x):
    """Ullman density psi^(p)(x) on [-1, 1]; +inf at x = 0 for p = 1."""
    if not p > 0:
        raise ValidationError("p must be positive")
    xa = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    out = np.zeros_like(xa)
    inside = xa < 1
    xi = xa[inside]
    if math.isinf(p):
        out[inside] = 1.0 / (math.pi * np.sqrt(1 - xi * xi))
    elif p == 1:
        with np.errstate(divide="ignore"):
            out[inside] = np.arctanh(np.sqrt(1 - xi * xi)) / math.pi
    elif p == 2:
        out[inside] = 2.0 / math.pi * np.sqrt(1 - xi * xi)
    else:
        vals = []
        for xv in xi:
            top = math.sqrt(1 - xv * xv)
            if xv == 0 and p < 1:
                vals.append(math.inf)
                continue
            f = lambda v, xv=xv: p * (xv * xv + v * v) ** ((p - 2) / 2)
            r, _ = integrate.quad(f, 0.0, top, limit=200, epsabs=1e-14, epsrel=1e-12)
            vals.append(r / math.pi)
        out[inside] = vals
    return float(out[0]) if np.ndim(x) == 0 else out
