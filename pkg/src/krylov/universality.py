"""Weighted Christoffel-Darboux kernel, spectral unfolding and the sine,
Bessel and Airy reference kernels.

The weighted kernel is Khat_n(x, y) = sqrt(w(x) w(y)) K_n(x, y) with w the
orthogonality weight Phi/2pi. Unfolding maps frequencies to
F(x) = I_n(x) - I_n(w0) (bulk and Bessel) or F(x) = f_n(x/beta_n) (edge), and
the unfolded kernel is

    ((F^-1(u) - F^-1(v)) / (u - v)) Khat_n(F^-1(u), F^-1(v)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .bootstrap import SpectralEstimate
from .coulomb_gas import EquilibriumMeasure
from .errors import InversionOutOfRange, ValidationError, WeightUnavailable
from .ortho_poly import cd_kernel
from .sequence import LanczosSequence
from .weights import TabulatedWeight, WeightSpec, eval_weight, table_of

INVERSE_TOL = 1e-10
COINCIDENT = 1e-12

WeightLike = Union[WeightSpec, TabulatedWeight, SpectralEstimate]


def weight_function(weight: WeightLike) -> Callable[[np.ndarray], np.ndarray]:
    """w(omega) = Phi/2pi as a vectorised even function."""
    if isinstance(weight, SpectralEstimate):
        omega = weight.omega
        order = np.argsort(omega)
        vals = weight.values[order]
        table = TabulatedWeight(omega[order], np.clip(vals, 0.0, None))
        rho = weight.rho if weight.is_envelope else 0.0
        scale = 1.0 if weight.is_envelope else 1.0 / (2 * math.pi)

        def w_est(x):
            a = np.abs(np.asarray(x, dtype=float))
            out = scale * table(a, strict=True)
            return out * a**rho if rho else out

        return w_est
    if isinstance(weight, TabulatedWeight):
        return lambda x: weight(x, strict=True)
    table = table_of(weight)
    if table is not None:
        return lambda x: table(x, strict=True)

    def w_spec(x):
        xa = np.asarray(x, dtype=float)
        if weight.support is not None and np.any(np.abs(xa) > weight.support):
            raise WeightUnavailable("weight requested outside its support")
        return eval_weight(weight, xa)

    return w_spec


def weighted_kernel(coeffs: LanczosSequence, weight: WeightLike, x, y, n: int):
    """Khat_n(x, y) = sqrt(w(x) w(y)) K_n(x, y)."""
    wf = weight_function(weight)
    xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.sqrt(wf(xa) * wf(ya)) * cd_kernel(coeffs, xa, ya, n)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# unfolding


@dataclass(frozen=True)
class UnfoldingMap:
    """Tabulated increasing map F(omega) with F(anchor) = 0 and its slope dF/domega."""

    anchor: float
    omega: np.ndarray
    values: np.ndarray
    rate: np.ndarray
    mode: str = "bulk"

    def __post_init__(self) -> None:
        if np.any(np.diff(self.omega) <= 0):
            raise ValidationError("unfolding grid must be strictly increasing")
        if np.any(np.diff(self.values) <= 0):
            raise ValidationError("unfolding map is not strictly increasing")
        object.__setattr__(self, "_f", PchipInterpolator(self.omega, self.values, extrapolate=False))
        object.__setattr__(self, "_rate", PchipInterpolator(self.omega, self.rate, extrapolate=False))

    @classmethod
    def from_cumulative(cls, omega, cumulative, sigma, anchor: float) -> "UnfoldingMap":
        """Bulk/Bessel map from I_n and sigma_n on w >= 0, extended by oddness of I_n."""
        w = np.asarray(omega, dtype=float)
        order = np.argsort(w)
        w, cum, sig = w[order], np.asarray(cumulative)[order], np.asarray(sigma)[order]
        if w[0] != 0.0:
            raise ValidationError("the cumulative table must start at omega = 0")
        full_w = np.concatenate([-w[:0:-1], w])
        full_i = np.concatenate([-cum[:0:-1], cum])
        full_s = np.concatenate([sig[:0:-1], sig])
        if not full_w[0] <= anchor <= full_w[-1]:
            raise InversionOutOfRange("anchor lies outside the tabulated range")
        # same interpolant as the map itself, so F(anchor) = 0 to roundoff
        base = float(PchipInterpolator(full_w, full_i)(anchor))
        return cls(float(anchor), full_w, full_i - base, full_s, "bulk")

    @classmethod
    def from_measure(cls, measure: EquilibriumMeasure | SpectralEstimate, anchor: float) -> "UnfoldingMap":
        if isinstance(measure, SpectralEstimate) and measure.solver == "airy":
            return cls.edge(measure)
        om = measure.grid if isinstance(measure, EquilibriumMeasure) else measure.omega
        return cls.from_cumulative(om, measure.cumulative, measure.sigma, anchor)

    @classmethod
    def edge(cls, measure: EquilibriumMeasure | SpectralEstimate, n: float | None = None,
             beta: float | None = None) -> "UnfoldingMap":
        """Edge map F(omega) = f_n(omega/beta_n), anchored at beta_n."""
        if isinstance(measure, SpectralEstimate) and measure.f is not None:
            order = np.argsort(measure.omega)
            w, f = measure.omega[order], measure.f[order]
            b = measure.beta
            rate = measure.sigma[order] * math.pi * b / np.sqrt(np.maximum(-f, 1e-300)) / b
            rate[-1] = rate[-2] if len(rate) > 1 else rate[-1]
            if measure.meta.get("hn1"):
                rate[-1] = (measure.n * measure.meta["hn1"] / math.sqrt(2.0)) ** (2.0 / 3.0) / b
            return cls(b, w, f, rate, "edge")
        if not isinstance(measure, EquilibriumMeasure):
            raise ValidationError("edge unfolding needs an Airy estimate or an equilibrium measure")
        nn = measure.n if n is None else float(n)
        b = measure.beta_n if beta is None else float(beta)
        w = measure.grid
        # I_n(beta_n) = n/2 exactly; measuring from the table's own total keeps F(beta_n) = 0
        rest = np.clip(measure.cumulative[-1] - measure.cumulative, 0.0, None)
        f = -(1.5 * math.pi * rest) ** (2.0 / 3.0)
        # df/domega = pi sigma / sqrt(-f); finite at the edge where both vanish
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = math.pi * measure.sigma / np.sqrt(-f)
        if measure.h is not None:
            top = (nn * measure.h[-1] / math.sqrt(2.0)) ** (2.0 / 3.0) / b
            rate = np.where(np.isfinite(rate), rate, top)
        elif not np.all(np.isfinite(rate)):
            # without h_n the edge slope is taken from the nearest finite value
            good = np.flatnonzero(np.isfinite(rate))
            rate = rate[good[np.clip(np.searchsorted(good, np.arange(len(rate))), 0, len(good) - 1)]]
        keep = np.concatenate([[True], np.diff(f) > 0])
        return cls(b, w[keep], f[keep], rate[keep], "edge")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])

    def __call__(self, x):
        return self._f(np.asarray(x, dtype=float))

    def slope(self, x):
        return self._rate(np.asarray(x, dtype=float))

    def inverse(self, u):
        """F^-1 by vectorised bisection on the interpolant to INVERSE_TOL in omega."""
        ua = np.atleast_1d(np.asarray(u, dtype=float))
        lo_u, hi_u = self.domain
        if np.any(ua < lo_u - 1e-12) or np.any(ua > hi_u + 1e-12):
            raise InversionOutOfRange(f"u outside the unfolded range [{lo_u:.6g}, {hi_u:.6g}]")
        ua = np.clip(ua, lo_u, hi_u)
        idx = np.clip(np.searchsorted(self.values, ua), 1, len(self.values) - 1)
        lo = self.omega[idx - 1].copy()
        hi = self.omega[idx].copy()
        while np.max(hi - lo) > INVERSE_TOL:
            mid = 0.5 * (lo + hi)
            below = self._f(mid) < ua
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if np.ndim(u) == 0 else out


def unfolded_kernel_ratio(coeffs: LanczosSequence, weight: WeightLike, measure, omega0: float, u, v, n: int):
    """LHS of the unfolded universality statement at (u, v).

    ``measure`` is an UnfoldingMap, or an EquilibriumMeasure / SpectralEstimate
    from which a bulk map anchored at ``omega0`` is built. At u = v the
    derivative limit Khat(x, x) / F'(x) is returned.
    """
    fmap = measure if isinstance(measure, UnfoldingMap) else UnfoldingMap.from_measure(measure, omega0)
    ua, va = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    x = np.atleast_1d(fmap.inverse(ua.ravel())).reshape(ua.shape)
    y = np.atleast_1d(fmap.inverse(va.ravel())).reshape(va.shape)
    kern = np.asarray(weighted_kernel(coeffs, weight, x, y, n))
    same = np.abs(ua - va) < COINCIDENT
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = np.where(same, 1.0 / fmap.slope(x), (x - y) / (ua - va))
    out = jac * kern
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# reference kernels


def sine_kernel(u, v):
    """S(u, v) = sin(pi(u-v)) / (pi(u-v)), S(u, u) = 1."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    out = np.sinc(d)
    return float(out) if np.ndim(out) == 0 else out


def bessel_kernel(rho: float, u, v):
    """Bessel kernel J_{rho/2}(u, v) with principal branches for negative arguments.

    pi sqrt(u) sqrt(v) [J_+(pi u) J_-(pi v) - J_-(pi u) J_+(pi v)] / (2 (u - v)),
    J_+- = J_{(rho +- 1)/2}; complex in general when u or v is negative.
    """
    ua, va = np.broadcast_arrays(np.asarray(u, dtype=complex), np.asarray(v, dtype=complex))
    ap, am = 0.5 * (rho + 1.0), 0.5 * (rho - 1.0)
    pu, pv = math.pi * ua, math.pi * va
    pref = math.pi * np.sqrt(ua) * np.sqrt(va)
    same = np.abs(ua - va) < COINCIDENT
    with np.errstate(divide="ignore", invalid="ignore"):
        off = pref * (special.jv(ap, pu) * special.jv(am, pv) - special.jv(am, pu) * special.jv(ap, pv)) / (2 * (ua - va))
    diag = pref * math.pi * (special.jvp(ap, pu) * special.jv(am, pu) - special.jvp(am, pu) * special.jv(ap, pu)) / 2
    out = np.where(same, diag, off)
    return complex(out) if out.ndim == 0 else out


def bessel_reference(rho: float, u, v):
    """Re[e^{-i rho (arg u + arg v)/2} J_{rho/2}(u, v)], the comparison convention used here."""
    ua, va = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    phase = np.exp(-0.5j * rho * (np.angle(ua.astype(complex)) + np.angle(va.astype(complex))))
    out = np.real(phase * bessel_kernel(rho, ua, va))
    return float(out) if out.ndim == 0 else out


def airy_kernel(u, v):
    """A(u, v) = (Ai(u)Ai'(v) - Ai(v)Ai'(u)) / (u - v); A(u, u) = Ai'(u)^2 - u Ai(u)^2."""
    ua, va = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    aiu, aipu, _, _ = special.airy(ua)
    aiv, aipv, _, _ = special.airy(va)
    same = np.abs(ua - va) < COINCIDENT
    with np.errstate(divide="ignore", invalid="ignore"):
        off = (aiu * aipv - aiv * aipu) / (ua - va)
    out = np.where(same, aipu**2 - ua * aiu**2, off)
    return float(out) if out.ndim == 0 else out
