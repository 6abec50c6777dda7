"""Spectral weights Phi(w)/2pi = |w|^rho exp(-Q(w)) and the built-in families.

Every family supplies Q and Q' as vectorised double-precision callables. The
analytic families also supply ``smooth_hp``, the factor exp(-Q) evaluated in
gmpy2 extended precision, which the Stieltjes procedure uses.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import gmpy2
import numpy as np
import mpmath
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaln

from .errors import (
    EvalAtZeroSingularity,
    NoClosedForm,
    NonIntegrable,
    ValidationError,
    WeightUnavailable,
)
from .sequence import LanczosSequence

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WeightSpec:
    """A spectral weight |w|^rho exp(-Q(w)), optionally on a compact support.

    With ``support`` set, the weight is |w|^rho (1 - |w|/support)^edge_exponent
    exp(-Q(w)) for |w| < support and zero outside.
    """

    rho: float
    potential: ArrayFn
    potential_deriv: ArrayFn
    family: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    potential_second: ArrayFn | None = None
    smooth_hp: Callable[[Any], Any] | None = None
    support: float | None = None
    edge_exponent: float = 0.0
    # Large-w growth Q ~ |w|^p log^q |w|; documentation only.
    growth: tuple[float, float] | None = None
    # Exponent of the leading non-analytic term of Q at the origin (e.g. |w|^p), if any.
    kink_exponent: float | None = None

    def __post_init__(self) -> None:
        if not self.rho > -1:
            raise NonIntegrable(f"rho = {self.rho} is not > -1")
        if self.support is not None and not self.edge_exponent > -1:
            raise NonIntegrable("edge exponent must be > -1")

    @property
    def tag(self) -> str:
        if not self.params:
            return self.family
        inner = ",".join(
            f"{k}={v}" for k, v in self.params.items() if isinstance(v, (int, float, str))
        )
        return f"{self.family}{{{inner}}}"

    def __call__(self, omega):
        return eval_weight(self, omega)

    def validate(self, sample: np.ndarray | None = None, rtol: float = 1e-6) -> None:
        """Check evenness of Q and agreement of Q' with a central difference."""
        if sample is None:
            top = 10.0 if self.support is None else 0.9 * self.support
            sample = np.linspace(0.1, top, 37)
        q_plus = self.potential(sample)
        q_minus = self.potential(-sample)
        if not np.allclose(q_plus, q_minus, rtol=1e-12, atol=1e-12):
            raise ValidationError(f"{self.tag}: potential is not even")
        h = 1e-5 * np.maximum(1.0, np.abs(sample))
        fd = (self.potential(sample + h) - self.potential(sample - h)) / (2 * h)
        dq = self.potential_deriv(sample)
        scale = np.maximum(np.abs(dq), 1e-8)
        if np.max(np.abs(fd - dq) / scale) > rtol:
            raise ValidationError(f"{self.tag}: potential_deriv disagrees with finite difference")


def eval_weight(spec: WeightSpec, omega):
    """|w|^rho exp(-Q(w)); scalar in, scalar out."""
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValidationError("omega must be finite")
    a = np.abs(w)
    if spec.rho < 0 and np.any(a == 0):
        raise EvalAtZeroSingularity("weight with rho < 0 is singular at omega = 0")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.exp(-spec.potential(a))
        if spec.rho != 0:
            out = out * a**spec.rho
        if spec.support is not None:
            inside = a < spec.support
            edge = np.where(inside, 1.0 - a / spec.support, 1.0)
            out = np.where(inside, out * edge**spec.edge_exponent, 0.0)
    out = np.nan_to_num(out, nan=0.0, posinf=np.inf)
    return float(out) if np.ndim(omega) == 0 else out


def log_weight(spec: WeightSpec, omega: np.ndarray) -> np.ndarray:
    """log of the weight, for the long-range tails where it underflows."""
    a = np.abs(np.asarray(omega, dtype=float))
    with np.errstate(divide="ignore"):
        out = -spec.potential(a)
        if spec.rho != 0:
            out = out + spec.rho * np.log(a)
        if spec.support is not None:
            edge = np.clip(1.0 - a / spec.support, 0.0, None)
            out = np.where(a < spec.support, out + spec.edge_exponent * np.log(edge), -np.inf)
    return out


# ---------------------------------------------------------------------------
# families


def gen_hermite(rho: float = 0.0) -> WeightSpec:
    """w = |w|^rho exp(-w^2)."""
    return WeightSpec(
        rho=float(rho),
        potential=lambda w: np.asarray(w, dtype=float) ** 2,
        potential_deriv=lambda w: 2.0 * np.asarray(w, dtype=float),
        potential_second=lambda w: np.full_like(np.asarray(w, dtype=float), 2.0),
        smooth_hp=lambda x: gmpy2.exp(-x * x),
        family="gen-hermite",
        params={"rho": float(rho)},
        growth=(2.0, 0.0),
    )


def gaussian_rho(rho: float = 0.0, omega0: float = 1.0) -> WeightSpec:
    """Unit-mass model (1/w0)/Gamma((1+rho)/2) |w/w0|^rho exp(-(w/w0)^2)."""
    rho = float(rho)
    w0 = float(omega0)
    if w0 <= 0:
        raise ValidationError("omega0 must be positive")
    log_c = (1.0 + rho) * math.log(w0) + float(gammaln(0.5 * (1.0 + rho)))

    def smooth_hp(x):
        r = gmpy2.mpfr(rho)
        c = gmpy2.mpfr(w0) ** (1 + r) * gmpy2.gamma((1 + r) / 2)
        t = x / gmpy2.mpfr(w0)
        return gmpy2.exp(-t * t) / c

    return WeightSpec(
        rho=rho,
        potential=lambda w: (np.asarray(w, dtype=float) / w0) ** 2 + log_c,
        potential_deriv=lambda w: 2.0 * np.asarray(w, dtype=float) / w0**2,
        potential_second=lambda w: np.full_like(np.asarray(w, dtype=float), 2.0 / w0**2),
        smooth_hp=smooth_hp,
        family="gaussian-rho",
        params={"rho": rho, "omega0": w0},
        growth=(2.0, 0.0),
    )


def _logcosh(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def sech(rho: float = 0.0) -> WeightSpec:
    """w = |w|^rho sech(pi w)."""
    return WeightSpec(
        rho=float(rho),
        potential=lambda w: _logcosh(np.pi * np.asarray(w, dtype=float)),
        potential_deriv=lambda w: np.pi * np.tanh(np.pi * np.asarray(w, dtype=float)),
        potential_second=lambda w: np.pi**2 / np.cosh(np.pi * np.asarray(w, dtype=float)) ** 2,
        smooth_hp=lambda x: gmpy2.sech(gmpy2.const_pi() * x),
        family="sech",
        params={"rho": float(rho)},
        growth=(1.0, 0.0),
    )


def quartic_root(rho: float = 0.0, p_inv: float = 2.0) -> WeightSpec:
    """Q = (1 + w^2 + w^4)^(1/p_inv)."""
    k = 1.0 / float(p_inv)

    def q(w):
        w = np.asarray(w, dtype=float)
        return (1.0 + w**2 + w**4) ** k

    def dq(w):
        w = np.asarray(w, dtype=float)
        u = 1.0 + w**2 + w**4
        return k * u ** (k - 1.0) * (2.0 * w + 4.0 * w**3)

    def smooth_hp(x):
        u = 1 + x * x + x**4
        return gmpy2.exp(-(u ** (1 / gmpy2.mpfr(p_inv))))

    return WeightSpec(
        rho=float(rho),
        potential=q,
        potential_deriv=dq,
        smooth_hp=smooth_hp,
        family="quartic-root",
        params={"rho": float(rho), "p_inv": float(p_inv)},
        growth=(4.0 / float(p_inv), 0.0),
    )


def freud_kappa(p: float) -> float:
    """kappa_p = Gamma(1/2)Gamma(p/2)/Gamma((p+1)/2), which makes beta_n = n^(1/p)."""
    return math.exp(gammaln(0.5) + gammaln(0.5 * p) - gammaln(0.5 * (p + 1.0)))


def freud(p: float) -> WeightSpec:
    """Q = kappa_p |w|^p."""
    p = float(p)
    if p < 1:
        raise ValidationError("Freud weights with p < 1 are outside the supported class")
    kappa = freud_kappa(p)

    def smooth_hp(x):
        pm = gmpy2.mpfr(p)
        kap = gmpy2.gamma(gmpy2.mpfr(0.5)) * gmpy2.gamma(pm / 2) / gmpy2.gamma((pm + 1) / 2)
        return gmpy2.exp(-kap * abs(x) ** pm)

    return WeightSpec(
        rho=0.0,
        potential=lambda w: kappa * np.abs(np.asarray(w, dtype=float)) ** p,
        potential_deriv=lambda w: kappa * p * np.sign(w) * np.abs(np.asarray(w, dtype=float)) ** (p - 1.0),
        potential_second=lambda w: kappa * p * (p - 1.0) * np.abs(np.asarray(w, dtype=float)) ** (p - 2.0),
        smooth_hp=smooth_hp,
        family="freud",
        params={"p": p},
        growth=(p, 0.0),
        kink_exponent=None if p % 2 == 0 else p,
    )


def confining(p: float, rho: float = 0.0) -> WeightSpec:
    """Q = (1 + w^2)^(p/2): smooth at the origin, |w|^p at large |w|."""
    p = float(p)

    def q(w):
        return (1.0 + np.asarray(w, dtype=float) ** 2) ** (0.5 * p)

    def dq(w):
        w = np.asarray(w, dtype=float)
        return p * w * (1.0 + w**2) ** (0.5 * p - 1.0)

    def d2q(w):
        w = np.asarray(w, dtype=float)
        u = 1.0 + w**2
        return p * u ** (0.5 * p - 1.0) + p * (p - 2.0) * w**2 * u ** (0.5 * p - 2.0)

    def smooth_hp(x):
        return gmpy2.exp(-((1 + x * x) ** (gmpy2.mpfr(p) / 2)))

    return WeightSpec(
        rho=float(rho),
        potential=q,
        potential_deriv=dq,
        potential_second=d2q,
        smooth_hp=smooth_hp,
        family="confining",
        params={"p": p, "rho": float(rho)},
        growth=(p, 0.0),
    )


def uniform(half_width: float = 1.0) -> WeightSpec:
    """Constant weight 1 on [-a, a]."""
    a = float(half_width)
    zero = lambda w: np.zeros_like(np.asarray(w, dtype=float))  # noqa: E731
    return WeightSpec(
        rho=0.0,
        potential=zero,
        potential_deriv=zero,
        smooth_hp=lambda x: gmpy2.mpfr(1),
        support=a,
        family="uniform",
        params={"half_width": a},
    )


def semicircle(radius: float = 1.0) -> WeightSpec:
    """Unit-mass semicircle (2/(pi r^2)) sqrt(r^2 - w^2).

    Written as (1 - |w|/r)^(1/2) exp(-Q) with exp(-Q) = (2/(pi r)) sqrt(1 + |w|/r),
    which is smooth on each half line.
    """
    r = float(radius)

    def q(w):
        a = np.abs(np.asarray(w, dtype=float))
        return -np.log(2.0 / (np.pi * r)) - 0.5 * np.log1p(a / r)

    def dq(w):
        w = np.asarray(w, dtype=float)
        return -0.5 * np.sign(w) / (r + np.abs(w))

    def smooth_hp(x):
        rr = gmpy2.mpfr(r)
        return 2 / (gmpy2.const_pi() * rr) * gmpy2.sqrt(1 + x / rr)

    return WeightSpec(
        rho=0.0,
        potential=q,
        potential_deriv=dq,
        smooth_hp=smooth_hp,
        support=r,
        edge_exponent=0.5,
        family="semicircle",
        params={"radius": r},
    )


# ---------------------------------------------------------------------------
# tabulated weights


@dataclass(frozen=True)
class TabulatedWeight:
    """Monotone-cubic interpolant of a tabulated even weight on w >= 0."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != v.shape or len(w) < 2:
            raise ValidationError("tabulated weight needs matching 1-d grids of length >= 2")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError("tabulated weight values must be finite and non-negative")
        if w[0] < 0:
            # fold a symmetric table onto w >= 0
            keep = w >= 0
            w, v = w[keep], v[keep]
        if np.any(np.diff(w) <= 0):
            raise ValidationError("tabulated grid must be strictly increasing")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_interp", PchipInterpolator(w, v, extrapolate=False))

    @property
    def omega_max(self) -> float:
        return float(self.omega[-1])

    def __call__(self, omega, strict: bool = False):
        a = np.abs(np.asarray(omega, dtype=float))
        outside = (a > self.omega[-1]) | (a < self.omega[0])
        if np.any(outside):
            if strict:
                raise WeightUnavailable(
                    f"weight requested at |w| = {float(np.max(a)):.6g} beyond the table"
                )
            warnings.warn("tabulated weight evaluated outside its grid; returning 0", stacklevel=2)
        out = np.where(outside, 0.0, self._interp(np.clip(a, self.omega[0], self.omega[-1])))
        out = np.clip(out, 0.0, None)
        return float(out) if np.ndim(omega) == 0 else out


def tabulated(omega: np.ndarray, phi_over_2pi: np.ndarray) -> WeightSpec:
    table = TabulatedWeight(np.asarray(omega, float), np.asarray(phi_over_2pi, float))

    def q(w):
        with np.errstate(divide="ignore"):
            return -np.log(table(w))

    def dq(w):
        w = np.asarray(w, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(w))
        return (q(w + h) - q(w - h)) / (2 * h)

    return WeightSpec(
        rho=0.0,
        potential=q,
        potential_deriv=dq,
        family="tabulated",
        params={"points": len(table.omega), "omega_max": table.omega_max, "table": table},
        support=table.omega_max,
    )


def read_tabulated(path: str | Path) -> WeightSpec:
    """CSV with header ``omega,phi_over_2pi``; lines starting with ``#`` are skipped."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        omega = np.array([float(r["omega"]) for r in rows])
        vals = np.array([float(r["phi_over_2pi"]) for r in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise ValidationError(f"cannot read tabulated weight {path}: {exc}") from exc
    return tabulated(omega, vals)


def table_of(spec: WeightSpec) -> TabulatedWeight | None:
    return spec.params.get("table") if spec.family == "tabulated" else None


# ---------------------------------------------------------------------------
# closed forms


def reference_coefficients(spec: WeightSpec, n_max: int) -> LanczosSequence:
    """Closed-form b_1..b_{n_max} for the generalised Hermite and Gaussian-rho models."""
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    n = np.arange(1, n_max + 1, dtype=float)
    odd = n % 2 == 1
    if spec.family == "gen-hermite":
        rho = spec.rho
        b = np.sqrt(0.5 * (n + 0.5 * (1 - (-1.0) ** n) * rho))
        norm2 = math.exp(gammaln(0.5 * (1 + rho)))
    elif spec.family == "gaussian-rho":
        rho, w0 = spec.rho, spec.params["omega0"]
        b = np.where(odd, w0 * np.sqrt((n + rho) / 2.0), w0 * np.sqrt(n / 2.0))
        norm2 = 1.0
    else:
        raise NoClosedForm(f"no closed-form coefficients for family {spec.family}")
    return LanczosSequence(b, norm2, {"source": "closed-form", "weight": spec.tag, "n": n_max})


def reference_green(spec: WeightSpec, z: complex, side: int | None = None, eps: float = 1e-14) -> complex:
    """Resolvent G(z) = int w(x)/(z - x) dx of the unit-mass Gaussian-rho model.

    Closed form -(z/w0^2) exp(-(z/w0)^2) E_{(1+rho)/2}(-(z/w0)^2), which is i
    times the often-quoted (iz/w0^2) exp(..) E(..); only this normalisation
    satisfies Phi = 2 Im G(w - i0) and z G -> 1. For real ``z`` pass
    ``side=-1`` (or +1) to evaluate at z -/+ i eps.
    """
    if spec.family != "gaussian-rho":
        raise NoClosedForm("closed-form Green's function exists only for gaussian-rho")
    zc = complex(z)
    if zc.imag == 0:
        if side not in (-1, 1):
            raise ValidationError("real z requires side = -1 or +1")
        zc = complex(zc.real, side * eps)
    rho, w0 = spec.rho, spec.params["omega0"]
    t = mpmath.mpc(zc) / w0
    val = (-mpmath.mpc(zc) / w0**2) * mpmath.exp(-t * t) * mpmath.expint(0.5 * (1 + rho), -t * t)
    return complex(val)


# ---------------------------------------------------------------------------
# tag parsing

FAMILY_TAGS = ("gen-hermite", "gaussian-rho", "sech", "quartic-root", "freud", "confining")


def from_tag(tag: str, rho: float = 0.0, **params: float) -> WeightSpec:
    """Build a weight from a CLI/config tag such as ``sech`` or ``tabulated:<path>``."""
    if tag.startswith("tabulated:"):
        return read_tabulated(tag.split(":", 1)[1])
    if tag == "gen-hermite":
        return gen_hermite(rho)
    if tag == "gaussian-rho":
        return gaussian_rho(rho, params.get("omega0", 1.0))
    if tag == "sech":
        return sech(rho)
    if tag == "quartic-root":
        return quartic_root(rho, params.get("p_inv", 2.0))
    if tag == "freud":
        return freud(params.get("p", 2.0))
    if tag == "confining":
        return confining(params.get("p", 2.0), rho)
    raise ValidationError(f"unknown weight family {tag!r}; expected one of {FAMILY_TAGS} or tabulated:<path>")
