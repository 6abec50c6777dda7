"""Low-frequency transport from Lanczos coefficients.

The finite-n estimate of lim_{w->0} Phi(w)/|w|^rho at coefficient count 2m is

    c_rho K_{2m}(0,0)^rho / (beta_{2m} p_{2m}(0)^2)^{1+rho},
    c_rho = 4 pi (1+rho)^rho / Gamma((1+rho)/2)^2,

with beta_{2m} = 2 b_{2m}, K_{2m}(0,0) = sum_{k<m} p_{2k}(0)^2 and the zero-mode
amplitudes p_{2k}(0) = (-1)^k prod b_{2j-1}/b_{2j} / ||A||. Diffusion constants
follow from D = Phi(0) / (2 chi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import FitUnstable, InsufficientPoints, ValidationError
from .ortho_poly import zero_mode_series
from .sequence import LanczosSequence, fmt_float

RHO_SUPERDIFFUSIVE = -1.0 / 3.0
GHD_GAMMA = (2.0 / 3.0) * (10.0 * math.pi / 27.0) ** (4.0 / 3.0)
SERIES_TOL = 1e-14
FIT_STDERR_MAX = 0.5
RHO0_SLOPE_MAX = 0.5


def c_rho(rho: float) -> float:
    a = 0.5 * (1.0 + rho)
    return 4.0 * math.pi * (1.0 + rho) ** rho / math.gamma(a) ** 2


def susceptibility(model: str, **params: float) -> float:
    """Infinite-temperature static susceptibility per site for the built-in models."""
    if model == "mfim":
        return 1.0 + params.get("gx", 1.4) ** 2 + params.get("gz", 0.9045) ** 2
    if model in ("xxz", "heisenberg"):
        return 0.25
    raise ValidationError(f"no built-in susceptibility for model {model!r}")


def _log_envelope(coeffs: LanczosSequence, n_even: int, rho: float) -> float:
    if n_even % 2 or n_even < 2:
        raise ValidationError("envelope_at_zero needs an even coefficient count >= 2")
    if not rho > -1:
        raise ValidationError("rho must exceed -1")
    # p_{2k}(0)^2 ||A||^2 for k = 0..m, so K ||A||^2 is the sum of all but the last
    amp = zero_mode_series(coeffs, n_even) * coeffs.norm2
    kern = float(np.sum(amp[:-1]))
    beta = 2.0 * coeffs.b[n_even - 1]
    return (math.log(c_rho(rho)) + math.log(coeffs.norm2) + rho * math.log(kern)
            - (1.0 + rho) * (math.log(beta) + math.log(amp[-1])))


def envelope_at_zero(coeffs: LanczosSequence, n_even: int, rho: float) -> float:
    """Finite-n estimate of lim_{w->0} Phi(w)/|w|^rho from b_1..b_{n_even}."""
    return math.exp(_log_envelope(coeffs, n_even, rho))


def extrapolate(values: Iterable[tuple[float, float]], power: float = 1.0) -> tuple[float, float]:
    """OLS of y against n^-power; returns (intercept, intercept stderr).

    The stderr comes from the residuals directly; the correlation-based
    formula loses half the digits on near-exact data.
    """
    pts = [(float(n), float(y)) for n, y in values]
    if len(pts) < 3:
        raise InsufficientPoints(f"extrapolation needs at least 3 points, got {len(pts)}")
    n, y = np.array(pts).T
    X = np.column_stack([np.ones_like(n), n ** (-power)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    s2 = float(resid @ resid) / (len(y) - 2)
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[0]), math.sqrt(cov[0, 0])


@dataclass(frozen=True)
class TransportResult:
    quantity: str
    per_n: list[tuple[int, float]]
    power: float
    intercept: float
    stderr: float
    inputs: dict[str, Any] = field(default_factory=dict)
    extrapolations: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "quantity": self.quantity,
            "per_n": [[n, fmt_float(v)] for n, v in self.per_n],
            "power": fmt_float(self.power),
            "intercept": fmt_float(self.intercept),
            "stderr": fmt_float(self.stderr),
            "extrapolations": {k: [fmt_float(a), fmt_float(b)] for k, (a, b) in self.extrapolations.items()},
            "inputs": {k: (fmt_float(v) if isinstance(v, float) else v) for k, v in self.inputs.items()},
        }


def _even_ns(coeffs: LanczosSequence, n_min: int, n_max: int | None) -> list[int]:
    top = len(coeffs.b) if n_max is None else min(n_max, len(coeffs.b))
    ns = [n for n in range(max(2, n_min), top + 1) if n % 2 == 0]
    if not ns:
        raise InsufficientPoints("no even n in the requested range")
    return ns


def _result(quantity, per_n, powers, inputs) -> TransportResult:
    fits = {}
    for pw in powers:
        try:
            fits[format(pw, "g")] = extrapolate(per_n, pw)
        except InsufficientPoints:
            pass
    main = fits.get(format(powers[0], "g"), (math.nan, math.nan))
    return TransportResult(quantity, per_n, powers[0], main[0], main[1], inputs, fits)


def diffusion_constant(coeffs: LanczosSequence, chi: float, *, n_min: int = 2, n_max: int | None = None,
                       power: float = 1.0, rho0_check: bool = False) -> TransportResult:
    """Per-even-n D = Phi_n(0)/(2 chi) and its extrapolation in n^-power.

    ``rho0_check`` rejects sequences whose Phi_n(0) estimates drift as a power
    of n (log-log slope above RHO0_SLOPE_MAX over the upper half of the n range),
    which signals rho != 0.
    """
    if not chi > 0:
        raise ValidationError("chi must be positive")
    ns = _even_ns(coeffs, n_min, n_max)
    if rho0_check and len(ns) >= 4:
        upper = ns[len(ns) // 2:]
        phi0 = [envelope_at_zero(coeffs, n, 0.0) for n in upper]
        slope = stats.linregress(np.log(upper), np.log(phi0)).slope if len(upper) >= 2 else 0.0
        if abs(slope) > RHO0_SLOPE_MAX:
            raise ValidationError(f"Phi_n(0) drifts like n^{slope:.2f}; the seed does not look diffusive")
    per_n = [(n, envelope_at_zero(coeffs, n, 0.0) / (2.0 * chi)) for n in ns]
    return _result("D", per_n, (power,), {"rho": 0.0, "chi": float(chi), "norm2": coeffs.norm2})


def superdiffusion_gamma(coeffs: LanczosSequence, chi: float = 0.25, *, rho: float = RHO_SUPERDIFFUSIVE,
                         n_min: int = 2, n_max: int | None = None,
                         powers: Sequence[float] = (1.0, 1.5), stated_prefactor: bool = False) -> TransportResult:
    """gamma from lim Phi/|w|^{-1/3}, extrapolated in each power.

    ``stated_prefactor`` switches to the chi sqrt(3)/Gamma(1/3) form; see
    ``gamma_prefactor``.
    """
    if not math.isclose(rho, RHO_SUPERDIFFUSIVE, rel_tol=0, abs_tol=1e-15):
        raise ValidationError("superdiffusion_gamma is defined for rho = -1/3 only")
    pref = gamma_prefactor(chi, stated=stated_prefactor)
    per_n = [(n, pref * envelope_at_zero(coeffs, n, RHO_SUPERDIFFUSIVE)) for n in _even_ns(coeffs, n_min, n_max)]
    return _result("gamma", per_n, tuple(powers), {"rho": RHO_SUPERDIFFUSIVE, "chi": float(chi),
                                                    "norm2": coeffs.norm2, "prefactor": pref})


def gamma_prefactor(chi: float = 0.25, stated: bool = False) -> float:
    """Factor turning lim Phi/|w|^{-1/3} into gamma.

    C(t) ~ (gamma chi / 3) |t|^{-2/3} and int e^{-iwt} |t|^{-2/3} dt
    = sqrt(3) Gamma(1/3) |w|^{-1/3} give gamma = sqrt(3) / (chi Gamma(1/3)) * lim.
    ``stated=True`` returns the variant with chi in the numerator instead.
    """
    if not chi > 0:
        raise ValidationError("chi must be positive")
    if stated:
        return chi * math.sqrt(3.0) / math.gamma(1.0 / 3.0)
    return math.sqrt(3.0) / (chi * math.gamma(1.0 / 3.0))


def xxz_ghd_diffusion(delta: float, tol: float = SERIES_TOL, max_terms: int = 1_000_000) -> tuple[float, float]:
    """Generalized-hydrodynamics spin diffusion constant of the XXZ chain, Delta > 1.

    Returns (D, last term magnitude); summation stops once a term drops below ``tol``.
    """
    if not delta > 1:
        raise ValidationError("the GHD diffusion series needs Delta > 1")
    eta = math.acosh(delta)
    total = 0.0
    term = math.inf
    for s in range(1, max_terms + 1):
        term = (1 + s) * ((s + 2) / math.sinh(eta * s) - s / math.sinh(eta * (s + 2)))
        total += term
        if abs(term) < tol:
            break
    else:
        raise ValidationError("GHD series did not converge")
    return 2.0 * math.sinh(eta) / (9.0 * math.pi) * total, abs(term)


def zero_mode_regressors(m: np.ndarray, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """(offset, slope regressor) with log p_{2m}(0)^2 ~ c + offset + rho * regressor."""
    lm = np.log(m)
    # log log m only enters with q != 0 or p = 1; skip it so m = 1 stays finite
    llm = np.log(lm) if (q != 0 or p == 1) else np.zeros_like(lm)
    if math.isinf(p):
        return np.zeros_like(lm), lm
    if p == 1:
        return -lm + q * llm, (1.0 + q) * llm
    return -lm / p + (q / p) * llm, (1.0 - 1.0 / p) * lm + (q / p) * llm


def estimate_rho(coeffs: LanczosSequence, p: float, q: float = 0.0, *, n_min: int = 20,
                 n_max: int | None = None, force: bool = False) -> tuple[float, float]:
    """Fit rho from the growth of p_{2m}(0)^2 given the b_n growth class (p, q).

    Returns (rho, stderr). For p = 1 the accessible n are far from the
    asymptotic regime, so the call is refused unless ``force`` is set.
    """
    if not p >= 1:
        raise ValidationError("p must be >= 1")
    if p == 1 and not force:
        raise ValidationError("p = 1: the zero-mode fit converges only at extremely large n; pass force=True")
    ns = _even_ns(coeffs, n_min, n_max)
    if len(ns) < 3:
        raise InsufficientPoints("need at least 3 even n for the zero-mode fit")
    amp = zero_mode_series(coeffs, ns[-1])
    m = np.array(ns, dtype=float) / 2.0
    if np.any(m <= 1) and p == 1:
        raise ValidationError("the p = 1 model needs 2m > 2")
    y = np.log(amp[np.array(ns) // 2])
    off, reg = zero_mode_regressors(m, p, q)
    fit = stats.linregress(reg, y - off)
    if not np.isfinite(fit.stderr) or fit.stderr > FIT_STDERR_MAX:
        raise FitUnstable(f"rho fit stderr {fit.stderr:.3g} exceeds {FIT_STDERR_MAX}")
    return float(fit.slope), float(fit.stderr)


def zero_mode_slope(coeffs: LanczosSequence, m_min: int, m_max: int) -> float:
    """Log-log slope of p_{2m}(0)^2 against m over [m_min, m_max]."""
    amp = zero_mode_series(coeffs, 2 * m_max)
    m = np.arange(m_min, m_max + 1)
    return float(stats.linregress(np.log(m), np.log(amp[m])).slope)
