"""Spectral bootstrap: first-order ODEs for the phase I_n(w) built from exact
orthogonal polynomials, recovering Phi(w) (or its envelope) and sigma_n(w).

Three regimes are covered:

* bulk (rho = 0), integrated upward from I_n(0) = 0,
* Bessel (Phi/2pi = |w|^rho e^{-Q}), integrated upward from w = 0,
* Airy (near the edge w = beta_n), integrated downward from f_n(1) = 0.

Polynomials and the diagonal Christoffel-Darboux kernel are evaluated on the
whole grid up front, so the sequential loop only touches scalars.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import special

from .errors import (
    AiryDomain,
    BesselDomain,
    NegativePhi,
    SigmaNegative,
    StepTooCoarse,
    ValidationError,
)
from .greens import AI0, AIP0, semicircle_recovery
from .ortho_poly import last_two
from .sequence import LanczosSequence, fmt_float

DEFAULT_DOMEGA = 1e-3
STEP_RTOL = 1e-3
FD_DERIV_STEP = 1e-6
METHODS = ("euler", "rk4")


@dataclass(frozen=True)
class SpectralEstimate:
    """Bootstrap output on a frequency grid.

    ``values`` holds Phi(w) for the bulk and Airy solvers and the envelope
    e^{-Q(w)} for the Bessel solver; ``phi`` always returns Phi.
    """

    solver: str
    n: int
    rho: float
    d_omega: float
    beta: float
    omega: np.ndarray
    values: np.ndarray
    sigma: np.ndarray
    cumulative: np.ndarray
    f: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def is_envelope(self) -> bool:
        return self.solver == "bessel"

    @property
    def phi(self) -> np.ndarray:
        if not self.is_envelope:
            return self.values
        with np.errstate(divide="ignore"):
            return 2.0 * math.pi * np.abs(self.omega) ** self.rho * self.values

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("omega,phi_or_envelope,sigma,I\n")
        for row in zip(self.omega, self.values, self.sigma, self.cumulative):
            buf.write(",".join(fmt_float(v) for v in row) + "\n")
        return buf.getvalue()


def _check_common(coeffs: LanczosSequence, n: int, d_omega: float, method: str) -> None:
    if not 2 <= n <= len(coeffs.b):
        raise ValidationError(f"n = {n} needs 2 <= n <= {len(coeffs.b)}")
    if not d_omega > 0:
        raise ValidationError("d_omega must be positive")
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}")


def _grid(start: float, stop: float, h: float) -> np.ndarray:
    steps = int(math.floor((stop - start) / h + 1e-9))
    if steps < 1:
        raise ValidationError("the frequency range holds less than one step")
    return start + h * np.arange(steps + 1)


def _poly_data(coeffs: LanczosSequence, n: int, omega: np.ndarray, derivative: str = "exact"):
    """P = p_{n-1}^2 + p_n^2 and K_n(w, w) on ``omega``."""
    p1, p2, d1, d2 = last_two(coeffs, omega, n)
    if derivative == "fd":
        h = FD_DERIV_STEP
        a1, a2, _, _ = last_two(coeffs, omega + h, n)
        c1, c2, _, _ = last_two(coeffs, omega - h, n)
        d1, d2 = (a1 - c1) / (2 * h), (a2 - c2) / (2 * h)
    elif derivative != "exact":
        raise ValidationError("derivative must be 'exact' or 'fd'")
    return p1 * p1 + p2 * p2, coeffs.b[n - 1] * (p1 * d2 - d1 * p2)


def _integrate(rhs: Callable[[int, float], tuple[float, float]], i0: float, steps: int,
               h: float, method: str, omega: np.ndarray):
    """Solve dI/dw = sigma(w, I) on nodes 0..steps.

    ``rhs(j, I)`` is evaluated at half-grid index j (node k is j = 2k) and
    returns (sigma, phi_or_envelope).
    """
    values = np.empty(steps + 1)
    sigma = np.empty(steps + 1)
    cum = np.empty(steps + 1)
    cur = i0
    for k in range(steps + 1):
        s, v = rhs(2 * k, cur)
        if not s >= 0:
            raise SigmaNegative(f"sigma_n = {s:.3e} < 0 at omega = {omega[k]:.6g}")
        values[k], sigma[k], cum[k] = v, s, cur
        if k == steps:
            break
        if method == "euler":
            cur = cur + h * s
        else:
            k2 = rhs(2 * k + 1, cur + 0.5 * h * s)[0]
            k3 = rhs(2 * k + 1, cur + 0.5 * h * k2)[0]
            k4 = rhs(2 * k + 2, cur + h * k3)[0]
            cur = cur + h * (s + 2 * k2 + 2 * k3 + k4) / 6.0
    return values, sigma, cum


def _half_grid(omega: np.ndarray, h: float) -> np.ndarray:
    return omega[0] + 0.5 * h * np.arange(2 * len(omega) - 1)


# ---------------------------------------------------------------------------
# bulk


def _bulk_rhs(omega_h, P, K, beta: float, n: int):
    sgn = -1.0 if n % 2 else 1.0
    b2 = beta * beta

    def phi_at(j: int, cur: float) -> float:
        w = omega_h[j]
        return (4.0 / beta) / P[j] * (beta - sgn * w * math.sin(2 * math.pi * cur)) / math.sqrt(b2 - w * w)

    def rhs(j: int, cur: float):
        w = omega_h[j]
        phi = phi_at(j, cur)
        s = phi * K[j] / (2 * math.pi) + sgn * beta * math.cos(2 * math.pi * cur) / (2 * math.pi * (b2 - w * w))
        return s, phi

    return rhs, phi_at


def _bulk_start(coeffs, n, beta, omega0, h, method, omega_h, P, K):
    """I_n(omega0) mod 1 from the semicircle-closed continued fraction."""
    sgn = -1.0 if n % 2 else 1.0
    phi0 = float(semicircle_recovery(coeffs, n, omega0, beta))
    root = math.sqrt(beta * beta - omega0 * omega0)
    target = (beta - phi0 * beta * P[0] * root / 4.0) / (sgn * omega0)
    if abs(target) > 1:
        warnings.warn(f"phase equation out of range ({target:.4f}); clipped", RuntimeWarning, stacklevel=3)
        target = max(-1.0, min(1.0, target))
    rhs, phi_at = _bulk_rhs(omega_h, P, K, beta, n)
    theta = math.asin(target)
    # sin fixes 2 pi I up to the reflection theta -> pi - theta; the branch whose
    # next step tracks the continued fraction wins.
    ref = float(semicircle_recovery(coeffs, n, omega0 + h, beta))
    best = None
    for th in (theta, math.pi - theta):
        i0 = (th / (2 * math.pi)) % 1.0
        vals, _, _ = _integrate(rhs, i0, 1, h, method, omega_h[::2][:2])
        err = abs(vals[1] - ref)
        if best is None or err < best[0]:
            best = (err, i0)
    return best[1], phi0


def bulk_bootstrap(coeffs: LanczosSequence, n: int, d_omega: float = DEFAULT_DOMEGA,
                   omega_max: float | None = None, *, beta: float | None = None,
                   method: str = "euler", check_step: bool = True, omega_start: float = 0.0,
                   derivative: str = "exact") -> SpectralEstimate:
    """Bulk (rho = 0) bootstrap on [omega_start, omega_max].

    Euler stepping is the reference scheme; ``method="rk4"`` integrates
    the same ODE to fourth order. With ``omega_start > 0`` the phase is seeded
    from the semicircle continued fraction, so I_n is then known only mod 1.
    """
    _check_common(coeffs, n, d_omega, method)
    b = 2.0 * coeffs.b[n - 1] if beta is None else float(beta)
    wmax = 0.99 * b if omega_max is None else float(omega_max)
    if not 0 < wmax < b:
        raise ValidationError(f"omega_max must lie in (0, beta_n = {b:.6g})")
    if not 0 <= omega_start < wmax:
        raise ValidationError("omega_start must lie in [0, omega_max)")
    omega = _grid(omega_start, wmax, d_omega)
    omega_h = _half_grid(omega, d_omega)
    P, K = _poly_data(coeffs, n, omega_h, derivative)
    if omega_start > 0:
        i0, _ = _bulk_start(coeffs, n, b, omega_start, d_omega, method, omega_h, P, K)
    else:
        i0 = 0.0
    rhs, _ = _bulk_rhs(omega_h, P, K, b, n)
    phi, sigma, cum = _integrate(rhs, i0, len(omega) - 1, d_omega, method, omega)
    if np.any(phi < 0):
        raise NegativePhi(f"negative Phi at omega = {omega[np.argmax(phi < 0)]:.6g}")
    meta = {"solver": "bulk", "method": method, "beta": b, "omega_start": omega_start,
            "phase_mod_one": omega_start > 0, "derivative": derivative}
    if check_step:
        fine = bulk_bootstrap(coeffs, n, d_omega / 2, omega[-1] + 0.25 * d_omega, beta=b,
                              method=method, check_step=False, omega_start=omega_start,
                              derivative=derivative)
        change = abs(fine.values[-1] - phi[-1]) / abs(phi[-1])
        meta["step_change"] = change
        if change > STEP_RTOL:
            raise StepTooCoarse(f"halving d_omega changes Phi(omega_max) by {change:.2e}")
    return SpectralEstimate("bulk", n, 0.0, d_omega, b, omega, phi, sigma, cum, None, meta)


# ---------------------------------------------------------------------------
# Bessel


def bessel_initial(coeffs: LanczosSequence, n: int, rho: float, beta: float | None = None,
                   full: bool = False) -> tuple[float, float]:
    """(e^{-Q(0)}, sigma_n(0)) from the w -> 0 limit of the Bessel asymptotics."""
    b = 2.0 * coeffs.b[n - 1] if beta is None else float(beta)
    P, K = (float(v[0]) for v in _poly_data(coeffs, n, np.zeros(1)))
    a = 0.5 * (1.0 + rho)
    ga = math.gamma(a)
    if full:
        sgn = -1.0 if n % 2 else 1.0
        sigma0 = (1.0 + rho) / (2 * math.pi) * (4.0 * K / (b * P) - (rho - sgn) / b)
        env0 = 2.0 * (0.5 * math.pi * sigma0) ** rho / (ga * ga * b * P)
    else:
        env0 = 2.0 * (1.0 + rho) ** rho / (ga * ga) * K**rho / (b * P) ** (1.0 + rho)
        sigma0 = (2.0 / math.pi) * (ga * math.gamma(a + 1.0) * env0 * K) ** (1.0 / (1.0 + rho))
    return env0, sigma0


def _bessel_rhs(omega_h, P, K, beta, n, rho, full, env0, sigma0):
    sgn = -1.0 if n % 2 else 1.0
    orders = 0.5 * np.array([rho - 3.0, rho - 1.0, rho + 1.0, rho + 3.0])
    b2 = beta * beta

    def rhs(j: int, cur: float):
        w = omega_h[j]
        if w == 0.0:
            return sigma0, env0
        if not cur > 0:
            raise BesselDomain(f"I_n({w:.6g}) = {cur:.3e} is not positive")
        x = math.pi * cur
        jm3, jm, jp, jp3 = special.jv(orders, x)
        if not (math.isfinite(jm) and math.isfinite(jp) and math.isfinite(jm3) and math.isfinite(jp3)):
            raise BesselDomain(f"Bessel evaluation failed at argument {x:.6g}")
        r2 = b2 - w * w
        r = math.sqrt(r2)
        ang = rho * math.asin(w / beta)
        ca, sa = math.cos(ang), math.sin(ang)
        ssum = jm * jm + jp * jp
        if full:
            bracket = ssum - sgn * (w / beta) * ((jm * jm - jp * jp) * sa + 2 * jm * jp * ca)
        else:
            bracket = ssum - sgn * (w / beta) * 2 * jm * jp * ca
        # w(omega) = omega^rho e^{-Q}; the omega^rho of the envelope formula cancels here
        wt = x * bracket / (P[j] * r)
        if not wt > 0:
            raise NegativePhi(f"negative envelope at omega = {w:.6g}")
        B = ssum - jm3 * jp - jm * jp3
        if full:
            pref = x / (4.0 * wt)
            c0 = pref * (rho * ssum / r + sgn * beta / r2 * ((jp * jp - jm * jm) * ca + 2 * jm * jp * sa))
            s = (K[j] - c0) / (pref * math.pi * B)
        else:
            s = (4.0 / math.pi) * K[j] * wt / x / B
        return s, wt / w**rho

    return rhs


def bessel_bootstrap(coeffs: LanczosSequence, n: int, rho: float, d_omega: float = DEFAULT_DOMEGA,
                     omega_max: float = 2.0, *, beta: float | None = None, method: str = "euler",
                     full: bool = False, derivative: str = "exact") -> SpectralEstimate:
    """Bessel bootstrap for Phi/2pi = |w|^rho e^{-Q}; returns the envelope e^{-Q}.

    The simplified asymptotic forms are the default; ``full=True`` keeps the
    subleading terms, which makes rho = 0 coincide with the bulk equations.
    """
    if not rho > -1:
        raise ValidationError("rho must exceed -1")
    _check_common(coeffs, n, d_omega, method)
    if n % 2:
        warnings.warn("odd n: the Bessel asymptotics are stated for even n", RuntimeWarning, stacklevel=2)
    b = 2.0 * coeffs.b[n - 1] if beta is None else float(beta)
    if not 0 < omega_max < b:
        raise ValidationError(f"omega_max must lie in (0, beta_n = {b:.6g})")
    omega = _grid(0.0, omega_max, d_omega)
    omega_h = _half_grid(omega, d_omega)
    P, K = _poly_data(coeffs, n, omega_h, derivative)
    env0, sigma0 = bessel_initial(coeffs, n, rho, b, full)
    rhs = _bessel_rhs(omega_h, P, K, b, n, rho, full, env0, sigma0)
    env, sigma, cum = _integrate(rhs, 0.0, len(omega) - 1, d_omega, method, omega)
    meta = {"solver": "bessel", "method": method, "beta": b, "full": full, "derivative": derivative,
            "special_functions": "scipy.special.jv"}
    return SpectralEstimate("bessel", n, float(rho), d_omega, b, omega, env, sigma, cum, None, meta)


# ---------------------------------------------------------------------------
# Airy


def airy_h_estimate(coeffs: LanczosSequence, n: int, rho: float = 0.0, beta: float | None = None) -> float:
    """h_n(1) from the edge values of p_{n-1} and p_n.

    With u = rho - (p_n + p_{n-1})/(p_n - p_{n-1}) at beta_n, the edge
    asymptotics give (2 n h)^{1/3} = (Ai'(0)/Ai(0)) u.
    """
    b = 2.0 * coeffs.b[n - 1] if beta is None else float(beta)
    p1, p2, _, _ = (float(v[0]) for v in last_two(coeffs, np.array([b]), n))
    if p2 == p1:
        raise AiryDomain("p_n(beta_n) = p_{n-1}(beta_n); the edge ratio is undefined")
    u = rho - (p2 + p1) / (p2 - p1)
    return float((AIP0 / AI0 * u) ** 3 / (2.0 * n))


def airy_endpoint_phi(coeffs: LanczosSequence, n: int, rho: float, hn1: float, beta: float) -> float:
    """Phi(beta_n) = 2pi [(2f')^{1/4} Ai(0) - (1+rho)(2f')^{-1/4} Ai'(0)]^2 / (beta_n p_n^2)."""
    fp = (n * hn1 / math.sqrt(2.0)) ** (2.0 / 3.0)
    t = (2.0 * fp) ** 0.25
    p2 = float(last_two(coeffs, np.array([beta]), n)[1][0])
    return 2 * math.pi * (t * AI0 - (1.0 + rho) * AIP0 / t) ** 2 / (beta * p2 * p2)


def airy_bootstrap(coeffs: LanczosSequence, n: int, rho: float = 0.0, d_omega: float = DEFAULT_DOMEGA,
                   omega_min: float = 0.0, *, beta: float | None = None,
                   hn1: float | None = None) -> SpectralEstimate:
    """Airy bootstrap, stepping f_n down from f_n(1) = 0 at w = beta_n to omega_min."""
    if not rho > -1:
        raise ValidationError("rho must exceed -1")
    _check_common(coeffs, n, d_omega, "euler")
    b = 2.0 * coeffs.b[n - 1] if beta is None else float(beta)
    if not 0 <= omega_min < b:
        raise ValidationError(f"omega_min must lie in [0, beta_n = {b:.6g})")
    h_est = airy_h_estimate(coeffs, n, rho, b) if hn1 is None else float(hn1)
    if not h_est > 0:
        raise AiryDomain(f"h_n(1) estimate {h_est:.4g} is not positive")
    omega = b - _grid(0.0, b - omega_min, d_omega)
    P, K = _poly_data(coeffs, n, omega)
    m = len(omega)
    phi = np.empty(m)
    f = np.empty(m)
    fp = np.empty(m)
    f[0] = 0.0
    fp[0] = (n * h_est / math.sqrt(2.0)) ** (2.0 / 3.0)
    phi[0] = airy_endpoint_phi(coeffs, n, rho, h_est, b)
    for k in range(1, m):
        x = omega[k] / b
        fk = f[k - 1] - fp[k - 1] * d_omega / b
        if not (math.isfinite(fk) and fk < 0):
            raise AiryDomain(f"phase f_n = {fk:.4g} left (-inf, 0) at omega = {omega[k]:.6g}")
        ai, aip, _, _ = special.airy(fk)
        one = 1.0 - x * x
        root = math.sqrt(one)
        ang = rho * math.acos(x)
        ca, sa = math.cos(ang), math.sin(ang)
        mf = -fk
        sq = math.sqrt(mf)
        w2pi = (2.0 / b) / P[k] / root * (
            -2 * x * ai * aip * sa + sq * ai * ai * (x * ca + 1) - aip * aip * (x * ca - 1) / sq)
        if not w2pi > 0:
            raise NegativePhi(f"negative Phi at omega = {omega[k]:.6g}")
        num = (-2 * b * w2pi * K[k] * fk + 2.0 / one * ai * aip * ca * fk
               - sa / one * (ai * ai * mf * sq - aip * aip * sq)
               - rho / root * (ai * ai * mf * sq + aip * aip * sq))
        den = 2 * ai * ai * fk * fk - 2 * aip * aip * fk - ai * aip
        f[k], fp[k], phi[k] = fk, num / den, 2 * math.pi * w2pi
        if not fp[k] > 0:
            raise AiryDomain(f"f_n' = {fp[k]:.4g} is not positive at omega = {omega[k]:.6g}")
    sigma = np.sqrt(-f) * fp / (math.pi * b)
    cum = 0.5 * n - 2.0 / (3 * math.pi) * (-f) ** 1.5
    meta = {"solver": "airy", "method": "euler", "beta": b, "hn1": h_est,
            "hn1_source": "edge estimate" if hn1 is None else "user"}
    return SpectralEstimate("airy", n, float(rho), d_omega, b, omega, phi, sigma, cum, f, meta)
