"""Level-n Green's-function terminators and the continued fraction.

Side convention: ``side = +1`` is the boundary value G(w + i0), ``side = -1``
is G(w - i0). The spectral function is Phi(w) = -2 side Im G(w + side i0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .errors import BesselDomain, PoleProximity, ValidationError
from .sequence import LanczosSequence

POLE_TOL = 1e-14
AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))


def _side(side) -> int:
    if side in (1, "+", "plus", "+1"):
        return 1
    if side in (-1, "-", "minus", "-1"):
        return -1
    raise ValidationError(f"side must be +1 or -1, got {side!r}")


def semicircle_green(beta: float, z, side=None):
    """G(z) = (2/beta^2)(z - sqrt(z + beta) sqrt(z - beta)), principal branches.

    With ``side`` given, ``z`` is real and the boundary value is returned.
    """
    if not beta > 0:
        raise ValidationError("beta must be positive")
    if side is None:
        zz = np.asarray(z, dtype=complex)
        out = (2.0 / beta**2) * (zz - np.sqrt(zz + beta) * np.sqrt(zz - beta))
        return complex(out) if out.ndim == 0 else out
    s = _side(side)
    w = np.asarray(z, dtype=float)
    inside = np.abs(w) < beta
    root = np.sqrt(np.abs(w * w - beta * beta))
    re = np.where(inside, w, w - np.sign(w) * root)
    im = np.where(inside, -s * root, 0.0)
    out = (2.0 / beta**2) * (re + 1j * im)
    return complex(out) if out.ndim == 0 else out


def bessel_green(rho: float, sigma0: float, beta: float, omega, side):
    """G_{2n}(w +- i0) = (-2/beta) H_{(rho-1)/2}(x) / H_{(rho+1)/2}(x), x = pi sigma0 |w|.

    H = J +- iY. Negative w follows from G(-w + i0) = -conj G(w + i0).
    """
    s = _side(side)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    x = math.pi * sigma0 * np.abs(w)
    if np.any(x == 0) and rho != 0:
        raise BesselDomain("Bessel terminator is singular at w = 0 for rho != 0")
    if np.any(~np.isfinite(x)):
        raise BesselDomain("non-finite Bessel argument")
    out = np.empty(w.shape, dtype=complex)
    zero = x == 0
    out[zero] = -2j * s / beta
    xv = x[~zero]
    lo, hi = 0.5 * (rho - 1), 0.5 * (rho + 1)
    # H^(1) = J + iY and H^(2) = J - iY; the quotient is stable where Y blows up.
    h = special.hankel1 if s == 1 else special.hankel2
    g_pos = (-2.0 / beta) * h(lo, xv) / h(hi, xv)
    if not np.all(np.isfinite(g_pos)):
        raise BesselDomain("Bessel ratio overflowed")
    # For w < 0 with side s, reflect the w > 0 value of the same side.
    neg = w[~zero] < 0
    g = np.where(neg, -np.conj(g_pos), g_pos)
    out[~zero] = g
    return complex(out[0]) if np.ndim(omega) == 0 else out


def airy_endpoint_green(rho: float, hn1: float, n: int, beta: float, side) -> complex:
    """Leading-order G_n(beta_n +- i0) at the spectral edge."""
    if not hn1 > 0:
        raise ValidationError("h_n(1) must be positive")
    s = _side(side)
    fp = (n * hn1 / math.sqrt(2.0)) ** (2.0 / 3.0)
    ph = complex(math.cos(math.pi / 3), s * math.sin(math.pi / 3))
    a = 2.0 * AI0 * math.sqrt(fp)
    c = ph * math.sqrt(2.0) * AIP0
    return (2.0 / beta) * (a + c * (rho + 1)) / (a + c * (rho - 1))


# ---------------------------------------------------------------------------
# terminators


@dataclass(frozen=True)
class SemicircleTerminator:
    beta: float

    def __call__(self, omega, side):
        return semicircle_green(self.beta, omega, side)


@dataclass(frozen=True)
class BesselTerminator:
    rho: float
    sigma0: float
    beta: float

    def __call__(self, omega, side):
        return bessel_green(self.rho, self.sigma0, self.beta, omega, side)


@dataclass(frozen=True)
class ConstantTerminator:
    """G_n(w +- i0) = value_plus / conj(value_plus), independent of w."""

    value_plus: complex

    def __call__(self, omega, side):
        v = self.value_plus if _side(side) == 1 else np.conj(self.value_plus)
        return np.full(np.shape(omega), v, dtype=complex) if np.ndim(omega) else complex(v)


Terminator = Callable[[np.ndarray, int], np.ndarray]


def default_terminator(coeffs: LanczosSequence, n: int) -> SemicircleTerminator:
    """Semicircle with beta_n = 2 b_n."""
    return SemicircleTerminator(2.0 * coeffs.b[n - 1])


def continued_fraction(coeffs: LanczosSequence, term, n: int, omega, side) -> np.ndarray:
    """||A||^2 G_0(w +- i0) from G_k = 1/(w - b_{k+1}^2 G_{k+1}) with G_n = term."""
    if not 0 <= n <= len(coeffs.b):
        raise ValidationError(f"n = {n} exceeds the available coefficients")
    if isinstance(term, BesselTerminator) and n % 2:
        raise ValidationError("the Bessel terminator needs even n: odd and even levels differ at finite n")
    s = _side(side)
    w = np.asarray(omega, dtype=float)
    g = np.asarray(term(w, s), dtype=complex)
    b2 = coeffs.b**2
    for k in range(n - 1, -1, -1):
        den = w - b2[k] * g
        small = np.abs(den) < POLE_TOL
        if np.any(small):
            raise PoleProximity(f"continued-fraction denominator vanished at level {k}", level=k)
        g = 1.0 / den
    out = coeffs.norm2 * g
    return complex(out) if out.ndim == 0 else out


class SpectralCurve(NamedTuple):
    phi: np.ndarray
    negative: bool


def spectral_from_green(g, side, tol: float = 1e-8) -> SpectralCurve:
    """Phi = -2 side Im G; ``negative`` flags dips below -tol * max(Phi)."""
    s = _side(side)
    phi = -2.0 * s * np.imag(np.asarray(g))
    neg = bool(np.any(phi < -tol * max(np.max(np.abs(phi)), 1e-300)))
    if neg:
        warnings.warn("negative spectral weight in Green's-function recovery", RuntimeWarning, stacklevel=2)
    return SpectralCurve(phi, neg)


def semicircle_recovery(coeffs: LanczosSequence, n: int, omega, beta: float | None = None):
    """Phi(w) from the continued fraction closed by a semicircle terminator."""
    b = 2.0 * coeffs.b[n - 1] if beta is None else beta
    g = continued_fraction(coeffs, SemicircleTerminator(b), n, omega, -1)
    return 2.0 * np.imag(g)
