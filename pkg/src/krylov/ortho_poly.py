"""Orthonormal polynomials generated by a LanczosSequence.

Convention: p_0 = 1/||A|| and b_k p_k(w) = w p_{k-1}(w) - b_{k-1} p_{k-2}(w).
All routines vectorise over the frequency argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sequence import LanczosSequence

# |w| above this multiple of beta_n = 2 b_n is reported in log form.
LOG_FORM_THRESHOLD = 1.5


@dataclass(frozen=True)
class PolyEval:
    """p_0..p_n and p_0'..p_n' at one frequency.

    In log form (``log_form`` True) ``values``/``derivs`` are None and the
    magnitudes are given by ``log_abs`` and ``sign`` instead.
    """

    omega: float
    values: np.ndarray | None
    derivs: np.ndarray | None
    log_form: bool = False
    log_abs: np.ndarray | None = None
    sign: np.ndarray | None = None


def _check_n(coeffs: LanczosSequence, n: int) -> None:
    if not 0 <= n <= len(coeffs.b):
        raise ValidationError(f"n = {n} exceeds the {len(coeffs.b)} available coefficients")


def poly_table(coeffs: LanczosSequence, omega, n: int, derivs: bool = False):
    """Values p_0..p_n (shape (n+1,) + omega.shape) and optionally derivatives."""
    _check_n(coeffs, n)
    w = np.asarray(omega, dtype=float)
    b = coeffs.b
    p = np.empty((n + 1,) + w.shape)
    p[0] = 1.0 / coeffs.norm
    d = np.zeros_like(p) if derivs else None
    prev = np.zeros_like(w)
    dprev = np.zeros_like(w)
    b_prev = 0.0
    for k in range(1, n + 1):
        p[k] = (w * p[k - 1] - b_prev * prev) / b[k - 1]
        if derivs:
            d[k] = (p[k - 1] + w * d[k - 1] - b_prev * dprev) / b[k - 1]
            dprev = d[k - 1]
        prev = p[k - 1]
        b_prev = b[k - 1]
    return (p, d) if derivs else p


def last_two(coeffs: LanczosSequence, omega, n: int):
    """(p_{n-1}, p_n, p_{n-1}', p_n') without storing the whole table."""
    _check_n(coeffs, n)
    if n < 1:
        raise ValidationError("need n >= 1")
    w = np.asarray(omega, dtype=float)
    b = coeffs.b
    p_m2 = np.zeros_like(w)
    p_m1 = np.full_like(w, 1.0 / coeffs.norm)
    d_m2 = np.zeros_like(w)
    d_m1 = np.zeros_like(w)
    b_prev = 0.0
    for k in range(1, n + 1):
        p_k = (w * p_m1 - b_prev * p_m2) / b[k - 1]
        d_k = (p_m1 + w * d_m1 - b_prev * d_m2) / b[k - 1]
        p_m2, p_m1 = p_m1, p_k
        d_m2, d_m1 = d_m1, d_k
        b_prev = b[k - 1]
    return p_m2, p_m1, d_m2, d_m1


def _log_form(coeffs: LanczosSequence, w: float, n: int) -> PolyEval:
    # Scaled recurrence: keep (p_{k-1}, p_k) normalised and accumulate the log scale.
    b = coeffs.b
    log_abs = np.empty(n + 1)
    sign = np.empty(n + 1)
    log_abs[0] = -np.log(coeffs.norm)
    sign[0] = 1.0
    scale = log_abs[0]
    a_prev, a_cur = 0.0, 1.0
    b_prev = 0.0
    for k in range(1, n + 1):
        a_next = (w * a_cur - b_prev * a_prev) / b[k - 1]
        m = max(abs(a_next), abs(a_cur))
        a_prev, a_cur = a_cur / m, a_next / m
        scale += np.log(m)
        log_abs[k] = scale + np.log(abs(a_cur)) if a_cur != 0 else -np.inf
        sign[k] = np.sign(a_cur)
        b_prev = b[k - 1]
    return PolyEval(w, None, None, True, log_abs, sign)


def eval_polys(coeffs: LanczosSequence, omega: float, n: int) -> PolyEval:
    """p_k(w) and p_k'(w) for k = 0..n by forward recurrence."""
    _check_n(coeffs, n)
    w = float(omega)
    if n >= 1 and abs(w) > LOG_FORM_THRESHOLD * 2.0 * coeffs.b[n - 1]:
        return _log_form(coeffs, w, n)
    p, d = poly_table(coeffs, np.float64(w), n, derivs=True)
    return PolyEval(w, p, d)


def log_zero_mode(coeffs: LanczosSequence, n_even: int) -> float:
    """log p_{n}(0)^2 from p_{2m}(0)/p_0 = (-1)^m prod b_{2k-1}/b_{2k}."""
    if n_even % 2:
        raise ValidationError("zero-mode amplitude needs an even index")
    _check_n(coeffs, n_even)
    b = coeffs.b[:n_even]
    return float(2.0 * np.sum(np.log(b[0::2]) - np.log(b[1::2])) - np.log(coeffs.norm2))


def zero_mode_amplitude(coeffs: LanczosSequence, n_even: int) -> float:
    """p_{n_even}(0)^2, accumulated in the log domain."""
    return float(np.exp(log_zero_mode(coeffs, n_even)))


def zero_mode_series(coeffs: LanczosSequence, n_even_max: int) -> np.ndarray:
    """p_0(0)^2, p_2(0)^2, ..., p_{n_even_max}(0)^2."""
    if n_even_max % 2:
        raise ValidationError("need an even index")
    _check_n(coeffs, n_even_max)
    b = coeffs.b[:n_even_max]
    logs = np.concatenate([[0.0], np.cumsum(2.0 * (np.log(b[0::2]) - np.log(b[1::2])))])
    return np.exp(logs - np.log(coeffs.norm2))


def kernel_diag(coeffs: LanczosSequence, omega, n: int) -> np.ndarray:
    """K_n(w,w) = b_n (p_{n-1} p_n' - p_{n-1}' p_n)."""
    p1, p2, d1, d2 = last_two(coeffs, omega, n)
    return coeffs.b[n - 1] * (p1 * d2 - d1 * p2)


def kernel_direct(coeffs: LanczosSequence, x, y, n: int) -> np.ndarray:
    """K_n(x,y) = sum_{m<n} p_m(x) p_m(y) by explicit summation."""
    px = poly_table(coeffs, x, n - 1)
    py = poly_table(coeffs, y, n - 1)
    return np.sum(px * py, axis=0)


def cd_kernel(coeffs: LanczosSequence, x, y, n: int, coincidence: float = 1e-8):
    """Christoffel-Darboux kernel K_n(x, y).

    Off the diagonal the ratio b_n (p_n(x)p_{n-1}(y) - p_{n-1}(x)p_n(y))/(x - y) is used,
    and for |x - y| below ``coincidence`` the derivative (diagonal) form.
    """
    _check_n(coeffs, n)
    if n < 1:
        raise ValidationError("need n >= 1")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    xa, ya = np.broadcast_arrays(xa, ya)
    px1, px2, _, _ = last_two(coeffs, xa, n)
    py1, py2, _, _ = last_two(coeffs, ya, n)
    diff = xa - ya
    near = np.abs(diff) < coincidence * np.maximum(1.0, np.abs(xa))
    with np.errstate(divide="ignore", invalid="ignore"):
        off = coeffs.b[n - 1] * (px2 * py1 - px1 * py2) / diff
    if np.any(near):
        mid = 0.5 * (xa + ya)
        off = np.where(near, kernel_diag(coeffs, mid, n), off)
    return float(off) if off.ndim == 0 else off
