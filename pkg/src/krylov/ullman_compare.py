"""Rescaled equilibrium measures against Ullman densities, and the n-scaling
of sigma_n(0) that separates strong from marginal confinement."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .coulomb_gas import EquilibriumMeasure, h_function, mrs_number, ullman
from .errors import ValidationError
from .sequence import fmt_float
from .weights import WeightSpec

ALGEBRAIC_EXPONENT = 0.1
LOG_R2 = 0.99
NORM_TOL = 1e-3


def rescaled_measure(measure: EquilibriumMeasure) -> tuple[np.ndarray, np.ndarray]:
    """x = w/beta_n on [0, 1] and psi_n(x) = (beta_n/n) sigma_n(beta_n x)."""
    return measure.rescaled()


def normalization(measure: EquilibriumMeasure) -> float:
    """int_{-1}^{1} psi_n, using evenness."""
    x, psi = rescaled_measure(measure)
    return float(2.0 * integrate.trapezoid(psi, x))


def sup_distance(measure: EquilibriumMeasure, p: float, x_max: float = 1.0) -> float:
    """max |psi_n - psi^(p)| over grid points with x <= x_max (excluding x = 0 for p <= 1)."""
    x, psi = rescaled_measure(measure)
    keep = x <= x_max
    if p <= 1:
        keep &= x > 0
    return float(np.max(np.abs(psi[keep] - ullman(p, x[keep]))))


@dataclass(frozen=True)
class ConfinementTable:
    n: np.ndarray
    sigma0: np.ndarray
    beta: np.ndarray
    exponent: float
    log_r2: float
    growth: str

    def to_csv(self) -> str:
        rows = ["n,beta_n,sigma0"]
        rows += [f"{fmt_float(n)},{fmt_float(b)},{fmt_float(s)}" for n, b, s in zip(self.n, self.beta, self.sigma0)]
        return "\n".join(rows) + "\n"


def classify_growth(n, sigma0) -> tuple[float, float, str]:
    """(log-log exponent, R^2 of sigma0 against log n, class).

    A logarithm has local log-log slope near 1/log n, about 0.1 over
    n in [1e2, 1e4], so the exponent threshold alone cannot separate the two
    classes; "algebraic" also requires the power law to fit at least as well.
    """
    n = np.asarray(n, dtype=float)
    s = np.asarray(sigma0, dtype=float)
    power = stats.linregress(np.log(n), np.log(s))
    fit = stats.linregress(np.log(n), s)
    exponent, r2 = float(power.slope), float(fit.rvalue**2)
    if exponent > ALGEBRAIC_EXPONENT and power.rvalue**2 >= r2:
        return exponent, r2, "algebraic"
    if r2 > LOG_R2 and fit.slope > 0:
        return exponent, r2, "logarithmic"
    return exponent, r2, "bounded"


def _sigma0(spec: WeightSpec, n: float) -> tuple[float, float]:
    b = mrs_number(spec, n)
    return b, n / b / (2 * math.pi) * h_function(spec, n, 0.0, beta=b)


def confinement_diagnostic(spec: WeightSpec, n_list: Sequence[float], threads: int = 1) -> ConfinementTable:
    """sigma_n(0) = (n/beta_n) h_n(0)/(2 pi) along ``n_list`` and its growth class."""
    ns = np.asarray(n_list, dtype=float)
    if len(ns) < 3:
        raise ValidationError("the growth fit needs at least 3 values of n")
    if np.any(np.diff(ns) <= 0):
        raise ValidationError("n_list must be strictly ascending")
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        rows = list(pool.map(lambda n: _sigma0(spec, n), ns))
    betas = np.array([r[0] for r in rows])
    sig = np.array([r[1] for r in rows])
    exponent, r2, growth = classify_growth(ns, sig)
    return ConfinementTable(ns, sig, betas, exponent, r2, growth)
