"""Lanczos coefficients of a spectral weight by the discretised Stieltjes procedure.

The weight is discretised on panelled Gauss rules over [0, w_cut] (evenness is
exploited, so only w >= 0 carries nodes) and every inner product is accumulated
in gmpy2 extended precision. A |w|^rho algebraic factor at the origin, and an
algebraic edge factor for compactly supported weights, are absorbed exactly
into Gauss-Jacobi rules on the end panels.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np
from scipy.special import roots_jacobi

from .errors import GridTooCoarse, PrecisionExhausted, ValidationError
from .sequence import LanczosSequence
from .weights import TabulatedWeight, WeightSpec, log_weight, table_of

DEFAULT_BITS = 512
NODES_PER_PANEL = 48


# ---------------------------------------------------------------------------
# Gauss-Jacobi rules in extended precision


def _jacobi_recurrence(m: int, alpha, beta):
    """Monic Jacobi recurrence coefficients a_0..a_{m-1}, b_0..b_{m-1} (b_0 = mass)."""
    one = gmpy2.mpfr(1)
    ab = alpha + beta
    a = []
    b = [2 ** (ab + 1) * gmpy2.gamma(alpha + 1) * gmpy2.gamma(beta + 1) / gmpy2.gamma(ab + 2)]
    for k in range(m):
        if k == 0:
            a.append((beta - alpha) / (ab + 2))
        else:
            s = 2 * k + ab
            a.append((beta * beta - alpha * alpha) / (s * (s + 2)))
        if k >= 1:
            s = 2 * k + ab
            if k == 1:
                b.append(4 * (one + alpha) * (one + beta) / ((2 + ab) ** 2 * (3 + ab)))
            else:
                b.append(4 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1) * (s - 1)))
    return a, b


@lru_cache(maxsize=64)
def gauss_jacobi(m: int, alpha: float, beta: float, bits: int):
    """Nodes and weights of the m-point rule for (1-t)^alpha (1+t)^beta on [-1, 1]."""
    with gmpy2.context(gmpy2.get_context(), precision=bits + 32):
        al, be = gmpy2.mpfr(alpha), gmpy2.mpfr(beta)
        a, b = _jacobi_recurrence(m, al, be)
        x0, _ = roots_jacobi(m, alpha, beta)
        x = np.array([gmpy2.mpfr(float(v)) for v in x0], dtype=object)
        tol = gmpy2.mpfr(2) ** (-(bits + 8))
        for _ in range(60):
            pm, pm1 = np.ones(m, dtype=object) * gmpy2.mpfr(1), np.zeros(m, dtype=object)
            dm, dm1 = np.zeros(m, dtype=object), np.zeros(m, dtype=object)
            for k in range(m):
                pn = (x - a[k]) * pm - (b[k] * pm1 if k else 0)
                dn = pm + (x - a[k]) * dm - (b[k] * dm1 if k else 0)
                pm1, pm = pm, pn
                dm1, dm = dm, dn
            step = pm / dm
            x = x - step
            if max(abs(s) for s in step) < tol:
                break
        # Christoffel numbers 1 / sum_k p_k(x)^2 with orthonormal p_k.
        acc = np.ones(m, dtype=object) * (1 / b[0])
        pm1 = np.zeros(m, dtype=object)
        pm = np.ones(m, dtype=object) * gmpy2.mpfr(1)
        norm = b[0]
        for k in range(m - 1):
            pn = (x - a[k]) * pm - (b[k] * pm1 if k else 0)
            pm1, pm = pm, pn
            norm = norm * b[k + 1]
            acc = acc + pm * pm / norm
        w = np.array([1 / v for v in acc], dtype=object)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return tuple(+v for v in x), tuple(+v for v in w)


# ---------------------------------------------------------------------------
# quadrature grid


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray  # object array of mpfr, all >= 0
    weights: np.ndarray  # object array of mpfr; includes w(omega) and the factor 2 for evenness
    panels: tuple[tuple[float, float], ...]
    precision_bits: int
    omega_cut: float

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray):
        return np.sum(self.weights * values)


def _omega_cut(spec: WeightSpec, n_max: int, digits: float) -> float:
    if spec.support is not None:
        return float(spec.support)
    drop = (digits + 10.0) * math.log(10.0)

    def f(w):
        return 2 * n_max * np.log(w) + log_weight(spec, w)

    top = 4.0
    while True:
        grid = np.linspace(top / 4000, top, 4000)
        vals = f(grid)
        k = int(np.nanargmax(vals))
        below = np.nonzero((np.arange(len(grid)) > k) & (vals < vals[k] - drop))[0]
        if len(below):
            return float(grid[below[0]])
        top *= 2.0
        if top > 1e8:
            raise ValidationError(f"{spec.tag}: weight does not decay fast enough to discretise")


def _panel_rule(spec, lo, hi, first, last, m, bits):
    half = (hi - lo) / 2
    alpha = spec.edge_exponent if (last and spec.support is not None) else 0.0
    beta = spec.rho if first else 0.0
    t, lam = gauss_jacobi(m, float(alpha), float(beta), bits)
    lo_m, half_m = gmpy2.mpfr(lo), gmpy2.mpfr(half)
    nodes, weights = [], []
    pref = half_m
    if beta:
        pref = pref * half_m ** gmpy2.mpfr(beta)
    if alpha:
        pref = pref * (half_m / gmpy2.mpfr(spec.support)) ** gmpy2.mpfr(alpha)
    rho = gmpy2.mpfr(spec.rho)
    gam = gmpy2.mpfr(spec.edge_exponent)
    for tj, lj in zip(t, lam):
        x = lo_m + half_m * (1 + tj)
        val = 2 * pref * lj * spec.smooth_hp(x)
        if spec.rho and not first:
            val = val * x**rho
        if spec.support is not None and spec.edge_exponent and not last:
            val = val * (1 - x / gmpy2.mpfr(spec.support)) ** gam
        nodes.append(x)
        weights.append(val)
    return nodes, weights


def build_grid(spec: WeightSpec, n_max: int, precision_bits: int = DEFAULT_BITS,
               panels: int | None = None, nodes_per_panel: int = NODES_PER_PANEL,
               threads: int = 1) -> QuadratureGrid:
    """Panelled Gauss rule on [0, w_cut] that integrates w times degree-2n_max polynomials."""
    if spec.smooth_hp is None:
        raise ValidationError(f"{spec.tag}: no extended-precision evaluator for this weight")
    digits = precision_bits * math.log10(2.0) / 4.0
    cut = _omega_cut(spec, n_max, digits)
    if panels is None:
        panels = max(4, math.ceil((4 * n_max + 60) / nodes_per_panel))
    edges = list(np.linspace(0.0, cut, panels + 1))
    if spec.kink_exponent is not None:
        # Geometric grading towards a non-analytic origin: the innermost panel
        # then carries an error of order its width^(1 + kink).
        levels = math.ceil(math.log2(10.0) * (digits + 2) / (1.0 + spec.kink_exponent)) + 2
        inner = [edges[1] * 2.0**-k for k in range(levels, 0, -1)]
        edges = [0.0] + inner + edges[1:]
    bounds = tuple((float(edges[i]), float(edges[i + 1])) for i in range(len(edges) - 1))
    last = len(bounds) - 1
    with gmpy2.context(gmpy2.get_context(), precision=precision_bits):
        jobs = [(spec, lo, hi, i == 0, i == last, nodes_per_panel, precision_bits)
                for i, (lo, hi) in enumerate(bounds)]
        if threads > 1:
            ctx = gmpy2.get_context()

            def run(args):
                with gmpy2.context(ctx):
                    return _panel_rule(*args)

            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(run, jobs))
        else:
            parts = [_panel_rule(*j) for j in jobs]
    nodes = np.array([x for nd, _ in parts for x in nd], dtype=object)
    weights = np.array([w for _, wt in parts for w in wt], dtype=object)
    return QuadratureGrid(nodes, weights, bounds, precision_bits, cut)


def adaptive_grid(spec: WeightSpec, n_max: int, precision_bits: int = DEFAULT_BITS,
                  threads: int = 1, max_doublings: int = 6) -> QuadratureGrid:
    """Double the panel count until the mass and the top moment agree to 10^-d."""
    digits = precision_bits * math.log10(2.0) / 4.0
    tol = gmpy2.mpfr(10) ** (-int(digits))
    panels = max(4, math.ceil((4 * n_max + 60) / NODES_PER_PANEL))
    with gmpy2.context(gmpy2.get_context(), precision=precision_bits):
        grid = build_grid(spec, n_max, precision_bits, panels, threads=threads)
        for _ in range(max_doublings):
            finer = build_grid(spec, n_max, precision_bits, 2 * panels, threads=threads)
            ok = True
            for k in (0, 2 * n_max):
                a = sum(grid.weights * grid.nodes**k)
                c = sum(finer.weights * finer.nodes**k)
                if abs(a - c) > tol * abs(c):
                    ok = False
            if ok:
                return grid
            grid, panels = finer, 2 * panels
    raise PrecisionExhausted(f"{spec.tag}: quadrature did not settle after {max_doublings} refinements")


# ---------------------------------------------------------------------------
# Stieltjes procedure


def _stieltjes_hp(grid: QuadratureGrid, n_max: int, drift_limit):
    x = grid.nodes
    lam = grid.weights
    mass = sum(lam)
    norm = gmpy2.sqrt(mass)
    p_prev = np.zeros(len(x), dtype=object)
    p_cur = np.array([1 / norm] * len(x), dtype=object)
    p_prev2 = None
    b_prev = gmpy2.mpfr(0)
    bs = []
    drifts = []
    for _ in range(n_max):
        q = x * p_cur - b_prev * p_prev if bs else x * p_cur
        b_k = gmpy2.sqrt(sum(lam * q * q))
        p_next = q / b_k
        drift = abs(sum(lam * p_next * p_prev)) if bs else gmpy2.mpfr(0)
        drifts.append(float(drift))
        if drift > drift_limit:
            raise PrecisionExhausted(f"orthogonality drift {float(drift):.3e} at n = {len(bs) + 1}")
        bs.append(b_k)
        p_prev2, p_prev, p_cur = p_prev, p_cur, p_next
        b_prev = b_k
    del p_prev2
    return mass, bs, drifts


def stieltjes_coefficients(spec: WeightSpec, n_max: int, precision_bits: int = DEFAULT_BITS,
                           threads: int = 1) -> LanczosSequence:
    """b_1..b_{n_max} of the weight, with inner products in extended precision."""
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    if precision_bits < 128:
        raise ValidationError("precision_bits must be >= 128")
    if spec.growth is not None and spec.growth[0] < 1:
        raise ValidationError("weights decaying slower than exponentially are not supported")
    with gmpy2.context(gmpy2.get_context(), precision=precision_bits):
        grid = adaptive_grid(spec, n_max, precision_bits, threads=threads)
        limit = gmpy2.mpfr(10) ** (-precision_bits / 8)
        mass, bs, drifts = _stieltjes_hp(grid, n_max, limit)
        text = tuple(format(v, ".30g") for v in bs)
        b = np.array([float(v) for v in bs])
        norm2 = float(mass)
    meta = {
        "source": "stieltjes",
        "weight": spec.tag,
        "n": n_max,
        "precision_bits": precision_bits,
        "nodes": len(grid),
        "panels": len(grid.panels),
        "omega_cut": grid.omega_cut,
        "max_drift": max(drifts),
        "drift": drifts,
    }
    return LanczosSequence(b, norm2, meta, text)


# ---------------------------------------------------------------------------
# reconstruction from tabulated spectral estimates


def _trapezoid_weights(omega: np.ndarray) -> np.ndarray:
    h = np.diff(omega)
    wts = np.zeros_like(omega)
    wts[:-1] += h / 2
    wts[1:] += h / 2
    return wts


def _stieltjes_discrete(x: np.ndarray, lam: np.ndarray, n_max: int) -> tuple[float, np.ndarray]:
    # lam already includes the doubling for evenness; all x >= 0.
    mass = float(np.sum(lam))
    p_prev = np.zeros_like(x)
    p_cur = np.full_like(x, 1.0 / math.sqrt(mass))
    b_prev = 0.0
    out = np.empty(n_max)
    for k in range(n_max):
        q = x * p_cur - b_prev * p_prev
        b_k = math.sqrt(float(np.sum(lam * q * q)))
        out[k] = b_k
        p_prev, p_cur = p_cur, q / b_k
        b_prev = b_k
    return mass, out


def reconstruct_coefficients(phi: WeightSpec | TabulatedWeight, n_max: int,
                             refine_tol: float = 1e-3) -> LanczosSequence:
    """Rebuild b_1..b_{n_max} from a tabulated weight Phi/2pi on [0, w_max].

    The integrals run over the tabulated range only, with trapezoidal weights
    on the table's own grid. A coarsened grid (every other point) gives the
    refinement check.
    """
    table = phi if isinstance(phi, TabulatedWeight) else table_of(phi)
    if table is None:
        raise ValidationError("reconstruct_coefficients needs a tabulated weight")
    x = table.omega
    w = table.values
    if len(x) < 8:
        raise GridTooCoarse("tabulated grid has fewer than 8 points")
    lam = 2.0 * _trapezoid_weights(x) * w
    if x[0] == 0.0:
        lam[0] *= 0.5  # the origin is shared by both half lines
    mass, b = _stieltjes_discrete(x, lam, n_max)
    xc = x[::2]
    wc = w[::2]
    lam_c = 2.0 * _trapezoid_weights(xc) * wc
    if xc[0] == 0.0:
        lam_c[0] *= 0.5
    _, b_coarse = _stieltjes_discrete(xc, lam_c, n_max)
    change = abs(b_coarse[-1] - b[-1]) / b[-1]
    if change > refine_tol:
        raise GridTooCoarse(f"b_{n_max} moved by {change:.2e} under grid coarsening")
    meta = {"source": "reconstruct", "n": n_max, "points": len(x), "omega_max": float(x[-1]),
            "refinement_change": float(change)}
    return LanczosSequence(b, mass, meta)
