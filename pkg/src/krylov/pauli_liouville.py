"""Infinite-temperature Lanczos iteration for translation-invariant spin-1/2 chains.

Operators are zero-momentum sums sum_x T_x(P) of Pauli strings. Each stored
representative is left aligned (its first nontrivial site is site 0) and packed
into one uint64 key, ``x_mask << 32 | z_mask``, with the string convention
P(x, z) = i^{|x & z|} X^x Z^z so that a site with both bits set is Y.

The inner product is the per-site Hilbert-Schmidt pairing, in which distinct
canonical strings are orthonormal:

    (A|B) = lim_L tr(A^dag B) / (2^L L) = sum_P conj(a_P) b_P.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import BreakdownError, SupportOverflow, TermBudgetExceeded, ValidationError
from .sequence import LanczosSequence

MAX_WINDOW = 31
DEFAULT_MAX_SUPPORT = 28
# About 1 GB of live keys and coefficients; intermediate merges need a few times that.
DEFAULT_MAX_TERMS = 8_000_000
# Fixed work unit; results do not depend on how chunks are spread over threads.
CHUNK = 1 << 15
BREAKDOWN = 1e-12

_LOW = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_I_POW = np.array([1.0, 1.0j, -1.0, -1.0j])


# ---------------------------------------------------------------------------
# single strings


def _width(v: int) -> int:
    return int(v).bit_length()


@dataclass(frozen=True, order=True)
class PauliString:
    """A Pauli string on sites 0..width-1, stored as X and Z bit masks."""

    x_mask: int
    z_mask: int

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for i, ch in enumerate(label.upper()):
            if ch in "XY":
                x |= 1 << i
            if ch in "ZY":
                z |= 1 << i
            if ch not in "IXYZ":
                raise ValidationError(f"bad Pauli label {label!r}")
        return cls(x, z)

    @property
    def width(self) -> int:
        return _width(self.x_mask | self.z_mask)

    @property
    def label(self) -> str:
        out = []
        for i in range(max(self.width, 1)):
            bx, bz = (self.x_mask >> i) & 1, (self.z_mask >> i) & 1
            out.append("IXZY"[bx + 2 * bz])
        return "".join(out)

    def canonical(self) -> "PauliString":
        v = self.x_mask | self.z_mask
        if v == 0:
            return self
        tz = (v & -v).bit_length() - 1
        return PauliString(self.x_mask >> tz, self.z_mask >> tz)

    def shifted(self, k: int) -> "PauliString":
        return PauliString(self.x_mask << k, self.z_mask << k)

    @property
    def key(self) -> int:
        return (self.x_mask << 32) | self.z_mask

    @classmethod
    def from_key(cls, key: int) -> "PauliString":
        key = int(key)
        return cls(key >> 32, key & 0xFFFFFFFF)

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


def _as_string(p: PauliString | str) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString.from_label(p)


# ---------------------------------------------------------------------------
# vectorised helpers


def _split(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return keys >> _SHIFT32, keys & _LOW


def _align(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = x | z
    low = v & (~v + np.uint64(1))
    tz = np.bitwise_count(low - np.uint64(1)).astype(np.uint64)
    return x >> tz, z >> tz


def _widths(keys: np.ndarray) -> np.ndarray:
    x, z = _split(keys)
    v = (x | z).astype(np.float64)
    return np.frexp(v)[1]


def _merge(keys: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum coefficients of equal keys; result sorted by key, exact zeros dropped."""
    if len(keys) == 0:
        return keys, coeffs
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    c = coeffs[order]
    starts = np.flatnonzero(np.concatenate(([True], k[1:] != k[:-1])))
    out_k = k[starts]
    out_c = np.add.reduceat(c, starts)
    keep = out_c != 0
    return out_k[keep], out_c[keep]


# ---------------------------------------------------------------------------
# operator sums


@dataclass(frozen=True)
class TranslationOpSum:
    """sum_x T_x(sum_P c_P P) over all lattice translations.

    ``keys`` are sorted canonical packed strings and ``coeffs`` the matching
    complex coefficients; zero coefficients are never stored.
    """

    keys: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.keys, dtype=np.uint64)
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if k.shape != c.shape or k.ndim != 1:
            raise ValidationError("keys and coeffs must be matching 1-d arrays")
        k.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_terms(cls, terms: Mapping[PauliString | str, complex] | Iterable[tuple[Any, complex]]) -> "TranslationOpSum":
        items = terms.items() if isinstance(terms, Mapping) else terms
        keys, coeffs = [], []
        for p, c in items:
            s = _as_string(p).canonical()
            if s.x_mask | s.z_mask == 0:
                raise ValidationError("the identity has no zero-momentum dynamics")
            if s.width > MAX_WINDOW:
                raise SupportOverflow(f"string of width {s.width} exceeds {MAX_WINDOW}")
            keys.append(s.key)
            coeffs.append(complex(c))
        k, c = _merge(np.array(keys, dtype=np.uint64), np.array(coeffs, dtype=np.complex128))
        return cls(k, c)

    @classmethod
    def empty(cls) -> "TranslationOpSum":
        return cls(np.zeros(0, np.uint64), np.zeros(0, np.complex128))

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def terms(self) -> dict[PauliString, complex]:
        return {PauliString.from_key(k): complex(c) for k, c in zip(self.keys, self.coeffs)}

    @property
    def support_bound(self) -> int:
        return int(_widths(self.keys).max()) if len(self) else 0

    def scaled(self, a: complex) -> "TranslationOpSum":
        return TranslationOpSum(self.keys, self.coeffs * a)

    def add(self, other: "TranslationOpSum", a: complex = 1.0) -> "TranslationOpSum":
        """self + a * other."""
        k, c = _merge(np.concatenate([self.keys, other.keys]),
                      np.concatenate([self.coeffs, a * other.coeffs]))
        return TranslationOpSum(k, c)

    def pruned(self, trunc: float) -> "TranslationOpSum":
        if trunc <= 0:
            return self
        keep = np.abs(self.coeffs) >= trunc
        return TranslationOpSum(self.keys[keep], self.coeffs[keep])

    def shifted(self, k: int = 1) -> "TranslationOpSum":
        """Translate every representative by k sites and re-canonicalise."""
        x, z = _split(self.keys)
        x, z = _align(x << np.uint64(k), z << np.uint64(k))
        keys, coeffs = _merge((x << _SHIFT32) | z, self.coeffs.copy())
        return TranslationOpSum(keys, coeffs)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def inner_product(a: TranslationOpSum, b: TranslationOpSum) -> complex:
    """Per-site Hilbert-Schmidt product (A|B) = sum_P conj(a_P) b_P."""
    _, ia, ib = np.intersect1d(a.keys, b.keys, assume_unique=True, return_indices=True)
    return complex(np.sum(np.conj(a.coeffs[ia]) * b.coeffs[ib]))


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class HamiltonianSpec:
    """H = sum_x T_x(sum_j g_j h_j) with local strings h_j and real couplings g_j."""

    model: str
    terms: tuple[tuple[PauliString, float], ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        terms = tuple((_as_string(p).canonical(), float(g)) for p, g in self.terms if g != 0)
        if not terms:
            raise ValidationError("Hamiltonian has no terms")
        object.__setattr__(self, "terms", terms)

    @property
    def radius(self) -> int:
        return max(p.width for p, _ in self.terms)

    @property
    def tag(self) -> str:
        inner = ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.model}{{{inner}}}"

    def as_opsum(self) -> TranslationOpSum:
        return TranslationOpSum.from_terms([(p, g) for p, g in self.terms])


def mfim(gx: float = 1.4, gz: float = 0.9045) -> HamiltonianSpec:
    """Mixed-field Ising chain: sum Z_i Z_{i+1} + gx X_i + gz Z_i."""
    return HamiltonianSpec("mfim", (("ZZ", 1.0), ("X", gx), ("Z", gz)), {"gx": float(gx), "gz": float(gz)})


def tfim(g: float = 1.0) -> HamiltonianSpec:
    """Transverse-field Ising chain: sum Z_i Z_{i+1} + g X_i."""
    return HamiltonianSpec("tfim", (("ZZ", 1.0), ("X", g)), {"g": float(g)})


def xxz(delta: float = 1.0) -> HamiltonianSpec:
    """(1/4) sum X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1}."""
    return HamiltonianSpec("xxz", (("XX", 0.25), ("YY", 0.25), ("ZZ", 0.25 * delta)), {"delta": float(delta)})


def heisenberg() -> HamiltonianSpec:
    h = xxz(1.0)
    return HamiltonianSpec("heisenberg", h.terms, {})


def custom(terms: Iterable[tuple[PauliString | str, float]]) -> HamiltonianSpec:
    return HamiltonianSpec("custom", tuple(terms), {})


MODELS = {"mfim": mfim, "tfim": tfim, "xxz": xxz, "heisenberg": heisenberg}


def seed_operator(name: str, H: HamiltonianSpec) -> TranslationOpSum:
    """Named seed operators (unnormalised densities)."""
    if name == "energy-current":
        if H.model == "mfim":
            g = H.params["gx"]
        elif H.model == "tfim":
            g = H.params["g"]
        else:
            raise ValidationError(f"energy-current is defined for the Ising chains, not {H.model}")
        return TranslationOpSum.from_terms([("YZ", g), ("ZY", -g)])
    if name == "spin-current":
        if H.model not in ("xxz", "heisenberg"):
            raise ValidationError(f"spin-current is defined for XXZ chains, not {H.model}")
        return TranslationOpSum.from_terms([("XY", 0.25), ("YX", -0.25)])
    if name == "energy-density":
        return H.as_opsum()
    if name == "local-z":
        return TranslationOpSum.from_terms([("Z", 1.0)])
    if name == "yy-bond":
        return TranslationOpSum.from_terms([("YY", 1.0)])
    raise ValidationError(f"unknown seed {name!r}")


SEEDS = ("energy-current", "spin-current", "energy-density", "local-z", "yy-bond")


# ---------------------------------------------------------------------------
# Liouvillian


def _commutator_chunk(H: HamiltonianSpec, keys: np.ndarray, coeffs: np.ndarray):
    px, pz = _split(keys)
    wmax = int(_widths(keys).max())
    out_k, out_c = [], []
    pbits = np.bitwise_count(px & pz).astype(np.int64)
    for h, g in H.terms:
        wh = h.width
        lift = np.uint64(wh - 1)
        ax, az = px << lift, pz << lift
        hbits = bin(h.x_mask & h.z_mask).count("1")
        for s in range(wmax + wh - 1):
            hx, hz = np.uint64(h.x_mask << s), np.uint64(h.z_mask << s)
            odd = (np.bitwise_count((hx & az) ^ (hz & ax)) & 1).astype(bool)
            if not odd.any():
                continue
            bx, bz, cb, pb = ax[odd], az[odd], coeffs[odd], pbits[odd]
            x3, z3 = hx ^ bx, hz ^ bz
            sign = np.bitwise_count(hz & bx).astype(np.int64)
            power = (hbits + pb - np.bitwise_count(x3 & z3).astype(np.int64) + 2 * sign) % 4
            x3, z3 = _align(x3, z3)
            out_k.append((x3 << _SHIFT32) | z3)
            out_c.append((2.0 * g) * _I_POW[power] * cb)
    if not out_k:
        return np.zeros(0, np.uint64), np.zeros(0, np.complex128)
    return _merge(np.concatenate(out_k), np.concatenate(out_c))


def liouvillian_apply(H: HamiltonianSpec, O: TranslationOpSum, max_support: int = DEFAULT_MAX_SUPPORT,
                      threads: int = 1) -> TranslationOpSum:
    """[H, O] in canonical form."""
    if max_support > MAX_WINDOW:
        raise ValidationError(f"max_support is limited to {MAX_WINDOW}")
    if len(O) == 0:
        return O
    if O.support_bound + H.radius - 1 > max_support:
        raise SupportOverflow(
            f"support would reach {O.support_bound + H.radius - 1} > max_support = {max_support}")
    bounds = [(i, min(i + CHUNK, len(O))) for i in range(0, len(O), CHUNK)]

    def work(b):
        return _commutator_chunk(H, O.keys[b[0]:b[1]], O.coeffs[b[0]:b[1]])

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    if len(parts) == 1:
        k, c = parts[0]
    else:
        k, c = _merge(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    return TranslationOpSum(k, c)


def lanczos_from_hamiltonian(H: HamiltonianSpec, seed: TranslationOpSum, n_max: int, trunc: float = 0.0,
                             max_support: int = DEFAULT_MAX_SUPPORT, threads: int = 1,
                             keep_operators: bool = False, max_terms: int = DEFAULT_MAX_TERMS):
    """b_1..b_{n_max} of the seed under L = [H, .].

    With ``keep_operators`` the normalised Krylov operators O_0..O_{n_max} are
    returned as well (as a second tuple element). The run stops with
    TermBudgetExceeded before a step whose projected operator size (current
    size times the last growth ratio) exceeds ``max_terms``.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    if trunc < 0:
        raise ValidationError("trunc must be >= 0")
    norm2 = seed.norm2()
    if norm2 <= 0:
        raise ValidationError("seed operator vanishes")
    o_prev = TranslationOpSum.empty()
    o_cur = seed.scaled(1.0 / np.sqrt(norm2))
    ops = [o_cur] if keep_operators else None
    b = []
    sizes = []
    b_prev = 0.0
    growth = 1.0
    for n in range(1, n_max + 1):
        if len(o_cur) * growth > max_terms:
            raise TermBudgetExceeded(
                f"b_{n} would need about {len(o_cur) * growth:.3g} Pauli strings (budget {max_terms})")
        a = liouvillian_apply(H, o_cur, max_support, threads)
        if b_prev:
            a = a.add(o_prev, -b_prev)
        a = a.pruned(trunc)
        b_n = float(np.sqrt(a.norm2()))
        if b_n < BREAKDOWN:
            raise BreakdownError(f"b_{n} = {b_n:.3e}: Krylov space exhausted", index=n)
        o_prev, o_cur = o_cur, a.scaled(1.0 / b_n)
        b.append(b_n)
        growth = max(1.0, len(o_cur) / max(1, sizes[-1])) if sizes else 1.0
        sizes.append(len(o_cur))
        b_prev = b_n
        if keep_operators:
            ops.append(o_cur)
    meta = {
        "source": "pauli",
        "model": H.tag,
        "n": n_max,
        "trunc": trunc,
        "max_support": max_support,
        "final_support": o_cur.support_bound,
        "terms": sizes,
    }
    seq = LanczosSequence(np.array(b), norm2, meta)
    return (seq, ops) if keep_operators else seq
