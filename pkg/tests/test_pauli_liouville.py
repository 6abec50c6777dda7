import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from krylov import pauli_liouville as P
from krylov.errors import BreakdownError, SupportOverflow, TermBudgetExceeded, ValidationError

from oracles import dense_lanczos, moment_lanczos, translation_sum


def _dense_terms(opsum):
    return [(s.label, c) for s, c in opsum.terms.items()]


def test_label_roundtrip():
    s = P.PauliString.from_label("XYZ")
    assert s.label == "XYZ"
    assert P.PauliString.from_key(s.key) == s
    assert P.PauliString.from_label("IIXZ").canonical().label == "XZ"


def test_bad_label():
    with pytest.raises(ValidationError):
        P.PauliString.from_label("XA")


@pytest.mark.parametrize("g", [0.5, 1.0, 1.7])
def test_tfim_field_commutator(g):
    H = P.tfim(g)
    out = P.liouvillian_apply(H, P.TranslationOpSum.from_terms([("Z", 1.0)]))
    assert out.terms == {P.PauliString.from_label("Y"): pytest.approx(-2j * g)}


def test_tfim_commutator_against_dense_four_sites():
    H = P.tfim(1.3)
    O = P.TranslationOpSum.from_terms([("Z", 1.0), ("XY", 0.4)])
    got = translation_sum(_dense_terms(P.liouvillian_apply(H, O)), 4).toarray()
    Hd = translation_sum([(s.label, g) for s, g in H.terms], 4)
    Od = translation_sum(_dense_terms(O), 4)
    want = (Hd @ Od - Od @ Hd).toarray()
    assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("H", [P.mfim(), P.tfim(0.7), P.xxz(2.0), P.heisenberg()], ids=lambda h: h.model)
def test_hamiltonian_commutes_with_itself(H):
    assert len(P.liouvillian_apply(H, H.as_opsum())) == 0


@pytest.mark.parametrize("labels, expected", [
    ([("Z", 1.0)], 1.0),
    ([("X", 2.0), ("ZZ", 1j)], 5.0),
])
def test_inner_product_norms(labels, expected):
    A = P.TranslationOpSum.from_terms(labels)
    assert P.inner_product(A, A) == pytest.approx(expected)


@pytest.mark.parametrize("H, seed, norm2", [
    (P.mfim(1.4, 0.9045), "energy-current", 2 * 1.4**2),
    (P.xxz(1.5), "spin-current", 1 / 8),
])
def test_seed_norms(H, seed, norm2):
    A = P.seed_operator(seed, H)
    assert A.norm2() == pytest.approx(norm2, rel=1e-15)


CASES = [
    ("mfim", P.mfim(1.4, 0.9045), "energy-current"),
    ("xxz", P.xxz(2.0), "spin-current"),
    ("tfim", P.tfim(1.0), "yy-bond"),
]


@pytest.mark.slow
@pytest.mark.parametrize("name, H, seed", CASES, ids=[c[0] for c in CASES])
def test_against_dense_chain(name, H, seed):
    A = P.seed_operator(seed, H)
    ours = P.lanczos_from_hamiltonian(H, A, 6)
    dense, norm2 = dense_lanczos([(s.label, g) for s, g in H.terms], _dense_terms(A), 6, L=12)
    assert ours.norm2 == pytest.approx(norm2, rel=1e-12)
    assert np.max(np.abs(ours.b / dense - 1)) < 1e-10


def test_mfim_against_moment_oracle():
    H = P.mfim()
    A = P.seed_operator("energy-current", H)
    o = A.scaled(1 / np.sqrt(A.norm2()))
    moments = [1.0]
    for _ in range(10):
        o = P.liouvillian_apply(H, o)
        moments.append(o.norm2())
    ref = moment_lanczos(moments, 10)
    got = P.lanczos_from_hamiltonian(H, A, 10).b
    assert np.max(np.abs(got / ref - 1)) < 1e-10


def test_conserved_seed_breaks_down():
    H = P.mfim()
    with pytest.raises(BreakdownError):
        P.lanczos_from_hamiltonian(H, H.as_opsum(), 3)


def test_krylov_operators_orthonormal_and_traceless_diagonal():
    H = P.mfim()
    seq, ops = P.lanczos_from_hamiltonian(H, P.seed_operator("energy-current", H), 8, keep_operators=True)
    gram = np.array([[P.inner_product(a, b) for b in ops] for a in ops])
    assert np.max(np.abs(gram - np.eye(len(ops)))) < 1e-10
    for o in ops:
        assert abs(P.inner_product(o, P.liouvillian_apply(H, o))) < 1e-10


def test_translation_invariance():
    H = P.xxz(1.5)
    _, ops = P.lanczos_from_hamiltonian(H, P.seed_operator("spin-current", H), 5, keep_operators=True)
    for o in ops:
        s = o.shifted(3)
        assert np.array_equal(s.keys, o.keys) and np.array_equal(s.coeffs, o.coeffs)


def test_support_overflow():
    H = P.mfim()
    with pytest.raises(SupportOverflow):
        P.lanczos_from_hamiltonian(H, P.seed_operator("energy-current", H), 10, max_support=4)


def test_term_budget():
    H = P.heisenberg()
    with pytest.raises(TermBudgetExceeded):
        P.lanczos_from_hamiltonian(H, P.seed_operator("spin-current", H), 20, max_terms=1000)


def test_truncation_recorded_and_small_effect():
    H = P.mfim()
    A = P.seed_operator("energy-current", H)
    exact = P.lanczos_from_hamiltonian(H, A, 10)
    cut = P.lanczos_from_hamiltonian(H, A, 10, trunc=1e-8)
    assert cut.meta["trunc"] == 1e-8
    assert np.max(np.abs(cut.b / exact.b - 1)) < 1e-6


@pytest.mark.parametrize("threads", [1, 2, 4])
def test_thread_count_bit_identical(threads):
    H = P.heisenberg()
    A = P.seed_operator("spin-current", H)
    base = P.lanczos_from_hamiltonian(H, A, 10, threads=1)
    assert np.array_equal(P.lanczos_from_hamiltonian(H, A, 10, threads=threads).b, base.b)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["X", "Y", "Z", "XZ", "YY", "ZXY"]),
                          st.complex_numbers(min_magnitude=0.1, max_magnitude=2.0)), min_size=1, max_size=5))
def test_liouvillian_is_hermitian_superoperator(terms):
    # (B|L A) = (L B|A) for random A and B = L A
    H = P.mfim()
    A = P.TranslationOpSum.from_terms(terms)
    B = P.liouvillian_apply(H, A)
    lhs = P.inner_product(B, P.liouvillian_apply(H, A))
    rhs = P.inner_product(P.liouvillian_apply(H, B), A)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
