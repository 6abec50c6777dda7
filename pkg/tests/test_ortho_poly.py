import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from krylov import ortho_poly as OP, weights as W
from krylov.errors import ValidationError
from krylov.sequence import LanczosSequence

FLAT = LanczosSequence(np.ones(30), 1.0)
HERMITE = W.reference_coefficients(W.gen_hermite(0.0), 60)


def positive_sequences(n_min=4, n_max=30):
    return st.lists(st.floats(min_value=0.2, max_value=5.0), min_size=n_min, max_size=n_max).map(
        lambda b: LanczosSequence(np.array(b), 1.0))


def test_flat_chain_at_zero():
    p = OP.eval_polys(FLAT, 0.0, 20).values
    assert np.array_equal(p[0::2], (-1.0) ** np.arange(11))
    assert np.all(p[1::2] == 0)


def test_hermite_p2_at_zero():
    p = OP.eval_polys(HERMITE, 0.0, 2).values
    assert p[2] == pytest.approx(-HERMITE.b[0] / HERMITE.b[1] / HERMITE.norm, rel=1e-15)
    assert p[2] * HERMITE.norm == pytest.approx(-1 / math.sqrt(2), rel=1e-15)


def test_hermite_orthonormality_by_quadrature():
    def f(w, m, n):
        p = OP.poly_table(HERMITE, np.float64(w), 4)
        return p[m] * p[n] * math.exp(-w * w)

    for m, n in [(2, 2), (2, 0), (3, 1), (4, 4)]:
        val = integrate.quad(f, -np.inf, np.inf, args=(m, n), epsabs=1e-13)[0]
        assert val == pytest.approx(float(m == n), abs=1e-10)


def test_derivative_recurrence_against_finite_difference():
    w, h = 0.7, 1e-6
    pe = OP.eval_polys(HERMITE, w, 20)
    fd = (OP.eval_polys(HERMITE, w + h, 20).values - OP.eval_polys(HERMITE, w - h, 20).values) / (2 * h)
    assert np.allclose(pe.derivs, fd, rtol=1e-6, atol=1e-6)


def test_sech_weighted_peak(sech40):
    w = np.linspace(0, 40, 40001)
    prof = OP.poly_table(sech40, w, 20)[20] ** 2 * W.eval_weight(W.sech(0.0), w)
    assert w[np.argmax(prof)] == pytest.approx(math.sqrt(20 * 19), rel=0.1)


def test_zero_mode_flat_and_hermite():
    assert OP.zero_mode_amplitude(FLAT, 20) == pytest.approx(1.0, rel=1e-15)
    for n in (2, 10, 40):
        direct = OP.eval_polys(HERMITE, 0.0, n).values[n] ** 2
        assert OP.zero_mode_amplitude(HERMITE, n) == pytest.approx(direct, rel=1e-12)


def test_zero_mode_odd_index_rejected():
    with pytest.raises(ValidationError):
        OP.zero_mode_amplitude(FLAT, 3)


def test_zero_mode_no_underflow():
    seq = W.reference_coefficients(W.gen_hermite(0.9), 4000)
    assert np.isfinite(OP.log_zero_mode(seq, 4000))
    assert np.all(OP.zero_mode_series(seq, 4000) > 0)


def test_kernel_rank_one():
    seq = LanczosSequence(np.array([1.3, 0.7]), 2.5)
    assert OP.cd_kernel(seq, 0.3, -1.1, 1) == pytest.approx(1 / 2.5)


def test_kernel_diag_vs_direct(sech40):
    rng = np.random.default_rng(11)
    x = rng.uniform(-35, 35, 20)
    assert np.max(np.abs(OP.kernel_diag(sech40, x, 40) / OP.kernel_direct(sech40, x, x, 40) - 1)) < 1e-10


def test_kernel_at_zero_even_terms(sech40):
    amp = OP.zero_mode_series(sech40, 38)
    assert OP.cd_kernel(sech40, 0.0, 0.0, 40) == pytest.approx(np.sum(amp), rel=1e-12)


def test_kernel_near_coincident_branch(sech40):
    x = 3.0
    assert OP.cd_kernel(sech40, x, x + 1e-10, 40) == pytest.approx(OP.kernel_direct(sech40, x, x, 40), rel=1e-8)


def test_log_form_far_outside(sech40):
    pe = OP.eval_polys(sech40, 500.0, 40)
    assert pe.log_form and pe.values is None
    assert np.all(np.isfinite(pe.log_abs))
    direct = OP.poly_table(sech40, np.float64(500.0), 40)
    assert pe.log_abs[40] == pytest.approx(math.log(abs(direct[40])), rel=1e-12)
    assert pe.sign[40] == np.sign(direct[40])


@settings(max_examples=50, deadline=None)
@given(positive_sequences())
def test_zero_mode_sign_and_odd_vanishing(seq):
    n = len(seq.b) - len(seq.b) % 2
    p = OP.eval_polys(seq, 0.0, n).values
    assert np.all(p[1::2] == 0)
    assert np.all(np.sign(p[0::2]) == (-1.0) ** np.arange(n // 2 + 1))


@settings(max_examples=50, deadline=None)
@given(positive_sequences(), st.floats(min_value=-2.0, max_value=2.0), st.floats(min_value=-2.0, max_value=2.0))
def test_christoffel_darboux_property(seq, x, y):
    n = len(seq.b)
    direct = OP.kernel_direct(seq, x, y, n)
    got = OP.cd_kernel(seq, x, y, n)
    scale = math.sqrt(OP.kernel_direct(seq, x, x, n) * OP.kernel_direct(seq, y, y, n))
    assert abs(got - direct) <= 1e-9 * scale


@settings(max_examples=30, deadline=None)
@given(positive_sequences(), st.floats(min_value=-3.0, max_value=3.0))
def test_consecutive_never_both_zero(seq, w):
    p = OP.poly_table(seq, np.float64(w), len(seq.b))
    assert np.all(p[:-1] ** 2 + p[1:] ** 2 > 0)
