import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from krylov import coulomb_gas, ortho_poly, universality as U, weights as W
from krylov.errors import InversionOutOfRange, ValidationError, WeightUnavailable
from krylov.sequence import LanczosSequence

SECH = W.sech(0.0)
reals = st.floats(min_value=-4.0, max_value=4.0)


@pytest.fixture(scope="module")
def sech_map(sech40_measure):
    return U.UnfoldingMap.from_measure(sech40_measure, 5.0)


def test_kernel_diagonal(sech40):
    x = np.linspace(-30, 30, 13)
    direct = W.eval_weight(SECH, x) * np.sum(ortho_poly.poly_table(sech40, x, 40)[:40] ** 2, axis=0)
    assert np.allclose(U.weighted_kernel(sech40, SECH, x, x, 40), direct, rtol=1e-10)


def test_kernel_rank_one():
    seq = LanczosSequence(np.array([1.0, 2.0]), 3.0)
    x, y = 0.2, -0.7
    expected = math.sqrt(W.eval_weight(SECH, x) * W.eval_weight(SECH, y)) / 3.0
    assert U.weighted_kernel(seq, SECH, x, y, 1) == pytest.approx(expected, rel=1e-14)


def test_kernel_offdiag_direct(sech40):
    rng = np.random.default_rng(5)
    x, y = rng.uniform(-25, 25, (2, 20))
    direct = np.sqrt(W.eval_weight(SECH, x) * W.eval_weight(SECH, y)) * ortho_poly.kernel_direct(sech40, x, y, 40)
    assert np.allclose(U.weighted_kernel(sech40, SECH, x, y, 40), direct, rtol=1e-10)


def test_kernel_outside_support():
    seq = LanczosSequence(np.full(4, 0.5), 1.0)
    with pytest.raises(WeightUnavailable):
        U.weighted_kernel(seq, W.semicircle(1.0), 1.5, 0.0, 4)


def test_map_round_trip(sech_map):
    rng = np.random.default_rng(2)
    lo, hi = sech_map.domain
    u = rng.uniform(lo, hi, 50)
    assert np.max(np.abs(sech_map(sech_map.inverse(u)) - u)) < 1e-8
    assert sech_map(5.0) == pytest.approx(0.0, abs=1e-12)


def test_map_out_of_range(sech_map):
    with pytest.raises(InversionOutOfRange):
        sech_map.inverse(sech_map.domain[1] + 1.0)


def test_map_must_increase():
    with pytest.raises(ValidationError):
        U.UnfoldingMap(0.0, np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 1.0]), np.ones(3))


def test_map_needs_zero_start():
    with pytest.raises(ValidationError):
        U.UnfoldingMap.from_cumulative([1.0, 2.0], [0.0, 1.0], [1.0, 1.0], 1.5)


@pytest.mark.parametrize("anchor", [0.0, 6.0, 12.0, 18.0, 23.0])
def test_unfolded_diagonal_is_one(sech40, sech40_measure, anchor):
    val = U.unfolded_kernel_ratio(sech40, SECH, sech40_measure, anchor, 0.0, 0.0, 40)
    assert val == pytest.approx(1.0, rel=0.02)


@pytest.mark.parametrize("anchor", [0.0, 10.0])
def test_sine_collapse(sech40, sech40_measure, anchor):
    u = np.linspace(-1.5, 1.5, 31)
    uu, vv = np.meshgrid(u, u)
    meas = U.unfolded_kernel_ratio(sech40, SECH, sech40_measure, anchor, uu, vv, 40)
    assert np.max(np.abs(meas - U.sine_kernel(uu, vv))) < 0.05


def test_unfolded_symmetry(sech40, sech_map):
    a = U.unfolded_kernel_ratio(sech40, SECH, sech_map, 5.0, 0.7, -1.9, 40)
    b = U.unfolded_kernel_ratio(sech40, SECH, sech_map, 5.0, -1.9, 0.7, 40)
    assert a == pytest.approx(b, rel=1e-12)


def test_sine_diagonal():
    assert U.sine_kernel(0.3, 0.3) == 1.0
    assert U.sine_kernel(0.5, 0.0) == pytest.approx(2 / math.pi, rel=1e-15)


def test_airy_diagonal():
    ai, aip, _, _ = special.airy(0.0)
    assert U.airy_kernel(0.0, 0.0) == pytest.approx(aip**2, rel=1e-15)
    for u in (-2.0, 0.5):
        h = 1e-5
        near = U.airy_kernel(u + h, u - h)
        assert U.airy_kernel(u, u) == pytest.approx(near, rel=1e-8)


def test_bessel_rho0_is_sine():
    u = np.linspace(0.1, 5, 9)
    uu, vv = np.meshgrid(u, u)
    assert np.allclose(U.bessel_kernel(0.0, uu, vv).real, U.sine_kernel(uu, vv), atol=1e-12)


def test_bessel_diagonal_large_argument():
    u = 50 / math.pi
    assert U.bessel_kernel(0.0, u, u).real == pytest.approx(1.0, abs=1e-3)
    assert U.bessel_kernel(0.6, u, u).real == pytest.approx(1.0, abs=1e-2)


def test_bessel_diagonal_branch():
    u, h = 0.8, 1e-5
    assert U.bessel_kernel(-0.5, u, u) == pytest.approx(U.bessel_kernel(-0.5, u + h, u - h), rel=1e-8)


def test_bessel_reference_phase():
    # for u, v > 0 the phase is trivial
    assert U.bessel_reference(-0.5, 0.4, 0.9) == pytest.approx(U.bessel_kernel(-0.5, 0.4, 0.9).real, rel=1e-15)
    assert np.isfinite(U.bessel_reference(-0.5, 0.4, -0.4))


@settings(max_examples=60, deadline=None)
@given(reals, reals, st.floats(min_value=-0.9, max_value=2.0))
def test_reference_kernels_symmetric(u, v, rho):
    assert U.sine_kernel(u, v) == U.sine_kernel(v, u)
    assert U.airy_kernel(u, v) == pytest.approx(U.airy_kernel(v, u), rel=1e-13, abs=1e-300)
    assert U.bessel_kernel(rho, abs(u) + 0.01, abs(v) + 0.02) == pytest.approx(
        U.bessel_kernel(rho, abs(v) + 0.02, abs(u) + 0.01), rel=1e-12, abs=1e-300)


def test_bessel_collapse(sech_half40, sech_half40_measure):
    spec = W.sech(-0.5)
    u = np.linspace(0.01, 1.0, 25)
    meas = U.unfolded_kernel_ratio(sech_half40, spec, sech_half40_measure, 0.0, u, -u, 40)
    ref = U.bessel_reference(-0.5, u, -u)
    scale = u**0.5
    assert np.max(np.abs(meas * scale - ref * scale)) / np.max(np.abs(ref * scale)) < 0.1


def test_airy_collapse(sech40):
    measure = coulomb_gas.equilibrium_density(SECH, 40, points=20001)
    fmap = U.UnfoldingMap.edge(measure)
    u = np.linspace(-3, 0, 31)
    meas = U.unfolded_kernel_ratio(sech40, SECH, fmap, measure.beta_n, u, np.zeros_like(u), 40)
    ref = U.airy_kernel(u, 0.0)
    assert np.max(np.abs(meas - ref)) / np.max(np.abs(ref)) < 0.1
