import math

import numpy as np
import pytest
from scipy.special import comb

from krylov import ortho_poly, weight_lanczos as WL, weights as W
from krylov.errors import GridTooCoarse, ValidationError

from oracles import moment_lanczos


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.5, 1.0])
def test_gen_hermite_closed_form(rho):
    spec = W.gen_hermite(rho)
    got = WL.stieltjes_coefficients(spec, 50)
    ref = W.reference_coefficients(spec, 50)
    assert np.max(np.abs(got.b / ref.b - 1)) < 1e-10
    assert got.norm2 == pytest.approx(ref.norm2, rel=1e-12)


@pytest.mark.parametrize("rho", [-0.5, 0.5])
def test_gaussian_rho_closed_form(rho):
    spec = W.gaussian_rho(rho, 1.0)
    got = WL.stieltjes_coefficients(spec, 40)
    assert np.max(np.abs(got.b / W.reference_coefficients(spec, 40).b - 1)) < 1e-9


def test_semicircle_is_chebyshev_u():
    got = WL.stieltjes_coefficients(W.semicircle(1.0), 20)
    assert np.max(np.abs(got.b - 0.5)) < 1e-12
    # moments of (2/pi) sqrt(1 - w^2): Catalan(k) / 4^k
    moments = [comb(2 * k, k, exact=True) / (k + 1) / 4**k for k in range(11)]
    assert np.max(np.abs(moment_lanczos(moments, 10) - got.b[:10])) < 1e-12


def test_uniform_is_legendre():
    got = WL.stieltjes_coefficients(W.uniform(1.0), 30)
    n = np.arange(1, 31)
    assert np.max(np.abs(got.b - n / np.sqrt(4 * n * n - 1))) < 1e-12
    # the moment route loses digits as Hankel matrices condition badly
    moments = [1.0 / (2 * k + 1) for k in range(11)]
    assert np.max(np.abs(moment_lanczos(moments, 10) - got.b[:10])) < 1e-10


def test_sech_meixner_pollaczek():
    # sech(pi w) has b_n = n/2
    got = WL.stieltjes_coefficients(W.sech(0.0), 40)
    assert np.max(np.abs(got.b / (np.arange(1, 41) / 2) - 1)) < 1e-12


def test_freud_kinked_origin_converges():
    lo = WL.stieltjes_coefficients(W.freud(1.5), 20, precision_bits=256)
    hi = WL.stieltjes_coefficients(W.freud(1.5), 20, precision_bits=512)
    assert np.max(np.abs(lo.b / hi.b - 1)) < 1e-12


def test_precision_doubling_within_drift():
    spec = W.quartic_root(-0.5, 2.0)
    a = WL.stieltjes_coefficients(spec, 40, precision_bits=256)
    b = WL.stieltjes_coefficients(spec, 40, precision_bits=512)
    assert abs(a.b[-1] - b.b[-1]) <= max(a.meta["max_drift"], 1e-15 * b.b[-1])


def test_drift_monitor_recorded():
    seq = WL.stieltjes_coefficients(W.sech(-0.5), 20)
    assert len(seq.meta["drift"]) == 20
    assert seq.meta["max_drift"] < 1e-20
    assert seq.b_text is not None and float(seq.b_text[4]) == seq.b[4]


@pytest.mark.parametrize("kwargs", [{"n_max": 0}, {"n_max": 5, "precision_bits": 64}])
def test_invalid_arguments(kwargs):
    with pytest.raises(ValidationError):
        WL.stieltjes_coefficients(W.sech(0.0), **kwargs)


def test_christoffel_darboux_identity(sech40):
    rng = np.random.default_rng(3)
    x = rng.uniform(-30, 30, 20)
    p, d = ortho_poly.poly_table(sech40, x, 40, derivs=True)
    direct = np.sum(p[:40] ** 2, axis=0)
    det = sech40.b[39] * (p[39] * d[40] - d[39] * p[40])
    assert np.max(np.abs(det / direct - 1)) < 1e-8


def test_reconstruct_exact_sech_table(sech40):
    grid = np.linspace(0.0, 60.0, 30001)
    tab = W.TabulatedWeight(grid, W.eval_weight(W.sech(0.0), grid))
    got = WL.reconstruct_coefficients(tab, 40)
    assert np.max(np.abs(got.b / sech40.b - 1)) < 1e-3


def test_reconstruct_uniform():
    grid = np.linspace(0.0, 1.0, 40001)
    got = WL.reconstruct_coefficients(W.TabulatedWeight(grid, np.full_like(grid, 1.0)), 10)
    n = np.arange(1, 11)
    assert np.max(np.abs(got.b - n / np.sqrt(4 * n * n - 1))) < 1e-3


def test_reconstruct_too_coarse():
    grid = np.linspace(0.0, 40.0, 60)
    tab = W.TabulatedWeight(grid, W.eval_weight(W.sech(0.0), grid))
    with pytest.raises(GridTooCoarse):
        WL.reconstruct_coefficients(tab, 30)


def test_reconstruct_needs_table():
    with pytest.raises(ValidationError):
        WL.reconstruct_coefficients(W.sech(0.0), 5)


def test_thread_count_bit_identical():
    a = WL.stieltjes_coefficients(W.sech(-0.5), 30, threads=1)
    b = WL.stieltjes_coefficients(W.sech(-0.5), 30, threads=3)
    assert a.b_text == b.b_text
    assert math.isclose(a.norm2, b.norm2, rel_tol=0, abs_tol=0)
