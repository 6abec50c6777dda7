import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from krylov import bootstrap as B, coulomb_gas, greens, weight_lanczos as WL, weights as W
from krylov.errors import StepTooCoarse, ValidationError
from krylov.sequence import LanczosSequence


@pytest.fixture(scope="module")
def bulk40(sech40):
    return B.bulk_bootstrap(sech40, 40, method="rk4")


@pytest.fixture(scope="module")
def gauss_half40():
    return WL.stieltjes_coefficients(W.gaussian_rho(-0.5, 1.0), 40)


def test_bulk_estimate_invariants(bulk40):
    assert bulk40.cumulative[0] == 0.0
    assert np.all(bulk40.values > 0) and np.all(bulk40.sigma > 0)
    assert bulk40.omega[-1] <= 0.99 * bulk40.beta
    assert bulk40.meta["step_change"] < 1e-3


def test_bulk_matches_continued_fraction(bulk40, sech40):
    ref = greens.semicircle_recovery(sech40, 40, bulk40.omega)
    assert np.max(np.abs(bulk40.values / ref - 1)) < 1e-6


def test_bulk_close_to_exact_weight(bulk40):
    keep = bulk40.omega <= 0.8 * bulk40.beta
    exact = 2 * math.pi * W.eval_weight(W.sech(0.0), bulk40.omega[keep])
    # the finite-n recovery is biased by ~1% at w = 0 and ~4.4% at 0.8 beta
    assert np.max(np.abs(bulk40.values[keep] / exact - 1)) < 0.05


def test_bulk_sum_rule(bulk40, sech40):
    total = 2 * integrate.trapezoid(bulk40.values, bulk40.omega) / (2 * math.pi)
    assert total == pytest.approx(sech40.norm2, rel=1e-4)


def test_bulk_charge_counts_levels(bulk40):
    assert bulk40.cumulative[-1] == pytest.approx(20.0, rel=0.02)


def test_bulk_round_trip(bulk40, sech40):
    tab = W.tabulated(bulk40.omega, bulk40.values / (2 * math.pi))
    rec = WL.reconstruct_coefficients(tab, 40)
    assert np.max(np.abs(rec.b / sech40.b - 1)) < 1e-2


def test_euler_refinement_on_inner_range(sech40):
    coarse = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=10.0, check_step=False)
    fine = B.bulk_bootstrap(sech40, 40, 5e-4, omega_max=10.0, check_step=False)
    assert abs(fine.values[-1] / coarse.values[-1] - 1) < 1e-3


def test_euler_step_too_coarse(sech40):
    with pytest.raises(StepTooCoarse):
        B.bulk_bootstrap(sech40, 40, 0.05)


def test_finite_difference_derivative(sech40):
    a = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=20.0, method="rk4", check_step=False)
    b = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=20.0, method="rk4", check_step=False, derivative="fd")
    assert np.max(np.abs(b.sigma / a.sigma - 1)) < 1e-4


def test_nonzero_start(sech40):
    ref = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=15.0, method="rk4", check_step=False)
    late = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=15.0, method="rk4", check_step=False, omega_start=5.0)
    assert late.meta["phase_mod_one"]
    assert np.allclose(late.values, np.interp(late.omega, ref.omega, ref.values), rtol=1e-3)


@pytest.mark.parametrize("kwargs", [
    {"n": 1}, {"n": 41}, {"n": 40, "d_omega": 0.0}, {"n": 40, "omega_max": 50.0},
    {"n": 40, "method": "midpoint"}, {"n": 40, "omega_start": 30.0, "omega_max": 20.0},
])
def test_bulk_argument_errors(sech40, kwargs):
    n = kwargs.pop("n")
    with pytest.raises(ValidationError):
        B.bulk_bootstrap(sech40, n, **kwargs)


def test_csv_layout(sech40):
    est = B.bulk_bootstrap(sech40, 10, 0.1, omega_max=1.0, check_step=False)
    lines = est.to_csv().splitlines()
    assert lines[0] == "omega,phi_or_envelope,sigma,I"
    assert len(lines) == len(est.omega) + 1


def test_bessel_sech_envelope(sech_half40):
    est = B.bessel_bootstrap(sech_half40, 40, -0.5, omega_max=2.0)
    exact = W.eval_weight(W.sech(-0.5), est.omega[1:]) / est.omega[1:] ** -0.5
    assert np.max(np.abs(est.values[1:] / exact - 1)) < 0.05
    assert est.is_envelope


def test_bessel_gaussian_envelope(gauss_half40):
    spec = W.gaussian_rho(-0.5, 1.0)
    est = B.bessel_bootstrap(gauss_half40, 40, -0.5, omega_max=2.0)
    exact = W.eval_weight(spec, est.omega[1:]) / est.omega[1:] ** -0.5
    assert np.max(np.abs(est.values[1:] / exact - 1)) < 0.05


def test_bessel_full_reduces_to_bulk(sech40):
    bes = B.bessel_bootstrap(sech40, 40, 0.0, 1e-3, omega_max=2.0, full=True)
    bulk = B.bulk_bootstrap(sech40, 40, 1e-3, omega_max=2.0, check_step=False)
    assert np.max(np.abs(bes.phi / bulk.values - 1)) < 1e-6


def test_bessel_refinement(sech_half40):
    a = B.bessel_bootstrap(sech_half40, 40, -0.5, 1e-3, omega_max=2.0)
    b = B.bessel_bootstrap(sech_half40, 40, -0.5, 5e-4, omega_max=2.0)
    assert abs(b.values[-1] / a.values[-1] - 1) < 1e-3


def test_bessel_initial_forms_agree_at_large_n(sech_half40):
    env_s, sig_s = B.bessel_initial(sech_half40, 40, -0.5)
    env_f, sig_f = B.bessel_initial(sech_half40, 40, -0.5, full=True)
    assert env_s == pytest.approx(env_f, rel=0.05)
    assert sig_s == pytest.approx(sig_f, rel=0.05)


def test_bessel_odd_n_warns(sech_half40):
    with pytest.warns(RuntimeWarning, match="odd n"):
        B.bessel_bootstrap(sech_half40, 39, -0.5, 1e-2, omega_max=0.5)


def test_bessel_rho_domain(sech_half40):
    with pytest.raises(ValidationError):
        B.bessel_bootstrap(sech_half40, 40, -1.0)


def test_airy_matches_bulk_in_overlap(sech40, bulk40):
    est = B.airy_bootstrap(sech40, 40)
    keep = est.omega <= 0.8 * est.beta
    ref = np.interp(est.omega[keep], bulk40.omega, bulk40.values)
    assert np.max(np.abs(est.phi[keep] / ref - 1)) < 0.05
    assert est.f[0] == 0.0 and est.cumulative[0] == 20.0


def test_airy_square_root_edge(sech40):
    est = B.airy_bootstrap(sech40, 40, omega_min=0.9 * 2 * sech40.b[39])
    ratio = est.sigma[1:] / np.sqrt(est.beta - est.omega[1:])
    assert est.sigma[0] == 0.0
    assert np.all(np.isfinite(ratio)) and np.max(ratio) < 10 * np.median(ratio)


def test_airy_h_estimate_vs_coulomb_gas(sech40):
    est = B.airy_h_estimate(sech40, 40)
    ref = coulomb_gas.h_function(W.sech(0.0), 40, 1.0)
    assert est == pytest.approx(ref, rel=0.25)


def test_airy_h_estimate_hermite():
    seq = W.reference_coefficients(W.gen_hermite(0.0), 400)
    assert B.airy_h_estimate(seq, 400) == pytest.approx(4.0, rel=0.01)


def test_airy_refinement(sech40):
    probe = 0.9 * 2 * sech40.b[39]
    a = B.airy_bootstrap(sech40, 40, 0.0, 1e-3, omega_min=probe)
    b = B.airy_bootstrap(sech40, 40, 0.0, 5e-4, omega_min=probe)
    assert abs(b.phi[-1] / a.phi[-1] - 1) < 1e-3


def test_airy_omega_min_checked(sech40):
    with pytest.raises(ValidationError):
        B.airy_bootstrap(sech40, 40, omega_min=100.0)


def test_phi_positive_on_flat_chain():
    seq = LanczosSequence(np.ones(20), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        est = B.bulk_bootstrap(seq, 20, 1e-3, omega_max=1.5, method="rk4")
    assert np.allclose(est.values, 2 * np.sqrt(4 - est.omega**2) / 2, rtol=1e-9)
