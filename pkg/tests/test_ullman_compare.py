import math

import numpy as np
import pytest

from krylov import coulomb_gas as CG, ullman_compare as UC, weights as W
from krylov.errors import ValidationError

LOG_RANGE = [100, 200, 500, 1000, 2000, 5000, 10000]


def test_quadratic_is_semicircle():
    m = CG.equilibrium_density(W.gen_hermite(0.0), 50, points=2001)
    x, psi = UC.rescaled_measure(m)
    assert np.max(np.abs(psi - 2 / math.pi * np.sqrt(1 - x * x))) < 1e-12
    assert UC.sup_distance(m, 2.0) < 1e-12
    assert UC.normalization(m) == pytest.approx(1.0, abs=1e-3)


def test_edge_zero(sech40_measure):
    x, psi = UC.rescaled_measure(sech40_measure)
    assert x[-1] == 1.0 and psi[-1] == 0.0


def test_sech_distance_reported(sech40_measure):
    d = UC.sup_distance(sech40_measure, 1.0)
    assert math.isfinite(d) and d > 0
    assert UC.normalization(sech40_measure) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("p", [2.0, 4.0])
def test_freud_matches_ullman(p):
    for n in (100, 1000, 10000):
        assert UC.sup_distance(CG.equilibrium_density(W.freud(p), n, points=2001), p) < 1e-10


def test_strong_confinement_algebraic():
    tab = UC.confinement_diagnostic(W.confining(2.0), LOG_RANGE, threads=3)
    assert tab.growth == "algebraic"
    assert tab.exponent == pytest.approx(0.5, abs=0.1)
    assert np.all(tab.sigma0 > 0)


def test_marginal_confinement_logarithmic():
    tab = UC.confinement_diagnostic(W.confining(1.0), LOG_RANGE)
    assert tab.growth == "logarithmic"
    ratio = tab.sigma0 / np.log(tab.n)
    assert np.all(ratio > 0) and ratio.max() / ratio.min() < 1.5
    assert np.all(np.diff(tab.sigma0) > 0)


def test_bounded_class():
    n = np.array([10.0, 100.0, 1000.0, 10000.0])
    assert UC.classify_growth(n, np.array([1.0, 1.01, 0.99, 1.0]))[2] == "bounded"
    exp, _, cls = UC.classify_growth(n, n**0.5)
    assert cls == "algebraic" and exp == pytest.approx(0.5, rel=1e-12)


def test_thread_count_irrelevant():
    a = UC.confinement_diagnostic(W.sech(0.0), [10, 40, 160], threads=1)
    b = UC.confinement_diagnostic(W.sech(0.0), [10, 40, 160], threads=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "n,beta_n,sigma0"


@pytest.mark.parametrize("ns", [[10, 20], [10, 30, 20], [10, 10, 20]])
def test_n_list_checked(ns):
    with pytest.raises(ValidationError):
        UC.confinement_diagnostic(W.sech(0.0), ns)
