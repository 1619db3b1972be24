import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cglm import appendix
from cglm.appendix import (
    A_EFF, COARSE, FINE, AppendixSetup, RegimeError, coarse_regime_setups, discrete_solution,
    element_means, expansion_terms, fem_solution, fine_regime_setups, left_error, lower_bound,
    lower_bound_experiment, ramp_error,
)

C_LOW = (2 - math.sqrt(3)) / (36 * math.sqrt(2))


def test_constants():
    assert C_LOW == pytest.approx(0.0052630, rel=1e-4)
    assert appendix.COARSE_LIMIT == pytest.approx(0.0386751, rel=1e-5)


def _means_by_quadrature(s: AppendixSetup, pts: int = 4001) -> np.ndarray:
    rho = s.transition()
    out = []
    for j in range(2 * s.N):
        x = np.linspace(j * s.h, (j + 1) * s.h, pts)
        r = rho(x[:, None])
        y = r * (2 + np.sin(x / s.eps)) + (1 - r) * A_EFF
        out.append(np.trapezoid(y, x) / s.h if hasattr(np, "trapezoid") else np.trapz(y, x) / s.h)
    return np.array(out)


def test_closed_form_means_match_quadrature():
    s = AppendixSetup(16, 4, 0.02)
    assert np.allclose(element_means(s), _means_by_quadrature(s), atol=1e-6)


def test_expansion_remainder():
    for s in coarse_regime_setups():
        b = element_means(s)
        lead, rem = expansion_terms(s)
        ramp = b[s.N - 2 * s.M: s.N - s.M]
        assert np.abs(ramp - A_EFF - lead).max() <= rem


def test_ramp_error_closed_form():
    s = coarse_regime_setups()[0]
    b = element_means(s)
    j = np.arange(1, s.M + 1)
    expect = math.sqrt(s.h * np.sum((1 / A_EFF - 1 / b[s.N - 2 * s.M + j - 1]) ** 2))
    assert ramp_error(s) == pytest.approx(expect, rel=1e-12)


def test_left_part_is_exact():
    for s in coarse_regime_setups() + fine_regime_setups():
        assert left_error(s) <= 1e-14


@pytest.mark.parametrize("N", [64, 256, 1024])
@pytest.mark.parametrize("M", [4, 8])
def test_general_assembly_equivalence(N, M):
    s = AppendixSetup(N, M, 0.03 / (2 * N))
    v, w = discrete_solution(s), fem_solution(s)
    assert np.max(np.abs(w[1:] - v[1:]) / v[1:]) <= 1e-12


def test_both_regimes_sharp():
    for setups in (coarse_regime_setups(), fine_regime_setups()):
        r = lower_bound_experiment(setups)
        assert r.slope == pytest.approx(0.5, abs=0.1)
        assert all(e >= b for e, b in zip(r.errors, r.bounds))
        assert all(e >= C_LOW * math.sqrt(k) for e, k in zip(r.errors, r.K_measure))
        assert r.to_csv().splitlines()[0] == "L,K_measure,error,lower_bound"


def test_fine_regime_explicit_bound_is_clipped():
    s = fine_regime_setups()[0]
    assert lower_bound(s) >= 0.0


@pytest.mark.parametrize("setup,msg", [
    (AppendixSetup(128, 2, 1e-4), "M >= 3"),
    (AppendixSetup(128, 4, 0.01 / 256 * 10), "eps/h"),
    (AppendixSetup(1024, 32, 0.01, FINE), "5 pi eps"),
    (AppendixSetup(64, 4, 1e-6, FINE), "not below eps"),
])
def test_regime_violations_named(setup, msg):
    with pytest.raises(RegimeError, match=msg):
        setup.validate()


@given(st.integers(3, 16), st.sampled_from([64, 128, 256]), st.floats(0.001, 0.0386))
def test_flux_and_monotonicity(M, N, ratio):
    s = AppendixSetup(N, M, ratio / (2 * N), COARSE)
    b = element_means(s)
    v = discrete_solution(s)
    assert np.all(b > 0) and np.all(np.diff(v) > 0)
    assert np.allclose(np.diff(v) * b / s.h, 1.0, rtol=1e-12)
