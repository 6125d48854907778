import os

import pytest

from fluxreg.exceptions import (
    NoEligiblePairs,
    NoPolynomialDegeneracy,
    NoSignChange,
    NotConvex,
    OddP,
    UnsupportedFlux,
)
from fluxreg.models import Scenario
from fluxreg.utils.flux_analysis import Flux
from fluxreg.utils import harness
from fluxreg.utils.harness import (
    Experiment,
    default_calibration,
    grid_slack,
    sign_change_constant,
    run_checks,
    variation_table,
    verify_decay,
    verify_length_estimate,
    verify_linear_transport,
    verify_oleinik,
    verify_sign_lemma,
)
from fluxreg.utils.riemann import affine_interpolant, is_admissible_jump, solve_riemann, solve_riemann_indices
from fluxreg_system import settings

BURGERS = (0.0, 0.0, 0.5)
CUBIC = (0.0, 0.0, 0.0, 1.0)
QUARTIC = (0.0, 0.0, 0.0, 0.0, 1.0)
INDICATOR = {'type': 'indicator', 'a': 0.0, 'b': 1.0, 'h': 1.0}


def scenario(coeffs, u0, delta=1 / 64, T=2.0, **kwargs):
    return Scenario(flux=Flux(coeffs), u0=u0, M=1.0, delta=delta, T=T, **kwargs)


def random_u0(seed, **extra):
    return dict({'type': 'random', 'a': 0.0, 'b': 1.0, 'h': 1.0, 'pieces': 8, 'seed': seed}, **extra)


@pytest.fixture
def small_psi_grid(monkeypatch):
    monkeypatch.setattr(settings, 'N_GRID_POINTS', 16)


def test_experiment_refines_delta():
    exp = Experiment(scenario(BURGERS, INDICATOR, delta=1 / 16))
    fine = exp.refined()
    assert fine.delta == 1 / 32
    assert fine.flux_delta.delta == 1 / 32
    assert exp.prepare().trajectory is exp.trajectory


class TestOleinik:

    @pytest.mark.parametrize('seed', range(3))
    def test_random_burgers_data(self, seed):
        report = verify_oleinik(scenario(BURGERS, random_u0(seed), times=[0.5, 1.0, 2.0]))
        assert report.passed
        assert {r.kind for r in report.rows} == {'oleinik', 'speed_oleinik'}
        assert len(report.rows) == 6

    def test_halving_time_doubles_the_bound(self):
        sc = scenario(BURGERS, INDICATOR, delta=1 / 64, times=[0.5, 1.0])
        report = verify_oleinik(sc)
        rows = {r.t: r for r in report.rows if r.kind == 'oleinik'}
        additive = sc.tolerances.kappa * report.summary['oleinik']['h_min']
        assert rows[0.5].rhs - additive == pytest.approx(2.0 * (rows[1.0].rhs - additive))
        # the rarefaction slope is 1/t
        assert rows[0.5].lhs == pytest.approx(2.0 * rows[1.0].lhs, rel=0.25)

    def test_constant_data(self):
        report = verify_oleinik(scenario(BURGERS, {'type': 'steps', 'breakpoints': [], 'values': [0.0]}))
        assert report.passed
        assert all(r.lhs == 0.0 for r in report.rows)

    def test_requires_convex_flux(self):
        with pytest.raises(NotConvex):
            verify_oleinik(scenario(CUBIC, INDICATOR))


class TestLengthEstimate:

    def test_indicator(self):
        sc = scenario(BURGERS, INDICATOR, delta=1 / 16, n_seeds=40)
        report = verify_length_estimate(sc, 2.0, 50)
        assert report.passed
        assert 0 < len(report.rows) <= 50
        assert report.summary['length']['eligible_pairs'] >= len(report.rows)
        assert report.summary['length']['tightest_rho'] > 1.0

    @pytest.mark.parametrize('coeffs', [BURGERS, CUBIC, QUARTIC])
    @pytest.mark.parametrize('delta', [1 / 16, 1 / 32])
    def test_sweep_over_monomials(self, coeffs, delta):
        # pairs across the support have s >= 1; pairs inside the plateau see d = 0
        sc = scenario(coeffs, INDICATOR, delta=delta, n_seeds=40)
        report = verify_length_estimate(sc, 2.0, 50)
        assert report.passed
        assert report.rows

    def test_needs_equal_value_pairs(self):
        sc = scenario(BURGERS, {'type': 'steps', 'breakpoints': [0.0], 'values': [1.0, 0.0]},
                      delta=1 / 8, n_seeds=2)
        with pytest.raises(NoEligiblePairs):
            verify_length_estimate(sc, 1.0, 10)


class TestDecay:

    def test_tv_of_speed(self):
        sc = scenario(BURGERS, INDICATOR, delta=1 / 32, times=[0.25, 0.5, 1.0])
        report = verify_decay(sc, 'tv_speed')
        assert report.passed
        assert sorted({r.pair_id for r in report.rows}) == ['base', 'refined']
        assert report.summary['tv_speed']['C_star'] > 0.0

    @pytest.mark.parametrize('kind', ['tv_speed', 'frac_bv'])
    def test_quartic_indicator_fitted_at_one(self, kind):
        # past t = 1/3 the plateau is (3t)^(-1/4), so both measures scale like t^(-3/4)
        sc = scenario(QUARTIC, INDICATOR, delta=1 / 64, T=4.0, times=[0.25, 1.0, 2.0, 4.0])
        report = verify_decay(sc, kind)
        assert report.summary[kind]['calibration_times'] == [1.0]
        assert report.passed
        assert len(report.rows) == 8

    def test_flat_measure_breaks_the_shape(self, monkeypatch):
        monkeypatch.setattr(harness, '_variation_measure', lambda sc, kind: lambda prof: 1.0)
        sc = scenario(BURGERS, INDICATOR, delta=1 / 8, T=4.0, times=[0.25, 0.5, 1.0, 2.0, 4.0])
        report = verify_decay(sc, 'tv_speed')
        assert report.summary['tv_speed']['C_star'] == pytest.approx(0.5)
        assert not report.passed
        assert {r.t for r in report.rows if not r.passed} == {2.0, 4.0}

    def test_default_calibration(self):
        assert default_calibration([0.25, 0.5, 1.0, 2.0]) == [1.0]
        assert default_calibration([0.25, 0.5, 2.0]) == [0.5]
        assert default_calibration([0.5, 1.5]) == [0.5]

    def test_calibration_times(self):
        sc = scenario(BURGERS, INDICATOR, delta=1 / 16, times=[1.0, 2.0])
        report = verify_decay(sc, 'tv_speed', calibration_times=[1.0])
        # the indicator keeps TV 2 up to t = 2
        assert report.summary['tv_speed']['C_star'] == pytest.approx(1.0)

    def test_variation_ratio_for_burgers(self):
        sc = scenario(BURGERS, random_u0(4), delta=1 / 32, times=[0.5, 1.0])
        report = verify_decay(sc, 'tvs_tv')
        assert report.summary['tvs_tv']['C_star'] == pytest.approx(1.0)
        assert report.passed

    def test_bvphi_is_stable_under_refinement(self, small_psi_grid):
        sc = scenario(BURGERS, INDICATOR, delta=1 / 16, times=[1.0, 2.0])
        report = verify_decay(sc, 'bvphi')
        assert report.passed

    def test_needs_polynomial_degeneracy(self):
        sc = scenario((0.0, 1.0), INDICATOR, delta=1 / 8, times=[1.0])
        with pytest.raises(NoPolynomialDegeneracy):
            verify_decay(sc, 'frac_bv')

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            verify_decay(scenario(BURGERS, INDICATOR, delta=1 / 8, times=[1.0]), 'tv_squared')


class TestSignLemma:

    def test_sawtooth_under_cubic_flux(self):
        u0 = {'type': 'sawtooth', 'a': 0.0, 'b': 1.0, 'h': 1.0, 'teeth': 3}
        sc = scenario(CUBIC, u0, delta=1 / 16, T=0.5)
        report = verify_sign_lemma(sc, 0.5, 200)
        assert report.passed
        assert report.summary['sign']['p'] == 2
        assert report.summary['sign']['c_oracle'] == pytest.approx(1.0, rel=1e-3)

    def test_plateau_crossing(self):
        # fronts do not meet before t = 0.5; the central shock ends at the grid tangent -1/2
        u0 = {'type': 'steps', 'breakpoints': [-2.0, 0.0, 2.0], 'values': [0.0, 1.0, -1.0, 0.0]}
        sc = scenario(CUBIC, u0, delta=1 / 16, T=0.5)
        report = verify_sign_lemma(sc, 0.5, 500)
        assert report.summary['sign']['c_oracle'] == pytest.approx(1.0, rel=1e-3)
        assert all(r.rhs > 0.0 for r in report.rows)
        assert report.passed

    def test_flat_crossing_exists_only_on_the_grid(self, cubic):
        d = 1 / 16
        pa = affine_interpolant(cubic, 1.0, d)
        grid_fan = solve_riemann_indices(pa, pa.index_of(d), pa.index_of(-d))
        assert len(grid_fan) == 1
        assert harness._speed_variation(cubic, grid_fan.values()) == 0.0
        assert not is_admissible_jump(cubic, d, -d)
        assert len(solve_riemann(cubic, d, -d)) > 1

    def test_oracle_constant_for_cubic(self):
        u0 = {'type': 'sawtooth', 'a': 0.0, 'b': 1.0, 'h': 1.0, 'teeth': 3}
        sc = scenario(CUBIC, u0, delta=1 / 8)
        c = sign_change_constant(sc, affine_interpolant(sc.flux, 1.0, 1 / 8), 2)
        # attained by a shock from a to -a/2
        assert c == pytest.approx(1.0, rel=1e-3)

    def test_monotone_crossing_path(self, cubic):
        a = 0.5
        assert harness._speed_variation(cubic, [a, 0.0, -a]) == pytest.approx(1.5 * (2 * a) ** 2)

    def test_grid_slack(self):
        sc = scenario(CUBIC, INDICATOR, delta=1 / 16)
        assert grid_slack(sc, 1 / 16, -0.5) == pytest.approx(3.0 / 16)
        assert grid_slack(sc, 1 / 32, 0.5) == pytest.approx(grid_slack(sc, 1 / 16, 0.5) / 2)

    def test_odd_exponent(self):
        with pytest.raises(OddP):
            verify_sign_lemma(scenario(QUARTIC, INDICATOR, delta=1 / 8), 1.0, 10)

    def test_needs_sign_change(self):
        with pytest.raises(NoSignChange):
            verify_sign_lemma(scenario(CUBIC, INDICATOR, delta=1 / 8, T=1.0), 1.0, 10)

    def test_needs_monomial(self):
        with pytest.raises(UnsupportedFlux):
            verify_sign_lemma(scenario((0.0, 1.0, 0.0, 1.0), INDICATOR, delta=1 / 8), 1.0, 10)


class TestLinearTransport:

    def test_indicator_is_shifted_exactly(self):
        sc = scenario((0.0, 0.5), INDICATOR, delta=1 / 8, times=[0.5, 1.0, 2.0])
        report = verify_linear_transport(sc)
        assert report.passed
        assert all(r.lhs == 0.0 for r in report.rows)

    def test_needs_affine_flux(self):
        with pytest.raises(UnsupportedFlux):
            verify_linear_transport(scenario(BURGERS, INDICATOR, delta=1 / 8))


def test_run_checks_combines_reports():
    sc = scenario(BURGERS, INDICATOR, delta=1 / 16, times=[1.0, 2.0], checks=['oleinik', 'tvs_tv'])
    report = run_checks(sc)
    assert report.passed
    assert {'oleinik', 'tvs_tv', 'violations'} <= set(report.summary)
    assert report.summary['violations'] == 0
    assert list(report.to_frame().columns) == ['kind', 't', 'pair_id', 'lhs', 'rhs', 'margin', 'pass']


def test_run_checks_rejects_unknown_check():
    with pytest.raises(ValueError):
        run_checks(scenario(BURGERS, INDICATOR, delta=1 / 8, checks=['entropy']))


def test_variation_table(small_psi_grid):
    sc = scenario(BURGERS, INDICATOR, delta=1 / 16, times=[0.5, 1.0, 2.0])
    table = variation_table(sc)
    assert list(table.columns) == ['t', 'tv', 'tv_fprime', 'tv_power_p', 'tv_phi_eps', 'one_sided_lip']
    assert table['t'].tolist() == [0.5, 1.0, 2.0]
    assert table['tv'].tolist() == pytest.approx([2.0, 2.0, 2.0])


@pytest.mark.parametrize('environ, expected', [
    ({'FLUXREG_THREADS': '3'}, 3),
    ({'FLUXREG_THREADS': 'many'}, None),
    ({'FLUXREG_THREADS': '0'}, None),
    ({}, None),
])
def test_thread_count_from_environment(environ, expected):
    assert settings.threads_from_env(environ) == (expected or os.cpu_count() or 1)
