import numpy as np
import pytest

from fluxreg.exceptions import OffGrid
from fluxreg.utils.flux_analysis import Flux
from fluxreg.utils.riemann import (
    PiecewiseAffineFlux,
    Wave,
    _merge_equal_speeds,
    _tag_kinds,
    affine_interpolant,
    interpolation_gap,
    is_admissible_jump,
    solve_riemann,
    solve_riemann_indices,
)


def hull_vertices(fv, il, ir):
    """Exhaustive envelope vertices between grid indices il and ir, integer data"""
    lo, hi = min(il, ir), max(il, ir)
    convex = il < ir
    keep = [lo]
    for k in range(lo + 1, hi):
        inside = False
        for i in range(lo, k):
            for j in range(k + 1, hi + 1):
                lhs = (fv[k] - fv[i]) * (j - i)
                rhs = (fv[j] - fv[i]) * (k - i)
                if (convex and lhs >= rhs) or (not convex and lhs <= rhs):
                    inside = True
                    break
            if inside:
                break
        if not inside:
            keep.append(k)
    keep.append(hi)
    return keep if convex else list(reversed(keep))


class TestInterpolant:

    def test_grid_contains_zero_and_guard_cells(self, burgers):
        pa = affine_interpolant(burgers, 1.0, 0.125)
        assert pa.n_values == 19
        assert pa.value_grid[pa.offset] == 0.0
        assert pa.M == pytest.approx(1.0)
        assert pa(0.5) == pytest.approx(0.125)

    def test_gap_within_curvature_bound(self, cubic):
        pa = affine_interpolant(cubic, 1.0, 0.0625)
        assert interpolation_gap(cubic, pa, 1.0) <= 6.0 * 0.0625 ** 2 / 8.0 + 1e-14

    def test_off_grid_state(self, burgers):
        pa = affine_interpolant(burgers, 1.0, 0.25)
        assert pa.index_of(-0.75) == pa.offset - 3
        with pytest.raises(OffGrid):
            pa.index_of(0.3)
        assert pa.snap(0.3) == 0.25

    def test_speed_averages_adjacent_cells(self, burgers):
        pa = affine_interpolant(burgers, 1.0, 0.125)
        assert pa.speed(0.5) == pytest.approx(0.5)
        assert pa.speed(0.5625) == pytest.approx(0.5625)

    def test_rejects_bad_spacing(self, burgers):
        with pytest.raises(ValueError):
            affine_interpolant(burgers, 1.0, 0.0)


class TestExactFlux:

    def test_burgers_shock(self, burgers):
        fan = solve_riemann(burgers, 1.0, 0.0)
        assert len(fan) == 1
        assert fan.waves[0].sigma == pytest.approx(0.5, abs=1e-12)
        assert fan.waves[0].kind == 'shock'

    def test_burgers_rarefaction(self, burgers):
        fan = solve_riemann(burgers, 0.0, 1.0)
        speeds = [w.sigma for w in fan.waves]
        assert all(w.kind == 'rarefaction-step' for w in fan.waves)
        assert np.all(np.diff(speeds) > 0.0)
        assert fan.values()[0] == 0.0 and fan.values()[-1] == 1.0

    def test_cubic_shock_then_fan(self, cubic):
        fan = solve_riemann(cubic, 1.0, -1.0)
        lead = fan.waves[0]
        assert lead.ul == 1.0
        assert lead.ur == pytest.approx(-0.5, abs=1e-12)
        assert lead.sigma == pytest.approx(0.75, abs=1e-12)
        speeds = [w.sigma for w in fan.waves]
        assert np.all(np.diff(speeds) > 0.0)
        assert speeds[-1] < 3.0
        assert fan.values()[-1] == -1.0

    def test_equal_states(self, cubic):
        fan = solve_riemann(cubic, 0.25, 0.25)
        assert len(fan) == 0
        assert fan.values() == [0.25]

    def test_admissibility(self, cubic):
        assert is_admissible_jump(cubic, 1.0, -0.5)
        assert not is_admissible_jump(cubic, 1.0, -1.0)
        with pytest.raises(ValueError):
            is_admissible_jump(cubic, 0.5, 0.5)


class TestGridFlux:

    def test_burgers_shock_on_grid(self, burgers):
        pa = affine_interpolant(burgers, 1.0, 0.125)
        fan = solve_riemann(pa, 1.0, 0.0)
        assert len(fan) == 1
        assert fan.waves[0].sigma == pytest.approx(0.5, abs=1e-12)

    def test_burgers_rarefaction_steps(self, burgers):
        pa = affine_interpolant(burgers, 1.0, 0.25)
        fan = solve_riemann(pa, 0.0, 1.0)
        assert [w.sigma for w in fan.waves] == pytest.approx([0.125, 0.375, 0.625, 0.875], abs=1e-12)

    def test_cubic_on_grid(self, cubic):
        pa = affine_interpolant(cubic, 1.0, 0.125)
        fan = solve_riemann(pa, 1.0, -1.0)
        assert fan.waves[0].ur == -0.5
        assert fan.waves[0].sigma == pytest.approx(0.75, abs=1e-12)
        assert fan.waves[0].kind == 'contact'
        for wave in fan.waves:
            assert is_admissible_jump(pa, wave.ul, wave.ur)

    @pytest.mark.parametrize('seed', range(200))
    def test_matches_exhaustive_envelope(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 17))
        fv = rng.integers(-20, 21, n).astype(float)
        pa = PiecewiseAffineFlux.from_values(1.0, n // 2, fv)
        grid = pa.value_grid
        for _ in range(5):
            il, ir = (int(k) for k in rng.integers(0, n, 2))
            fan = solve_riemann_indices(pa, il, ir)
            if il == ir:
                assert len(fan) == 0
                continue
            expected = hull_vertices(fv, il, ir)
            assert fan.values() == [grid[k] for k in expected]
            for wave, a, b in zip(fan.waves, expected[:-1], expected[1:]):
                assert wave.sigma == pytest.approx((fv[b] - fv[a]) / (b - a), abs=1e-12)

    @pytest.mark.parametrize('seed', range(10))
    def test_fan_structure(self, seed, cubic):
        rng = np.random.default_rng(100 + seed)
        pa = affine_interpolant(cubic, 1.0, 0.0625)
        il, ir = (int(k) for k in rng.integers(1, pa.n_values - 1, 2))
        fan = solve_riemann_indices(pa, il, ir)
        speeds = [w.sigma for w in fan.waves]
        assert np.all(np.diff(speeds) > 0.0)
        values = fan.values()
        steps = np.diff(values)
        assert np.all(steps > 0.0) or np.all(steps < 0.0) or len(fan) == 0
        for left, right in zip(fan.waves[:-1], fan.waves[1:]):
            assert left.ur == right.ul
        for wave in fan.waves:
            assert is_admissible_jump(pa, wave.ul, wave.ur)

    def test_to_dict(self, burgers):
        fan = solve_riemann(burgers, 1.0, 0.0).to_dict()
        assert fan['left'] == 1.0 and fan['right'] == 0.0
        assert set(fan['waves'][0]) == {'ul', 'ur', 'sigma', 'kind'}

    @pytest.mark.parametrize('seed', range(25))
    def test_speeds_carry_the_flux_jump(self, seed, cubic):
        rng = np.random.default_rng(300 + seed)
        pa = affine_interpolant(cubic, 1.0, 0.0625)
        il, ir = (int(k) for k in rng.integers(0, pa.n_values, 2))
        fan = solve_riemann_indices(pa, il, ir)
        total = sum(w.sigma * (w.ur - w.ul) for w in fan.waves)
        jump = pa.flux_values[ir] - pa.flux_values[il]
        assert total == pytest.approx(jump, abs=1e-12)

    @pytest.mark.parametrize('seed', range(25))
    def test_mirrored_flux_mirrors_the_fan(self, seed):
        rng = np.random.default_rng(400 + seed)
        n = 2 * int(rng.integers(2, 8)) + 1
        fv = rng.integers(-20, 21, n).astype(float)
        pa = PiecewiseAffineFlux.from_values(1.0, n // 2, fv)
        mirrored = PiecewiseAffineFlux.from_values(1.0, n // 2, fv[::-1])
        il, ir = (int(k) for k in rng.integers(0, n, 2))
        fan = solve_riemann_indices(pa, il, ir)
        image = solve_riemann_indices(mirrored, n - 1 - ir, n - 1 - il)
        assert image.values() == [-v for v in reversed(fan.values())]
        assert [w.sigma for w in image.waves] == pytest.approx([-w.sigma for w in reversed(fan.waves)])


class TestWaveKinds:

    def test_merged_rarefaction_steps_stay_steps(self, burgers):
        raw = [(Wave(0.0, 1.0, 0.5, ''), 'graph'), (Wave(1.0, 2.0, 1.5, ''), 'graph'),
               (Wave(2.0, 3.0, 1.5, ''), 'graph')]
        waves = _tag_kinds(_merge_equal_speeds(raw, burgers))
        assert [(w.ul, w.ur) for w in waves] == [(0.0, 1.0), (1.0, 3.0)]
        assert waves[1].sigma == pytest.approx(2.0)
        assert [w.kind for w in waves] == ['rarefaction-step', 'rarefaction-step']

    def test_merge_with_a_chord_is_a_shock(self):
        linear = Flux((0.0, 1.0))
        raw = [(Wave(0.0, 0.5, 1.0, ''), 'chord'), (Wave(0.5, 1.0, 1.0, ''), 'graph')]
        waves = _tag_kinds(_merge_equal_speeds(raw, linear))
        assert len(waves) == 1
        assert waves[0].kind == 'shock'
        assert waves[0].sigma == pytest.approx(1.0)

    def test_chord_beside_rarefaction_is_a_contact(self, cubic):
        fan = solve_riemann(cubic, 1.0, -1.0)
        assert fan.waves[0].kind == 'contact'
        assert {w.kind for w in fan.waves[1:]} == {'rarefaction-step'}
