import math

import numpy as np
import pytest

from radial_sigma2 import asymptotics as asym
from radial_sigma2 import barriers, ode
from radial_sigma2.errors import FitBudgetExceeded, MarginTooLarge, NonPositiveEnvelope
from radial_sigma2.prescriptions import (
    RadialPrescription,
    as_directional,
    constant_family,
    directional_family,
    power_excess_family,
)


def ray_prescription(n=3, amplitude=0.2, p=2.0):
    """Radial member of the directional family along the first axis."""

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        return 1.0 + amplitude * (1.0 + r) ** (-p) * np.tanh(r)

    return RadialPrescription(dimension=n, evaluate=evaluate, label="ray")


class TestBump:
    def test_plateaus(self):
        assert barriers.bump(0.0) == 1.0
        assert barriers.bump(0.25) == 1.0
        assert barriers.bump(-0.2) == 1.0
        assert barriers.bump(0.75) == 0.0
        assert barriers.bump(2.0) == 0.0

    def test_smooth_monotone_transition(self):
        x = np.linspace(0.25, 0.75, 200)
        y = barriers.bump(x)
        assert np.all(np.diff(y) <= 1e-12)
        assert 0.0 < barriers.bump(0.5) < 1.0


class TestRadialEnvelopes:
    def test_radial_input_collapses(self):
        fam = as_directional(ray_prescription(), sphere_nodes=32)
        grid = np.linspace(0.0, 5.0, 26)
        hm, hp = barriers.radial_envelopes(fam, grid)
        want = ray_prescription()(grid)
        assert np.allclose(hm, want, atol=1e-12)
        assert np.allclose(hp, want, atol=1e-12)

    def test_constant_input(self):
        fam = as_directional(constant_family(3, 1.3))
        grid = np.linspace(0.0, 3.0, 7)
        hm, hp = barriers.radial_envelopes(fam, grid)
        assert np.allclose(hm, 1.3) and np.allclose(hp, 1.3)

    def test_linear_directional_closed_form(self):
        # sup/inf of 1 + a(r) x_1 / cosh r over the sphere is 1 +- a(r) tanh r
        fam = directional_family(3, 0.2, 2.0)
        grid = np.linspace(0.0, 8.0, 33)
        hm, hp = barriers.radial_envelopes(fam, grid)
        spread = 0.2 * (1.0 + grid) ** -2 * np.tanh(grid)
        assert np.max(np.abs(hm - (1.0 + spread))) < 1e-3
        assert np.max(np.abs(hp - (1.0 - spread))) < 1e-3


class TestPositivePartNormalize:
    def test_clipping(self):
        hm, hp = barriers.positive_part_normalize(np.array([0.9, 1.3]), np.array([1.2, 0.8]))
        assert hm.tolist() == [1.0, 1.3]
        assert hp.tolist() == [1.0, 0.8]

    def test_straddles_one(self, rng):
        raw = 1.0 + 0.5 * rng.normal(size=50)
        raw = np.clip(raw, 0.05, None)
        hm, hp = barriers.positive_part_normalize(raw, raw)
        assert np.all(hm >= 1.0) and np.all(hp <= 1.0) and np.all(hp > 0.0)

    def test_nonpositive_envelope(self):
        with pytest.raises(NonPositiveEnvelope):
            barriers.positive_part_normalize(np.array([1.0]), np.array([-0.2]))


class TestAddMargins:
    def test_profile_values(self):
        r = np.array([0.5, 1.0, 2.0])
        hm, hp = barriers.add_margins(np.ones(3), np.ones(3), 0.05, r)
        assert np.allclose(hm - 1.0, [0.05, 0.05, 0.0125])
        assert np.allclose(1.0 - hp, [0.05, 0.05, 0.0125])

    def test_margin_integral_finite(self):
        # int_1^inf eps0/r^2 = eps0 exactly
        eps0 = 0.05
        r = np.linspace(1.0, 2000.0, 400001)
        total = np.trapezoid(barriers.margin_profile(r, eps0), r)
        assert total == pytest.approx(eps0, rel=1e-3)

    def test_too_large(self):
        with pytest.raises(MarginTooLarge):
            barriers.add_margins(np.ones(3), np.full(3, 0.04), 0.05, np.arange(3.0))


class TestSmoothBlend:
    def test_smooth_input_reproduced(self):
        grid = np.arange(0.0, 12.0 + 0.05, 0.05)
        values = 1.0 + 0.1 * np.exp(-grid)
        blend = barriers.smooth_blend(grid, values, eps0=0.05)
        dense = np.linspace(0.0, 10.0, 4001)
        err = np.abs(blend(dense) - (1.0 + 0.1 * np.exp(-dense)))
        assert np.max(err) < 5e-4  # well within every window budget

    def test_budget_respected_with_kink(self):
        grid = np.arange(0.0, 12.0 + 0.05, 0.05)
        eps0 = 0.05
        values = 1.0 + barriers.margin_profile(grid, eps0)  # kink at r = 1
        blend = barriers.smooth_blend(grid, values, eps0=eps0)
        dense = np.linspace(0.0, 10.0, 10000)
        err = np.abs(blend(dense) - (1.0 + barriers.margin_profile(dense, eps0)))
        budget = barriers.margin_profile(dense, eps0)
        assert np.all(err <= budget + 1e-12)

    def test_budget_exceeded_raises(self):
        grid = np.arange(0.0, 8.0 + 0.05, 0.05)
        values = np.sin(7.0 * grid)  # wildly oscillating, hopeless for cubics
        with pytest.raises(FitBudgetExceeded):
            barriers.smooth_blend(grid, values, eps0=0.01)

    def test_tail_splice_exact(self):
        grid = np.arange(0.0, 10.0 + 0.05, 0.05)
        tail = lambda r: 1.0 + 0.0 * np.asarray(r, dtype=float)
        blend = barriers.smooth_blend(grid, np.ones(grid.size), eps0=0.05, tail=tail, tail_from=8)
        assert blend(9.5) == pytest.approx(1.0, abs=1e-12)


class TestFlattenNearZero:
    def test_constant_unchanged(self):
        f = lambda r: np.full_like(np.asarray(r, dtype=float), 1.2)
        flat = barriers.flatten_near_zero(f, "sup", np.linspace(0.01, 5, 100), limit=1.2)
        assert flat(0.1) == pytest.approx(1.2)
        assert flat(3.0) == pytest.approx(1.2)

    def test_sup_mode_dominates_input(self):
        f = lambda r: 1.0 + np.tanh(np.asarray(r, dtype=float))  # increasing
        samples = np.linspace(0.0, 6.0, 500)
        flat = barriers.flatten_near_zero(f, "sup", samples, limit=2.0)
        dense = np.linspace(0.0, 6.0, 1000)
        assert np.all(flat(dense) >= f(dense) - 1e-12)
        assert np.allclose(flat(np.linspace(0, 0.25, 20)), flat(0.0))
        assert flat(0.9) == pytest.approx(f(0.9))  # untouched past the bump

    def test_ordering_preserved(self):
        lo = lambda r: 1.0 - 0.1 * np.exp(-np.asarray(r, dtype=float))
        hi = lambda r: 1.0 + 0.1 * np.exp(-np.asarray(r, dtype=float))
        samples = np.linspace(0.0, 6.0, 500)
        f_hi = barriers.flatten_near_zero(hi, "sup", samples, limit=1.0)
        f_lo = barriers.flatten_near_zero(lo, "inf", samples, limit=1.0)
        dense = np.linspace(0.0, 6.0, 777)
        assert np.all(f_hi(dense) >= f_lo(dense))


@pytest.fixture(scope="module")
def directional_pair():
    fam = directional_family(3, 0.2, 2.0)
    return fam, barriers.build_barrier_pair(fam, eps0=0.05, tol=1e-9, r_max=30.0)


class TestBuildBarrierPair:
    def test_barrier_inequalities(self, directional_pair):
        fam, pair = directional_pair
        assert pair.diagnostics["barrier_points_checked"] >= 10_000
        assert pair.diagnostics["barrier_margin_minus"] > 0.0
        assert pair.diagnostics["barrier_margin_plus"] > 0.0

    def test_smoothing_budget(self, directional_pair):
        _, pair = directional_pair
        assert pair.diagnostics["smooth_budget_violation"] <= 1e-12

    def test_barriers_ordered_and_vanishing(self, directional_pair):
        _, pair = directional_pair
        assert np.max(pair.phi_minus.phi) <= 1e-9
        assert np.min(pair.phi_plus.phi) >= -1e-9
        for sol, limit in ((pair.phi_minus, pair.limit_minus), (pair.phi_plus, pair.limit_plus)):
            bound = max(abs(limit.tail_envelope[0]), abs(limit.tail_envelope[1]))
            assert abs(sol.phi[-1]) <= bound + 1e-12

    def test_pinches_radial_member(self, directional_pair):
        _, pair = directional_pair
        ray = ray_prescription()
        sol = ode.solve_radial(ray, 30.0, 1e-9)
        limit = asym.estimate_phi_limit(sol, ray, delta=0.02)
        phi = sol.phi - limit.estimate
        assert np.min(phi - pair.phi_minus.phi_at(sol.r)) > -1e-9
        assert np.min(pair.phi_plus.phi_at(sol.r) - phi) > -1e-9

    def test_pinches_unit_solution(self, directional_pair):
        # h = 1 lies between the envelopes; its solution is phi = 0
        _, pair = directional_pair
        r = np.linspace(0.0, 30.0, 400)
        assert np.all(pair.phi_minus.phi_at(r) <= 1e-9)
        assert np.all(pair.phi_plus.phi_at(r) >= -1e-9)

    def test_excess_radial_prescription_pipeline(self):
        fam = as_directional(power_excess_family(3, 0.2, 2.0), sphere_nodes=18)
        pair = barriers.build_barrier_pair(fam, eps0=0.04, tol=1e-9, r_max=25.0)
        # raw envelopes collapse onto h itself; margins survive smoothing
        grid = np.linspace(0.0, 20.0, 200)
        h_vals = power_excess_family(3, 0.2, 2.0)(grid)
        assert np.all(pair.g_minus(grid) >= h_vals - 1e-12)
        assert np.all(pair.g_plus(grid) <= h_vals + 1e-12)

    def test_not_integrable_rejected(self):
        slow = as_directional(
            RadialPrescription(
                3,
                lambda r: 1.0 - 0.2 / np.sqrt(1.0 + np.asarray(r, dtype=float)),
                label="slow-deficit",
            ),
            sphere_nodes=18,
        )
        from radial_sigma2.errors import NotIntegrable

        with pytest.raises(NotIntegrable):
            barriers.build_barrier_pair(slow, eps0=0.02, tol=1e-8, r_max=12.0)

    def test_constant_one_barriers_tight(self):
        fam = as_directional(constant_family(3, 1.0), sphere_nodes=18)
        pair = barriers.build_barrier_pair(fam, eps0=0.05, tol=1e-9, r_max=20.0)
        # widths controlled by eps0: phi+- are small and straddle 0
        assert np.max(np.abs(pair.phi_minus.phi)) < 0.2
        assert np.max(np.abs(pair.phi_plus.phi)) < 0.2
        assert np.max(pair.phi_minus.phi) <= 1e-9
        assert np.min(pair.phi_plus.phi) >= -1e-9
