import math

import numpy as np
import pytest

from radial_sigma2.errors import NotAdmissible, NotInFutureCone
from radial_sigma2.lorentz import (
    CurvatureSpectrum,
    HyperbolicPoint,
    SpacetimePoint,
    elementary_symmetric,
    elementary_symmetric_all,
    hyperbolic_distance,
    is_admissible,
    mclaurin_check,
    minkowski_inner,
    polar_decompose,
    recompose,
)

from oracles import elementary_symmetric_bruteforce


def _pt(*coords):
    return SpacetimePoint(np.array(coords[:-1], dtype=float), coords[-1])


class TestMinkowskiInner:
    def test_hyperboloid_apex(self):
        o = _pt(0.0, 0.0, 0.0, 1.0)
        assert minkowski_inner(o, o) == -1.0

    def test_spacelike_unit_vector(self):
        e1 = _pt(1.0, 0.0, 0.0, 0.0)
        assert minkowski_inner(e1, e1) == 1.0

    def test_null_vector(self):
        null = _pt(1.0, 0.0, 0.0, 1.0)
        assert minkowski_inner(null, null) == 0.0

    def test_bilinear_symmetric(self, rng):
        for _ in range(50):
            x = SpacetimePoint(rng.normal(size=3), rng.normal())
            y = SpacetimePoint(rng.normal(size=3), rng.normal())
            a, b = rng.normal(size=2)
            assert minkowski_inner(x, y) == pytest.approx(minkowski_inner(y, x), rel=1e-14)
            xa = SpacetimePoint(a * x.spatial + b * y.spatial, a * x.height + b * y.height)
            assert minkowski_inner(xa, y) == pytest.approx(
                a * minkowski_inner(x, y) + b * minkowski_inner(y, y), rel=1e-12, abs=1e-12
            )


class TestPolarDecompose:
    def test_apex_multiple(self):
        x, rho = polar_decompose(_pt(0.0, 0.0, 0.0, 2.0))
        assert rho == 2.0
        assert np.all(x.chart == 0.0)

    def test_boost_chart_point(self):
        # the chart point (sinh 1, 0, ..., 0, cosh 1) sits on H at distance 1 from o
        x, rho = polar_decompose(_pt(math.sinh(1.0), 0.0, 0.0, math.cosh(1.0)))
        assert rho == pytest.approx(1.0, abs=1e-15)
        assert x.radius() == pytest.approx(1.0, abs=1e-14)

    def test_three_four_five(self):
        x, rho = polar_decompose(_pt(3.0, 0.0, 0.0, 5.0))
        assert rho == pytest.approx(4.0, abs=1e-15)
        assert x.chart[0] == pytest.approx(0.75, abs=1e-15)
        assert x.height == pytest.approx(1.25, abs=1e-15)

    def test_rejects_outside_cone(self):
        with pytest.raises(NotInFutureCone):
            polar_decompose(_pt(2.0, 0.0, 0.0, 1.0))
        with pytest.raises(NotInFutureCone):
            polar_decompose(_pt(1.0, 0.0, 0.0, 1.0))  # null ray

    def test_recompose_within_ulps(self, rng):
        for _ in range(200):
            spatial = rng.normal(size=4) * 10.0 ** rng.integers(-3, 4)
            height = float(np.linalg.norm(spatial)) * (1.0 + 10.0 ** rng.uniform(-8, 1))
            point = SpacetimePoint(spatial, height)
            back = recompose(*polar_decompose(point))
            for got, want in zip(np.append(back.spatial, back.height), np.append(spatial, height)):
                assert abs(got - want) <= 4 * math.ulp(abs(want) if want != 0.0 else 1.0)


class TestHyperbolicDistance:
    def test_zero_at_same_point(self):
        o = HyperbolicPoint.origin(3)
        assert hyperbolic_distance(o, o) == 0.0

    def test_chart_distance(self):
        o = HyperbolicPoint.origin(4)
        x = HyperbolicPoint(np.array([math.sinh(2.0), 0.0, 0.0, 0.0]))
        assert hyperbolic_distance(o, x) == pytest.approx(2.0, abs=1e-14)

    def test_symmetric_and_triangle(self, rng):
        for _ in range(100):
            pts = [HyperbolicPoint(rng.normal(size=3) * 2.0) for _ in range(3)]
            dxy = hyperbolic_distance(pts[0], pts[1])
            assert dxy == pytest.approx(hyperbolic_distance(pts[1], pts[0]), abs=1e-13)
            dyz = hyperbolic_distance(pts[1], pts[2])
            dxz = hyperbolic_distance(pts[0], pts[2])
            assert dxz <= dxy + dyz + 1e-12

    def test_rejects_bad_cosh_argument(self):
        x = HyperbolicPoint(np.zeros(2))
        y = HyperbolicPoint(np.zeros(2))
        object.__setattr__(y, "chart", np.zeros(2))
        # same point is fine; a genuinely broken argument must raise
        assert hyperbolic_distance(x, y) == 0.0


class TestElementarySymmetric:
    def test_all_ones(self):
        assert elementary_symmetric(np.ones(3), 2) == 3.0

    def test_211(self):
        assert elementary_symmetric(np.array([2.0, 1.0, 1.0]), 2) == 5.0

    def test_against_subset_sums(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 7))
            kappas = rng.normal(size=n) * 3.0
            for m in range(1, n + 1):
                want = elementary_symmetric_bruteforce(kappas, m)
                got = elementary_symmetric(kappas, m)
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_order_out_of_range(self):
        with pytest.raises(ValueError):
            elementary_symmetric(np.ones(3), 4)
        with pytest.raises(ValueError):
            elementary_symmetric(np.ones(3), 0)


class TestAdmissibility:
    def test_examples(self):
        assert is_admissible(np.array([2.0, 1.0, 1.0]), 2)
        assert not is_admissible(np.array([3.0, -1.0, 1.0]), 2)  # sigma_2 = -1
        for m in range(1, 5):
            assert is_admissible(np.ones(4), m)

    def test_permutation_invariant(self, rng):
        for _ in range(50):
            kappas = rng.normal(size=4)
            perm = rng.permutation(4)
            for m in range(1, 5):
                assert is_admissible(kappas, m) == is_admissible(kappas[perm], m)


class TestMcLaurin:
    def test_equality_case(self):
        ok, means = mclaurin_check(np.ones(5), 5)
        assert ok
        assert np.allclose(means, 1.0)

    def test_211_chain(self):
        ok, means = mclaurin_check(np.array([2.0, 1.0, 1.0]), 2)
        assert ok
        assert means[0] == pytest.approx(4.0 / 3.0)
        assert means[1] == pytest.approx(math.sqrt(5.0 / 3.0))  # ~1.2910 <= 1.3333

    def test_rejection_sampled_cone(self, rng):
        # the chain must hold on every admissible sample
        found = 0
        while found < 1000:
            kappas = rng.normal(size=4) * 2.0
            if not is_admissible(kappas, 2):
                continue
            found += 1
            ok, _ = mclaurin_check(kappas, 2)
            assert ok

    def test_raises_outside_cone(self):
        with pytest.raises(NotAdmissible):
            mclaurin_check(np.array([3.0, -1.0, 1.0]), 2)


class TestCurvatureSpectrum:
    def test_sigmas_recomputable(self, rng):
        kappas = rng.normal(size=5)
        spec = CurvatureSpectrum.from_kappas(kappas)
        for m in range(1, 6):
            assert spec.sigma(m) == pytest.approx(
                elementary_symmetric_bruteforce(kappas, m), rel=1e-12, abs=1e-12
            )

    def test_admissible_up_to(self):
        spec = CurvatureSpectrum.from_kappas([1.0, 1.0, 1.0])
        assert spec.admissible_up_to == 3
        spec = CurvatureSpectrum.from_kappas([3.0, -1.0, 1.0])
        assert spec.admissible_up_to == 1

    def test_all_sigmas_match_bruteforce(self, rng):
        kappas = rng.normal(size=6)
        sigmas = elementary_symmetric_all(kappas)
        for m in range(1, 7):
            assert sigmas[m - 1] == pytest.approx(
                elementary_symmetric_bruteforce(kappas, m), rel=1e-11, abs=1e-11
            )
