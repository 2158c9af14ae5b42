import math

import numpy as np
import pytest

from lab_errors import CurveError, DomainError, InvalidExponentError, OctantViolationError, RankError
from lpq_sphere import (
    DiscreteCurve,
    MeasureSpace,
    SphereFunction,
    alpha_curve_length,
    cat_quarter_check,
    chord_distance,
    comparison_bracket_check,
    curve_length,
    great_circle_distance,
    lp_norm,
    normalized_segment_curve,
    richardson_length,
    row_norms,
    sphere_project,
    vitali_equivalence_stat,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_sphere_point(rng, measure, p, q, r):
    return sphere_project(rng.lognormal(0.0, 0.6, measure.size), p, q, r, measure)


class TestMeasureAndNorm:
    def test_weights_must_be_positive(self):
        with pytest.raises(DomainError):
            MeasureSpace(np.array([1.0, 0.0, 2.0]))

    def test_constant_norm_is_its_absolute_value(self):
        m = MeasureSpace(np.array([0.3, 1.2, 2.5, 0.1]))
        for p in (1.0, 2.0, 3.5, math.inf):
            assert lp_norm(np.full(4, -3.0), p, m) == pytest.approx(3.0, rel=1e-14)

    def test_half_mass_indicator(self):
        m = MeasureSpace(np.array([1.0, 1.0, 2.0]))
        assert lp_norm(np.array([1.0, 1.0, 0.0]), 2.0, m) == pytest.approx(math.sqrt(0.5), rel=1e-14)

    def test_matches_extended_precision_oracle(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 8))
        f = rng.standard_normal(8)
        w = m.weights.astype(np.longdouble)
        oracle = (np.sum(w * np.abs(f.astype(np.longdouble)) ** 3) / np.sum(w)) ** (np.longdouble(1) / 3)
        assert lp_norm(f, 3.0, m) == pytest.approx(float(oracle), rel=1e-13)

    def test_rejects_exponent_below_one(self):
        with pytest.raises(InvalidExponentError):
            lp_norm(np.ones(3), 0.5, MeasureSpace.uniform(3))

    def test_homogeneity_and_triangle_inequality(self, rng):
        m = MeasureSpace(rng.uniform(0.2, 2.0, 20))
        for _ in range(50):
            f, g, h = rng.standard_normal((3, 20))
            c = float(rng.uniform(-5, 5))
            assert lp_norm(c * f, 2.5, m) == pytest.approx(abs(c) * lp_norm(f, 2.5, m), rel=1e-13)
            assert lp_norm(f - h, 2.5, m) <= lp_norm(f - g, 2.5, m) + lp_norm(g - h, 2.5, m) + 1e-12

    def test_row_norms_agree_with_lp_norm(self, rng):
        m = MeasureSpace(rng.uniform(0.2, 2.0, 6))
        rows = rng.standard_normal((4, 6))
        rows[2] = 0.0
        expected = [lp_norm(r, 3.0, m) for r in rows]
        np.testing.assert_allclose(row_norms(rows, 3.0, m), expected, rtol=1e-14)


class TestSphereProjection:
    def test_constant_projects_to_constant(self):
        m = MeasureSpace.uniform(5)
        f = sphere_project(np.full(5, 5.0), 2.0, 1.0, 2.0, m)
        np.testing.assert_allclose(f.values, 2.0, rtol=1e-15)

    def test_two_atom_normalization(self):
        m = MeasureSpace.uniform(2, total=2.0)
        f = sphere_project(np.array([1.0, 3.0]), 2.0, 1.0, 1.0, m)
        np.testing.assert_allclose(f.values, np.array([1.0, 3.0]) / math.sqrt(5.0), rtol=1e-14)

    def test_idempotent(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 10))
        f = random_sphere_point(rng, m, 3.0, 1.5, 0.7)
        again = sphere_project(f.values, 3.0, 1.5, 0.7, m)
        np.testing.assert_allclose(again.values, f.values, rtol=1e-14)

    def test_nonpositive_atom_is_rejected(self):
        with pytest.raises(OctantViolationError) as err:
            sphere_project(np.array([1.0, 0.0, 2.0]), 2.0, 1.0, 1.0, MeasureSpace.uniform(3))
        assert err.value.atom == 1

    def test_sphere_function_checks_radius(self):
        with pytest.raises(DomainError):
            SphereFunction(np.ones(3), 2.0, 3.0, MeasureSpace.uniform(3))


class TestCurves:
    def test_two_sample_curve_is_the_chord(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 12))
        f0, f1 = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(2))
        curve = DiscreteCurve(np.vstack([f0.values, f1.values]), np.array([0.0, 1.0]))
        assert curve_length(curve, 2.0, m) == pytest.approx(chord_distance(f0, f1, 2.0), rel=1e-14)

    def test_constant_curve_has_zero_length(self):
        m = MeasureSpace.uniform(4)
        curve = DiscreteCurve(np.ones((5, 4)), np.linspace(0, 1, 5))
        assert curve_length(curve, 3.0, m) == 0.0

    def test_straight_segment_telescopes(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 9))
        a, b = rng.standard_normal((2, 9))
        t = np.linspace(0, 1, 33)
        curve = DiscreteCurve(a[None, :] + t[:, None] * (b - a)[None, :], t)
        assert curve_length(curve, 3.0, m) == pytest.approx(lp_norm(b - a, 3.0, m), rel=1e-12)

    def test_segment_samples_stay_on_the_octant(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 16))
        f0, f1 = (random_sphere_point(rng, m, 3.0, 1.5, 0.8) for _ in range(2))
        curve = normalized_segment_curve(f0, f1, 3.0, 1.5, 0.8, 21)
        assert np.all(curve.samples > 0)
        np.testing.assert_allclose(row_norms(curve.samples, 2.0, m), 0.8, rtol=1e-10)
        np.testing.assert_allclose(curve.samples[0], f0.values, rtol=1e-13)

    def test_segment_needs_two_samples(self, rng):
        m = MeasureSpace.uniform(4)
        f = sphere_project(np.ones(4), 2.0, 1.0, 1.0, m)
        with pytest.raises(CurveError):
            normalized_segment_curve(f, f, 2.0, 1.0, 1.0, 1)

    def test_chord_polygon_arc_ordering(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 16))
        for p, q in [(1.0, 1.0), (2.0, 1.0), (3.0, 1.5), (4.0, 2.0)]:
            r = p / q
            f0, f1 = (random_sphere_point(rng, m, p, q, r) for _ in range(2))
            chord = chord_distance(f0, f1, p)
            polygon = curve_length(normalized_segment_curve(f0, f1, p, q, r, 65), p, m)
            assert chord <= polygon + 1e-10
            assert polygon <= alpha_curve_length(f0, f1, p, q, r) + 1e-9

    def test_richardson_improves_the_polygon(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 16))
        f0, f1 = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(2))
        exact = alpha_curve_length(f0, f1, 2.0, 1.0, 2.0)
        coarse, fine, extrapolated = richardson_length(
            lambda k: normalized_segment_curve(f0, f1, 2.0, 1.0, 2.0, k), 2.0, m, 9
        )
        assert coarse <= fine <= exact + 1e-12
        assert abs(extrapolated - exact) <= abs(fine - exact)

    def test_great_circle_on_the_l2_sphere(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 16))
        f0, f1 = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(2))
        assert great_circle_distance(f0, f1) == pytest.approx(alpha_curve_length(f0, f1, 2.0, 1.0, 2.0), rel=1e-8)


class TestComparisonChain:
    def test_random_triples_pass_every_line(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 16))
        for _ in range(20):
            f, f0, f1 = (random_sphere_point(rng, m, 3.0, 1.5, 2.0) for _ in range(3))
            report = comparison_bracket_check(f, f0, f1, 3.0, 1.5)
            assert report.passed, [(l.name, l.lhs, l.rhs) for l in report.lines if not l.holds]
            assert report.min_segment_norm >= 1.0 - 1e-12
            assert report.chord <= report.polygon_length * (1 + 1e-12)

    def test_equal_endpoints_collapse_to_zero(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 8))
        f, f0 = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(2))
        report = comparison_bracket_check(f, f0, f0, 2.0, 1.0)
        assert report.passed
        assert report.chord == 0.0
        assert report.alpha_length == pytest.approx(0.0, abs=1e-14)


class TestVitali:
    def test_identical_sequence(self, rng):
        m = MeasureSpace.uniform(8)
        f = rng.uniform(0.5, 2.0, 8)
        np.testing.assert_array_equal(vitali_equivalence_stat([f, f], f, 2.0, 1.0, m), 0.0)

    def test_shifted_constants_converge_monotonically(self):
        m = MeasureSpace.uniform(4)
        f = np.ones(4)
        stats = vitali_equivalence_stat([f + 1.0 / j for j in range(1, 9)], f, 2.0, 1.0, m)
        np.testing.assert_allclose(stats[:, 0], [1.0 / j for j in range(1, 9)], rtol=1e-14)
        np.testing.assert_allclose(stats[:, 1], [math.sqrt(1 + 1.0 / j) - 1 for j in range(1, 9)], rtol=1e-12)
        assert np.all(np.diff(stats, axis=0) < 0)

    def test_concentrating_mass_does_not_converge(self):
        m = MeasureSpace.uniform(64)
        seq = []
        for j in (1, 2, 4, 8, 16, 64):
            fj = np.zeros(64)
            fj[: 64 // j] = j
            seq.append(fj)
        stats = vitali_equivalence_stat(seq, np.zeros(64), 2.0, 1.0, m)
        np.testing.assert_allclose(stats, 1.0, rtol=1e-13)

    def test_negative_entries_are_rejected(self):
        with pytest.raises(DomainError):
            vitali_equivalence_stat([np.array([1.0, -1.0])], np.ones(2), 2.0, 1.0, MeasureSpace.uniform(2))


class TestCatQuarter:
    def test_degenerate_triangle_is_trivial(self, rng):
        m = MeasureSpace.uniform(6)
        u = random_sphere_point(rng, m, 2.0, 1.0, 2.0)
        report = cat_quarter_check(u, u, u)
        assert report.trivial and report.passed

    def test_random_triangles_satisfy_comparison(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 24))
        for _ in range(10):
            u, v, w = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(3))
            report = cat_quarter_check(u, v, w)
            assert report.rank == 3
            assert report.max_violation < 1e-8

    def test_coplanar_vertices_raise_rank_error(self, rng):
        m = MeasureSpace.uniform(10)
        u, v = (random_sphere_point(rng, m, 2.0, 1.0, 2.0) for _ in range(2))
        w = sphere_project(u.values + v.values, 2.0, 1.0, 2.0, m)
        with pytest.raises(RankError):
            cat_quarter_check(u, v, w)
