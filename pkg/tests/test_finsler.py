import json
import math

import numpy as np
import pytest

from finsler import (
    EquivalenceDiagnostics,
    PotentialCurve,
    calabi_cauchy_stat,
    calabi_cauchy_stat_sphere,
    calabi_distance_bracket,
    calabi_length,
    calabi_norm,
    calibrate_pinsker_kappa,
    embed_curve,
    embed_F,
    entropy,
    mabuchi_cauchy_stat,
    mabuchi_length,
    mabuchi_norm,
    metric_report,
    pinsker_gap,
    relative_entropy,
    smoothing_sequence,
    smoothing_statistics,
    two_cell_pinsker,
    weak_convergence_proxy,
)
from kahler_backend import P1, TORUS, Potential, make_geometry, make_torus_geometry, random_smooth_potential
from lab_errors import CurveError, DomainError, InvalidExponentError, ShapeError
from lpq_sphere import MeasureSpace, arc_from_chord, curve_length, lp_norm


@pytest.fixture
def rng():
    return np.random.default_rng(5)


@pytest.fixture(params=[(TORUS, 16), (P1, 32)], ids=["torus", "p1"])
def geometry(request):
    return make_geometry(*request.param)


class TestNorms:
    def test_constant_direction_has_zero_norm(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        assert calabi_norm(u, np.full(geometry.size, 4.0), 3.0, 1.5) < 1e-9
        assert mabuchi_norm(u, np.full(geometry.size, 4.0), 2.0) < 1e-12

    def test_flat_point_reduces_to_lp_norm(self, geometry, rng):
        beta = rng.standard_normal(geometry.size)
        zero = Potential.zero(geometry)
        expected = lp_norm(geometry.laplace(beta), 3.0, geometry.measure)
        assert calabi_norm(zero, beta, 3.0, 1.0) == pytest.approx(expected, rel=1e-12)
        phi = geometry.project_mean(beta)
        assert mabuchi_norm(zero, phi, 2.0) == pytest.approx(lp_norm(phi, 2.0, geometry.measure), rel=1e-12)

    def test_mabuchi_norm_ignores_constants(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        phi = rng.standard_normal(geometry.size)
        assert mabuchi_norm(u, phi + 7.5, 3.0) == pytest.approx(mabuchi_norm(u, phi, 3.0), rel=1e-10)

    def test_calabi_norm_is_the_derivative_of_the_embedding(self, geometry, rng):
        u = random_smooth_potential(geometry, rng, 0.4)
        beta = random_smooth_potential(geometry, rng, 0.4).values
        h = 1e-4
        for p, q in [(2.0, 1.0), (3.0, 1.5), (4.0, 2.0)]:
            plus = embed_F(Potential(u.values + h * beta, geometry), p, q).values
            minus = embed_F(Potential(u.values - h * beta, geometry), p, q).values
            fd = lp_norm((plus - minus) / (2 * h), p, geometry.measure)
            assert calabi_norm(u, beta, p, q) == pytest.approx(fd, rel=1e-6)

    def test_infinite_p_is_the_sup(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        beta = rng.standard_normal(geometry.size)
        tangent = geometry.laplace(beta) / u.rho
        expected = geometry.sup_abs(tangent)
        assert calabi_norm(u, beta, math.inf, 1.0) == pytest.approx(expected)
        assert expected >= np.max(np.abs(tangent))

    def test_exponent_order_is_enforced(self, geometry):
        with pytest.raises(InvalidExponentError):
            calabi_norm(Potential.zero(geometry), np.zeros(geometry.size), 1.0, 2.0)


class TestEmbedding:
    def test_image_lies_on_the_sphere(self, geometry, rng):
        u = random_smooth_potential(geometry, rng, 0.8)
        for p, q in [(1.0, 1.0), (2.0, 1.0), (4.0, 2.0), (5.0, 2.0)]:
            f = embed_F(u, p, q)
            assert f.radius == p / q
            assert lp_norm(f.values, p / q, geometry.measure) == pytest.approx(p / q, rel=1e-10)

    def test_curve_length_matches_image_length(self, rng):
        g = make_torus_geometry(16)
        u0, u1 = random_smooth_potential(g, rng, 0.5), random_smooth_potential(g, rng, 0.5)
        curve = PotentialCurve.segment(u0, u1, 129)
        for p, q in [(2.0, 1.0), (3.0, 1.5)]:
            length = calabi_length(curve, p, q)
            image = curve_length(embed_curve(curve, p, q), p, g.measure)
            assert length == pytest.approx(image, rel=1e-4)

    def test_reversed_curve_has_same_length(self, geometry, rng):
        u0, u1 = random_smooth_potential(geometry, rng), random_smooth_potential(geometry, rng)
        curve = PotentialCurve.segment(u0, u1, 9)
        assert calabi_length(curve.reversed(), 2.0, 1.0) == pytest.approx(calabi_length(curve, 2.0, 1.0), rel=1e-12)
        assert mabuchi_length(curve.reversed(), 1.0) == pytest.approx(mabuchi_length(curve, 1.0), rel=1e-12)


class TestCurves:
    def test_needs_two_samples(self, geometry):
        with pytest.raises(CurveError):
            PotentialCurve((Potential.zero(geometry),), np.array([0.0]))

    def test_samples_share_one_geometry(self):
        a, b = make_torus_geometry(16), make_torus_geometry(16)
        with pytest.raises(ShapeError):
            PotentialCurve((Potential.zero(a), Potential.zero(b)), np.array([0.0, 1.0]))


class TestDistanceBracket:
    def test_identical_endpoints(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        bracket = calabi_distance_bracket(u, u, 2.0, 1.0)
        assert bracket.lower == bracket.upper == 0.0
        assert bracket.closed_form == 0.0

    def test_ordering(self, geometry, rng):
        u0, u1 = random_smooth_potential(geometry, rng, 0.6), random_smooth_potential(geometry, rng, 0.6)
        for p, q in [(1.0, 1.0), (3.0, 1.5), (4.0, 2.0)]:
            b = calabi_distance_bracket(u0, u1, p, q)
            assert 0 < b.lower <= b.polygon * (1 + 1e-12)
            assert b.polygon <= b.upper * (1 + 1e-9)
            assert b.closed_form is None

    def test_great_circle_closed_form(self, geometry, rng):
        u0, u1 = random_smooth_potential(geometry, rng, 0.6), random_smooth_potential(geometry, rng, 0.6)
        b = calabi_distance_bracket(u0, u1, 2.0, 1.0)
        formula = 2.0 * math.acos(min(1.0, geometry.mean(np.sqrt(u0.rho * u1.rho))))
        assert b.contains(formula)
        assert b.closed_form == pytest.approx(formula, abs=1e-8)
        assert arc_from_chord(b.lower, 2.0) == pytest.approx(formula, abs=1e-8)

    def test_length_of_any_curve_dominates_the_chord(self, geometry, rng):
        u0, u1 = random_smooth_potential(geometry, rng, 0.6), random_smooth_potential(geometry, rng, 0.6)
        curve = PotentialCurve.segment(u0, u1, 33)
        assert calabi_length(curve, 3.0, 1.5) >= calabi_distance_bracket(u0, u1, 3.0, 1.5).lower * (1 - 1e-4)


class TestCauchyStatistics:
    def test_vanish_on_identical_pairs(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        assert calabi_cauchy_stat(u, u, 1.0) == 0.0
        assert calabi_cauchy_stat_sphere(u, u, 2.0, 1.0) == 0.0
        assert mabuchi_cauchy_stat(u, u, 2.0) == 0.0

    def test_symmetric(self, geometry, rng):
        a, b = random_smooth_potential(geometry, rng), random_smooth_potential(geometry, rng)
        assert calabi_cauchy_stat(a, b, 2.0) == pytest.approx(calabi_cauchy_stat(b, a, 2.0), rel=1e-14)
        assert mabuchi_cauchy_stat(a, b, 1.5) == pytest.approx(mabuchi_cauchy_stat(b, a, 1.5), rel=1e-14)

    def test_scaling_along_a_ray(self, geometry, rng):
        u = random_smooth_potential(geometry, rng, 0.4)
        zero = Potential.zero(geometry)
        half = Potential(0.5 * u.values, geometry)
        assert calabi_cauchy_stat(half, zero, 2.0) == pytest.approx(0.25 * calabi_cauchy_stat(u, zero, 2.0), rel=1e-10)

    def test_entropy_of_background_is_zero(self, geometry, rng):
        assert entropy(Potential.zero(geometry)) == 0.0
        assert entropy(random_smooth_potential(geometry, rng, 0.5)) > 0.0


class TestPinsker:
    def test_relative_entropy_is_nonnegative(self, rng):
        m = MeasureSpace(rng.uniform(0.5, 1.5, 10))
        f = rng.lognormal(size=10)
        g = rng.lognormal(size=10)
        f, g = f / m.mean(f), g / m.mean(g)
        assert relative_entropy(f, g, m) >= 0.0
        assert relative_entropy(f, f, m) == 0.0

    def test_two_cell_closed_form(self):
        m = MeasureSpace(np.array([2.0, 2.0]))
        for a, b in [(0.5, 1.5), (1.9, 0.1), (1.2, 0.9)]:
            res = pinsker_gap(np.array([a, 2 - a]), np.array([b, 2 - b]), m)
            lhs, rhs = two_cell_pinsker(a, b, m.total)
            assert res.lhs == pytest.approx(lhs, rel=1e-12)
            assert res.rhs == pytest.approx(rhs, rel=1e-12)
            assert res.holds

    def test_calibration_freezes_twice_the_volume(self):
        kappa, observed = calibrate_pinsker_kappa(4.0)
        assert kappa == 8.0
        assert observed <= kappa * (1 + 1e-9)
        assert observed == pytest.approx(kappa, rel=1e-6)

    def test_random_pairs_hold(self, rng):
        for _ in range(200):
            m = MeasureSpace(rng.uniform(0.1, 2.0, int(rng.integers(2, 30))))
            f = rng.lognormal(0.0, 1.0, m.size)
            g = rng.lognormal(0.0, 1.0, m.size)
            assert pinsker_gap(f / m.mean(f), g / m.mean(g), m).holds

    def test_rejects_non_density(self):
        with pytest.raises(DomainError):
            pinsker_gap(np.array([1.0, 2.0]), np.array([1.0, 1.0]), MeasureSpace.uniform(2))


class TestSmoothing:
    def test_interior_density_is_unchanged(self, geometry, rng):
        u = random_smooth_potential(geometry, rng, 0.5)
        np.testing.assert_array_equal(smoothing_sequence(u.rho, 3, geometry), u.rho)

    def test_error_bounded_by_clamp_and_mollifier(self):
        g = make_torus_geometry(16)
        f = np.zeros(g.size)
        f[:64] = 4.0
        assert g.mean(f) == pytest.approx(1.0)
        for k in range(1, 9):
            fk = smoothing_sequence(f, k, g)
            clamp = g.integrate(np.abs(f - np.clip(f, 2.0 ** -k, 2.0 ** k)))
            assert np.all(fk >= 2.0 ** -k)
            assert g.integrate(np.abs(f - fk)) <= clamp + 2.0 ** -k + 1e-12

    def test_statistics_shrink(self):
        g = make_torus_geometry(16)
        f = np.zeros(g.size)
        f[:64] = 4.0
        stats = smoothing_statistics(f, [2, 6, 10], g)
        assert [k for k, _, _ in stats] == [2, 6, 10]
        assert stats[-1][1] < stats[0][1]
        assert stats[-1][1] < 2e-3


class TestEquivalenceDiagnostics:
    @staticmethod
    def diagnostics(first, last):
        d = EquivalenceDiagnostics()
        for row in (first, last):
            d.l1_potential.append(row[0])
            d.weak_proxy.append(row[1])
            d.mabuchi_stat.append(row[2])
            d.calabi_stat.append(row[3])
        return d

    def test_co_vanishing(self):
        assert self.diagnostics([1, 1, 1, 1], [1e-7, 1e-6, 5e-5, 2e-5]).co_vanishes()
        assert not self.diagnostics([1, 1, 1, 1], [1e-7, 1e-6, 5e-5, 1e-2]).co_vanishes()

    def test_decoupling(self):
        assert self.diagnostics([1, 1, 1, 1], [1e-4, 0.5, 1e-3, 0.6]).decoupled()
        assert not self.diagnostics([1, 1, 1, 1], [0.1, 0.1, 0.1, 0.1]).decoupled()

    def test_weak_proxy_of_the_limit_is_zero(self, geometry, rng):
        u = random_smooth_potential(geometry, rng)
        assert weak_convergence_proxy(u, u) == 0.0


def test_metric_report_serializes(tmp_path, rng):
    g = make_torus_geometry(16)
    base = random_smooth_potential(g, rng, 0.3)
    seq = [Potential.from_values(base.values * (1 + 0.5 ** j), g) for j in range(1, 4)]
    report = metric_report(seq, 2.0, 1.0, 1.0)
    assert report.calabi_bracket[0] <= report.calabi_bracket[1]
    assert report.calabi_closed_form is not None
    assert len(report.cauchy_stats) == 4
    data = json.loads(report.model_dump_json())
    assert data["exponents"] == {"p": 2.0, "q": 1.0, "p_prime": 1.0}
    lines = report.write_pairs_csv(tmp_path / "pairs.csv").read_text().splitlines()
    assert lines[0] == "j,k,stat_name,value"
    assert len(lines) == 5
