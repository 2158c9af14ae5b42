import math

import numpy as np
import pytest

import kahler_backend as kb
from kahler_backend import (
    P1,
    TORUS,
    ConditioningWarning,
    Density,
    Potential,
    calabi_yau_inverse,
    density,
    load_grid_function,
    make_geometry,
    make_p1_geometry,
    make_torus_geometry,
    random_smooth_potential,
    save_grid_function,
    scalar_curvature,
    weighted_laplacian,
    zonal_potential,
)
from lab_errors import InconsistencyError, NotKahlerError, ResolutionError, ShapeError
from verify_backends import p1_spectrum, run_oracles, torus_eigen_order


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@pytest.fixture(params=[(TORUS, 16), (P1, 32)], ids=["torus", "p1"])
def geometry(request):
    return make_geometry(*request.param)


class TestGeometry:
    @pytest.mark.parametrize("n", [6, 9, 15])
    def test_torus_rejects_bad_resolution(self, n):
        with pytest.raises(ResolutionError):
            make_torus_geometry(n)

    def test_p1_rejects_coarse_grid(self):
        with pytest.raises(ResolutionError):
            make_p1_geometry(8)

    def test_weights_sum_to_volume(self, geometry):
        assert geometry.integrate(np.ones(geometry.size)) == pytest.approx(geometry.volume, rel=1e-13)
        assert np.all(geometry.quad_weights > 0)

    def test_constants_are_annihilated(self, geometry):
        assert np.max(np.abs(geometry.laplace(np.full(geometry.size, 3.7)))) < 1e-10

    def test_self_adjoint_with_zero_mean_range(self, geometry, rng):
        for _ in range(5):
            f, g = rng.standard_normal((2, geometry.size))
            lhs = geometry.integrate(geometry.laplace(f) * g)
            rhs = geometry.integrate(f * geometry.laplace(g))
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
            assert abs(geometry.integrate(geometry.laplace(f))) < 1e-10 * max(1.0, geometry.laplace_norm)

    def test_torus_fourier_eigenvalue(self):
        g = make_torus_geometry(256)
        mode = np.cos(2 * math.pi * g.sites[:, 0])
        expected = -2 * math.pi ** 2 * mode
        np.testing.assert_allclose(g.laplace(mode), expected, rtol=1e-3, atol=1e-3 * 2 * math.pi ** 2)

    def test_p1_first_zonal_harmonic(self):
        g = make_p1_geometry(64)
        x = np.cos(g.sites)
        np.testing.assert_allclose(g.laplace(x), -x, atol=1e-12)

    def test_p1_sup_reaches_the_poles(self):
        g = make_p1_geometry(64)
        x = np.cos(g.sites)
        assert np.max(np.abs(x)) == pytest.approx(1.0 - 1.0 / 64)
        assert g.sup_abs(x) == pytest.approx(1.0, abs=1e-12)
        p2 = 0.5 * (3.0 * x ** 2 - 1.0)
        assert abs(g.sup_abs(p2) - 1.0) < abs(np.max(np.abs(p2)) - 1.0)
        assert make_torus_geometry(16).sup_abs(np.array([1.0, -3.0])) == 3.0

    def test_oracle_orders(self):
        assert torus_eigen_order(16).passed
        assert p1_spectrum(32).passed


class TestPotentialsAndDensities:
    def test_zero_potential_has_unit_density(self, geometry):
        u = Potential.zero(geometry)
        np.testing.assert_array_equal(density(u).values, 1.0)

    def test_torus_cosine_density(self):
        g = make_torus_geometry(128)
        a = 0.01
        u = Potential.from_values(a * np.cos(2 * math.pi * g.sites[:, 0]), g)
        expected = 1.0 - a * 2 * math.pi ** 2 * np.cos(2 * math.pi * g.sites[:, 0])
        np.testing.assert_allclose(u.rho, expected, atol=1e-4)

    def test_mass_conservation(self, geometry, rng):
        for _ in range(20):
            u = random_smooth_potential(geometry, rng, float(rng.uniform(0.1, 0.9)))
            assert geometry.mean(u.rho) == pytest.approx(1.0, abs=1e-12)

    def test_non_kahler_potential_reports_site(self):
        g = make_torus_geometry(16)
        values = np.zeros(g.size)
        values[37] = 1.0
        with pytest.raises(NotKahlerError) as err:
            Potential.from_values(values, g)
        assert err.value.site == 37

    def test_potential_must_have_zero_mean(self, geometry):
        with pytest.raises(ShapeError):
            Potential(np.full(geometry.size, 0.5), geometry)

    def test_density_requires_unit_mean(self, geometry):
        with pytest.raises(InconsistencyError):
            Density(np.full(geometry.size, 1.01), geometry)


class TestCalabiYauInverse:
    def test_unit_density_gives_zero(self, geometry):
        u = calabi_yau_inverse(np.ones(geometry.size), geometry)
        assert np.max(np.abs(u.values)) < 1e-12

    def test_round_trip_from_potential(self, geometry, rng):
        for _ in range(5):
            u0 = random_smooth_potential(geometry, rng, 0.6)
            back = calabi_yau_inverse(density(u0), geometry)
            np.testing.assert_allclose(back.values, u0.values, atol=1e-9 * max(1.0, np.max(np.abs(u0.values))))

    def test_round_trip_from_rough_density(self, geometry, rng):
        raw = rng.uniform(0.3, 1.7, geometry.size)
        rho = raw / geometry.mean(raw)
        np.testing.assert_allclose(calabi_yau_inverse(rho, geometry).rho, rho, atol=1e-9)

    def test_mean_off_by_one_percent_is_inconsistent(self, geometry):
        with pytest.raises(InconsistencyError) as err:
            calabi_yau_inverse(np.full(geometry.size, 1.01), geometry)
        assert err.value.mean == pytest.approx(1.01)


class TestCurvature:
    def test_background_curvature(self):
        assert np.max(np.abs(scalar_curvature(Potential.zero(make_torus_geometry(16))))) == 0.0
        np.testing.assert_allclose(scalar_curvature(Potential.zero(make_p1_geometry(32))), 1.0, atol=1e-12)

    def test_weighted_laplacian_identities(self, geometry, rng):
        u = random_smooth_potential(geometry, rng, 0.5)
        beta = rng.standard_normal(geometry.size)
        assert np.max(np.abs(weighted_laplacian(u, np.full(geometry.size, 2.0)))) < 1e-10
        np.testing.assert_allclose(weighted_laplacian(Potential.zero(geometry), beta), geometry.laplace(beta))
        assert abs(geometry.integrate(weighted_laplacian(u, beta) * u.rho)) < 1e-9 * geometry.laplace_norm

    def test_average_curvature_is_topological(self, geometry, rng):
        for _ in range(10):
            u = random_smooth_potential(geometry, rng, float(rng.uniform(0.1, 0.8)))
            mean = geometry.integrate(scalar_curvature(u) * u.rho) / geometry.volume
            assert mean == pytest.approx(geometry.s_bar, abs=1e-6)

    def test_near_degenerate_density_warns(self):
        g = make_torus_geometry(16)
        rho = np.ones(g.size)
        rho[5] = 5e-7
        rho /= g.mean(rho)
        u = calabi_yau_inverse(rho, g)
        with pytest.warns(ConditioningWarning):
            scalar_curvature(u)


class TestHelpers:
    def test_dictionary_shapes(self, geometry):
        basis = kb.test_function_dictionary(geometry)
        assert basis.shape == (kb.DICTIONARY_SIZE, geometry.size)
        assert np.all(np.isfinite(basis))

    def test_zonal_potential_swing(self):
        g = make_p1_geometry(64)
        u = zonal_potential(g, 2, 0.3)
        swing = np.max(np.abs(u.rho - 1.0))
        assert swing <= 0.3
        assert swing == pytest.approx(0.3, rel=0.05)
        with pytest.raises(ShapeError):
            zonal_potential(make_torus_geometry(16), 2, 0.3)
        with pytest.raises(ShapeError):
            zonal_potential(g, 0, 0.3)

    def test_zonal_potential_uses_exact_eigenvalue(self):
        g = make_p1_geometry(64)
        x = np.cos(g.sites)
        p2 = g.project_mean(0.5 * (3.0 * x ** 2 - 1.0))
        u = zonal_potential(g, 2, 0.3)
        np.testing.assert_allclose(u.values, 0.1 * p2, atol=1e-14)
        np.testing.assert_allclose(u.rho - 1.0, -0.3 * p2, atol=1e-10)

    def test_zonal_datum_is_resolution_independent(self):
        coarse, fine = make_p1_geometry(32), make_p1_geometry(64)
        u, v = zonal_potential(coarse, 4, 0.2), zonal_potential(fine, 4, 0.2)
        x = np.cos(coarse.sites)
        exact = 0.2 / 10.0 * np.polynomial.legendre.legval(x, [0, 0, 0, 0, 1])
        # same function up to the mean constant
        np.testing.assert_allclose(u.values - u.values[0], exact - exact[0], atol=1e-13)
        xf = np.cos(fine.sites)
        exact_f = 0.2 / 10.0 * np.polynomial.legendre.legval(xf, [0, 0, 0, 0, 1])
        np.testing.assert_allclose(v.values - v.values[0], exact_f - exact_f[0], atol=1e-13)
        assert abs(np.max(np.abs(u.rho - 1.0)) - np.max(np.abs(v.rho - 1.0))) < 0.1


class TestGridIO:
    @pytest.mark.parametrize("fmt", ["csv", "bin"])
    def test_save_and_load(self, geometry, rng, tmp_path, fmt):
        values = rng.standard_normal(geometry.size)
        path = save_grid_function(tmp_path / f"u.{fmt}", values, geometry, fmt)
        loaded, header = load_grid_function(path, geometry)
        np.testing.assert_array_equal(loaded, values)
        assert header["kind"] == geometry.kind
        assert int(header["resolution"]) == geometry.resolution

    def test_load_rejects_other_geometry(self, tmp_path):
        g = make_torus_geometry(16)
        path = save_grid_function(tmp_path / "u.csv", np.zeros(g.size), g)
        with pytest.raises(ShapeError):
            load_grid_function(path, make_torus_geometry(32))


def test_backend_oracles_pass_at_small_scale():
    results = run_oracles(torus_resolution=16, p1_resolution=32, trials=20, seed=3)
    assert all(r.passed for r in results), [(r.name, r.detail) for r in results if not r.passed]
