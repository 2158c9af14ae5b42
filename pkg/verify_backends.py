#!/usr/bin/env python3
"""
Backend self-check: Poisson round trips, Laplacian spectra and the
curvature mass identity on both Kähler backends.

Run directly for a printable report:
    python verify_backends.py --trials 1000
"""

import argparse
import logging
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from kahler_backend import (
    P1,
    TORUS,
    Geometry,
    Potential,
    calabi_yau_inverse,
    make_geometry,
    make_p1_geometry,
    make_torus_geometry,
    random_smooth_potential,
    scalar_curvature,
)
from lab_errors import LabError

logger = logging.getLogger(__name__)

ROUND_TRIP_TOL = 1e-9
CURVATURE_MEAN_TOL = 1e-6


@dataclass
class OracleResult:
    name: str
    passed: bool
    value: float
    detail: str


def random_density(geometry: Geometry, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Rough unit-mean density with values in roughly [1 - spread, 1 + spread]."""
    raw = 1.0 + spread * rng.uniform(-1.0, 1.0, geometry.size)
    return raw / geometry.mean(raw)


def poisson_round_trip(geometry: Geometry, rng: np.random.Generator, trials: int) -> OracleResult:
    worst = 0.0
    for _ in range(trials):
        rho = random_density(geometry, rng)
        u = calabi_yau_inverse(rho, geometry)
        worst = max(worst, float(np.max(np.abs(u.rho - rho))))
        smooth = random_smooth_potential(geometry, rng)
        back = calabi_yau_inverse(smooth.rho, geometry)
        scale = max(1.0, float(np.max(np.abs(smooth.values))))
        worst = max(worst, float(np.max(np.abs(back.values - smooth.values))) / scale)
    return OracleResult(
        f"poisson round trip ({geometry.kind}, N={geometry.resolution})",
        worst < ROUND_TRIP_TOL,
        worst,
        f"max density/potential error {worst:.2e} over {trials} trials",
    )


def torus_eigen_error(resolution: int) -> float:
    """Relative error of the discrete eigenvalue for cos(2 pi x) against -2 pi^2."""
    g = make_torus_geometry(resolution)
    mode = np.cos(2 * math.pi * g.sites[:, 0])
    site = int(np.argmax(mode))
    observed = g.laplace(mode)[site] / mode[site]
    return abs(observed + 2 * math.pi ** 2) / (2 * math.pi ** 2)


def torus_eigen_order(resolution: int) -> OracleResult:
    coarse, fine = torus_eigen_error(resolution), torus_eigen_error(2 * resolution)
    order = math.log2(coarse / fine)
    return OracleResult(
        "torus Laplacian eigenvalue order",
        1.8 <= order <= 2.2,
        order,
        f"relative errors {coarse:.3e} (N={resolution}) and {fine:.3e} (N={2 * resolution}); order {order:.3f}",
    )


def p1_spectrum(resolution: int) -> OracleResult:
    """The zonal operator is triangular on polynomials in cos(theta): spectrum -l(l+1)/2, l < N."""
    g = make_p1_geometry(resolution)
    # uniform weights make the operator symmetric
    observed = np.sort(np.linalg.eigvalsh(g.laplace_matrix.toarray()))[::-1]
    degree = np.arange(resolution)
    expected = -0.5 * degree * (degree + 1)
    worst = float(np.max(np.abs(observed - expected) / np.maximum(1.0, np.abs(expected))))
    return OracleResult(
        f"P^1 zonal spectrum (N={resolution})",
        worst < 1e-8,
        worst,
        f"max relative eigenvalue error {worst:.2e} for l = 0..{resolution - 1}",
    )


def curvature_mean(geometry: Geometry, rng: np.random.Generator, trials: int) -> OracleResult:
    """(1/V) sum w S rho equals S_bar for every admissible potential."""
    worst = 0.0
    for _ in range(trials):
        u = random_smooth_potential(geometry, rng, swing=float(rng.uniform(0.1, 0.8)))
        mean = geometry.integrate(scalar_curvature(u) * u.rho) / geometry.volume
        worst = max(worst, abs(mean - geometry.s_bar))
    flat = scalar_curvature(Potential.zero(geometry))
    worst = max(worst, float(np.max(np.abs(flat - geometry.s_bar))))
    return OracleResult(
        f"curvature mean ({geometry.kind}, N={geometry.resolution})",
        worst < CURVATURE_MEAN_TOL,
        worst,
        f"max |mean S - S_bar| = {worst:.2e} over {trials} potentials",
    )


def run_oracles(torus_resolution: int = 32, p1_resolution: int = 64, trials: int = 100, seed: int = 0) -> List[OracleResult]:
    rng = np.random.default_rng(seed)
    torus = make_geometry(TORUS, torus_resolution)
    sphere = make_geometry(P1, p1_resolution)
    round_trip_trials = max(1, trials // 10)
    return [
        poisson_round_trip(torus, rng, round_trip_trials),
        poisson_round_trip(sphere, rng, round_trip_trials),
        torus_eigen_order(torus_resolution),
        p1_spectrum(p1_resolution),
        curvature_mean(torus, rng, trials),
        curvature_mean(sphere, rng, trials),
    ]


def verify(torus_resolution: int, p1_resolution: int, trials: int, seed: int) -> bool:
    print("\n" + "=" * 40)
    print("KÄHLER BACKEND VERIFICATION")
    print("=" * 40)
    try:
        results = run_oracles(torus_resolution, p1_resolution, trials, seed)
    except LabError as exc:
        print(f"  ❌ Backend construction failed: {exc}")
        return False
    for i, result in enumerate(results, 1):
        print(f"\n[{i}/{len(results)}] Verifying {result.name}...")
        mark = "✅" if result.passed else "❌"
        print(f"  {mark} {result.detail}")
    ok = all(r.passed for r in results)
    print("\n" + "=" * 40)
    print("VERIFICATION COMPLETE" if ok else "VERIFICATION FAILED")
    print("=" * 40)
    return ok


def main():
    parser = argparse.ArgumentParser(description="Check the discretized Kähler backends")
    parser.add_argument("--torus-resolution", type=int, default=32)
    parser.add_argument("--p1-resolution", type=int, default=64)
    parser.add_argument("--trials", type=int, default=1000, help="random potentials for the curvature check")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    raise SystemExit(0 if verify(args.torus_resolution, args.p1_resolution, args.trials, args.seed) else 1)


if __name__ == "__main__":
    main()
