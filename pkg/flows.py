#!/usr/bin/env python3
"""
Kähler-Ricci and Calabi Flows

Time integration of the normalized Kähler-Ricci flow on the P^1 backend,
    dr/dt = log rho_r + r - c(t),
and the Calabi flow on either backend,
    dc/dt = S(omega_c) - S_bar,
with zero-mean normalization restored by projection after every step.

KR uses a linearly implicit Euler step built on the Jacobian
diag(1/rho) laplace + I of log rho + r. Calabi flow treats the leading
fourth-order part diag(1/rho) laplace diag(1/rho) laplace implicitly.
Rejected steps (density below the floor or non-finite values) are retried
as two half steps, so recorded times stay on the nominal grid.

Also provides the finite-length criterion for KR trajectories, exponential
rate fits, and directory persistence for trajectories.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import spsolve

from finsler import calabi_cauchy_stat
from kahler_backend import (
    P1,
    Geometry,
    Potential,
    load_grid_function,
    make_geometry,
    save_grid_function,
    scalar_curvature,
)
from lab_errors import (
    FitDomainError,
    FlowDegenerationError,
    FlowKindError,
    NotKahlerError,
    NumericError,
    StiffnessError,
)
from lpq_sphere import check_exponents, lp_norm

logger = logging.getLogger(__name__)

KAHLER_RICCI = "kahler-ricci"
CALABI = "calabi"
FLOW_KINDS = (KAHLER_RICCI, CALABI)

SCHEMES = {
    KAHLER_RICCI: "linearly-implicit-euler",
    CALABI: "implicit-fourth-order-euler",
}


@dataclass
class FlowControls:
    max_halvings: int = 6
    max_rejections: int = 50
    record_every: int = 1


@dataclass
class FlowTrajectory:
    kind: str
    geometry: Geometry
    dt: float
    times: List[float] = field(default_factory=list)
    states: List[Potential] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    min_density: List[float] = field(default_factory=list)
    rejections: int = 0

    @property
    def scheme(self) -> str:
        return SCHEMES[self.kind]

    @property
    def final(self) -> Potential:
        return self.states[-1]

    def record(self, t: float, u: Potential, residual: float) -> None:
        if self.times and t <= self.times[-1]:
            raise NumericError(f"trajectory times must increase (got {t} after {self.times[-1]})")
        self.times.append(float(t))
        self.states.append(u)
        self.residuals.append(float(residual))
        self.min_density.append(float(u.rho.min()))

    def sup_norms(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(u.values))) for u in self.states])


def kr_velocity(u: Potential) -> np.ndarray:
    """Projected right-hand side log rho + r - mean."""
    return u.geometry.project_mean(np.log(u.rho) + u.values)


def calabi_velocity(u: Potential) -> np.ndarray:
    return u.geometry.project_mean(scalar_curvature(u) - u.geometry.s_bar)


def _kr_step(u: Potential, dt: float) -> np.ndarray:
    g = u.geometry
    rhs = np.log(u.rho) + u.values
    jacobian = sp.diags(1.0 / u.rho) @ g.laplace_matrix + sp.identity(g.size)
    system = (sp.identity(g.size) - dt * jacobian).tocsc()
    return u.values + np.asarray(spsolve(system, dt * rhs))


def _calabi_step(u: Potential, dt: float) -> np.ndarray:
    g = u.geometry
    inv_rho = sp.diags(1.0 / u.rho)
    leading = inv_rho @ g.laplace_matrix @ inv_rho @ g.laplace_matrix
    system = (sp.identity(g.size) + dt * leading).tocsc()
    forcing = scalar_curvature(u) - g.s_bar
    return u.values + dt * np.asarray(spsolve(system, forcing))


class _Stepper:
    def __init__(self, step: Callable[[Potential, float], np.ndarray], controls: FlowControls):
        self.step = step
        self.controls = controls
        self.rejections = 0

    def _attempt(self, u: Potential, dt: float) -> Optional[Potential]:
        values = self.step(u, dt)
        if not np.all(np.isfinite(values)):
            return None
        try:
            return Potential.from_values(values, u.geometry)
        except NotKahlerError:
            return None

    def advance(self, u: Potential, dt: float, t: float, depth: int = 0) -> Potential:
        nxt = self._attempt(u, dt)
        if nxt is not None:
            return nxt
        self.rejections += 1
        logger.warning("step at t=%.6g with dt=%.3g rejected; retrying as two half steps", t, dt)
        if self.rejections > self.controls.max_rejections:
            raise StiffnessError(t, self.rejections)
        if depth >= self.controls.max_halvings:
            raise FlowDegenerationError(t, f"density left the Kähler cone below dt={dt:.3g}")
        half = self.advance(u, 0.5 * dt, t, depth + 1)
        return self.advance(half, 0.5 * dt, t + 0.5 * dt, depth + 1)


def _run(kind: str, u0: Potential, dt: float, T: float, controls: Optional[FlowControls]) -> FlowTrajectory:
    controls = controls or FlowControls()
    if not dt > 0 or not T > 0:
        raise NumericError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    step, velocity = (_kr_step, kr_velocity) if kind == KAHLER_RICCI else (_calabi_step, calabi_velocity)
    stepper = _Stepper(step, controls)
    steps = int(round(T / dt))
    traj = FlowTrajectory(kind=kind, geometry=u0.geometry, dt=dt)
    u = u0
    traj.record(0.0, u, float(np.max(np.abs(velocity(u)))))
    for n in range(1, steps + 1):
        u = stepper.advance(u, dt, (n - 1) * dt)
        if n % controls.record_every == 0 or n == steps:
            traj.record(n * dt, u, float(np.max(np.abs(velocity(u)))))
    traj.rejections = stepper.rejections
    logger.info(
        "%s flow: %d steps to T=%g, final residual %.3e, min density %.4f, %d rejections",
        kind, steps, T, traj.residuals[-1], min(traj.min_density), traj.rejections,
    )
    return traj


def kr_flow_run(u0: Potential, dt: float, T: float, controls: Optional[FlowControls] = None) -> FlowTrajectory:
    """Normalized Kähler-Ricci flow on P^1 (dt < 1 keeps the constant mode invertible)."""
    if u0.geometry.kind != P1:
        raise FlowKindError("Kähler-Ricci flow runs on the P^1 backend (c_1 > 0)")
    if not dt < 1:
        raise NumericError(f"KR step needs dt < 1, got {dt}")
    return _run(KAHLER_RICCI, u0, dt, T, controls)


def calabi_flow_run(u0: Potential, dt: float, T: float, controls: Optional[FlowControls] = None) -> FlowTrajectory:
    return _run(CALABI, u0, dt, T, controls)


@dataclass
class ExpFit:
    amplitude: float
    rate: float
    residual: float


def exp_rate_fit(
    times: Sequence[float], values: Sequence[float], window: Optional[Tuple[float, float]] = None
) -> ExpFit:
    """Least-squares fit of log(value) = log(A) - rate * t on the window."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    index = np.arange(t.size)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v, index = t[keep], v[keep], index[keep]
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        raise FitDomainError(int(index[bad[0]]), float(v[bad[0]]))
    if t.size < 2:
        raise FitDomainError(int(index[0]) if index.size else 0, float("nan"))
    slope, intercept = np.polyfit(t, np.log(v), 1)
    resid = np.log(v) - (slope * t + intercept)
    return ExpFit(float(np.exp(intercept)), float(-slope), float(np.sqrt(np.mean(resid ** 2))))


@dataclass
class CriterionReport:
    p: float
    q: float
    times: np.ndarray
    g: np.ndarray
    running_integral: np.ndarray
    fit: Optional[ExpFit]
    late_cauchy: float
    tail_estimate: float

    @property
    def integral(self) -> float:
        return float(self.running_integral[-1])

    @property
    def finite(self) -> bool:
        if self.fit is None:
            return True
        return self.fit.rate > 0 and math.isfinite(self.integral + self.tail_estimate)

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["t", "g", "running_integral"])
            for row in zip(self.times, self.g, self.running_integral):
                writer.writerow([f"{x:.17g}" for x in row])
        return path


def criterion_integrand(u: Potential, p: float, q: float) -> float:
    """((1/V) int |1 - S|^p rho^q)^(1/p); p = inf gives sup |1 - S|."""
    check_exponents(p, q)
    deviation = 1.0 - scalar_curvature(u)
    if math.isinf(p):
        return u.geometry.sup_abs(deviation)
    return lp_norm(deviation * u.rho ** (q / p), p, u.geometry.measure)


def flow_length_criterion(traj: FlowTrajectory, p: float, q: float, floor: float = 1e-13) -> CriterionReport:
    """
    Finite-length criterion along a KR trajectory: g(t), its running integral,
    an exponential tail fit on the second half, the extrapolated tail
    A exp(-rate T) / rate, and the q-Cauchy statistic between the last two states.
    """
    if traj.kind != KAHLER_RICCI:
        raise FlowKindError(f"length criterion needs a Kähler-Ricci trajectory, got {traj.kind}")
    check_exponents(p, q)
    t = np.asarray(traj.times)
    g = np.array([criterion_integrand(u, p, q) for u in traj.states])
    running = cumulative_trapezoid(g, t, initial=0.0)
    fit, tail = None, 0.0
    tail_window = (t[-1] * 0.5, t[-1])
    usable = g > floor
    if np.count_nonzero(usable & (t >= tail_window[0])) >= 2:
        fit = exp_rate_fit(t[usable], g[usable], tail_window)
        tail = fit.amplitude * math.exp(-fit.rate * t[-1]) / fit.rate if fit.rate > 0 else math.inf
    late = calabi_cauchy_stat(traj.states[-2], traj.states[-1], q) if len(traj.states) > 1 else 0.0
    return CriterionReport(p, q, t, g, running, fit, late, tail)


def finite_difference_velocity(traj: FlowTrajectory, index: int) -> np.ndarray:
    """Central difference of recorded states (one-sided at the ends)."""
    n = len(traj.states)
    lo, hi = max(index - 1, 0), min(index + 1, n - 1)
    return (traj.states[hi].values - traj.states[lo].values) / (traj.times[hi] - traj.times[lo])


def save_trajectory(traj: FlowTrajectory, directory: Path, stride: int = 1, seed: Optional[int] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kept = list(range(0, len(traj.states), stride))
    if kept[-1] != len(traj.states) - 1:
        kept.append(len(traj.states) - 1)
    snapshots = []
    for i in kept:
        name = f"state_{i:05d}.csv"
        save_grid_function(directory / name, traj.states[i].values, traj.geometry)
        snapshots.append({"index": i, "t": traj.times[i], "file": name})
    metadata = {
        "kind": traj.kind,
        "backend": traj.geometry.kind,
        "resolution": traj.geometry.resolution,
        "dt": traj.dt,
        "T": traj.times[-1],
        "scheme": traj.scheme,
        "seed": seed,
        "stride": stride,
        "rejections": traj.rejections,
        "snapshots": snapshots,
    }
    (directory / "metadata.json").write_text(json.dumps(metadata, indent=2))
    return directory


def load_trajectory(directory: Path) -> FlowTrajectory:
    directory = Path(directory)
    metadata = json.loads((directory / "metadata.json").read_text())
    geometry = make_geometry(metadata["backend"], metadata["resolution"])
    traj = FlowTrajectory(kind=metadata["kind"], geometry=geometry, dt=metadata["dt"])
    velocity = kr_velocity if traj.kind == KAHLER_RICCI else calabi_velocity
    for snap in metadata["snapshots"]:
        values, _ = load_grid_function(directory / snap["file"], geometry)
        u = Potential.from_values(values, geometry)
        traj.record(snap["t"], u, float(np.max(np.abs(velocity(u)))))
    traj.rejections = metadata.get("rejections", 0)
    return traj

