#!/usr/bin/env python3
"""
Calabi and Mabuchi Finsler Structures

Tangent norms, curve lengths and distance brackets for the L^{p,q}-Calabi and
L^p-Mabuchi Finsler metrics on normalized Kähler potentials, the isometric
embedding F(u) = (p/q) rho_u^{q/p} into the L^{p/q}-sphere octant, the integral
Cauchy statistics for both metrics, entropy, the Pinsker comparison, the
clamp-and-mollify smoothing sequence for densities, and the four-statistic
equivalence diagnostics for finite-entropy sequences.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field
from scipy.sparse.linalg import spsolve

from kahler_backend import Geometry, Potential, test_function_dictionary
from lab_errors import CurveError, DomainError, InvalidExponentError, NumericError, ShapeError
from lpq_sphere import (
    DiscreteCurve,
    MeasureSpace,
    SphereFunction,
    alpha_curve_length,
    check_exponents,
    chord_distance,
    curve_length,
    great_circle_distance,
    lp_norm,
    normalized_segment_curve,
)

logger = logging.getLogger(__name__)

# lhs <= kappa * rhs with kappa = PINSKER_KAPPA_PER_VOLUME * V
PINSKER_KAPPA_PER_VOLUME = 2.0
UNIT_MEAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PotentialCurve:
    """Ordered admissible potentials on one geometry at increasing parameters."""

    samples: Tuple[Potential, ...]
    params: np.ndarray

    def __post_init__(self):
        samples = tuple(self.samples)
        t = np.array(self.params, dtype=float).ravel()
        if len(samples) < 2:
            raise CurveError("a potential curve needs at least 2 samples")
        if t.size != len(samples):
            raise ShapeError(f"{t.size} parameters for {len(samples)} samples")
        if np.any(np.diff(t) <= 0):
            raise CurveError("curve parameters must be strictly increasing")
        geometry = samples[0].geometry
        if any(u.geometry is not geometry for u in samples):
            raise ShapeError("all samples of a curve must share one geometry")
        t.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "params", t)

    @property
    def geometry(self) -> Geometry:
        return self.samples[0].geometry

    def __len__(self) -> int:
        return len(self.samples)

    @classmethod
    def from_values(cls, values: np.ndarray, params: np.ndarray, geometry: Geometry) -> "PotentialCurve":
        return cls(tuple(Potential.from_values(row, geometry) for row in np.atleast_2d(values)), params)

    @classmethod
    def segment(cls, u0: Potential, u1: Potential, m: int) -> "PotentialCurve":
        """u_t = (1 - t) u0 + t u1; densities interpolate linearly so every sample is admissible."""
        if m < 2:
            raise CurveError(f"segment needs m >= 2 samples, got {m}")
        t = np.linspace(0.0, 1.0, m)
        rows = (1 - t)[:, None] * u0.values[None, :] + t[:, None] * u1.values[None, :]
        return cls.from_values(rows, t, u0.geometry)

    def reversed(self) -> "PotentialCurve":
        return PotentialCurve(self.samples[::-1], (self.params[-1] + self.params[0]) - self.params[::-1])


def _finite_exponent(p: float) -> float:
    p = float(p)
    if not p >= 1:
        raise InvalidExponentError(f"need p >= 1, got {p}", p=p)
    return p


def calabi_norm(u: Potential, beta: np.ndarray, p: float, q: float) -> float:
    """((1/V) sum w |Delta_u beta|^p rho^q)^(1/p); p = inf gives sup |Delta_u beta|."""
    check_exponents(p, q)
    g = u.geometry
    tangent = g.laplace(np.asarray(beta, dtype=float)) / u.rho
    if math.isinf(p):
        return g.sup_abs(tangent)
    return lp_norm(tangent * u.rho ** (q / p), p, g.measure)


def mabuchi_measure(u: Potential) -> MeasureSpace:
    """omega_u^n on the grid; total mass V."""
    return MeasureSpace(u.geometry.quad_weights * u.rho)


def mabuchi_norm(u: Potential, phi: np.ndarray, p: float) -> float:
    p = _finite_exponent(p)
    measure = mabuchi_measure(u)
    phi = np.asarray(phi, dtype=float)
    return lp_norm(phi - measure.mean(phi), p, measure)


def embed_F(u: Potential, p: float, q: float) -> SphereFunction:
    """F(u) = (p/q) rho_u^{q/p} on the L^{p/q}-sphere of radius p/q."""
    ratio = check_exponents(p, q)
    if math.isinf(p):
        raise InvalidExponentError("the embedding needs finite p", p=p, q=q)
    return SphereFunction(ratio * u.rho ** (1.0 / ratio), ratio, ratio, u.geometry.measure)


def embed_curve(curve: PotentialCurve, p: float, q: float) -> DiscreteCurve:
    return DiscreteCurve(np.vstack([embed_F(u, p, q).values for u in curve.samples]), curve.params)


def _midpoint_length(curve: PotentialCurve, norm) -> float:
    g = curve.geometry
    total = []
    for a, b in zip(curve.samples[:-1], curve.samples[1:]):
        mid = Potential(0.5 * (a.values + b.values), g)
        total.append(norm(mid, b.values - a.values))
    return math.fsum(total)


def calabi_length(curve: PotentialCurve, p: float, q: float) -> float:
    """Midpoint-rule L^{p,q}-Calabi length; norm(u_mid, du/dt) dt == norm(u_mid, du) by homogeneity."""
    check_exponents(p, q)
    return _midpoint_length(curve, lambda u, step: calabi_norm(u, step, p, q))


def mabuchi_length(curve: PotentialCurve, p: float) -> float:
    p = _finite_exponent(p)
    return _midpoint_length(curve, lambda u, step: mabuchi_norm(u, step, p))


@dataclass
class DistanceBracket:
    lower: float
    upper: float
    polygon: float
    closed_form: Optional[float] = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, rtol: float = 1e-9) -> bool:
        slack = rtol * max(1.0, abs(self.upper))
        return self.lower - slack <= value <= self.upper + slack


def calabi_distance_bracket(u0: Potential, u1: Potential, p: float, q: float, m: int = 65) -> DistanceBracket:
    """
    Bracket for d^C_{p,q}(u0, u1) through the F-images on the sphere.

    lower: flat chord. upper: length of the normalized segment between the
    images (Gauss-Legendre on its exact speed). The inscribed polygon of that
    segment at m samples is reported alongside. For p = 2, q = 1 the exact
    round distance 2 arccos((1/V) sum w sqrt(rho0 rho1)) is attached.
    """
    check_exponents(p, q)
    f0, f1 = embed_F(u0, p, q), embed_F(u1, p, q)
    r = f0.radius
    lower = chord_distance(f0, f1, p)
    if lower == 0.0:
        return DistanceBracket(0.0, 0.0, 0.0, 0.0 if (p, q) == (2.0, 1.0) else None)
    upper = max(alpha_curve_length(f0, f1, p, q, r), lower)
    polygon = curve_length(normalized_segment_curve(f0, f1, p, q, r, m), p, f0.measure)
    closed = great_circle_distance(f0, f1) if (p, q) == (2.0, 1.0) else None
    return DistanceBracket(lower, upper, polygon, closed)


def calabi_cauchy_stat(u_j: Potential, u_k: Potential, q: float) -> float:
    """Integral of |rho_j - rho_k|^q against omega^n (no p dependence)."""
    if not q >= 1:
        raise InvalidExponentError(f"need q >= 1, got {q}", q=q)
    return u_j.geometry.integrate(np.abs(u_j.rho - u_k.rho) ** q)


def calabi_cauchy_stat_sphere(u_j: Potential, u_k: Potential, p: float, q: float) -> float:
    """Integral of |rho_j^{q/p} - rho_k^{q/p}|^p, the chord form before the Vitali bridge."""
    check_exponents(p, q)
    e = q / p
    return u_j.geometry.integrate(np.abs(u_j.rho ** e - u_k.rho ** e) ** p)


def mabuchi_cauchy_stat(u_j: Potential, u_k: Potential, p: float) -> float:
    p = _finite_exponent(p)
    diff = np.abs(u_j.values - u_k.values) ** p
    return u_j.geometry.integrate(diff * (u_j.rho + u_k.rho))


def entropy(u: Potential) -> float:
    rho = u.rho
    return u.geometry.integrate(rho * np.log(rho))


def relative_entropy(f: np.ndarray, g: np.ndarray, measure: MeasureSpace) -> float:
    """Integral of f log(f/g); cells with f = 0 contribute 0."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    positive = f > 0
    return measure.integrate(np.where(positive, f * np.log(np.where(positive, f, 1.0) / g), 0.0))


@dataclass
class PinskerResult:
    lhs: float
    rhs: float
    kappa: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.kappa * self.rhs + 1e-12 * max(1.0, self.lhs)


def _check_unit_density(f: np.ndarray, measure: MeasureSpace, name: str) -> np.ndarray:
    f = np.asarray(f, dtype=float).ravel()
    if f.size != measure.size:
        raise ShapeError(f"{name} has {f.size} values for {measure.size} atoms")
    if np.any(f <= 0):
        raise DomainError(f"{name} must be strictly positive")
    if abs(measure.mean(f) - 1.0) > UNIT_MEAN_TOL:
        raise DomainError(f"{name} has mean {measure.mean(f):.12f}, expected 1")
    return f


def pinsker_gap(f: np.ndarray, g: np.ndarray, measure: MeasureSpace) -> PinskerResult:
    """lhs = (int |f - g|)^2, rhs = int f log(f/g), compared with kappa = 2 V."""
    f = _check_unit_density(f, measure, "f")
    g = _check_unit_density(g, measure, "g")
    lhs = measure.integrate(np.abs(f - g)) ** 2
    rhs = max(relative_entropy(f, g, measure), 0.0)
    return PinskerResult(lhs, rhs, PINSKER_KAPPA_PER_VOLUME * measure.total)


def two_cell_pinsker(a: float, b: float, volume: float) -> Tuple[float, float]:
    """Closed form for f = (a, 2-a), g = (b, 2-b) on two cells of mass V/2."""
    lhs = (volume * abs(a - b)) ** 2
    rhs = 0.5 * volume * (a * math.log(a / b) + (2 - a) * math.log((2 - a) / (2 - b)))
    return lhs, rhs


def calibrate_pinsker_kappa(volume: float, levels: int = 16) -> Tuple[float, float]:
    """
    Sup of lhs/rhs over two-cell pairs (1 + d, 1) as d -> 0 and the frozen constant.

    The ratio increases to 2V in the limit; the frozen constant is accepted only
    if every sampled ratio stays below it and the last one is within 1e-6.
    """
    ratios = []
    for level in range(1, levels + 1):
        lhs, rhs = two_cell_pinsker(1.0 + 2.0 ** -level, 1.0, volume)
        ratios.append(lhs / rhs)
    kappa = PINSKER_KAPPA_PER_VOLUME * volume
    observed = max(ratios)
    if observed > kappa * (1 + 1e-9) or abs(ratios[-1] - kappa) > 1e-6 * kappa:
        raise NumericError(f"two-cell Pinsker calibration gave {observed:.12g}, expected {kappa:.12g}")
    logger.debug("Pinsker constant calibrated: sup ratio %.12g, kappa %.12g", observed, kappa)
    return kappa, observed


def _diffusion_step(geometry: Geometry, f: np.ndarray, tau: float) -> np.ndarray:
    """(I - tau laplace)^{-1} f; preserves mass and positivity."""
    system = sp.identity(geometry.size, format="csc") - tau * geometry.laplace_matrix.tocsc()
    return np.asarray(spsolve(system, f))


def smoothing_sequence(f: np.ndarray, k: int, geometry: Geometry) -> np.ndarray:
    """
    Clamp f to [2^-k, 2^k], then mollify by one implicit diffusion step.

    The diffusion time starts at the squared grid spacing and halves until
    the L^1 change from mollifying is at most 2^-k. If clamping changes
    nothing, f is returned unchanged.
    """
    f = np.asarray(f, dtype=float).ravel()
    if f.size != geometry.size:
        raise ShapeError(f"density has {f.size} values for {geometry.size} sites")
    if np.any(f < 0):
        raise DomainError("smoothing needs a nonnegative density")
    m = 2.0 ** k
    clamped = np.clip(f, 1.0 / m, m)
    if np.array_equal(clamped, f):
        return f.copy()
    tolerance = 2.0 ** -k
    tau = geometry.spacing ** 2
    for _ in range(60):
        smooth = _diffusion_step(geometry, clamped, tau)
        if geometry.integrate(np.abs(smooth - clamped)) <= tolerance:
            return np.maximum(smooth, 1.0 / m)
        tau *= 0.5
    logger.warning("mollifier at level %d did not meet tolerance; returning clamped density", k)
    return clamped


def smoothing_statistics(f: np.ndarray, ks: Sequence[int], geometry: Geometry) -> List[Tuple[int, float, float]]:
    """(k, int |f - f_k|, int f (log f - log f_k)) along the smoothing sequence."""
    out = []
    for k in ks:
        fk = smoothing_sequence(f, k, geometry)
        out.append((k, geometry.integrate(np.abs(f - fk)), relative_entropy(f, fk, geometry.measure)))
    return out


def weak_convergence_proxy(u_j: Potential, u: Potential, dictionary: Optional[np.ndarray] = None) -> float:
    """max over the test dictionary of |(1/V) int phi (rho_j - rho)|."""
    g = u.geometry
    if dictionary is None:
        dictionary = test_function_dictionary(g)
    moments = dictionary @ (g.quad_weights * (u_j.rho - u.rho)) / g.volume
    return float(np.max(np.abs(moments)))


@dataclass
class EquivalenceDiagnostics:
    """
    Four statistics per sequence element against the limit u:
      (i)   int |u_j - u|
      (ii)  weak-convergence proxy of omega_{u_j}^n
      (iii) Mabuchi Cauchy statistic with exponent p'
      (iv)  Calabi Cauchy statistic with q = 1
    plus the entropy drift |Ent(u_j) - Ent(u)|.
    """

    l1_potential: List[float] = field(default_factory=list)
    weak_proxy: List[float] = field(default_factory=list)
    mabuchi_stat: List[float] = field(default_factory=list)
    calabi_stat: List[float] = field(default_factory=list)
    calabi_chord: List[float] = field(default_factory=list)
    entropy: List[float] = field(default_factory=list)
    entropy_limit: float = 0.0

    STAT_NAMES = ("l1_potential", "weak_proxy", "mabuchi_stat", "calabi_stat")

    @property
    def entropy_drift(self) -> List[float]:
        return [abs(e - self.entropy_limit) for e in self.entropy]

    def rows(self) -> np.ndarray:
        return np.column_stack([getattr(self, name) for name in self.STAT_NAMES])

    def co_vanishes(self, trigger: float = 1e-6, bound: float = 1e-4) -> bool:
        """Whenever one statistic is below trigger, all four are below bound."""
        rows = self.rows()
        hit = np.any(rows < trigger, axis=1)
        return bool(np.all(np.all(rows[hit] < bound, axis=1)))

    def decoupled(self, gap: float = 0.05, floor: float = 1e-3) -> bool:
        """One statistic falls at least 1/gap times faster than another that stays above floor."""
        rows = self.rows()
        first, last = rows[0], rows[-1]
        ratio = np.divide(last, first, out=np.ones_like(last), where=first > 0)
        for b in np.flatnonzero(last > floor):
            if np.any(ratio <= gap * ratio[b]):
                return True
        return False


def equivalence_diagnostics(
    u_js: Sequence[Potential], u: Potential, p: float, p_prime: float = 1.0
) -> EquivalenceDiagnostics:
    """Equivalence statistics for a finite-entropy sequence; entropy drift is reported, not assumed."""
    dictionary = test_function_dictionary(u.geometry)
    report = EquivalenceDiagnostics(entropy_limit=entropy(u))
    g = u.geometry
    for u_j in u_js:
        report.l1_potential.append(g.integrate(np.abs(u_j.values - u.values)))
        report.weak_proxy.append(weak_convergence_proxy(u_j, u, dictionary))
        report.mabuchi_stat.append(mabuchi_cauchy_stat(u_j, u, p_prime))
        report.calabi_stat.append(calabi_cauchy_stat(u_j, u, 1.0))
        report.calabi_chord.append(chord_distance(embed_F(u_j, p, 1.0), embed_F(u, p, 1.0), p))
        report.entropy.append(entropy(u_j))
    return report


class PairStat(BaseModel):
    j: int
    k: int
    stat_name: str
    value: float


class MetricReport(BaseModel):
    """Serialized distances and statistics for a potential sequence."""

    exponents: Dict[str, float]
    calabi_bracket: Tuple[float, float]
    calabi_polygon: float
    calabi_closed_form: Optional[float] = None
    mabuchi_length: float
    cauchy_stats: List[PairStat] = Field(default_factory=list)
    entropy: List[float] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def write_pairs_csv(self, path: Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["j", "k", "stat_name", "value"])
            for row in self.cauchy_stats:
                writer.writerow([row.j, row.k, row.stat_name, f"{row.value:.17g}"])
        return path


def metric_report(sequence: Sequence[Potential], p: float, q: float, p_prime: float) -> MetricReport:
    """
    Bracket between the first and last element, Mabuchi length of the
    piecewise-linear curve through the sequence, consecutive Cauchy statistics
    and entropies.
    """
    check_exponents(p, q)
    if len(sequence) < 2:
        raise CurveError("a metric report needs at least 2 potentials")
    bracket = calabi_distance_bracket(sequence[0], sequence[-1], p, q)
    curve = PotentialCurve(tuple(sequence), np.linspace(0.0, 1.0, len(sequence)))
    pairs = []
    for j in range(len(sequence) - 1):
        a, b = sequence[j], sequence[j + 1]
        pairs.append(PairStat(j=j, k=j + 1, stat_name=f"calabi_q{q:g}", value=calabi_cauchy_stat(a, b, q)))
        pairs.append(PairStat(j=j, k=j + 1, stat_name=f"mabuchi_p{p_prime:g}", value=mabuchi_cauchy_stat(a, b, p_prime)))
    notes = []
    if bracket.closed_form is not None:
        notes.append("p=2, q=1: closed form is the great-circle distance on the radius-2 L^2 sphere")
    return MetricReport(
        exponents={"p": p, "q": q, "p_prime": p_prime},
        calabi_bracket=(bracket.lower, bracket.upper),
        calabi_polygon=bracket.polygon,
        calabi_closed_form=bracket.closed_form,
        mabuchi_length=mabuchi_length(curve, p_prime),
        cauchy_stats=pairs,
        entropy=[entropy(u) for u in sequence],
        notes=notes,
    )
