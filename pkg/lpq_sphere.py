#!/usr/bin/env python3
"""
L^{p/q}-Sphere Geometry

Flat L^p Finsler geometry over a finite measure space and the positive octant
of the L^{p/q}-sphere of radius r sitting inside it. Provides the chordal
distance, the normalized-segment curves used to bound the round distance from
above, the explicit comparison-constant chain between the two, the finite
shadow of the Vitali equivalence, and the CAT(1/4) comparison check for the
radius-2 L^2 sphere.

All norms use the normalized measure (1/mu(X)) * sum(w_i * ...).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.integrate import simpson

from lab_errors import (
    CurveError,
    DomainError,
    InvalidExponentError,
    NotComparableError,
    OctantViolationError,
    RankError,
    ShapeError,
)

logger = logging.getLogger(__name__)

# Octant membership: f_i >= POSITIVITY_FLOOR * max|f|
POSITIVITY_FLOOR = 1e-12
RADIUS_RTOL = 1e-9
CHAIN_RTOL = 1e-10
CAT_TOLERANCE = 1e-8


@dataclass(frozen=True)
class MeasureSpace:
    """Finite atom set with positive weights."""

    weights: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ShapeError("measure space needs at least one atom")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("measure weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total", math.fsum(w))

    @classmethod
    def uniform(cls, n: int, total: float = 1.0) -> "MeasureSpace":
        return cls(np.full(n, total / n))

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / self.total

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.mean(np.asarray(f) * np.asarray(g))


@dataclass(frozen=True)
class SphereFunction:
    """Point of the octant S+_{L^{p/q}}(mu, r)."""

    values: np.ndarray
    exponent_ratio: float
    radius: float
    measure: MeasureSpace

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.measure.size:
            raise ShapeError(f"sphere function has {v.size} values for {self.measure.size} atoms")
        if self.exponent_ratio < 1:
            raise InvalidExponentError("exponent ratio p/q must be >= 1")
        if self.radius <= 0:
            raise DomainError("sphere radius must be positive")
        check_octant(v)
        norm = lp_norm(v, self.exponent_ratio, self.measure)
        if abs(norm - self.radius) > RADIUS_RTOL * self.radius:
            raise DomainError(
                f"values have L^{self.exponent_ratio:g} norm {norm:.15g}, not radius {self.radius:.15g}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DiscreteCurve:
    """Time-sampled path; samples[i] is the atom function at params[i]."""

    samples: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        t = np.array(self.params, dtype=float).ravel()
        if s.ndim != 2:
            raise ShapeError("curve samples must be a 2-D array (sample, atom)")
        if s.shape[0] < 2:
            raise CurveError("a curve needs at least 2 samples")
        if t.size != s.shape[0]:
            raise ShapeError(f"{t.size} parameters for {s.shape[0]} samples")
        if np.any(np.diff(t) <= 0):
            raise CurveError("curve parameters must be strictly increasing")
        s.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "params", t)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def reversed(self) -> "DiscreteCurve":
        return DiscreteCurve(self.samples[::-1], (self.params[-1] + self.params[0]) - self.params[::-1])


def check_exponents(p: float, q: float) -> float:
    """Validate 1 <= q <= p and return p/q."""
    if not (q >= 1 and p >= q):
        raise InvalidExponentError(f"need 1 <= q <= p, got p={p}, q={q}", p=p, q=q)
    if math.isinf(q):
        raise InvalidExponentError("q must be finite", p=p, q=q)
    return p / q


def check_octant(values: np.ndarray) -> None:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    floor = POSITIVITY_FLOOR * scale
    bad = np.flatnonzero(~(values > 0) | (values < floor))
    if bad.size:
        raise OctantViolationError(int(bad[0]), float(values[bad[0]]))


def _as_atoms(f, measure: MeasureSpace) -> np.ndarray:
    arr = np.asarray(f.values if isinstance(f, SphereFunction) else f, dtype=float).ravel()
    if arr.size != measure.size:
        raise ShapeError(f"function has {arr.size} values for {measure.size} atoms")
    return arr


def lp_norm(f, p: float, measure: MeasureSpace) -> float:
    """((1/mu(X)) sum w_i |f_i|^p)^(1/p); p = inf gives max |f_i|."""
    p = float(p)
    if not p >= 1:
        raise InvalidExponentError(f"L^p norm needs p >= 1, got {p}", p=p)
    a = np.abs(_as_atoms(f, measure))
    scale = float(a.max())
    if scale == 0.0 or math.isinf(p):
        return scale
    return scale * measure.mean((a / scale) ** p) ** (1.0 / p)


def row_norms(rows: np.ndarray, p: float, measure: MeasureSpace) -> np.ndarray:
    """lp_norm of each row of a (k, atoms) array."""
    a = np.abs(np.atleast_2d(rows))
    if a.shape[1] != measure.size:
        raise ShapeError(f"rows have {a.shape[1]} atoms for {measure.size}")
    scale = a.max(axis=1)
    if math.isinf(p):
        return scale
    safe = np.where(scale > 0, scale, 1.0)
    means = ((a / safe[:, None]) ** p) @ measure.weights / measure.total
    return np.where(scale > 0, safe * means ** (1.0 / p), 0.0)


def sphere_project(f, p: float, q: float, r: float, measure: MeasureSpace) -> SphereFunction:
    """Radial projection f -> r f / ||f||_{p/q} onto the octant."""
    ratio = check_exponents(p, q)
    values = _as_atoms(f, measure)
    check_octant(values)
    norm = lp_norm(values, ratio, measure)
    return SphereFunction(r * values / norm, ratio, r, measure)


def chord_distance(f0: SphereFunction, f1: SphereFunction, p: float) -> float:
    if f0.measure.size != f1.measure.size:
        raise ShapeError(f"sphere functions live on {f0.measure.size} and {f1.measure.size} atoms")
    return lp_norm(f0.values - f1.values, p, f0.measure)


def normalized_segment_curve(
    f0: SphereFunction, f1: SphereFunction, p: float, q: float, r: float, m: int
) -> DiscreteCurve:
    """Samples of alpha_t = r f_t / ||f_t||_{p/q}, f_t = f0 + t (f1 - f0)."""
    if m < 2:
        raise CurveError(f"normalized segment needs m >= 2 samples, got {m}")
    ratio = check_exponents(p, q)
    if f0.measure.size != f1.measure.size:
        raise ShapeError("endpoints live on different measure spaces")
    t = np.linspace(0.0, 1.0, m)
    segment = f0.values[None, :] + t[:, None] * (f1.values - f0.values)[None, :]
    norms = row_norms(segment, ratio, f0.measure)
    return DiscreteCurve(r * segment / norms[:, None], t)


def curve_length(curve: DiscreteCurve, p: float, measure: MeasureSpace) -> float:
    """Polygonal L^p length sum ||s_{i+1} - s_i||_p."""
    steps = np.diff(curve.samples, axis=0)
    return float(math.fsum(row_norms(steps, p, measure)))


def richardson_length(
    make_curve: Callable[[int], DiscreteCurve], p: float, measure: MeasureSpace, m: int
) -> Tuple[float, float, float]:
    """Polygon lengths at m and 2m-1 samples (mesh halving) plus the h^2 extrapolation."""
    coarse = curve_length(make_curve(m), p, measure)
    fine = curve_length(make_curve(2 * m - 1), p, measure)
    return coarse, fine, fine + (fine - coarse) / 3.0


def _segment_terms(f0: SphereFunction, f1: SphereFunction, ratio: float, t: np.ndarray):
    d = f1.values - f0.values
    ft = f0.values[None, :] + t[:, None] * d[None, :]
    measure = f0.measure
    nt = row_norms(ft, ratio, measure)
    weighted = ft ** (ratio - 1.0) if ratio != 1.0 else np.ones_like(ft)
    return d, ft, nt, weighted


def alpha_speed(f0: SphereFunction, f1: SphereFunction, p: float, q: float, r: float, t: np.ndarray) -> np.ndarray:
    """||d alpha_t / dt||_p from the closed-form derivative of the normalized segment."""
    ratio = check_exponents(p, q)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    measure = f0.measure
    d, ft, nt, weighted = _segment_terms(f0, f1, ratio, t)
    j = (weighted * d[None, :]) @ measure.weights / measure.total
    velocity = r * d[None, :] / nt[:, None] - r * ft * (j / nt ** (ratio + 1.0))[:, None]
    return row_norms(velocity, p, measure)


def alpha_curve_length(f0: SphereFunction, f1: SphereFunction, p: float, q: float, r: float, nodes: int = 64) -> float:
    """Continuum length of alpha_t by Gauss-Legendre quadrature; an upper bound for the round distance."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (x + 1.0)
    return float(0.5 * np.dot(w, alpha_speed(f0, f1, p, q, r, t)))


def great_circle_distance(f0: SphereFunction, f1: SphereFunction) -> float:
    """Round distance on an L^2 sphere (p = 2, q = 1), computed from the chord for accuracy."""
    if f0.exponent_ratio != 2.0:
        raise InvalidExponentError("great circles exist only on L^2 spheres")
    return arc_from_chord(chord_distance(f0, f1, 2.0), f0.radius)


def arc_from_chord(chord: float, radius: float) -> float:
    return 2.0 * radius * math.asin(min(1.0, chord / (2.0 * radius)))


@dataclass
class InequalityLine:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + CHAIN_RTOL * max(1.0, abs(self.rhs))


@dataclass
class BracketCheckReport:
    chord: float
    polygon_length: float
    alpha_length: float
    lines: List[InequalityLine]
    pointwise_ok: bool
    min_segment_norm: float
    half_radius: float
    c_prime: float
    constant_c: float

    @property
    def observed_ratio(self) -> float:
        return self.chord / self.alpha_length if self.alpha_length > 0 else 1.0

    @property
    def radius_bound_ok(self) -> bool:
        return self.min_segment_norm >= self.half_radius * (1 - CHAIN_RTOL)

    @property
    def passed(self) -> bool:
        return self.pointwise_ok and self.radius_bound_ok and all(line.holds for line in self.lines)


def comparison_bracket_check(
    f: SphereFunction, f0: SphereFunction, f1: SphereFunction, p: float, q: float, samples: int = 257
) -> BracketCheckReport:
    """
    Evaluate every line of the chord/round comparison estimate for the
    normalized segment between f0 and f1, with basepoint f.

    Lines (integrands in t, integrated by Simpson's rule):
      0  ||alpha'_t||_p
      1  triangle inequality on the two terms of alpha'_t
      2  Hoelder with exponents p/q and its conjugate
      3  ||.||_{p/q} <= C' ||.||_p   (C' = 1 for a normalized measure, p/q <= p)
      4  triangle inequality ||f_t|| <= (1-t)||f-f0|| + t||f-f1|| + ||f||
      5  C (||f-f0||_p + ||f-f1||_p + 1) ||f1-f0||_p  using ||f_t||_{p/q} >= r/2
    """
    ratio = check_exponents(p, q)
    r = f.radius
    measure = f.measure
    for g in (f0, f1):
        if g.measure.size != measure.size or g.radius != r or g.exponent_ratio != ratio:
            raise ShapeError("basepoint and endpoints must lie on the same sphere")
    if samples % 2 == 0:
        samples += 1
    t = np.linspace(0.0, 1.0, samples)
    d, ft, nt, weighted = _segment_terms(f0, f1, ratio, t)

    d_p = lp_norm(d, p, measure)
    d_ratio = lp_norm(d, ratio, measure)
    ft_p = row_norms(ft, p, measure)
    c_prime = 1.0
    base_p = lp_norm(f.values, p, measure)
    dist0 = lp_norm(f.values - f0.values, p, measure)
    dist1 = lp_norm(f.values - f1.values, p, measure)

    i0 = alpha_speed(f0, f1, p, q, r, t)
    hoelder_integral = (weighted * np.abs(d)[None, :]) @ measure.weights / measure.total
    i1 = r * d_p / nt + r * ft_p / nt ** (ratio + 1.0) * hoelder_integral
    i2 = r * d_p / nt + r * ft_p * d_ratio / nt ** 2
    i3 = r * d_p / nt + c_prime * r * d_p * ft_p / nt ** 2
    i4 = r * d_p / nt + c_prime * r * d_p * ((1 - t) * dist0 + t * dist1 + base_p) / nt ** 2
    constant_c = 2.0 + 4.0 * c_prime * max(1.0, base_p) / r

    integrals = [float(simpson(i, x=t)) for i in (i0, i1, i2, i3, i4)]
    final = constant_c * (dist0 + dist1 + 1.0) * d_p
    chord = lp_norm(d, p, measure)

    tol = CHAIN_RTOL * max(1.0, float(np.max(i4)))
    pointwise_ok = bool(
        np.all(i0 <= i1 + tol) and np.all(i1 <= i2 + tol) and np.all(i2 <= i3 + tol) and np.all(i3 <= i4 + tol)
    )
    lines = [
        InequalityLine("chord <= length(alpha)", chord, integrals[0]),
        InequalityLine("length(alpha) <= line 1", integrals[0], integrals[1]),
        InequalityLine("line 1 <= line 2 (Hoelder)", integrals[1], integrals[2]),
        InequalityLine("line 2 <= line 3 (norm comparison)", integrals[2], integrals[3]),
        InequalityLine("line 3 <= line 4 (triangle)", integrals[3], integrals[4]),
        InequalityLine("line 4 <= C (d0 + d1 + 1) chord", integrals[4], final),
    ]
    polygon = curve_length(normalized_segment_curve(f0, f1, p, q, r, samples), p, measure)
    return BracketCheckReport(
        chord=chord,
        polygon_length=polygon,
        alpha_length=integrals[0],
        lines=lines,
        pointwise_ok=pointwise_ok,
        min_segment_norm=float(nt.min()),
        half_radius=r / 2.0,
        c_prime=c_prime,
        constant_c=constant_c,
    )


def vitali_equivalence_stat(
    f_js: Sequence[np.ndarray], f: np.ndarray, p: float, q: float, measure: MeasureSpace
) -> np.ndarray:
    """Rows (||f_j - f||_{L^q}, ||f_j^{q/p} - f^{q/p}||_{L^p}) for each j."""
    check_exponents(p, q)
    f = _as_atoms(f, measure)
    if np.any(f < 0):
        raise DomainError("Vitali statistics need nonnegative functions")
    target = f ** (q / p)
    out = np.empty((len(f_js), 2))
    for j, fj in enumerate(f_js):
        fj = _as_atoms(fj, measure)
        if np.any(fj < 0):
            raise DomainError(f"sequence element {j} has negative entries")
        out[j, 0] = lp_norm(fj - f, q, measure)
        out[j, 1] = lp_norm(fj ** (q / p) - target, p, measure)
    return out


@dataclass
class CatReport:
    side_lengths: Tuple[float, float, float]
    perimeter: float
    rank: int
    pairs_checked: int
    max_violation: float
    trivial: bool = False

    @property
    def passed(self) -> bool:
        return self.max_violation <= CAT_TOLERANCE


def _sphere_chord_distance(x: np.ndarray, y: np.ndarray, radius: float) -> np.ndarray:
    chord = np.linalg.norm(x - y, axis=-1)
    return 2.0 * radius * np.arcsin(np.minimum(1.0, chord / (2.0 * radius)))


def _slerp(a: np.ndarray, b: np.ndarray, s: np.ndarray, radius: float) -> np.ndarray:
    theta = 2.0 * math.asin(min(1.0, np.linalg.norm(a - b) / (2.0 * radius)))
    if theta < 1e-12:
        pts = a[None, :] + s[:, None] * (b - a)[None, :]
        return radius * pts / np.linalg.norm(pts, axis=1)[:, None]
    return (np.sin((1 - s) * theta)[:, None] * a + np.sin(s * theta)[:, None] * b) / math.sin(theta)


def _model_triangle(a: float, b: float, c: float, radius: float) -> np.ndarray:
    """Vertices on the radius-`radius` sphere in R^3 with side lengths c=|UV|, b=|UW|, a=|VW|."""
    alpha, beta, gamma = c / radius, b / radius, a / radius
    u = radius * np.array([0.0, 0.0, 1.0])
    v = radius * np.array([math.sin(alpha), 0.0, math.cos(alpha)])
    denom = math.sin(alpha) * math.sin(beta)
    cos_phi = 1.0 if denom < 1e-15 else (math.cos(gamma) - math.cos(alpha) * math.cos(beta)) / denom
    phi = math.acos(max(-1.0, min(1.0, cos_phi)))
    w = radius * np.array([math.sin(beta) * math.cos(phi), math.sin(beta) * math.sin(phi), math.cos(beta)])
    return np.vstack([u, v, w])


def cat_quarter_check(U: SphereFunction, V: SphereFunction, W: SphereFunction, samples: int = 50) -> CatReport:
    """
    CAT(1/4) comparison for the geodesic triangle UVW on the radius-2 L^2 sphere.

    The triangle is realized inside the 3-dimensional span of U, V, W
    (orthonormalized by pivoted Householder QR), compared against the
    triangle with the same side lengths on the model sphere of curvature 1/4.
    """
    radius = U.radius
    for g in (U, V, W):
        if g.exponent_ratio != 2.0 or g.radius != 2.0 or g.measure.size != U.measure.size:
            raise ShapeError("CAT(1/4) check needs points of the radius-2 L^2 sphere on one measure space")
    c = great_circle_distance(U, V)
    b = great_circle_distance(U, W)
    a = great_circle_distance(V, W)
    perimeter = a + b + c
    bound = 2.0 * math.pi * radius
    if perimeter >= bound:
        raise NotComparableError(perimeter, bound)
    if max(a, b, c) < 1e-14 * radius:
        return CatReport((c, b, a), perimeter, 1, 0, 0.0, trivial=True)

    measure = U.measure
    scale = np.sqrt(measure.weights / measure.total)
    A = scale[:, None] * np.column_stack([U.values, V.values, W.values])
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-12 * diag[0]))
    if rank < 3:
        raise RankError(rank)
    coords = (Q.T @ A).T  # rows: U, V, W in an orthonormal frame of the span
    model = _model_triangle(a, b, c, radius)

    s = np.linspace(0.0, 1.0, samples)
    worst = -np.inf
    for apex, first, second in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
        x = _slerp(coords[apex], coords[first], s, radius)
        y = _slerp(coords[apex], coords[second], s, radius)
        xm = _slerp(model[apex], model[first], s, radius)
        ym = _slerp(model[apex], model[second], s, radius)
        actual = _sphere_chord_distance(x[:, None, :], y[None, :, :], radius)
        compared = _sphere_chord_distance(xm[:, None, :], ym[None, :, :], radius)
        worst = max(worst, float(np.max(actual - compared)))
    logger.debug("CAT(1/4) check: sides %.6f %.6f %.6f, max violation %.3e", a, b, c, worst)
    return CatReport((c, b, a), perimeter, rank, 3 * samples * samples, max(worst, 0.0))
