#!/usr/bin/env python3
"""
Kähler Backends (complex dimension 1)

Two discretized Kähler geometries:

* flat torus: periodic N x N grid on the unit square, V = 1, 5-point stencil;
* round P^1, S^1-invariant functions only: N equal-area cells in x = cos(theta),
  V = 4 pi, finite-volume operator d/dx((1 - x^2) d/dx).

Laplacians realize tr_omega i dd-bar, i.e. half the Riemannian Laplace-Beltrami,
so that the Monge-Ampère density of a potential is exactly rho_u = 1 + laplace(u).
Both operators are written as laplace = W^{-1} K with K symmetric and W the
quadrature weights, which makes them self-adjoint for the quadrature inner
product with zero-mean range.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from lab_errors import (
    InconsistencyError,
    NotKahlerError,
    NumericError,
    ResolutionError,
    ShapeError,
)
from lpq_sphere import MeasureSpace

logger = logging.getLogger(__name__)

TORUS = "torus"
P1 = "p1"
BACKENDS = (TORUS, P1)

# Kähler positivity floor on rho (unit-mean densities, so absolute == relative)
EPS_POS = 1e-8
CONDITIONING_FLOOR = 1e-6
MEAN_TOL = 1e-10
DICTIONARY_SIZE = 32


class ConditioningWarning(RuntimeWarning):
    """log(rho) evaluated where rho is close to zero."""


@dataclass(frozen=True, eq=False)
class Geometry:
    kind: str
    resolution: int
    sites: np.ndarray
    quad_weights: np.ndarray
    volume: float
    stiffness: sp.csr_matrix
    s_bar: float
    spacing: float
    dimension: int = 1

    @property
    def size(self) -> int:
        return self.quad_weights.size

    @property
    def grid_shape(self) -> Tuple[int, ...]:
        return (self.resolution, self.resolution) if self.kind == TORUS else (self.resolution,)

    @cached_property
    def measure(self) -> MeasureSpace:
        return MeasureSpace(self.quad_weights)

    @cached_property
    def laplace_matrix(self) -> sp.csr_matrix:
        return sp.diags(1.0 / self.quad_weights) @ self.stiffness

    @cached_property
    def laplace_norm(self) -> float:
        """Max absolute row sum of the Laplacian."""
        return float(abs(self.laplace_matrix).sum(axis=1).max())

    def laplace(self, f: np.ndarray) -> np.ndarray:
        return (self.stiffness @ f) / self.quad_weights

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.quad_weights, f))

    def mean(self, f: np.ndarray) -> float:
        return self.integrate(f) / self.volume

    def project_mean(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return f - self.mean(f)

    def sup_abs(self, f: np.ndarray) -> float:
        """
        sup |f| over the closed surface.

        On P^1 the outermost cell centres sit h/2 from the poles; the pole values
        are extrapolated linearly from the last two cells so the sup is second order.
        """
        a = np.abs(np.asarray(f, dtype=float))
        peak = float(a.max())
        if self.kind != P1:
            return peak
        f = np.asarray(f, dtype=float)
        south = 1.5 * f[0] - 0.5 * f[1]
        north = 1.5 * f[-1] - 0.5 * f[-2]
        return max(peak, abs(float(south)), abs(float(north)))

    @cached_property
    def _bordered_lu(self):
        n = self.size
        w = sp.csr_matrix(self.quad_weights.reshape(n, 1))
        bordered = sp.bmat([[self.stiffness, w], [w.T, None]], format="csc")
        logger.debug("factorizing %s Poisson system with %d unknowns", self.kind, n + 1)
        return splu(bordered)

    def solve_poisson(self, rhs: np.ndarray) -> np.ndarray:
        """Zero-mean u with laplace(u) = rhs; rhs must have zero weighted mean."""
        load = np.append(self.quad_weights * rhs, 0.0)
        solution = self._bordered_lu.solve(load)
        u = solution[:-1]
        if not np.all(np.isfinite(u)):
            raise NumericError("Poisson solve produced non-finite values")
        return u

    def gradient_norm(self, f: np.ndarray) -> np.ndarray:
        """Pointwise |grad f| in the background metric."""
        f = np.asarray(f, dtype=float)
        if self.kind == TORUS:
            g = f.reshape(self.grid_shape)
            h = self.spacing
            fx = (np.roll(g, -1, axis=0) - np.roll(g, 1, axis=0)) / (2 * h)
            fy = (np.roll(g, -1, axis=1) - np.roll(g, 1, axis=1)) / (2 * h)
            return np.sqrt(fx ** 2 + fy ** 2).ravel()
        x = np.cos(self.sites)
        return np.sqrt(1.0 - x ** 2) * np.abs(np.gradient(f, x))


def make_torus_geometry(resolution: int) -> Geometry:
    """Periodic N x N grid on the unit-square flat torus."""
    n = int(resolution)
    if n < 8 or n % 2:
        raise ResolutionError(f"torus resolution must be even and >= 8, got {resolution}")
    h = 1.0 / n
    ring = sp.diags([1.0, 1.0, -2.0, 1.0, 1.0], [-(n - 1), -1, 0, 1, n - 1], shape=(n, n))
    eye = sp.identity(n)
    graph = sp.kron(ring, eye) + sp.kron(eye, ring)
    # weights V/N^2 times (1/2) h^-2 collapse to 1/2
    stiffness = (0.5 * graph).tocsr()
    axis = np.arange(n) * h
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return Geometry(
        kind=TORUS,
        resolution=n,
        sites=np.column_stack([xx.ravel(), yy.ravel()]),
        quad_weights=np.full(n * n, 1.0 / (n * n)),
        volume=1.0,
        stiffness=stiffness,
        s_bar=0.0,
        spacing=h,
    )


def make_p1_geometry(resolution: int) -> Geometry:
    """
    S^1-invariant round P^1 with Ric(omega) = omega (unit sphere, V = 4 pi).

    Cells are uniform in x = cos(theta), so every weight equals the exact
    area 4 pi / N. The operator maps polynomials of degree k in x to degree k
    and has the exact spectrum l(l+1)/2.
    """
    n = int(resolution)
    if n < 16:
        raise ResolutionError(f"P^1 resolution must be >= 16, got {resolution}")
    hx = 2.0 / n
    faces = np.linspace(-1.0, 1.0, n + 1)
    centers = 0.5 * (faces[:-1] + faces[1:])
    # half of 2 pi (1 - x^2) / hx on interior faces; pole faces carry no flux
    conductance = 0.5 * 2.0 * math.pi * (1.0 - faces[1:-1] ** 2) / hx
    main = np.zeros(n)
    main[:-1] -= conductance
    main[1:] -= conductance
    stiffness = sp.diags([conductance, main, conductance], [-1, 0, 1], shape=(n, n)).tocsr()
    theta = np.arccos(centers)
    return Geometry(
        kind=P1,
        resolution=n,
        sites=theta,
        quad_weights=np.full(n, 2.0 * math.pi * hx),
        volume=4.0 * math.pi,
        stiffness=stiffness,
        s_bar=1.0,
        spacing=float(np.max(np.abs(np.diff(theta)))),
    )


def make_geometry(kind: str, resolution: int) -> Geometry:
    if kind == TORUS:
        return make_torus_geometry(resolution)
    if kind == P1:
        return make_p1_geometry(resolution)
    raise ResolutionError(f"unknown backend {kind!r}; expected one of {BACKENDS}")


@dataclass(frozen=True, eq=False)
class Density:
    """rho = omega_u^n / omega^n sampled at sites."""

    values: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size != self.geometry.size:
            raise ShapeError(f"density has {v.size} values for {self.geometry.size} sites")
        check_positive(v)
        mean = self.geometry.mean(v)
        if abs(mean - 1.0) > MEAN_TOL:
            raise InconsistencyError(mean)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class Potential:
    """Normalized Kähler potential u with zero mean and density 1 + laplace(u) > 0."""

    values: np.ndarray
    geometry: Geometry
    rho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.geometry
        u = np.array(self.values, dtype=float).ravel()
        if u.size != g.size:
            raise ShapeError(f"potential has {u.size} values for {g.size} sites")
        if not np.all(np.isfinite(u)):
            raise NumericError("potential has non-finite values")
        scale = float(np.max(np.abs(u))) if u.size else 0.0
        if abs(g.integrate(u)) > 1e-10 * g.volume * max(scale, 1e-300) and scale > 0:
            raise ShapeError("potential is not normalized to zero mean")
        rho = 1.0 + g.laplace(u)
        check_positive(rho)
        u.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "values", u)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_values(cls, values: np.ndarray, geometry: Geometry) -> "Potential":
        return cls(geometry.project_mean(np.asarray(values, dtype=float).ravel()), geometry)

    @classmethod
    def zero(cls, geometry: Geometry) -> "Potential":
        return cls(np.zeros(geometry.size), geometry)


def check_positive(rho: np.ndarray, floor: float = EPS_POS) -> None:
    bad = np.flatnonzero(~(rho > floor))
    if bad.size:
        site = int(bad[np.argmin(rho[bad])]) if np.all(np.isfinite(rho[bad])) else int(bad[0])
        raise NotKahlerError(site, float(rho[site]), floor)


def density(u: Potential) -> Density:
    return Density(u.rho, u.geometry)


def calabi_yau_inverse(rho: Union[Density, np.ndarray], geometry: Geometry) -> Potential:
    """Zero-mean u with 1 + laplace(u) = rho (a linear Poisson problem in dimension 1)."""
    values = np.asarray(rho.values if isinstance(rho, Density) else rho, dtype=float).ravel()
    if values.size != geometry.size:
        raise ShapeError(f"density has {values.size} values for {geometry.size} sites")
    mean = geometry.mean(values)
    if abs(mean - 1.0) > MEAN_TOL:
        raise InconsistencyError(mean)
    check_positive(values)
    u = geometry.solve_poisson(values - 1.0)
    residual = float(np.max(np.abs(geometry.laplace(u) - (values - 1.0))))
    scale = max(1.0, float(np.max(np.abs(values)))) + geometry.laplace_norm * float(np.max(np.abs(u)))
    if residual > 1e-11 * scale:
        raise NumericError(f"Poisson residual {residual:.3e} above tolerance")
    return Potential.from_values(u, geometry)


def weighted_laplacian(u: Potential, beta: np.ndarray) -> np.ndarray:
    """Delta_{omega_u} beta = laplace(beta) / rho_u."""
    return u.geometry.laplace(np.asarray(beta, dtype=float)) / u.rho


def scalar_curvature(u: Potential) -> np.ndarray:
    """S_{omega_u} = (S_omega - laplace(log rho_u)) / rho_u."""
    rho = u.rho
    if float(rho.min()) < CONDITIONING_FLOOR:
        warnings.warn(
            f"scalar curvature evaluated at density {rho.min():.2e}; log(rho) is ill-conditioned",
            ConditioningWarning,
            stacklevel=2,
        )
    g = u.geometry
    return (g.s_bar - g.laplace(np.log(rho))) / rho


def test_function_dictionary(geometry: Geometry, size: int = DICTIONARY_SIZE) -> np.ndarray:
    """Fixed smooth test functions (rows) probing weak convergence of measures."""
    if geometry.kind == P1:
        x = np.cos(geometry.sites)
        rows = [np.polynomial.legendre.legval(x, np.eye(size + 1)[degree]) for degree in range(1, size + 1)]
        return np.vstack(rows)
    modes = sorted(
        ((kx, ky) for kx in range(0, 6) for ky in range(-5, 6) if kx > 0 or ky > 0),
        key=lambda k: (k[0] ** 2 + k[1] ** 2, k[0], k[1]),
    )
    x, y = geometry.sites[:, 0], geometry.sites[:, 1]
    rows = []
    for kx, ky in modes:
        phase = 2.0 * math.pi * (kx * x + ky * y)
        rows.extend([np.cos(phase), np.sin(phase)])
        if len(rows) >= size:
            break
    return np.vstack(rows[:size])


def scale_to_density_swing(values: np.ndarray, geometry: Geometry, swing: float) -> np.ndarray:
    """Rescale a grid function so that max |laplace(u)| equals swing."""
    values = geometry.project_mean(values)
    peak = float(np.max(np.abs(geometry.laplace(values))))
    return values if peak == 0 else values * (swing / peak)


def random_smooth_potential(
    geometry: Geometry, rng: np.random.Generator, swing: float = 0.5, modes: int = 8
) -> Potential:
    """Random combination of low modes with density in [1 - swing, 1 + swing]."""
    basis = test_function_dictionary(geometry, max(modes, 2))[:modes]
    coeffs = rng.standard_normal(modes) / (1.0 + np.arange(modes))
    return Potential.from_values(scale_to_density_swing(coeffs @ basis, geometry, swing), geometry)


def zonal_potential(geometry: Geometry, degree: int, swing: float) -> Potential:
    """
    Legendre mode (swing / lambda) P_degree(cos theta) with lambda = degree (degree + 1) / 2 (P^1 only).

    The scale uses the exact eigenvalue, so the datum is the same function at every
    resolution and sup |laplace(u)| approaches swing from below as the grid refines.
    """
    if geometry.kind != P1:
        raise ShapeError("zonal potentials live on the P^1 backend")
    if degree < 1:
        raise ShapeError(f"zonal degree must be >= 1, got {degree}")
    x = np.cos(geometry.sites)
    values = np.polynomial.legendre.legval(x, np.eye(degree + 1)[degree])
    eigenvalue = 0.5 * degree * (degree + 1)
    return Potential.from_values(geometry.project_mean(values) * (swing / eigenvalue), geometry)


GRID_MAGIC = "calabi-lab-grid"


def save_grid_function(path: Path, values: np.ndarray, geometry: Geometry, fmt: str = "csv") -> Path:
    """
    Write a grid function with a header (backend kind, resolution, V).

    csv: '# key=value' header lines, then one line per grid row (torus) or
    one value per line (P^1). bin: one ASCII header line followed by
    little-endian float64 values in row-major order.
    """
    path = Path(path)
    values = np.asarray(values, dtype=float).ravel()
    if values.size != geometry.size:
        raise ShapeError(f"{values.size} values for {geometry.size} sites")
    header = {"kind": geometry.kind, "resolution": geometry.resolution, "volume": repr(geometry.volume)}
    if fmt == "csv":
        lines = [f"# {key}={value}" for key, value in header.items()]
        rows = values.reshape(geometry.grid_shape if geometry.kind == TORUS else (-1, 1))
        lines.extend(",".join(f"{v:.17g}" for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "bin":
        fields = " ".join(f"{key}={value}" for key, value in header.items())
        head = f"{GRID_MAGIC} {fields} dtype=<f8 count={values.size}\n".encode("ascii")
        path.write_bytes(head + values.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown grid format {fmt!r}")
    return path


def load_grid_function(path: Path, geometry: Optional[Geometry] = None) -> Tuple[np.ndarray, Dict[str, str]]:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(GRID_MAGIC.encode("ascii")):
        head, _, body = raw.partition(b"\n")
        header = dict(item.split("=", 1) for item in head.decode("ascii").split()[1:])
        values = np.frombuffer(body, dtype="<f8", count=int(header["count"])).astype(float)
    else:
        header, rows = {}, []
        for line in raw.decode("utf-8").splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif line.strip():
                rows.extend(float(v) for v in line.split(","))
        values = np.array(rows)
    if geometry is not None:
        if header.get("kind") != geometry.kind or int(header.get("resolution", -1)) != geometry.resolution:
            raise ShapeError(f"{path.name} was written for {header.get('kind')}/{header.get('resolution')}")
        if values.size != geometry.size:
            raise ShapeError(f"{path.name} holds {values.size} values for {geometry.size} sites")
    return values, header
