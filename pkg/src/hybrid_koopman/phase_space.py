"""Discretized classical phase space for one degree of freedom.

A :class:`PhaseSpaceGrid` is a uniform rectangular grid in Darboux
coordinates ``(q, p)``. Grid points are enumerated row-major with ``q`` as
the slow index, so the flat index of ``(i_q, i_p)`` is ``i_q * n_p + i_p``.

Periodic grids are node based, ``q_k = q_min + k * dq`` with
``dq = (q_max - q_min) / n_q`` (the duplicate endpoint is dropped). Grids with
zero (Dirichlet) boundary are cell centred, ``q_k = q_min + (k + 1/2) * dq``,
so that cell weights tile the box exactly in both modes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import _kernels
from .errors import (
    ConfigurationError,
    InvalidDensityError,
    OracleUnavailableError,
    SizeMismatchError,
)

DENSITY_TOL = 1e-10


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    ZERO = "zero"


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform grid on ``[q_min, q_max] x [p_min, p_max]``."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        bounds = (self.q_min, self.q_max, self.p_min, self.p_max)
        if not all(math.isfinite(b) for b in bounds):
            raise ConfigurationError(f"grid bounds must be finite, got {bounds}")
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ConfigurationError(f"grid bounds must satisfy max > min, got {bounds}")
        for name in ("n_q", "n_p"):
            n = getattr(self, name)
            if int(n) != n or n < 4:
                raise ConfigurationError(f"{name} must be an integer >= 4, got {n}")
        object.__setattr__(self, "n_q", int(self.n_q))
        object.__setattr__(self, "n_p", int(self.n_p))
        try:
            object.__setattr__(self, "boundary", Boundary(self.boundary))
        except ValueError as exc:
            raise ConfigurationError(f"unknown boundary mode {self.boundary!r}") from exc

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def cell_volume(self) -> float:
        """Weight ``dq * dp`` of one grid cell."""
        return self.dq * self.dp

    @property
    def volume(self) -> float:
        return (self.q_max - self.q_min) * (self.p_max - self.p_min)

    @property
    def size(self) -> int:
        return self.n_q * self.n_p

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_q, self.n_p)

    @cached_property
    def q_axis(self) -> np.ndarray:
        offset = 0.0 if self.periodic else 0.5
        return self.q_min + (np.arange(self.n_q) + offset) * self.dq

    @cached_property
    def p_axis(self) -> np.ndarray:
        offset = 0.0 if self.periodic else 0.5
        return self.p_min + (np.arange(self.n_p) + offset) * self.dp

    @cached_property
    def q(self) -> np.ndarray:
        """Flat array of the ``q`` coordinate of every point."""
        return np.repeat(self.q_axis, self.n_p)

    @cached_property
    def p(self) -> np.ndarray:
        return np.tile(self.p_axis, self.n_q)

    def index(self, i_q: int, i_p: int) -> int:
        if not (0 <= i_q < self.n_q and 0 <= i_p < self.n_p):
            raise IndexError(f"grid index ({i_q}, {i_p}) out of range")
        return i_q * self.n_p + i_p

    def unravel(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.size:
            raise IndexError(f"flat index {k} out of range")
        return divmod(k, self.n_p)

    def flat(self, values, dtype=None) -> np.ndarray:
        """Validate the size of a per-point array and return it flattened."""
        arr = np.asarray(values, dtype=dtype)
        if arr.ndim == 0:
            arr = np.full(self.size, arr, dtype=arr.dtype if dtype is None else dtype)
        if arr.size != self.size or arr.ndim not in (1, 2):
            raise SizeMismatchError(
                f"expected {self.size} grid values ({self.n_q}x{self.n_p}), got shape {arr.shape}"
            )
        if arr.ndim == 2 and arr.shape != self.shape:
            raise SizeMismatchError(f"expected shape {self.shape}, got {arr.shape}")
        return arr.reshape(self.size)

    def as_2d(self, values) -> np.ndarray:
        return self.flat(values).reshape(self.shape)

    def fractional_index(self, q, p):
        """Fractional (row, column) indices of arbitrary phase-space points."""
        offset = 0.0 if self.periodic else 0.5
        fq = (np.asarray(q, dtype=float) - self.q_min) / self.dq - offset
        fp = (np.asarray(p, dtype=float) - self.p_min) / self.dp - offset
        return fq, fp


def build_grid(bounds, n_q: int, n_p: int, boundary="periodic") -> PhaseSpaceGrid:
    """Build a grid from ``bounds = (q_min, q_max, p_min, p_max)``.

    Raises
    ------
    ConfigurationError
        For non-finite or inverted bounds, counts below 4, or an unknown
        boundary mode.
    """
    try:
        q_min, q_max, p_min, p_max = (float(b) for b in bounds)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bounds must be four reals, got {bounds!r}") from exc
    return PhaseSpaceGrid(q_min, q_max, p_min, p_max, n_q, n_p, boundary)


def riemann_integral(f, grid: PhaseSpaceGrid):
    """Riemann sum ``dq dp * sum(f)`` over the grid."""
    values = grid.flat(f)
    return grid.cell_volume * values.sum()


@dataclass(frozen=True)
class ClassicalDensity:
    """Nonnegative per-point density with unit mass, ``dq dp * sum(values) = 1``."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        values = self.grid.flat(self.values, dtype=float).copy()
        if not np.all(np.isfinite(values)):
            raise InvalidDensityError("density contains non-finite values")
        if values.min() < 0:
            raise InvalidDensityError(f"density has negative entries (min {values.min():.3g})")
        mass = self.grid.cell_volume * values.sum()
        if abs(mass - 1.0) > DENSITY_TOL:
            raise InvalidDensityError(f"density mass is {mass!r}, expected 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_unnormalized(cls, grid: PhaseSpaceGrid, values) -> "ClassicalDensity":
        values = grid.flat(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise InvalidDensityError("density contains non-finite values")
        if values.min() < 0:
            raise InvalidDensityError(f"density has negative entries (min {values.min():.3g})")
        mass = grid.cell_volume * values.sum()
        if mass <= 0:
            raise InvalidDensityError("density has zero mass")
        return cls(grid, values / mass)

    @property
    def mass(self) -> float:
        return self.grid.cell_volume * float(self.values.sum())

    def mean(self) -> tuple[float, float]:
        w = self.grid.cell_volume * self.values
        return float(w @ self.grid.q), float(w @ self.grid.p)


def gaussian_density(grid: PhaseSpaceGrid, center=(0.0, 0.0), width=1.0) -> ClassicalDensity:
    """Isotropic Gaussian sampled on the grid and normalized to unit mass."""
    return ClassicalDensity.from_unnormalized(grid, gaussian_profile(center, width)(grid.q, grid.p))


def gaussian_profile(center=(0.0, 0.0), width=1.0) -> Callable:
    q0, p0 = center

    def profile(q, p):
        return np.exp(-((q - q0) ** 2 + (p - p0) ** 2) / (2.0 * width**2))

    return profile


# -- Hamiltonian fields ------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianField:
    """Energy ``H`` with ``alpha = dH/dp`` and ``beta = -dH/dq`` on a grid."""

    grid: PhaseSpaceGrid
    H: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def divergence(self) -> np.ndarray:
        """Discrete ``d(alpha)/dq + d(beta)/dp`` with the same stencils."""
        g = self.grid
        return (
            central_difference(self.alpha, g, axis=0) + central_difference(self.beta, g, axis=1)
        ).reshape(g.size)


def central_difference(values, grid: PhaseSpaceGrid, axis: int) -> np.ndarray:
    """Second-order derivative of a gridded function along ``axis`` (0 = q, 1 = p).

    Periodic grids use wrapped central differences. Zero-boundary grids use
    central differences inside and one-sided second-order stencils on the
    edge rows, since a function (unlike an operator) needs no ghost values.
    """
    f = grid.as_2d(values)
    h = grid.dq if axis == 0 else grid.dp
    if grid.periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def hamiltonian_field(H, grid: PhaseSpaceGrid) -> HamiltonianField:
    """Hamiltonian vector-field coefficients of a real energy function.

    On periodic grids the energy is treated as periodic; a non-periodic
    energy gets wrong coefficients on the outermost rows, so densities must
    stay away from the box edges in that case.
    """
    values = grid.flat(H)
    if np.iscomplexobj(values):
        if np.abs(values.imag).max() > 0:
            raise ConfigurationError("classical energy must be real-valued")
        values = values.real
    values = values.astype(float)
    alpha = central_difference(values, grid, axis=1).reshape(grid.size)
    beta = -central_difference(values, grid, axis=0).reshape(grid.size)
    for arr in (values, alpha, beta):
        arr.setflags(write=False)
    return HamiltonianField(grid, values, alpha, beta)


# -- exact-characteristics presets ---------------------------------------------


@dataclass(frozen=True)
class FlowPreset:
    """A classical Hamiltonian with a closed-form flow ``(q, p, t) -> (q_t, p_t)``."""

    name: str
    expression: str
    energy: Callable
    flow: Callable
    period: float | None = None
    description: str = ""

    def sample(self, grid: PhaseSpaceGrid) -> np.ndarray:
        return np.asarray(self.energy(grid.q, grid.p), dtype=float)


def _free_flow(q, p, t):
    return q + p * t, p


def _harmonic_flow(q, p, t):
    c, s = math.cos(t), math.sin(t)
    return q * c + p * s, -q * s + p * c


def _linear_field_flow(q, p, t):
    return q + p * t + 0.5 * t * t, p + t


PRESETS = {
    "free_particle": FlowPreset(
        "free_particle",
        "p^2/2",
        lambda q, p: 0.5 * p**2 + 0.0 * q,
        _free_flow,
        None,
        "free particle, H = p^2/2",
    ),
    "harmonic": FlowPreset(
        "harmonic",
        "(q^2 + p^2)/2",
        lambda q, p: 0.5 * (q**2 + p**2),
        _harmonic_flow,
        2.0 * math.pi,
        "unit-frequency harmonic oscillator, H = (q^2 + p^2)/2",
    ),
    "linear_field": FlowPreset(
        "linear_field",
        "p^2/2 - q",
        lambda q, p: 0.5 * p**2 - q,
        _linear_field_flow,
        None,
        "particle in a uniform unit force field, H = p^2/2 - q",
    ),
}


def get_preset(flow) -> FlowPreset:
    if isinstance(flow, FlowPreset):
        return flow
    try:
        return PRESETS[flow]
    except (KeyError, TypeError):
        raise OracleUnavailableError(
            f"no exact-characteristics oracle for {flow!r}; presets: {sorted(PRESETS)}"
        ) from None


def liouville_oracle(rho0: ClassicalDensity, flow, t: float, *, profile=None) -> ClassicalDensity:
    """Transport a density along the exact characteristics of a preset flow.

    Returns ``rho0 o F_{-t}`` sampled on the grid and renormalized. Off-grid
    values come from bilinear interpolation of ``rho0`` (periodic wrap or zero
    outside), unless ``profile(q, p)`` is given, in which case the
    unnormalized initial profile is evaluated at the back-traced points.
    """
    preset = get_preset(flow)
    grid = rho0.grid
    if t == 0 and profile is None:
        return rho0
    qb, pb = preset.flow(grid.q, grid.p, -float(t))
    if profile is not None:
        values = np.asarray(profile(qb, pb), dtype=float)
    else:
        fq, fp = grid.fractional_index(qb, pb)
        values = _kernels.bilinear_sample(grid.as_2d(rho0.values), fq, fp, grid.periodic)
    return ClassicalDensity.from_unnormalized(grid, values)


# -- Koopman wavefunctions --------------------------------------------------------


def density_to_wavefunction(rho: ClassicalDensity) -> np.ndarray:
    """Nonnegative square root ``psi`` with ``rho = |psi|^2``."""
    if not isinstance(rho, ClassicalDensity):
        raise InvalidDensityError("expected a validated ClassicalDensity")
    return np.sqrt(rho.values).astype(complex)


def wavefunction_to_density(psi, grid: PhaseSpaceGrid, tol: float = 1e-8) -> ClassicalDensity:
    """``|psi|^2`` as a density; ``psi`` must be normalized to within ``tol``."""
    psi = grid.flat(psi)
    weights = np.abs(psi) ** 2
    norm = grid.cell_volume * weights.sum()
    if norm == 0:
        raise InvalidDensityError("wavefunction has zero norm")
    if abs(norm - 1.0) > tol:
        raise InvalidDensityError(f"wavefunction norm^2 is {norm!r}, expected 1")
    return ClassicalDensity(grid, weights / norm)
