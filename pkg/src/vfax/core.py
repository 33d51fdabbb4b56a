"""Grid, field and parameter types shared by all modules, plus discrete norms.

All types here are immutable values after construction (arrays are marked
read-only), so they can be shared freely between concurrent runs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])
E3.setflags(write=False)


class VfaxError(Exception):
    """Base class for all package errors."""


class AlignmentError(VfaxError):
    """A field does not match the grid it is used with."""


class RegimeError(VfaxError):
    """An operation was applied in the wrong sign-of-alpha regime."""


class ResolutionError(VfaxError):
    """The grid cannot resolve the requested stencil or derivative order."""


class InstabilityError(VfaxError):
    """The time integration blew up."""


class PreconditionError(VfaxError):
    """An input violates a documented precondition."""


class EnvelopeExpiredError(VfaxError):
    """Requested time lies outside the comparison-ODE validity interval."""


class DegenerateFrameError(VfaxError):
    """Curvature too small to define a torsion phase where one is needed."""


class FarFieldError(VfaxError):
    """Activity reached the clamped far end of the truncated domain."""


class ConfigError(VfaxError):
    """Invalid configuration file or command-line input."""


class Regime(enum.Enum):
    NEG_ALPHA = "neg"  # one boundary condition: v_s(0) = 0
    POS_ALPHA = "pos"  # two boundary conditions: v(0) = e3, v_s(0) = 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform discretization of [0, L]; node 0 is the physical boundary.

    ``periodic=True`` is the whole-line/torus test variant used by exact
    traveling-wave oracles; there h = L/N and node N wraps to node 0.
    """

    length: float
    npoints: int
    periodic: bool = False

    def __post_init__(self):
        if not (self.length > 0):
            raise ValueError("grid length must be positive")
        if self.npoints < 16:
            raise ValueError("grid needs at least 16 points")

    @property
    def h(self) -> float:
        if self.periodic:
            return self.length / self.npoints
        return self.length / (self.npoints - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.npoints)


@dataclass(frozen=True)
class Field3:
    """N 3-vectors aligned to a grid, stored as an (N, 3) float array."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != 3:
            raise ValueError(f"Field3 expects an (N, 3) array, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, g: GridSpec) -> "Field3":
        return cls(np.zeros((g.npoints, 3)))

    @classmethod
    def constant(cls, vec, g: GridSpec) -> "Field3":
        return cls(np.tile(np.asarray(vec, dtype=float), (g.npoints, 1)))

    def require_alignment(self, g: GridSpec) -> None:
        if self.n != g.npoints:
            raise AlignmentError(f"field has {self.n} nodes, grid has {g.npoints}")

    def require_finite(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("field contains non-finite entries")


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters.

    alpha is the axial-flow coefficient; its sign selects the boundary
    regime.  delta >= 0 is the strength of the parabolic regularization
    term delta*(v_ss + |v_s|^2 v).
    """

    alpha: float
    delta: float = 0.0
    stencil_order: int = 4
    cfl_safety: float = 0.5

    def __post_init__(self):
        if self.alpha == 0.0:
            raise ValueError("alpha must be non-zero (sign selects the boundary regime)")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.stencil_order not in (2, 4, 6):
            raise ValueError("stencil_order must be one of 2, 4, 6")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError("cfl_safety must lie in (0, 1]")

    @property
    def regime(self) -> Regime:
        return Regime.NEG_ALPHA if self.alpha < 0 else Regime.POS_ALPHA


# Fixed key orders so serialized diagnostics have a stable column layout.
BOUNDARY_RESIDUAL_KEYS = ("vs_at_0", "v_at_0_minus_e3", "far_field")
IDENTITY_RESIDUAL_KEYS = ("par_n1", "par_n2", "par2_n2", "form_equiv", "trace_pos")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time-sample of every monitored norm, energy and residual."""

    t: float
    unit_norm_drift: float
    norm_vs: float
    norm_vss: float
    norm_vsss: float
    energy_E2: float
    modified_E3: float
    boundary_residuals: dict = field(default_factory=dict)
    identity_residuals: dict = field(default_factory=dict)

    def require_finite(self) -> None:
        scalars = [self.t, self.unit_norm_drift, self.norm_vs, self.norm_vss,
                   self.norm_vsss, self.energy_E2, self.modified_E3]
        scalars += list(self.boundary_residuals.values())
        scalars += list(self.identity_residuals.values())
        if not all(math.isfinite(x) for x in scalars):
            raise PreconditionError("diagnostics record contains non-finite entries")


@dataclass(frozen=True)
class CompatibilityOrder:
    n: int
    residuals: dict
    passed: bool


@dataclass(frozen=True)
class CompatibilityReport:
    orders: tuple
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.orders)

    def residual(self, n: int, name: str) -> float:
        return self.orders[n].residuals[name]


def trapezoid_weights(g: GridSpec) -> np.ndarray:
    """Quadrature weights: h everywhere, h/2 at the two ends of a bounded grid."""
    w = np.full(g.npoints, g.h)
    if not g.periodic:
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def l2_norm(f: Field3, g: GridSpec) -> float:
    """Discrete L^2 norm with trapezoidal weights."""
    f.require_alignment(g)
    w = trapezoid_weights(g)
    return math.sqrt(float(np.sum(np.sum(f.values * f.values, axis=1) * w)))


def inner_product(f: Field3, g2: Field3, g: GridSpec) -> float:
    """Trapezoidal discrete L^2 inner product of two vector fields."""
    f.require_alignment(g)
    g2.require_alignment(g)
    w = trapezoid_weights(g)
    return float(np.sum(np.sum(f.values * g2.values, axis=1) * w))


def scalar_l2_norm(vals: np.ndarray, g: GridSpec) -> float:
    """L^2 norm of a scalar grid function (same trapezoidal weights)."""
    if vals.shape[0] != g.npoints:
        raise AlignmentError(f"scalar field has {vals.shape[0]} nodes, grid has {g.npoints}")
    return math.sqrt(float(np.sum(vals * vals * trapezoid_weights(g))))


def sup_norm_unit_drift(v: Field3) -> float:
    """max_i | |v_i| - 1 |, the pointwise deviation from unit length."""
    r = np.sqrt(np.sum(v.values * v.values, axis=1))
    return float(np.max(np.abs(r - 1.0)))


def normalize_pointwise(values: np.ndarray) -> np.ndarray:
    """Divide every 3-vector by its length."""
    r = np.sqrt(np.sum(values * values, axis=1))
    if np.any(r == 0.0):
        raise PreconditionError("cannot normalize a zero vector")
    return values / r[:, None]
