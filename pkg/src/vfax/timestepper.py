"""Time integration of the regularized systems with sign-dependent boundaries.

Explicit classical RK4 on the method-of-lines system; the boundary
conditions are enforced by injection after every stage: for alpha < 0 the
boundary node is solved from the one-sided first-derivative row so that
v_s(0) = 0 holds exactly, for alpha > 0 node 0 is pinned to e3 and node 1
is solved from the same row.  The truncated far end is clamped to the
(constant) initial far-field value, which is exact until signals arrive;
runs abort once far-field activity exceeds a threshold.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (DiagnosticsRecord, FarFieldError, Field3, GridSpec,
                   InstabilityError, PreconditionError, Regime, SimParams, E3,
                   VfaxError, l2_norm, sup_norm_unit_drift, trapezoid_weights)
from .operators import _rhs_transformed_arrays, diff_values, rhs_x_integrand, stencil_row
from . import compatibility as _compat
from . import diagnostics as _diag

# RK4 absolute-stability interval endpoints: [-_RK4_REAL, 0] on the real
# axis, [-i*_RK4_IMAG, +i*_RK4_IMAG] on the imaginary axis.
_RK4_REAL = 2.7852935634052445
_RK4_IMAG = 2.0 * math.sqrt(2.0)

_DELTA_FLOOR = 1e-30   # guards the delta = 0 branch of the parabolic limit


@dataclass(frozen=True)
class SimState:
    t: float
    v: Field3
    x: Field3 | None = None
    step_count: int = 0


@dataclass(frozen=True)
class ContinuationResult:
    deltas: tuple
    pairwise_h1_diffs: tuple
    observed_rate: float
    failures: dict


@dataclass
class RunConfig:
    params: SimParams
    grid: GridSpec
    t_final: float
    dt: float | None = None              # None = auto from stable_dt
    ic: object = "e3"                    # family name, snapshot path, or Field3
    project_unit_norm: bool = False
    diagnostics_every: int = 50
    right_boundary: str = "clamp"        # clamp | extrapolation
    track_x: bool = False
    x0: Field3 | None = None
    snapshot_times: tuple = ()
    drift_abort: float = 1e-2
    far_field_tol: float = 1e-6
    compat_check_order: int = 0
    compat_check_tol: float = 1e-6

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.right_boundary not in ("clamp", "extrapolation"):
            raise ValueError("right_boundary must be 'clamp' or 'extrapolation'")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")


@dataclass(frozen=True)
class RunResult:
    state: SimState
    records: tuple
    snapshots: tuple = ()

    def __iter__(self):
        return iter((self.state, list(self.records)))


def _symbol_max(offsets, coeffs) -> float:
    """max_theta |sum_j c_j e^{i j theta}| of a unit-spacing stencil row."""
    theta = np.linspace(0.0, math.pi, 2049)
    z = np.zeros_like(theta, dtype=complex)
    for o, c in zip(offsets, coeffs):
        z += c * np.exp(1j * o * theta)
    return float(np.max(np.abs(z)))


def stable_dt(params: SimParams, g: GridSpec) -> float:
    """cfl_safety * min(c3 h^3/|alpha|, c2 h^2/max(delta, eps)).

    c3 = RK4 imaginary-axis bound / max symbol of the interior third-
    derivative row, c2 = RK4 real-axis bound / max symbol of the second-
    derivative row (documented values: p=2 gives c3 = 1.089, c2 = 0.696;
    p=4 gives c3 = 0.614, c2 = 0.522; p=6 gives c3 = 0.458, c2 = 0.461).
    """
    p = params.stencil_order
    h = g.h
    r3 = (3 + 1) // 2 + p // 2 - 1
    row3 = stencil_row(3, np.arange(-r3, r3 + 1))
    r2 = (2 + 1) // 2 + p // 2 - 1
    row2 = stencil_row(2, np.arange(-r2, r2 + 1))
    c3 = _RK4_IMAG / _symbol_max(np.arange(-r3, r3 + 1), row3)
    c2 = _RK4_REAL / _symbol_max(np.arange(-r2, r2 + 1), row2)
    dt3 = c3 * h ** 3 / abs(params.alpha)
    dt2 = c2 * h ** 2 / max(params.delta, _DELTA_FLOOR)
    return params.cfl_safety * min(dt3, dt2)


def _bc_row(p: int) -> np.ndarray:
    """One-sided first-derivative row on 1+p points (unit spacing)."""
    return stencil_row(1, np.arange(1 + p))


def enforce_boundary(v: Field3, params: SimParams, g: GridSpec,
                     far_value: np.ndarray | None = None,
                     right_boundary: str = "clamp") -> Field3:
    """Return v with the regime's boundary conditions imposed at s = 0.

    alpha < 0: node 0 is solved from the p-th order one-sided row so the
    discrete v_s(0) vanishes exactly (the subtract-center form keeps an
    already-compliant field bit-identical up to roundoff); alpha > 0:
    node 0 is pinned to e3, and v_s(0) = 0 is carried by the stepper's
    ghost construction.  The right end is clamped to ``far_value`` (or
    left untouched when None) or filled by polynomial extrapolation.
    """
    v.require_alignment(g)
    if g.periodic:
        return v
    vals = np.array(v.values)
    _enforce_inplace(vals, params, g, far_value, right_boundary)
    return Field3(vals)


def _enforce_inplace(vals: np.ndarray, params: SimParams, g: GridSpec,
                     far_value, right_boundary: str) -> None:
    p = params.stencil_order
    if params.regime is Regime.NEG_ALPHA:
        row = _bc_row(p)
        corr = np.tensordot(row[1:], vals[1:1 + p] - vals[0], axes=(0, 0)) / row[0]
        vals[0] = vals[0] - corr
    else:
        vals[0] = E3
    tail = _clamp_width(params, g)
    if right_boundary == "clamp":
        if far_value is not None:
            vals[-tail:] = far_value
    else:
        m = 1 + p
        ex_row = np.array([float(c) for c in _extrapolation_row(m)])
        for i in range(g.npoints - tail, g.npoints):
            vals[i] = np.tensordot(ex_row, vals[i - m:i], axes=(0, 0))


def _clamp_width(params: SimParams, g: GridSpec) -> int:
    p = params.stencil_order
    return (3 + 1) // 2 + p // 2 - 1  # half-width of the widest (third-derivative) stencil


@functools.lru_cache(maxsize=None)
def _extrapolation_row(m: int):
    """Coefficients extending a degree m-1 polynomial one node to the right."""
    from fractions import Fraction
    # Lagrange basis values at x = m given nodes 0..m-1
    coeffs = []
    for j in range(m):
        c = Fraction(1)
        for k in range(m):
            if k != j:
                c *= Fraction(m - k, j - k)
        coeffs.append(c)
    return tuple(coeffs)


_GHOST_DEGREE = 5


class _Stepper:
    """Carries the per-run context so stages avoid re-validating inputs.

    For alpha > 0 the left boundary needs two conditions; derivatives near
    s = 0 are evaluated on a ghost extension built from the polynomial
    constrained by p(0) = v(0), p_s(0) = 0 and fitted to the first interior
    nodes.  (Direct one-sided evaluation with the boundary nodes slaved to
    stencil rows is Kreiss-unstable under refinement in this regime; the
    ghost closure keeps the semi-discrete spectrum in the left half plane
    at desk scale.)  For alpha < 0 one-sided rows with the node-0
    injection are stable and keep v_s(0) = 0 at machine level.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.params = config.params
        self.grid = config.grid
        self.p = self.params.stencil_order
        self.far_value = None
        self.predicted_dt = stable_dt(self.params, self.grid)
        self.ghost = (self.params.regime is Regime.POS_ALPHA
                      and not self.grid.periodic)
        if self.ghost:
            d = _GHOST_DEGREE
            r = _clamp_width(self.params, self.grid)
            js = np.arange(1, d)
            M = np.array([[float(j) ** m for m in range(2, d + 1)] for j in js])
            self._ghost_minv = np.linalg.inv(M)
            self._ghost_xpow = np.array(
                [[(-float(i)) ** m for m in range(2, d + 1)] for i in range(r, 0, -1)])
            self._ghost_r = r
            self._ghost_d = d
            self._gext = GridSpec(self.grid.length + r * self.grid.h,
                                  self.grid.npoints + r)

    def rhs(self, vals: np.ndarray) -> np.ndarray:
        g, p = self.grid, self.p
        if self.ghost:
            r, d = self._ghost_r, self._ghost_d
            coef = self._ghost_minv @ (vals[1:d] - vals[0])
            ghosts = vals[0] + self._ghost_xpow @ coef
            ext = np.vstack([ghosts, vals])
            d1 = diff_values(ext, 1, self._gext, p)[r:]
            d2 = diff_values(ext, 2, self._gext, p)[r:]
            d3 = diff_values(ext, 3, self._gext, p)[r:]
        else:
            d1 = diff_values(vals, 1, g, p)
            d2 = diff_values(vals, 2, g, p)
            d3 = diff_values(vals, 3, g, p)
        return _rhs_transformed_arrays(vals, d1, d2, d3,
                                       self.params.alpha, self.params.delta)

    def enforce(self, vals: np.ndarray) -> np.ndarray:
        if self.grid.periodic:
            return vals
        _enforce_inplace(vals, self.params, self.grid, self.far_value,
                         self.config.right_boundary)
        return vals

    def rk4(self, vals: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(vals)
        k2 = self.rhs(self.enforce(vals + (0.5 * dt) * k1))
        k3 = self.rhs(self.enforce(vals + (0.5 * dt) * k2))
        k4 = self.rhs(self.enforce(vals + dt * k3))
        out = vals + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self.enforce(out)


def step(state: SimState, dt: float, config: RunConfig) -> SimState:
    """One classical four-stage step with boundary enforcement per stage."""
    stepper = _Stepper(config)
    if not config.grid.periodic:
        stepper.far_value = np.array(state.v.values[-1])
    return _advance(state, dt, stepper)


def _advance(state: SimState, dt: float, stepper: _Stepper) -> SimState:
    vals = state.v.values
    new = stepper.rk4(vals, dt)
    if not np.all(np.isfinite(new)):
        raise InstabilityError(
            f"non-finite state at t = {state.t + dt:.6g}; "
            f"dt/stable_dt = {dt / stepper.predicted_dt:.3f}")
    old_mag = max(1.0, float(np.max(np.abs(vals))))
    if float(np.max(np.abs(new))) > 10.0 * old_mag:
        raise InstabilityError(
            f"norm grew more than 10x in one step at t = {state.t + dt:.6g}; "
            f"dt/stable_dt = {dt / stepper.predicted_dt:.3f}")
    if stepper.config.project_unit_norm:
        new = new / np.sqrt(np.einsum("ij,ij->i", new, new))[:, None]
    x = state.x
    if stepper.config.track_x and x is not None:
        inc = 0.5 * dt * (rhs_x_integrand(Field3(vals), stepper.params, stepper.grid).values
                          + rhs_x_integrand(Field3(new), stepper.params, stepper.grid).values)
        x = Field3(x.values + inc)
    return SimState(t=state.t + dt, v=Field3(new), x=x,
                    step_count=state.step_count + 1)


def _resolve_ic(config: RunConfig) -> Field3:
    ic = config.ic
    if isinstance(ic, Field3):
        ic.require_alignment(config.grid)
        return ic
    from . import cli_io  # deferred: the family catalogue lives with the io layer
    return cli_io.load_initial_condition(str(ic), config.grid, config.params)


def run(config: RunConfig) -> RunResult:
    """Integrate to t_final, emitting diagnostics every ``diagnostics_every`` steps.

    Deterministic for a fixed config.  The initial datum is checked against
    the compatibility conditions up to ``compat_check_order`` (a failure is
    a warning: the resulting degradation is itself observable).
    """
    params, g = config.params, config.grid
    v0 = _resolve_ic(config)
    drift0 = sup_norm_unit_drift(v0)
    if drift0 > 1e-8:
        warnings.warn(f"initial datum drifts from unit norm by {drift0:.3e}")
    if not g.periodic:
        tail = max(1, g.npoints // 10)
        flat = float(np.max(np.abs(v0.values[-tail:] - v0.values[-1])))
        if config.right_boundary == "clamp" and flat > config.far_field_tol:
            raise FarFieldError(
                f"clamped right boundary needs data constant on the last 10% "
                f"of the domain; deviation {flat:.3e}")
        try:
            rep = _compat.check_compatibility(v0, params, config.compat_check_order,
                                              config.compat_check_tol, g)
            if not rep.passed:
                warnings.warn(f"datum fails compatibility up to order "
                              f"{config.compat_check_order}: "
                              f"{[(o.n, o.residuals) for o in rep.orders if not o.passed]}")
        except VfaxError as exc:
            warnings.warn(f"compatibility check skipped: {exc}")

    stepper = _Stepper(config)
    if not g.periodic:
        stepper.far_value = np.array(v0.values[-1])
        v0 = enforce_boundary(v0, params, g, stepper.far_value, config.right_boundary)

    dt = config.dt if config.dt is not None else stepper.predicted_dt
    n_steps = max(1, math.ceil(config.t_final / dt - 1e-12))
    dt = config.t_final / n_steps

    x0 = config.x0 if config.x0 is not None else (Field3.zeros(g) if config.track_x else None)
    state = SimState(t=0.0, v=v0, x=x0, step_count=0)
    records = [_diag.record(state, params, g)]
    snapshots = []
    snap_steps = sorted({min(n_steps, max(0, round(ts / dt))) for ts in config.snapshot_times})
    if 0 in snap_steps:
        snapshots.append((0.0, state.v))

    for k in range(1, n_steps + 1):
        state = _advance(state, dt, stepper)
        drift = sup_norm_unit_drift(state.v)
        if drift > config.drift_abort:
            raise InstabilityError(
                f"unit-norm drift {drift:.3e} exceeded {config.drift_abort:g} "
                f"at t = {state.t:.6g}")
        if not g.periodic:
            tail = max(1, g.npoints // 10)
            activity = float(np.max(np.abs(state.v.values[-tail:] - stepper.far_value)))
            if activity > config.far_field_tol:
                raise FarFieldError(
                    f"far-field activity {activity:.3e} exceeded "
                    f"{config.far_field_tol:g} at t = {state.t:.6g}")
        if k % config.diagnostics_every == 0 or k == n_steps:
            records.append(_diag.record(state, params, g))
        if k in snap_steps:
            snapshots.append((state.t, state.v))
    return RunResult(state=state, records=tuple(records), snapshots=tuple(snapshots))


def reconstruct_x(samples, x0: Field3, params: SimParams, g: GridSpec) -> Field3:
    """Time-quadrature of the curve-velocity integrand along v-samples.

    ``samples`` is a sequence of (t, Field3) with uniform spacing; composite
    Simpson is used when the sample count is odd, trapezoid otherwise.
    """
    if len(samples) < 2:
        raise PreconditionError("need at least 2 time samples to reconstruct x")
    ts = np.array([t for t, _ in samples])
    dts = np.diff(ts)
    if np.any(dts <= 0):
        raise PreconditionError("sample times must increase")
    integrands = [rhs_x_integrand(v, params, g).values for _, v in samples]
    uniform = np.allclose(dts, dts[0], rtol=1e-12, atol=0.0)
    acc = np.zeros_like(integrands[0])
    if uniform and len(samples) % 2 == 1:
        hdt = dts[0]
        for i in range(0, len(samples) - 2, 2):
            acc += (hdt / 3.0) * (integrands[i] + 4.0 * integrands[i + 1] + integrands[i + 2])
    else:
        for i, dt in enumerate(dts):
            acc += 0.5 * dt * (integrands[i] + integrands[i + 1])
    return Field3(x0.values + acc)


def _h1_diff(a: Field3, b: Field3, g: GridSpec, p: int) -> float:
    d = a.values - b.values
    dd = diff_values(d, 1, g, p)
    w = trapezoid_weights(g)
    return math.sqrt(float(np.sum(np.einsum("ij,ij->i", d, d) * w))
                     + float(np.sum(np.einsum("ij,ij->i", dd, dd) * w)))


def delta_continuation(config: RunConfig, deltas, correction_order: int = 1) -> ContinuationResult:
    """Run a decreasing delta sequence and measure pairwise H^1 Cauchy differences.

    Every member shares the grid, the time step (the stability minimum over
    the sequence) and t_final; each member's datum is the order-m corrected
    datum for its delta.  The observed rate is the log-log slope of the
    consecutive differences against the larger delta of each pair.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    if any(b > a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be decreasing")
    base_ic = _resolve_ic(config)
    dt = config.dt
    if dt is None:
        dt = min(stable_dt(replace(config.params, delta=d), config.grid) for d in deltas)
    finals: dict[int, Field3] = {}
    failures: dict[int, str] = {}
    for i, d in enumerate(deltas):
        params_d = replace(config.params, delta=d)
        try:
            corr = _compat.correct_datum(base_ic, d, correction_order, params_d, config.grid)
            cfg = replace_config(config, params=params_d, dt=dt, ic=corr.corrected)
            result = run(cfg)
            finals[i] = result.state.v
        except VfaxError as exc:
            failures[i] = str(exc)
    diffs, pair_deltas = [], []
    for i in range(len(deltas) - 1):
        if i in finals and i + 1 in finals:
            diffs.append(_h1_diff(finals[i + 1], finals[i], config.grid,
                                  config.params.stencil_order))
            pair_deltas.append(deltas[i])
    rate = float("nan")
    positive = [(d, x) for d, x in zip(pair_deltas, diffs) if x > 0]
    if len(positive) >= 2:
        ld = np.log([d for d, _ in positive])
        lx = np.log([x for _, x in positive])
        rate = float(np.polyfit(ld, lx, 1)[0])
    return ContinuationResult(deltas=tuple(deltas), pairwise_h1_diffs=tuple(diffs),
                              observed_rate=rate, failures=failures)


def replace_config(config: RunConfig, **kw) -> RunConfig:
    """dataclasses.replace for RunConfig (kept explicit for call sites)."""
    from dataclasses import replace as _r
    return _r(config, **kw)
