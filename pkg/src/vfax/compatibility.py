"""Initial-datum compatibility machinery.

Implements, numerically, the recursions that express time derivatives of
the solution at t = 0 in terms of spatial derivatives of the datum
(``compute_Q`` for the unregularized equation, ``compute_P`` with the
delta block), the compatibility checks both regimes impose at s = 0, and
the construction of a corrected datum

    v0_delta = (v0 + h) / |v0 + h|

whose boundary coefficients are chosen so the regularized conditions hold
while ||h|| = O(delta).

Boundary values are extracted on an auxiliary locally-refined grid
(barycentric interpolation windows), which keeps the high-order one-sided
differentiation of the recursion fields well-conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (CompatibilityOrder, CompatibilityReport, Field3, GridSpec,
                   PreconditionError, Regime, ResolutionError, SimParams, E3,
                   normalize_pointwise, sup_norm_unit_drift)
from .operators import (boundary_derivative, diff_values, rhs_v_transformed,
                        rhs_v_transformed_frechet, viscous_term,
                        viscous_term_frechet)


@dataclass(frozen=True)
class RecursionConfig:
    """Knobs for the recursion depth and the boundary extraction.

    Boundary residuals are extracted on a local window of ``aux_width``
    nodes with one-sided rows of order ``extraction_order``.  At double
    precision the default is the unrefined window: interpolating onto a
    refined grid (``aux_refine`` > 1) injects rounding noise that the
    nested h^-4 differentiation amplifies past any truncation gain, so
    refinement is kept only for very coarse grids.
    """

    n_max: int = 2
    fd_epsilon: float = 1e-5
    aux_refine: int = 1
    aux_width: int = 64
    extraction_order: int = 6
    cutoff_support: float = 1.0

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.fd_epsilon <= 0:
            raise ValueError("fd_epsilon must be positive")
        if self.aux_refine < 1:
            raise ValueError("aux_refine must be >= 1")
        if self.extraction_order not in (2, 4, 6):
            raise ValueError("extraction_order must be one of 2, 4, 6")


DEFAULT_CONFIG = RecursionConfig()


@dataclass(frozen=True)
class CorrectionResult:
    corrected: Field3
    h_field: Field3
    coefficients: tuple          # d^{3j+1}_s h(0), j = 0..m
    coefficients_3j: tuple       # d^{3j}_s h(0); zero unless alpha > 0
    residual_before: dict
    residual_after: dict
    coefficient_scale: float     # max_j |coefficient_j| / delta


# ---------------------------------------------------------------------------
# Q / P recursions


def _qp_levels(v0: np.ndarray, n: int, alpha: float, delta: float,
               g: GridSpec, p: int) -> list:
    """Fields Q_(0..n) (delta = 0) or P_(0..n) computed bottom-up.

    Level i is the Leibniz expansion of the i-th time derivative of the
    equation's right-hand side in terms of the lower levels; the highest
    derivative entering level i is alpha^i * d^{3i}_s v.
    """
    levels = [np.array(v0, dtype=float)]
    d1 = [diff_values(levels[0], 1, g, p)]
    d2 = [diff_values(levels[0], 2, g, p)]
    d3 = [diff_values(levels[0], 3, g, p)]
    for i in range(1, n + 1):
        m = i - 1
        acc = alpha * d3[m]
        for j in range(i):
            acc = acc + math.comb(m, j) * np.cross(levels[j], d2[m - j])
        for j in range(i):
            cj = math.comb(m, j)
            for k in range(i - j):
                c = cj * math.comb(m - j, k)
                acc = acc + 3.0 * alpha * c * np.cross(d2[j], np.cross(levels[k], d1[m - j - k]))
                dot = np.einsum("ij,ij->i", d1[j], d1[k])[:, None]
                acc = acc - 1.5 * alpha * c * dot * d1[m - j - k]
                if delta != 0.0:
                    acc = acc + delta * c * dot * levels[m - j - k]
        if delta != 0.0:
            acc = acc + delta * d2[m]
        levels.append(acc)
        if i < n:
            d1.append(diff_values(acc, 1, g, p))
            d2.append(diff_values(acc, 2, g, p))
            d3.append(diff_values(acc, 3, g, p))
    return levels


def compute_Q(n: int, v0: Field3, params: SimParams, g: GridSpec,
              config: RecursionConfig = DEFAULT_CONFIG) -> Field3:
    """Q_(n)(v0): the n-th time derivative of the unregularized flow at t = 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v0.require_alignment(g)
    levels = _qp_levels(v0.values, n, params.alpha, 0.0, g, params.stencil_order)
    return Field3(levels[n])


def compute_P(n: int, v0: Field3, params: SimParams, g: GridSpec,
              config: RecursionConfig = DEFAULT_CONFIG) -> Field3:
    """P_(n)(v0): as compute_Q but for the delta-regularized flow."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v0.require_alignment(g)
    levels = _qp_levels(v0.values, n, params.alpha, params.delta, g, params.stencil_order)
    return Field3(levels[n])


# ---------------------------------------------------------------------------
# Directional derivatives and the g / f / r sequences


def frechet(map_fn, V: Field3, W: Field3, eps: float = 1e-5) -> Field3:
    """Central-difference directional derivative (map(V+eW) - map(V-eW))/2e.

    The direction is normalized internally (the derivative is linear in W),
    so ``eps`` is always relative to the field scale.
    """
    wn = float(np.max(np.abs(W.values)))
    if wn == 0.0:
        return Field3(np.zeros_like(V.values))
    what = W.values / wn
    plus = map_fn(Field3(V.values + eps * what)).values
    minus = map_fn(Field3(V.values - eps * what)).values
    return Field3(wn * (plus - minus) / (2.0 * eps))


def g_sequence(V: Field3, m: int, params: SimParams, g: GridSpec,
               config: RecursionConfig = DEFAULT_CONFIG) -> Field3:
    """g_m(V): iterated directional derivative of the regularized RHS.

    g_0 = V, g_1 = RHS(V), g_{m+1} = D g_m(V)[g_1(V)].  Orders up to 2 use
    exact product-rule derivatives; beyond that, nested central differences.
    """
    if m == 0:
        return Field3(np.array(V.values))
    if m == 1:
        return rhs_v_transformed(V, params, g)
    if m == 2:
        g1 = rhs_v_transformed(V, params, g)
        return rhs_v_transformed_frechet(V, g1, params, g)
    prev = lambda U: g_sequence(U, m - 1, params, g, config)
    return frechet(prev, V, g_sequence(V, 1, params, g, config), config.fd_epsilon)


def f_sequence(V: Field3, m: int, params: SimParams, g: GridSpec,
               config: RecursionConfig = DEFAULT_CONFIG) -> Field3:
    """f_m(V): the delta = 0 counterpart of g_m."""
    return g_sequence(V, m, replace(params, delta=0.0), g, config)


def r_sequence(V: Field3, m: int, params: SimParams, g: GridSpec,
               config: RecursionConfig = DEFAULT_CONFIG) -> Field3:
    """r_m(V) with g_m = f_m + delta r_m:

    r_1 = V_ss + |V_s|^2 V,  r_m = D r_{m-1}(V)[g_1(V)] + D f_{m-1}(V)[r_1(V)].
    """
    if m < 1:
        raise ValueError("r_m defined for m >= 1")
    p = params.stencil_order
    if m == 1:
        return viscous_term(V, g, p)
    g1 = rhs_v_transformed(V, params, g)
    r1 = viscous_term(V, g, p)
    if m == 2:
        params0 = replace(params, delta=0.0)
        a = viscous_term_frechet(V, g1, g, p)
        b = rhs_v_transformed_frechet(V, r1, params0, g)
        return Field3(a.values + b.values)
    prev_r = lambda U: r_sequence(U, m - 1, params, g, config)
    prev_f = lambda U: f_sequence(U, m - 1, params, g, config)
    a = frechet(prev_r, V, g1, config.fd_epsilon)
    b = frechet(prev_f, V, r1, config.fd_epsilon)
    return Field3(a.values + b.values)


def map_by_name(name: str, params: SimParams, g: GridSpec,
                config: RecursionConfig = DEFAULT_CONFIG):
    """Resolve names like 'g_1', 'f_2', 'r_1' to field maps."""
    try:
        kind, ms = name.split("_")
        m = int(ms)
        fn = {"g": g_sequence, "f": f_sequence, "r": r_sequence}[kind]
    except (ValueError, KeyError):
        raise ValueError(f"unknown map name {name!r}; expected g_m, f_m or r_m")
    return lambda V: fn(V, m, params, g, config)


def verify_inner_identity(V: Field3, m: int, delta: float, params: SimParams,
                          g: GridSpec, config: RecursionConfig = DEFAULT_CONFIG) -> float:
    """Residual of sum_k C(m,k) g_k(V).g_{m-k}(V) = 0 on a unit-norm field."""
    drift = sup_norm_unit_drift(V)
    if drift > 1e-10:
        raise PreconditionError(f"inner identity needs |V| = 1; drift {drift:.3e}")
    pd = replace(params, delta=delta)
    gs = [g_sequence(V, k, pd, g, config).values for k in range(m + 1)]
    resid = np.zeros(V.n)
    for k in range(m + 1):
        resid += math.comb(m, k) * np.einsum("ij,ij->i", gs[k], gs[m - k])
    return float(np.max(np.abs(resid)))


def verify_remain_expansion(V: Field3, m: int, deltas, params: SimParams,
                            g: GridSpec, config: RecursionConfig = DEFAULT_CONFIG) -> float:
    """Max pairwise discrepancy of (g^delta_m(V) - f_m(V)) / delta across deltas.

    A small value certifies the linear-in-delta structure g_m = f_m + delta r_m.
    """
    fm = f_sequence(V, m, params, g, config).values
    quotients = []
    for d in deltas:
        if d <= 0:
            raise ValueError("deltas must be positive")
        gm = g_sequence(V, m, replace(params, delta=float(d)), g, config).values
        quotients.append((gm - fm) / d)
    worst = 0.0
    for i in range(len(quotients)):
        for j in range(i + 1, len(quotients)):
            worst = max(worst, float(np.max(np.abs(quotients[i] - quotients[j]))))
    return worst


# ---------------------------------------------------------------------------
# Boundary extraction on a locally refined grid


def _barycentric_matrix(n_coarse: int, refine: int, window: int = 12):
    """Interpolation from ``n_coarse`` uniform nodes onto a refine-x finer grid.

    Sliding-window barycentric Lagrange interpolation; uniform-node weights
    are the alternating binomials, which are exact integers.
    """
    window = min(window, n_coarse)
    n_fine = (n_coarse - 1) * refine + 1
    wj = np.array([(-1) ** j * math.comb(window - 1, j) for j in range(window)], dtype=float)
    idx = np.zeros((n_fine, window), dtype=int)
    wts = np.zeros((n_fine, window))
    for i in range(n_fine):
        x = i / refine
        if i % refine == 0:
            j0 = min(max(i // refine - window // 2, 0), n_coarse - window)
            idx[i] = j0 + np.arange(window)
            wts[i, int(round(x)) - j0] = 1.0
            continue
        j0 = min(max(int(x) - window // 2 + 1, 0), n_coarse - window)
        nodes = j0 + np.arange(window)
        d = wj / (x - nodes)
        wts[i] = d / d.sum()
        idx[i] = nodes
    return idx, wts


def _aux_grid(values: np.ndarray, g: GridSpec, config: RecursionConfig):
    """Restrict to the first ``aux_width`` nodes, optionally interpolating
    onto an ``aux_refine``-times finer local grid."""
    if g.periodic:
        raise PreconditionError("boundary machinery needs a bounded grid")
    w = min(config.aux_width, g.npoints)
    if config.aux_refine == 1:
        gaux = GridSpec(length=(w - 1) * g.h, npoints=w)
        return np.array(values[:w]), gaux
    idx, wts = _barycentric_matrix(w, config.aux_refine)
    fine = np.einsum("fj,fjc->fc", wts, values[idx])
    gaux = GridSpec(length=(w - 1) * g.h, npoints=fine.shape[0])
    return fine, gaux


def _order_residual_vectors(v_values: np.ndarray, g: GridSpec, params: SimParams,
                            delta: float, n_max: int,
                            config: RecursionConfig) -> list:
    """Per-order boundary residual vectors of the compatibility conditions.

    Returns a list indexed by order n of dicts mapping residual names to
    3-vectors; the regularized conditions are used whenever delta > 0
    (they coincide with the unregularized ones at delta = 0).
    """
    p = config.extraction_order
    fine, gaux = _aux_grid(v_values, g, config)
    levels = _qp_levels(fine, n_max, params.alpha, delta, gaux, p)
    out = []
    for n in range(n_max + 1):
        res = {}
        slope = boundary_derivative(levels[n], 1, gaux, p)
        if params.regime is Regime.POS_ALPHA:
            if n == 0:
                res["v_at_0_minus_e3"] = v_values[0] - E3
            else:
                res["P_at_0"] = levels[n][0].copy()
        res["dP_ds_at_0"] = slope
        out.append(res)
    return out


def check_compatibility(v0: Field3, params: SimParams, n_max: int, tol: float,
                        g: GridSpec | None = None,
                        config: RecursionConfig = DEFAULT_CONFIG) -> CompatibilityReport:
    """Evaluate the boundary compatibility conditions of the datum.

    alpha < 0: order-n residual |d_s P_(n)(v0)(0)|; alpha > 0 additionally
    pins the boundary value (|v0(0) - e3| and |v0_s(0)| at order 0,
    |P_(n)(v0)(0)| at n >= 1).  delta = 0 gives the unregularized
    conditions.
    """
    if g is None:
        raise ValueError("check_compatibility needs the grid the datum lives on")
    v0.require_alignment(g)
    v0.require_finite()
    window = min(config.aux_width, g.npoints) * config.aux_refine
    if 3 + config.extraction_order > window // 2:
        raise ResolutionError(
            f"order {n_max} needs nested third derivatives at order "
            f"{config.extraction_order}; the {window}-node boundary window is too small")
    vectors = _order_residual_vectors(v0.values, g, params, params.delta, n_max, config)
    orders = []
    for n, res in enumerate(vectors):
        norms = {k: float(np.linalg.norm(vec)) for k, vec in res.items()}
        orders.append(CompatibilityOrder(n=n, residuals=norms,
                                         passed=all(r <= tol for r in norms.values())))
    return CompatibilityReport(orders=tuple(orders), tolerance=tol)


def _smooth_cutoff(s: np.ndarray, support: float) -> np.ndarray:
    """C-infinity cutoff: 1 for s <= support, 0 for s >= 2*support."""
    u = s / support
    def f(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out
    a = f(2.0 - u)
    b = f(u - 1.0)
    return a / (a + b + np.finfo(float).tiny * (a + b == 0))


def _assemble_h(g: GridSpec, coeff_3j1, coeff_3j, support: float) -> np.ndarray:
    """h(s) = cutoff(s) * sum_j [ c3j s^{3j}/(3j)! + c3j1 s^{3j+1}/(3j+1)! ]."""
    s = g.nodes
    h = np.zeros((g.npoints, 3))
    for j, c in enumerate(coeff_3j1):
        if np.any(c != 0.0):
            k = 3 * j + 1
            h += (s ** k / math.factorial(k))[:, None] * c[None, :]
    for j, c in enumerate(coeff_3j):
        if np.any(c != 0.0):
            k = 3 * j
            h += (s ** k / math.factorial(k))[:, None] * c[None, :]
    return _smooth_cutoff(s, support)[:, None] * h


def correct_datum(v0: Field3, delta: float, m: int, params: SimParams,
                  g: GridSpec, config: RecursionConfig = DEFAULT_CONFIG,
                  precondition_tol: float = 1e-6, tol: float = 1e-10,
                  max_iter: int = 12) -> CorrectionResult:
    """Correct a datum so the delta-regularized conditions hold up to order m.

    The corrected datum is (v0 + h)/|v0 + h| with h a cutoff polynomial whose
    boundary coefficients are driven to cancel the order-by-order residuals;
    each coefficient comes out O(delta) and delta = 0 returns v0 unchanged.

    Requires v0 unit-norm to 1e-12 and compatible for the unregularized
    problem up to order m.
    """
    v0.require_alignment(g)
    drift = sup_norm_unit_drift(v0)
    if drift > 1e-12:
        raise PreconditionError(f"datum must be unit norm; drift {drift:.3e}")
    if delta < 0:
        raise ValueError("delta must be >= 0")

    base_report = check_compatibility(v0, replace(params, delta=0.0), m,
                                      precondition_tol, g, config)
    if not base_report.passed:
        bad = [(o.n, o.residuals) for o in base_report.orders if not o.passed]
        raise PreconditionError(
            f"datum fails the unregularized compatibility conditions: {bad}")

    pos = params.regime is Regime.POS_ALPHA
    c31 = [np.zeros(3) for _ in range(m + 1)]   # d^{3j+1}_s h(0)
    c30 = [np.zeros(3) for _ in range(m + 1)]   # d^{3j}_s h(0), used when alpha > 0

    residual_before: dict = {}
    residual_after: dict = {}

    if delta == 0.0 or m == 0:
        corrected = Field3(np.array(v0.values))
        vecs = _order_residual_vectors(corrected.values, g, params, delta, m, config)
        for n, res in enumerate(vecs):
            worst = max(float(np.linalg.norm(v)) for v in res.values())
            residual_before[n] = residual_after[n] = worst
        return CorrectionResult(corrected=corrected, h_field=Field3.zeros(g),
                                coefficients=tuple(np.zeros(3) for _ in range(m + 1)),
                                coefficients_3j=tuple(np.zeros(3) for _ in range(m + 1)),
                                residual_before=residual_before,
                                residual_after=residual_after,
                                coefficient_scale=0.0)

    # The correction bump must be resolved: keep the cutoff transition at
    # least ~12 nodes wide even on coarse grids.
    support = max(config.cutoff_support, 24.0 * g.h)
    normal = np.array(v0.values[0])

    def tangential(vec):
        return vec - np.dot(vec, normal) * normal

    def candidate():
        h = _assemble_h(g, c31, c30, support)
        return normalize_pointwise(v0.values + h), h

    # Coefficient updates use the tangential projection of the measured
    # residuals: the true compatibility defect is tangent to the datum at
    # s = 0 (the normal part of a measurement is extraction error, which
    # no tangent-preserving correction can or needs to cancel).
    for order in range(1, m + 1):
        scale = params.alpha ** order
        tang_worst = math.inf
        for it in range(max_iter):
            cand, _ = candidate()
            res = _order_residual_vectors(cand, g, params, delta, order, config)[order]
            slope = res["dP_ds_at_0"]
            value = res.get("P_at_0", np.zeros(3))
            full = max(float(np.linalg.norm(slope)), float(np.linalg.norm(value)))
            slope_t, value_t = tangential(slope), tangential(value)
            tang_worst = max(float(np.linalg.norm(slope_t)), float(np.linalg.norm(value_t)))
            if it == 0:
                residual_before[order] = full
            if tang_worst <= tol:
                break
            c31[order] = c31[order] - slope_t / scale
            if pos:
                c30[order] = c30[order] - value_t / scale
        if tang_worst > max(1e3 * tol, 0.1 * residual_before[order], 1e-7):
            raise ResolutionError(
                f"boundary coefficient iteration stalled at order {order}: "
                f"tangential residual {tang_worst:.3e} "
                f"(started at {residual_before[order]:.3e})")
        residual_after[order] = full

    cand, h = candidate()
    res0 = _order_residual_vectors(cand, g, params, delta, 0, config)[0]
    residual_after[0] = max(float(np.linalg.norm(v)) for v in res0.values())
    residual_before.setdefault(0, residual_after[0])
    corrected = Field3(cand)
    coeff_max = max([float(np.max(np.abs(c))) for c in c31 + c30] + [0.0])
    return CorrectionResult(corrected=corrected, h_field=Field3(h),
                            coefficients=tuple(c31),
                            coefficients_3j=tuple(c30),
                            residual_before=residual_before,
                            residual_after=residual_after,
                            coefficient_scale=coeff_max / delta)


def verify_highest_order_term(v0: Field3, n: int, params: SimParams, g: GridSpec,
                              config: RecursionConfig = DEFAULT_CONFIG) -> float:
    """Max norm of compute_Q(n) - alpha^n d^{3n}_s v0 (the sub-principal rest)."""
    if not 1 <= n <= 2:
        raise ValueError("direct leading-term extraction supported for n in {1, 2}")
    qn = compute_Q(n, v0, params, g, config).values
    lead = params.alpha ** n * diff_values(v0.values, 3 * n, g, params.stencil_order)
    return float(np.max(np.abs(qn - lead)))
