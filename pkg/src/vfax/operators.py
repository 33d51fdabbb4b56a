"""Discrete spatial derivatives and the right-hand sides of the filament equation.

Stencils are computed exactly over the rationals, so polynomial exactness
holds to the last float digit and coefficient noise never limits the
high-order one-sided rows.  Every row is applied in the "subtract the
center value" form

    (d^k f)_i ~ h^{-k} * sum_j c_j (f_{i+o_j} - f_i),

which is algebraically identical (sum_j c_j = 0 for k >= 1) but returns an
exact zero on locally constant data; constant far fields and straight
filament segments therefore produce exactly zero derivatives, RHS values
and residuals.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Field3, GridSpec, ResolutionError, SimParams


def stencil_row(k: int, offsets) -> np.ndarray:
    """Finite-difference weights for the k-th derivative on unit-spaced nodes.

    Solves sum_j c_j * o_j^m = k! * delta_{mk} for m = 0 .. len(offsets)-1
    exactly over the rationals; the row differentiates polynomials of degree
    < len(offsets) exactly, i.e. a row on k+p points has formal order p.
    """
    offsets = [int(o) for o in offsets]
    n = len(offsets)
    if k >= n:
        raise ValueError(f"need more than {k} points for derivative order {k}")
    # Gaussian elimination with exact rational arithmetic.
    A = [[Fraction(o) ** m for o in offsets] + [Fraction(math.factorial(k)) if m == k else Fraction(0)]
         for m in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [a * inv for a in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return np.array([float(A[r][-1]) for r in range(n)])


@dataclass(frozen=True)
class DerivativeOp:
    """k-th derivative, formal order p, on an n-point grid.

    Interior rows are centered; the first/last ``halfwidth`` rows of a
    bounded grid use one-sided rows on ``k + p`` points with the same
    formal order.  Weights are for unit spacing; ``apply`` rescales by
    h^-k.
    """

    k: int
    p: int
    n: int
    periodic: bool
    halfwidth: int
    interior_offsets: np.ndarray
    interior_coeffs: np.ndarray
    left_rows: tuple          # (offsets relative to row node, coefficients)
    right_rows: tuple

    @staticmethod
    def build(k: int, p: int, n: int, periodic: bool = False) -> "DerivativeOp":
        return _build_operator(k, p, n, periodic)

    def apply(self, f: np.ndarray, h: float) -> np.ndarray:
        """Differentiate an (n,), (n, d) or complex array sampled with spacing h."""
        if f.shape[0] != self.n:
            raise ResolutionError(f"operator built for {self.n} nodes, got {f.shape[0]}")
        out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
        r = self.halfwidth
        if self.periodic:
            for o, c in zip(self.interior_offsets, self.interior_coeffs):
                if o == 0:
                    continue
                out += c * (np.roll(f, -int(o), axis=0) - f)
        else:
            core = slice(r, self.n - r)
            fc = f[core]
            for o, c in zip(self.interior_offsets, self.interior_coeffs):
                if o == 0:
                    continue
                out[core] += c * (f[r + int(o): self.n - r + int(o)] - fc)
            for i, (offs, coeffs) in enumerate(self.left_rows):
                acc = out[i]
                for o, c in zip(offs, coeffs):
                    if o == 0:
                        continue
                    acc = acc + c * (f[i + int(o)] - f[i])
                out[i] = acc
            for i, (offs, coeffs) in enumerate(self.right_rows):
                j = self.n - 1 - i
                acc = out[j]
                for o, c in zip(offs, coeffs):
                    if o == 0:
                        continue
                    acc = acc + c * (f[j + int(o)] - f[j])
                out[j] = acc
        out *= h ** (-self.k)
        return out


@functools.lru_cache(maxsize=None)
def _build_operator(k: int, p: int, n: int, periodic: bool) -> DerivativeOp:
    if k < 1 or k > 6:
        raise ValueError("derivative order k must be in 1..6")
    if p not in (2, 4, 6):
        raise ValueError("accuracy p must be one of 2, 4, 6")
    if k + p > n // 2:
        raise ResolutionError(f"stencil needs k+p = {k + p} points but grid has only {n}")
    r = (k + 1) // 2 + p // 2 - 1
    interior_offsets = np.arange(-r, r + 1)
    interior = stencil_row(k, interior_offsets)
    if k % 2 == 1:
        # centered odd-derivative rows are exactly antisymmetric
        interior = 0.5 * (interior - interior[::-1])
    else:
        interior = 0.5 * (interior + interior[::-1])
    m = k + p
    left, right = [], []
    if not periodic:
        for i in range(r):
            offs = np.arange(m) - i
            left.append((offs, stencil_row(k, offs)))
            offs_r = -np.arange(m)[::-1] + i
            right.append((offs_r, stencil_row(k, offs_r)))
    return DerivativeOp(k, p, n, periodic, r, interior_offsets, interior,
                        tuple(left), tuple(right))


def diff_values(values: np.ndarray, k: int, g: GridSpec, p: int) -> np.ndarray:
    """Array-level k-th derivative with boundary-aware rows."""
    op = _build_operator(k, p, g.npoints, g.periodic)
    return op.apply(values, g.h)


def diff(f: Field3, k: int, g: GridSpec, p: int = 4) -> Field3:
    """Discrete k-th s-derivative of a vector field; linear in f."""
    f.require_alignment(g)
    return Field3(diff_values(f.values, k, g, p))


def boundary_derivative(values: np.ndarray, k: int, g: GridSpec, p: int):
    """One-sided k-th derivative evaluated at node 0 only."""
    if g.periodic:
        raise ResolutionError("boundary derivative undefined on a periodic grid")
    m = k + p
    if m > g.npoints:
        raise ResolutionError(f"stencil needs {m} points but grid has only {g.npoints}")
    row = stencil_row(k, np.arange(m))
    seg = values[:m]
    out = np.tensordot(row[1:], seg[1:] - seg[0], axes=(0, 0)) if m > 1 else 0.0
    return out * g.h ** (-k)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def _rhs_transformed_arrays(v, d1, d2, d3, alpha: float, delta: float) -> np.ndarray:
    """v x v_ss + alpha{v_sss + 3 v_ss x (v x v_s) - (3/2)|v_s|^2 v_s} + delta(v_ss + |v_s|^2 v)."""
    vxvs = np.cross(v, d1)
    out = np.cross(v, d2)
    out += alpha * (d3 + 3.0 * np.cross(d2, vxvs) - 1.5 * _dot(d1, d1)[:, None] * d1)
    if delta != 0.0:
        out += delta * (d2 + _dot(d1, d1)[:, None] * v)
    return out


def _rhs_original_arrays(v, d1, d2, d3, alpha: float, delta: float) -> np.ndarray:
    """v x v_ss + alpha{v_sss + (3/2) v_ss x (v x v_s) + (3/2) v_s x (v x v_ss)} + delta(...)."""
    out = np.cross(v, d2)
    out += alpha * (d3 + 1.5 * np.cross(d2, np.cross(v, d1)) + 1.5 * np.cross(d1, np.cross(v, d2)))
    if delta != 0.0:
        out += delta * (d2 + _dot(d1, d1)[:, None] * v)
    return out


def rhs_v_transformed(v: Field3, params: SimParams, g: GridSpec) -> Field3:
    """Tangent-field velocity in the transformed (cubic) form of the equation.

    With delta = 0 this is the unregularized interior equation; the delta
    term is the parabolic regularization.
    """
    v.require_alignment(g)
    v.require_finite()
    p = params.stencil_order
    vals = v.values
    d1 = diff_values(vals, 1, g, p)
    d2 = diff_values(vals, 2, g, p)
    d3 = diff_values(vals, 3, g, p)
    return Field3(_rhs_transformed_arrays(vals, d1, d2, d3, params.alpha, params.delta))


def rhs_v_original(v: Field3, params: SimParams, g: GridSpec) -> Field3:
    """Tangent-field velocity in the original double-cross form.

    Pointwise equal to :func:`rhs_v_transformed` on unit-norm fields via
    v_s x (v x v_ss) = v_ss x (v x v_s) - |v_s|^2 v_s.
    """
    v.require_alignment(g)
    v.require_finite()
    p = params.stencil_order
    vals = v.values
    d1 = diff_values(vals, 1, g, p)
    d2 = diff_values(vals, 2, g, p)
    d3 = diff_values(vals, 3, g, p)
    return Field3(_rhs_original_arrays(vals, d1, d2, d3, params.alpha, params.delta))


def rhs_x_integrand(v: Field3, params: SimParams, g: GridSpec) -> Field3:
    """x_t in terms of the tangent field: v x v_s + alpha v_ss + (3/2) alpha v_s x (v x v_s)."""
    v.require_alignment(g)
    v.require_finite()
    p = params.stencil_order
    vals = v.values
    d1 = diff_values(vals, 1, g, p)
    d2 = diff_values(vals, 2, g, p)
    out = np.cross(vals, d1) + params.alpha * d2 \
        + 1.5 * params.alpha * np.cross(d1, np.cross(vals, d1))
    return Field3(out)


def linearized_rhs(v: Field3, w: Field3, w_prev_profile: Field3 | None,
                   params: SimParams, g: GridSpec) -> Field3:
    """Principal linear part with coefficients frozen at w:

        alpha v_sss + delta v_ss + w x v_ss + 3 alpha v_ss x (wp x wp_s)

    where wp defaults to w (a second freeze profile supports staggered
    iterations).  The lower-order remainder f is the caller's to add.
    """
    v.require_alignment(g)
    w.require_alignment(g)
    wp = w if w_prev_profile is None else w_prev_profile
    wp.require_alignment(g)
    p = params.stencil_order
    d2 = diff_values(v.values, 2, g, p)
    d3 = diff_values(v.values, 3, g, p)
    wps = diff_values(wp.values, 1, g, p)
    out = params.alpha * d3 + params.delta * d2 + np.cross(w.values, d2) \
        + 3.0 * params.alpha * np.cross(d2, np.cross(wp.values, wps))
    return Field3(out)


def _rhs_transformed_frechet_arrays(v, d1, d2, d3, w, w1, w2, w3,
                                    alpha: float, delta: float) -> np.ndarray:
    """Exact directional derivative of the transformed RHS at v in direction w."""
    vxvs = np.cross(v, d1)
    out = np.cross(w, d2) + np.cross(v, w2)
    out += alpha * (w3
                    + 3.0 * (np.cross(w2, vxvs)
                             + np.cross(d2, np.cross(w, d1))
                             + np.cross(d2, np.cross(v, w1)))
                    - 1.5 * (2.0 * _dot(d1, w1)[:, None] * d1 + _dot(d1, d1)[:, None] * w1))
    if delta != 0.0:
        out += delta * (w2 + 2.0 * _dot(d1, w1)[:, None] * v + _dot(d1, d1)[:, None] * w)
    return out


def rhs_v_transformed_frechet(v: Field3, w: Field3, params: SimParams, g: GridSpec) -> Field3:
    """d/deps rhs_v_transformed(v + eps w) at eps = 0, by the product rule."""
    v.require_alignment(g)
    w.require_alignment(g)
    p = params.stencil_order
    dv = [diff_values(v.values, k, g, p) for k in (1, 2, 3)]
    dw = [diff_values(w.values, k, g, p) for k in (1, 2, 3)]
    return Field3(_rhs_transformed_frechet_arrays(
        v.values, *dv, w.values, *dw, params.alpha, params.delta))


def viscous_term(v: Field3, g: GridSpec, p: int = 4) -> Field3:
    """The regularization direction v_ss + |v_s|^2 v (the per-delta term)."""
    v.require_alignment(g)
    d1 = diff_values(v.values, 1, g, p)
    d2 = diff_values(v.values, 2, g, p)
    return Field3(d2 + _dot(d1, d1)[:, None] * v.values)


def viscous_term_frechet(v: Field3, w: Field3, g: GridSpec, p: int = 4) -> Field3:
    """Directional derivative of :func:`viscous_term`: w_ss + 2(v_s . w_s) v + |v_s|^2 w."""
    v.require_alignment(g)
    w.require_alignment(g)
    d1 = diff_values(v.values, 1, g, p)
    w1 = diff_values(w.values, 1, g, p)
    w2 = diff_values(w.values, 2, g, p)
    return Field3(w2 + 2.0 * _dot(d1, w1)[:, None] * v.values
                  + _dot(d1, d1)[:, None] * w.values)
