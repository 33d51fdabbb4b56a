import math

import numpy as np
import pytest

import vfax
from vfax import Field3, GridSpec, SimParams
from vfax import compatibility as C
from vfax.core import PreconditionError
from vfax.hasimoto import HelixFamily, helix_reference
from vfax.operators import diff_values
from vfax.cli_io import load_initial_condition

from conftest import gaussian_bump_unit, random_smooth_unit


E3_PARAMS = SimParams(alpha=-1.0, delta=0.0)


def e3_field(g):
    return Field3.constant([0.0, 0.0, 1.0], g)


def test_compute_Q_order_zero_identity():
    g = GridSpec(20.0, 128)
    v = gaussian_bump_unit(g)
    q0 = C.compute_Q(0, v, E3_PARAMS, g)
    assert np.array_equal(q0.values, v.values)


def test_compute_Q_constant_field_zero():
    g = GridSpec(20.0, 128)
    v = e3_field(g)
    for n in (1, 2):
        assert np.all(C.compute_Q(n, v, E3_PARAMS, g).values == 0.0)
        assert np.all(C.compute_P(n, v, SimParams(alpha=-1.0, delta=1e-2), g).values == 0.0)


def test_compute_P_reduces_to_Q_bitwise():
    g = GridSpec(20.0, 160)
    v = gaussian_bump_unit(g)
    params0 = SimParams(alpha=-0.7, delta=0.0)
    for n in (1, 2):
        assert np.array_equal(C.compute_P(n, v, params0, g).values,
                              C.compute_Q(n, v, params0, g).values)


def test_P1_minus_Q1_is_delta_r1():
    g = GridSpec(20.0, 160)
    v = gaussian_bump_unit(g)
    delta = 1e-2
    params = SimParams(alpha=-0.7, delta=delta)
    p1 = C.compute_P(1, v, params, g).values
    q1 = C.compute_Q(1, v, params, g).values
    r1 = C.r_sequence(v, 1, params, g).values
    scale = np.max(np.abs(p1)) + 1.0
    assert np.max(np.abs(p1 - q1 - delta * r1)) <= 1e-12 * scale


def test_compute_Q_matches_time_derivative_oracle():
    # evolve the periodic problem with tiny dt and difference in time
    from vfax.timestepper import RunConfig, _Stepper, stable_dt
    alpha = -1.0
    g = GridSpec(4 * np.pi, 256, periodic=True)
    params = SimParams(alpha=alpha, delta=0.0)
    fam = HelixFamily(a=0.6, b=0.8, k=1.0, alpha=alpha)
    v0 = helix_reference(fam, 0.0, g)
    st = _Stepper(RunConfig(params=params, grid=g, t_final=1.0, ic=v0))
    dt_fd = 2e-3

    def evolve(T):
        n = max(1, math.ceil(abs(T) / stable_dt(params, g)))
        u = np.array(v0.values)
        for _ in range(n):
            u = st.rk4(u, T / n)
        return u

    smp = {j: evolve(j * dt_fd) for j in (-2, -1, 1, 2)}
    smp[0] = np.array(v0.values)
    d1t = (smp[-2] - 8 * smp[-1] + 8 * smp[1] - smp[2]) / (12 * dt_fd)
    d2t = (-smp[-2] + 16 * smp[-1] - 30 * smp[0] + 16 * smp[1] - smp[2]) / (12 * dt_fd ** 2)
    q1 = C.compute_Q(1, v0, params, g).values
    q2 = C.compute_Q(2, v0, params, g).values
    assert np.max(np.abs(q1 - d1t)) <= 1e-8 * (1 + np.max(np.abs(q1)))
    assert np.max(np.abs(q2 - d2t)) <= 1e-5 * (1 + np.max(np.abs(q2)))


def test_highest_order_term_dominates():
    # the remainder Q_(n) - alpha^n d^{3n}v carries derivatives of order
    # at most 3n-1, so against oscillatory probes exp(iks) the remainder
    # to principal ratio falls like 1/k
    g = GridSpec(8 * np.pi, 1024, periodic=True)
    params = SimParams(alpha=-1.0, delta=0.0)
    eps = 1e-6
    ratios = []
    for k in (2.0, 4.0):
        s = g.nodes
        P = eps * np.sin(k * s)
        v = Field3(np.stack([P, np.zeros_like(s), np.sqrt(1 - P * P)], axis=1))
        rem = C.verify_highest_order_term(v, 2, params, g)
        principal = float(np.max(np.abs(diff_values(v.values, 6, g, 4))))
        ratios.append(rem / principal)
    assert ratios[1] <= 0.6 * ratios[0]


def test_frechet_identity_and_linear_maps(rng):
    g = GridSpec(10.0, 64)
    V = Field3(rng.standard_normal((64, 3)))
    W = Field3(rng.standard_normal((64, 3)))
    ident = C.frechet(lambda U: U, V, W, 1e-5)
    assert np.max(np.abs(ident.values - W.values)) <= 1e-10 * np.max(np.abs(W.values))
    dss = C.frechet(lambda U: vfax.diff(U, 2, g, 4), V, W, 1e-5)
    exact = vfax.diff(W, 2, g, 4).values
    assert np.max(np.abs(dss.values - exact)) <= 1e-8 * (1 + np.max(np.abs(exact)))


def test_frechet_cubic_map_product_rule(rng):
    g = GridSpec(10.0, 64)
    V = random_smooth_unit(g, rng)
    W = random_smooth_unit(g, rng)

    def cubic(U):
        d1 = diff_values(U.values, 1, g, 4)
        return Field3(np.einsum("ij,ij->i", d1, d1)[:, None] * d1)

    got = C.frechet(cubic, V, W, 1e-5).values
    v1 = diff_values(V.values, 1, g, 4)
    w1 = diff_values(W.values, 1, g, 4)
    exact = 2.0 * np.einsum("ij,ij->i", v1, w1)[:, None] * v1 \
        + np.einsum("ij,ij->i", v1, v1)[:, None] * w1
    assert np.max(np.abs(got - exact)) <= 1e-7


def test_frechet_zero_direction():
    g = GridSpec(10.0, 64)
    V = e3_field(g)
    out = C.frechet(lambda U: U, V, Field3.zeros(g), 1e-5)
    assert np.all(out.values == 0.0)


def test_map_by_name(rng):
    g = GridSpec(10.0, 64)
    params = SimParams(alpha=-1.0, delta=1e-3)
    V = random_smooth_unit(g, rng)
    for name, fn in [("g_1", C.g_sequence), ("f_1", C.f_sequence), ("r_1", C.r_sequence)]:
        direct = fn(V, 1, params, g).values
        named = C.map_by_name(name, params, g)(V).values
        assert np.array_equal(direct, named)
    with pytest.raises(ValueError):
        C.map_by_name("nope_1", params, g)


def test_g2_routes_agree(rng):
    # analytic iterated Frechet vs the binomial recursion vs FD nesting
    g = GridSpec(4 * np.pi, 256, periodic=True)
    params = SimParams(alpha=-1.0, delta=1e-2)
    fam = HelixFamily(a=0.6, b=0.8, k=1.0, alpha=-1.0)
    V = helix_reference(fam, 0.0, g)
    g2_analytic = C.g_sequence(V, 2, params, g).values
    p2 = C.compute_P(2, V, params, g).values
    assert np.max(np.abs(g2_analytic - p2)) <= 1e-10 * (1 + np.max(np.abs(p2)))
    g2_fd = C.frechet(lambda U: C.g_sequence(U, 1, params, g), V,
                      C.g_sequence(V, 1, params, g), 1e-5).values
    assert np.max(np.abs(g2_analytic - g2_fd)) <= 1e-6


def test_inner_identity():
    g = GridSpec(40.0, 512, periodic=True)
    params = SimParams(alpha=-1.0, delta=1e-3)
    assert C.verify_inner_identity(e3_field(g), 1, 1e-3, params, g) == 0.0
    fam = HelixFamily(a=0.35, b=math.sqrt(1 - 0.35 ** 2), k=2 * np.pi * 3 / 40, alpha=-1.0)
    v = helix_reference(fam, 0.0, g)
    assert C.verify_inner_identity(v, 1, 1e-3, params, g) <= 1e-6
    assert C.verify_inner_identity(v, 2, 1e-3, params, g) <= 1e-6


def test_inner_identity_requires_unit_norm():
    g = GridSpec(10.0, 64)
    params = SimParams(alpha=-1.0, delta=1e-3)
    with pytest.raises(PreconditionError):
        C.verify_inner_identity(Field3.constant([0, 0, 1.1], g), 1, 1e-3, params, g)


def test_remain_expansion():
    g = GridSpec(20.0, 256)
    params = SimParams(alpha=-1.0, delta=0.0)
    assert C.verify_remain_expansion(e3_field(g), 1, (1e-3, 1e-4), params, g) == 0.0
    v = gaussian_bump_unit(g)
    # m = 1: (g_1 - f_1)/delta = r_1 exactly, independent of delta
    assert C.verify_remain_expansion(v, 1, (1e-2, 1e-3, 1e-4), params, g) <= 1e-11
    # m = 2: delta-linear up to the delta-dependent tail of r_2
    assert C.verify_remain_expansion(v, 2, (1e-4, 5e-5), params, g) <= 1e-6


def test_remain_matches_r_sequence_oracle():
    g = GridSpec(20.0, 256)
    v = gaussian_bump_unit(g)
    delta = 1e-4
    params = SimParams(alpha=-1.0, delta=delta)
    gm = C.g_sequence(v, 2, params, g).values
    fm = C.f_sequence(v, 2, params, g).values
    r2 = C.r_sequence(v, 2, params, g).values
    assert np.max(np.abs(gm - fm - delta * r2)) <= 1e-10


def test_check_compatibility_e3_posalpha():
    g = GridSpec(40.0, 128)
    params = SimParams(alpha=1.0, delta=1e-3)
    rep = C.check_compatibility(e3_field(g), params, 2, 1e-12, g)
    assert rep.passed
    assert all(r == 0.0 for o in rep.orders for r in o.residuals.values())


def test_check_compatibility_order0_direct_read():
    # v0_s(0) = (c, 0, *) shows up as the order-0 residual |v0_s(0)|
    g = GridSpec(40.0, 512)
    c = 0.03
    s = g.nodes
    P = c * s * np.exp(-s)
    v = Field3(np.stack([P, np.zeros_like(s), np.sqrt(1 - P * P)], axis=1))
    rep = C.check_compatibility(v, SimParams(alpha=1.0), 0, 1e-9, g)
    r0 = rep.orders[0].residuals
    assert r0["v_at_0_minus_e3"] == 0.0
    assert abs(r0["dP_ds_at_0"] - c) <= 1e-8


def test_check_compatibility_interior_bump_all_orders():
    g = GridSpec(40.0, 512)
    for alpha in (-1.0, 1.0):
        params = SimParams(alpha=alpha, delta=1e-3)
        v = load_initial_condition("compatible-bump", g, params)
        rep = C.check_compatibility(v, params, 2, 1e-9, g)
        assert rep.passed, [(o.n, o.residuals) for o in rep.orders]


def test_correct_datum_identity_cases():
    g = GridSpec(40.0, 512)
    params = SimParams(alpha=-1.0, delta=0.0)
    v0 = load_initial_condition("boundary-cubic", g, params)
    res0 = C.correct_datum(v0, 0.0, 1, params, g)
    assert np.array_equal(res0.corrected.values, v0.values)
    assert np.all(res0.h_field.values == 0.0)
    res_m0 = C.correct_datum(v0, 1e-3, 0, SimParams(alpha=-1.0, delta=1e-3), g)
    assert np.array_equal(res_m0.corrected.values, v0.values)


def test_correct_datum_rejects_incompatible():
    g = GridSpec(40.0, 512)
    params = SimParams(alpha=-1.0, delta=1e-3)
    s = g.nodes
    P = 0.1 * np.exp(-s)          # v_s(0) != 0
    v = Field3(np.stack([P, np.zeros_like(s), np.sqrt(1 - P * P)], axis=1))
    with pytest.raises(PreconditionError):
        C.correct_datum(v, 1e-3, 1, params, g)


@pytest.mark.parametrize("alpha,family", [(-1.0, "boundary-cubic"), (1.0, "boundary-curved")])
def test_correct_datum_order1(alpha, family):
    g = GridSpec(40.0, 512)
    params0 = SimParams(alpha=alpha, delta=0.0)
    v0 = load_initial_condition(family, g, params0)
    diffs = {}
    for delta in (1e-2, 1e-3, 1e-4):
        params = SimParams(alpha=alpha, delta=delta)
        res = C.correct_datum(v0, delta, 1, params, g)
        assert res.residual_after[1] <= 1e-7
        assert vfax.sup_norm_unit_drift(res.corrected) <= 1e-12
        assert res.coefficient_scale <= 1.0        # coefficients are O(delta)
        diffs[delta] = float(np.max(np.abs(res.corrected.values - v0.values)))
    ds = sorted(diffs)
    slope = np.polyfit(np.log(ds), np.log([diffs[d] for d in ds]), 1)[0]
    assert abs(slope - 1.0) <= 0.2
