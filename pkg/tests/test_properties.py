"""Property-based checks of the structural invariants."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcbeam import (ChannelModelParams, PerAntenna, SumPower, build_surrogate,
                    eval_objective, generate_instance, lift_to_real, make_solver, sca_solve)
from mcbeam import _kernels as K
from mcbeam.admm import prox_group_l12, smoothed_pwl
from mcbeam.core import cardinality, complex_to_real, l12_norm, project_power_set
from mcbeam.oracle import SubsetValue, _reduce
from mcbeam.sca import descent_slack, random_feasible_start
from mcbeam.spmp import (project_group_ball, project_simplex_entropy, saddle_value,
                         stacked_saddle_value)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**31 - 1)
sizes = st.integers(1, 6)

FAST = settings(max_examples=60, deadline=None,
                suppress_health_check=[HealthCheck.too_slow])


def lifted(n):
    return arrays(float, 2 * n, elements=finite)


def _lift(N, M, seed, per=False):
    power = PerAntenna.uniform(0.7, N) if per else SumPower(3.0)
    inst = generate_instance(ChannelModelParams(N, M, paths_min=1, paths_max=4,
                                                rng_seed=seed), power)
    return inst, lift_to_real(inst)


@FAST
@given(sizes, st.integers(1, 5), seeds)
def test_lift_consistency(N, M, seed):
    inst, lift = _lift(N, M, seed)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    np.testing.assert_allclose(lift.quad(complex_to_real(w)), inst.snr(w), rtol=1e-10)
    # g_m(w) = w^T A-_m w is never positive
    x = complex_to_real(w)
    assert np.all(lift.abar_rows(x) @ x <= 1e-12 * (1 + lift.quad(x)))


@FAST
@given(st.data(), sizes)
def test_projection_idempotent(data, n):
    x = data.draw(lifted(n))
    for power in (SumPower(data.draw(st.floats(0.1, 10))),
                  PerAntenna(tuple(data.draw(st.lists(st.floats(0.1, 10), min_size=n,
                                                      max_size=n))))):
        p = project_power_set(x, power)
        np.testing.assert_array_equal(project_power_set(p, power), p)
        radii, total = power.kernel_args(n)
        if total > 0:
            assert np.linalg.norm(p) <= total * (1 + 1e-12)
        else:
            assert np.all(K.group_norms(p) <= radii * (1 + 1e-12))


@FAST
@given(st.data(), sizes)
def test_group_ball_projection(data, n):
    x = data.draw(lifted(n))
    p = project_group_ball(x)
    assert np.all(K.group_norms(p) <= 1 + 1e-12)
    np.testing.assert_array_equal(project_group_ball(p), p)
    inside = K.group_norms(x) <= 1
    np.testing.assert_array_equal(p[:n][inside], x[:n][inside])


@FAST
@given(st.data(), sizes)
def test_norm_duality(data, n):
    x = data.draw(lifted(n))
    gn = K.group_norms(x)
    inv = np.where(gn > 0, 1 / np.where(gn > 0, gn, 1), 0.0)
    s = x * np.concatenate([inv, inv])
    assert abs(s @ x - l12_norm(x)) <= 1e-9 * (1 + l12_norm(x))
    # no other unit-group vector does better
    r = project_group_ball(data.draw(lifted(n)))
    assert r @ x <= l12_norm(x) + 1e-9 * (1 + l12_norm(x))


@FAST
@given(st.data(), sizes, st.floats(0, 20), st.floats(0, 20))
def test_prox_support_shrinks_with_threshold(data, n, t1, t2):
    x = data.draw(lifted(n))
    lo, hi = sorted((t1, t2))
    nz = lambda y: int(np.count_nonzero(K.group_norms(y)))
    assert nz(prox_group_l12(x, hi)) <= nz(prox_group_l12(x, lo))
    out = prox_group_l12(x, hi)
    # groups inside the threshold are exact zeros
    assert np.all(K.group_norms(out)[K.group_norms(x) <= hi] == 0)


@FAST
@given(st.data(), sizes, st.floats(1e-6, 1))
def test_cardinality_scale_invariant(data, n, c):
    x = data.draw(lifted(n))
    assert cardinality(x) == cardinality(c * x)


@FAST
@given(sizes, st.integers(1, 6), seeds, st.floats(1e-3, 1.0))
def test_smoothing_sandwich(N, M, seed, mu):
    _, lift = _lift(N, M, seed)
    rng = np.random.default_rng(seed)
    sur = build_surrogate(lift, random_feasible_start(lift, seed))
    w = rng.standard_normal(lift.dim)
    f = sur.value(w)
    fm, _ = smoothed_pwl(sur, w, mu)
    assert f - mu * np.log(M) - 1e-12 <= fm <= f + 1e-12


@FAST
@given(st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=8))
def test_simplex_normalization(v):
    y = project_simplex_entropy(v)
    assert abs(y.sum() - 1) <= 1e-12 and np.all(y > 0)
    np.testing.assert_allclose(y / y[0], np.asarray(v) / v[0], rtol=1e-12)
    np.testing.assert_allclose(project_simplex_entropy(y), y, rtol=1e-15)


@FAST
@given(sizes, st.integers(1, 6), seeds)
def test_surrogate_majorizes_and_touches(N, M, seed):
    _, lift = _lift(N, M, seed, per=seed % 2 == 1)
    wt = random_feasible_start(lift, seed)
    sur = build_surrogate(lift, wt)
    f1 = eval_objective(lift, wt, 0.0)
    assert abs(sur.value(wt) - f1) <= 1e-10 * max(1, abs(f1))
    rng = np.random.default_rng(seed + 1)
    for _ in range(5):
        w = lift.project(rng.standard_normal(lift.dim))
        assert sur.value(w) >= eval_objective(lift, w, 0.0) - 1e-10 * max(1, abs(f1))


@FAST
@given(sizes, st.integers(1, 6), seeds, st.floats(0, 3))
def test_bilinear_value_two_ways(N, M, seed, lam):
    _, lift = _lift(N, M, seed)
    sur = build_surrogate(lift, random_feasible_start(lift, seed))
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(lift.dim)
    y = rng.random(M) + 1e-3
    y /= y.sum()
    s = project_group_ball(rng.standard_normal(lift.dim))
    a, b = saddle_value(sur, lam, w, y, s), stacked_saddle_value(sur, lam, w, y, s)
    assert abs(a - b) <= 1e-12 * max(1, abs(a))


@FAST
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3)), min_size=1, max_size=12,
                unique_by=lambda t: t[0]), st.randoms())
def test_oracle_reduction_order_invariant(items, rnd):
    vals = [SubsetValue((i,), float(v)) for i, v in items]
    best = _reduce(vals)
    shuffled = list(vals)
    rnd.shuffle(shuffled)
    assert _reduce(shuffled) == best
    top = max(v.min_snr for v in vals)
    assert best.subset == min(v.subset for v in vals if v.min_snr == top)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), st.integers(1, 5), seeds, st.sampled_from([0.0, 0.05, 0.3]),
       st.sampled_from(["admm", "spmp"]))
def test_sca_descent(N, M, seed, lam, name):
    _, lift = _lift(N, M, seed, per=seed % 2 == 0)
    rep = sca_solve(lift, lam, make_solver(name))
    tr = rep.objective_trace
    assert all(b <= a + descent_slack(a) for a, b in zip(tr, tr[1:]))
    assert lift.is_feasible(rep.final_beam.values)
