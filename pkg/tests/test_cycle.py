import math

import numpy as np
import pytest

from kcycle import (BranchLostError, CyclePoints, IntegratorConfig,
                    SingularJacobianError, Weights, average_velocity,
                    cycle_jacobian, cycle_residual, find_stasis,
                    flow_endpoint, loglog_slope, parse_field, solve_cycle,
                    stasis_residual, sweep_delta, verify_cycle)

from oracles import (central_fd_jacobian, cofactor_det, linear_cycle_points,
                     pair_cycle_x1, scipy_cycle_points)

TIGHT = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)


@pytest.fixture
def pair():
    fields = [parse_field("1 - x1", 1), parse_field("-1 - x1", 1)]
    return fields, Weights((0.5, 0.5))


def _linear_family(rng, n, k):
    """Random affine fields with a regular equal weighting."""
    while True:
        mats = [rng.uniform(-1, 1, (n, n)) for _ in range(k)]
        vecs = [rng.uniform(-1, 1, n) for _ in range(k)]
        w = np.full(k, 1.0 / k)
        w[-1] = 1.0 - w[:-1].sum()
        wsum = sum(wj * a for wj, a in zip(w, mats))
        if np.linalg.svd(wsum, compute_uv=False)[-1] < 0.15:
            continue
        fields = []
        for a, b in zip(mats, vecs):
            comps = "; ".join(
                " + ".join([f"{float(a[i, l])!r}*x{l + 1}"
                            for l in range(n)] + [repr(float(b[i]))])
                for i in range(n))
            fields.append(parse_field(comps, n))
        x0 = np.linalg.solve(wsum, -sum(wj * b for wj, b in zip(w, vecs)))
        return fields, Weights(tuple(w)), mats, vecs, x0


# --- average velocity ------------------------------------------------------

def test_average_velocity_zero_at_stasis(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.0], 2)
    assert average_velocity(fields, w, pts, 0.0)[0] == 0.0


def test_average_velocity_symmetric_cancellation(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.0], 2)
    assert average_velocity(fields, w, pts, 0.2)[0] == pytest.approx(
        0.0, abs=1e-13)


def test_average_velocity_offset_pair_closed_form(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.1], 2)
    want = -(1.0 - math.exp(-0.1))
    assert average_velocity(fields, w, pts, 0.2)[0] == pytest.approx(
        want, abs=1e-12)


def test_average_velocity_delta0_equals_stasis_residual(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.37], 2)
    assert average_velocity(fields, w, pts, 0.0)[0] == \
        stasis_residual(fields, w, [0.37])[0]


# --- residual --------------------------------------------------------------

def test_residual_zero_at_stasis_delta0(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.0], 2)
    assert np.all(cycle_residual(fields, w, pts, 0.0) == 0.0)


def test_residual_zero_on_closed_form_cycle(pair):
    fields, w = pair
    delta = 0.2
    x1 = pair_cycle_x1(delta)
    pts = CyclePoints((np.array([x1]), np.array([-x1])))
    res = cycle_residual(fields, w, pts, delta)
    assert np.max(np.abs(res)) <= 1e-12


def test_residual_perturbation_response(pair):
    fields, w = pair
    delta = 0.2
    a = math.exp(-0.1)
    x1 = pair_cycle_x1(delta)
    pts = CyclePoints((np.array([x1]), np.array([-x1 + 1e-3])))
    res = cycle_residual(fields, w, pts, delta)
    # chain block picks up -eps; the averaged block (a-1)*eps/delta
    assert res[1] == pytest.approx(-1e-3, abs=1e-12)
    assert res[0] == pytest.approx((a - 1.0) * 1e-3 / delta, abs=1e-10)


def test_telescoping_identity(corpus):
    scn = corpus["trig_3d"]
    w = scn.weights
    rng = np.random.default_rng(31)
    delta = 0.3
    pts = CyclePoints(tuple(rng.uniform(-0.2, 0.2, 3) for _ in range(3)))
    avg = average_velocity(scn.fields, w, pts, delta)
    total = np.zeros(3)
    for f, x, m in zip(scn.fields, pts, w):
        total += flow_endpoint(f, x, delta * m) - x
    assert np.max(np.abs(delta * avg - total)) <= 1e-12


def test_telescoping_when_chain_closed(corpus):
    # propagate the chain exactly: the averaged block then equals the
    # final-leg closure divided by delta
    scn = corpus["trig_3d"]
    w = scn.weights
    delta = 0.25
    pts = [np.array([0.05, -0.04, 0.02])]
    for f, m in zip(scn.fields[:-1], list(w)[:-1]):
        pts.append(flow_endpoint(f, pts[-1], delta * m))
    pts = CyclePoints(tuple(pts))
    avg = average_velocity(scn.fields, w, pts, delta)
    closure = flow_endpoint(scn.fields[-1], pts[-1],
                            delta * w[-1]) - pts[0]
    assert np.max(np.abs(delta * avg - closure)) <= 1e-10


# --- jacobian --------------------------------------------------------------

def test_jacobian_delta0_pair_block_matrix(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.0], 2)
    want = np.array([[-0.5, -0.5], [1.0, -1.0]])
    assert np.array_equal(cycle_jacobian(fields, w, pts, 0.0), want)


def test_jacobian_delta0_determinant_identity():
    rng = np.random.default_rng(32)
    for _ in range(15):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(2, 5))
        fields, w, mats, _, _ = _linear_family(rng, n, k)
        pts = CyclePoints(tuple(rng.uniform(-1, 1, n) for _ in range(k)))
        block = cycle_jacobian(fields, w, pts, 0.0)
        wsum = sum(wj * a for wj, a in zip(w, mats))
        assert abs(np.linalg.det(block)) == pytest.approx(
            abs(cofactor_det(wsum)), rel=1e-9, abs=1e-13)


def test_jacobian_small_delta_matches_delta0(pair):
    fields, w = pair
    pts = CyclePoints.constant([0.0], 2)
    j0 = cycle_jacobian(fields, w, pts, 0.0)
    j1 = cycle_jacobian(fields, w, pts, 1e-6)
    assert np.max(np.abs(j1 - j0)) <= 1e-5


def test_jacobian_delta0_top_row_matches_fd_of_average_velocity(corpus):
    scn = corpus["trig_3d"]
    w = scn.weights
    n, k = 3, 3
    rng = np.random.default_rng(33)
    flat = rng.uniform(-0.2, 0.2, n * k)

    def avg_at(z):
        pts = CyclePoints.from_flat(z, n, k)
        return average_velocity(scn.fields, w, pts, 0.0)

    top = cycle_jacobian(scn.fields, w, CyclePoints.from_flat(flat, n, k),
                         0.0)[:n, :]
    fd = central_fd_jacobian(avg_at, flat, h=1e-6)
    assert np.max(np.abs(top - fd)) <= 1e-8


def test_jacobian_matches_fd_of_residual(corpus):
    for name in ("pair_1d", "triad_2d", "trig_3d"):
        scn = corpus[name]
        w = scn.weights
        n, k = scn.dimension, scn.k
        rng = np.random.default_rng(34)
        flat = np.tile(scn.guess_point() * 0.1, k) \
            + rng.uniform(-0.05, 0.05, n * k)
        delta = 0.2

        def res_at(z):
            return cycle_residual(scn.fields, w,
                                  CyclePoints.from_flat(z, n, k), delta,
                                  TIGHT)

        jac = cycle_jacobian(scn.fields, w, CyclePoints.from_flat(flat, n, k),
                             delta, TIGHT)
        fd = central_fd_jacobian(res_at, flat, h=1e-6)
        assert np.max(np.abs(jac - fd)) <= 1e-5, name


# --- solve_cycle -----------------------------------------------------------

def test_solve_cycle_pair_tanh_oracle(pair):
    fields, w = pair
    for delta in (0.8, 0.4, 0.2, 0.1, 0.05):
        cyc = solve_cycle(fields, w, CyclePoints.constant([0.0], 2), delta)
        want = pair_cycle_x1(delta)
        assert cyc.points[0][0] == pytest.approx(want, abs=1e-9)
        assert cyc.points[1][0] == pytest.approx(-want, abs=1e-9)
        assert cyc.leg_times == (delta * 0.5, delta * 0.5)
        assert cyc.closure_residual <= 1e-10


def test_solve_cycle_matches_linear_expm_oracle():
    rng = np.random.default_rng(35)
    for _ in range(6):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(2, 5))
        fields, w, mats, vecs, x0 = _linear_family(rng, n, k)
        delta = 0.1
        cyc = solve_cycle(fields, w, CyclePoints.constant(x0, k), delta)
        want = linear_cycle_points(mats, vecs, list(w), delta)
        got = np.array([p for p in cyc.points])
        assert np.max(np.abs(got - want)) <= 1e-8


def test_solve_cycle_constant_pair_singular():
    fields = [parse_field("1", 1), parse_field("-1", 1)]
    w = Weights((0.5, 0.5))
    with pytest.raises(SingularJacobianError) as err:
        solve_cycle(fields, w, CyclePoints.constant([0.0], 2), 0.3)
    assert err.value.sigma_min == pytest.approx(0.0, abs=1e-14)


def test_solve_cycle_rejects_nonpositive_delta(pair):
    fields, w = pair
    with pytest.raises(ValueError):
        solve_cycle(fields, w, CyclePoints.constant([0.0], 2), 0.0)
    with pytest.raises(ValueError):
        solve_cycle(fields, w, CyclePoints.constant([0.0], 2), -0.1)


def test_solve_cycle_trig_matches_scipy_shooting_oracle(corpus):
    scn = corpus["trig_3d"]
    w = scn.weights
    sp = find_stasis(scn.fields, w, scn.guess_point(), 1e-12)
    cyc = solve_cycle(scn.fields, w, CyclePoints.constant(sp.x0, 3), 0.2)
    # frozen from the scipy shooting oracle (DOP853 + hybr on the plain
    # closure system, rtol 1e-12); regenerate with oracles.scipy_cycle_points
    frozen = np.array([
        [-0.056302260036608959, -0.03790823575305087, 0.0029534425468031927],
        [0.043948866214691441, -0.036319345915090021, -0.047790093125667038],
        [0.041811000947059591, 0.062903476438286948, 0.0032664175657459468],
    ])
    got = np.array([p for p in cyc.points])
    assert np.max(np.abs(got - frozen)) <= 1e-9

    def v1(y):
        return np.array([2 * math.cos(y[2]) - y[0],
                         math.sin(y[0]) - y[1],
                         math.tanh(y[1]) - 1 - y[2]])

    def v2(y):
        return np.array([math.sin(y[1]) * y[2] - y[0],
                         2 - y[0] ** 2 - y[1],
                         math.cos(y[0]) - y[2]])

    def v3(y):
        return np.array([math.tanh(y[1]) - 1 - y[0],
                         math.sin(y[2]) - math.cos(y[0]) - y[1],
                         y[0] * y[2] - y[2]])

    # seed the oracle at the exact origin stasis point: hybr's relative
    # finite-difference steps degenerate on ~1e-13 coordinates
    live = scipy_cycle_points([v1, v2, v3], list(w), np.zeros(3), 0.2)
    assert np.max(np.abs(got - live)) <= 1e-9


def test_accepted_cycle_survives_tighter_reintegration(regular_corpus):
    for name, scn in regular_corpus.items():
        w = scn.weights
        sp = find_stasis(scn.fields, w, scn.guess_point(), scn.stasis_tol)
        cyc = solve_cycle(scn.fields, w, CyclePoints.constant(sp.x0, scn.k),
                          0.2, scn.cycle_tol, scn.integrator)
        check = verify_cycle(scn.fields, w, cyc, scn.integrator)
        assert abs(check.max_mismatch - cyc.closure_residual) \
            <= 10.0 * scn.cycle_tol, name


# --- sweep -----------------------------------------------------------------

def test_sweep_pair_distances_follow_tanh(pair):
    fields, w = pair
    result = sweep_delta(fields, w, [0.0], 0.8, 32)
    assert len(result.records) == 32
    assert not result.branch_lost
    assert result.largest_delta == 0.8
    deltas = [rec.delta for rec in result.records]
    assert all(d1 < d2 for d1, d2 in zip(deltas, deltas[1:]))
    for rec in result.records:
        assert rec.max_distance_to_x0 == pytest.approx(
            math.tanh(rec.delta / 4.0), abs=1e-9)
    smallest = result.records[0]
    assert smallest.max_distance_to_x0 / smallest.delta == pytest.approx(
        0.25, abs=1e-3)


def test_sweep_slope_near_one(pair):
    fields, w = pair
    result = sweep_delta(fields, w, [0.0], 0.8, 32)
    slope = loglog_slope(result)
    assert 0.9 <= slope <= 1.1


def test_sweep_huge_delta_max_flags_largest(pair):
    fields, w = pair
    result = sweep_delta(fields, w, [0.0], 1000.0, 32)
    assert result.largest_delta == 1000.0
    assert not result.branch_lost


def test_sweep_single_step(pair):
    fields, w = pair
    result = sweep_delta(fields, w, [0.0], 0.3, 1)
    assert len(result.records) == 1
    assert result.records[0].delta == 0.3
    assert loglog_slope(result) is None


def test_sweep_immediate_failure_raises():
    fields = [parse_field("1", 1), parse_field("-1", 1)]
    w = Weights((0.5, 0.5))
    with pytest.raises(BranchLostError):
        sweep_delta(fields, w, [0.0], 0.4, 8)


def test_sweep_mid_ladder_loss_flags_partial_result(pair):
    # starve the integrator: small deltas fit the step budget, large ones
    # exhaust it, so the branch is lost midway and the sweep reports what
    # it reached instead of raising
    fields, w = pair
    cfg = IntegratorConfig(max_steps=40)
    result = sweep_delta(fields, w, [0.0], 50.0, 16, cfg=cfg)
    assert result.branch_lost
    assert result.failure_reason is not None
    assert 0 < len(result.records) < 16
    assert result.largest_delta == result.records[-1].delta < 50.0


def test_sweep_monotone_tail_and_slope_on_regulars(regular_corpus):
    for name, scn in regular_corpus.items():
        w = scn.weights
        sp = find_stasis(scn.fields, w, scn.guess_point(), scn.stasis_tol)
        result = sweep_delta(scn.fields, w, sp.x0, scn.sweep.delta_max,
                             scn.sweep.steps, scn.cycle_tol, scn.integrator)
        assert not result.branch_lost, name
        tail = result.records[:8]
        dists = [rec.max_distance_to_x0 for rec in tail]
        assert all(a < b for a, b in zip(dists, dists[1:])), name
        slope = loglog_slope(result)
        assert 0.9 <= slope <= 1.5, (name, slope)
