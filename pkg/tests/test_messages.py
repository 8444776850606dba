"""Message-update rules against brute-force enumeration oracles."""
import numpy as np
import pytest

from lanefree.messages import (BroadcastPacket, CorruptMessageError,
                               DecisionDomain, FactorNode,
                               InconsistentBroadcastError, PartitionResult,
                               StaleBroadcastError, compute_q,
                               compute_r_conditional, compute_r_fixed,
                               compute_r_standard, normalize,
                               partition_variables, select_assignment)

DOMAIN3 = DecisionDomain(np.array([-3.5, 0.0, 3.5]))
DOMAIN15 = DecisionDomain.from_range(3.5, 15)


def brute_force_r(table, var_ids, target, q_by_var, clamp_idx=None):
    """Enumerate the joint domain of the non-target variables explicitly.

    ``clamp_idx`` maps variable id -> fixed domain index; clamped q values
    are added as constants, exactly like the message rules must do.
    """
    clamp_idx = clamp_idx or {}
    n = table.shape[0]
    t_ax = var_ids.index(target)
    free = [k for k in var_ids
            if k != target and k not in clamp_idx]
    out = np.full(n, -np.inf)
    for ti in range(n):
        best = -np.inf
        for combo in np.ndindex(*([n] * len(free))):
            idx = [0] * len(var_ids)
            idx[t_ax] = ti
            val = 0.0
            for k, ci in zip(free, combo):
                idx[var_ids.index(k)] = ci
                q = q_by_var.get(k)
                if q is not None:
                    val += q[ci]
            for k, ci in clamp_idx.items():
                idx[var_ids.index(k)] = ci
                q = q_by_var.get(k)
                if q is not None:
                    val += q[ci]
            val += table[tuple(idx)]
            best = max(best, val)
        out[ti] = best
    return out


def random_factor(rng, arity, n=15, ids=None):
    ids = tuple(ids or range(1, arity + 1))
    table = rng.uniform(-10, 10, size=(n,) * arity)
    return FactorNode(f"f{'-'.join(map(str, ids))}", ids, table=table)


class TestDecisionDomain:
    def test_default_grid(self):
        assert len(DOMAIN15) == 15
        assert DOMAIN15.values[0] == -3.5 and DOMAIN15.values[-1] == 3.5
        assert DOMAIN15.values[7] == 0.0
        assert np.all(np.diff(DOMAIN15.values) > 0)

    def test_snap(self):
        assert DOMAIN15.snap_index(0.0) == 7
        assert DOMAIN15.snap_index(0.26) == 8  # grid spacing 0.5
        assert DOMAIN15.snap_index(-3.5) == 0

    def test_snap_rejects_out_of_range(self):
        with pytest.raises(InconsistentBroadcastError):
            DOMAIN15.snap_index(3.6)
        with pytest.raises(InconsistentBroadcastError):
            DOMAIN15.snap_index(float("nan"))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            DecisionDomain(np.array([-1.0, 0.0, 2.0]))


class TestNormalize:
    def test_examples(self):
        np.testing.assert_array_equal(normalize([1, 2, 3]), [-1, 0, 1])
        np.testing.assert_array_equal(normalize([0, 0, 0]), [0, 0, 0])
        np.testing.assert_array_equal(normalize([5, 5, -10]), [5, 5, -10])

    def test_sums_to_zero(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            m = rng.uniform(-50, 50, size=15)
            out = normalize(m)
            assert abs(out.sum()) < 1e-9
            assert np.argmax(out) == np.argmax(m)

    def test_rejects_non_finite(self):
        with pytest.raises(CorruptMessageError):
            normalize([1.0, np.inf, 0.0])
        with pytest.raises(CorruptMessageError):
            normalize([np.nan, 0.0])


class TestPartition:
    def test_examples(self):
        f = FactorNode("p", (1, 2), table=np.zeros((3, 3)))
        p = partition_variables(f, 1, {1: 2.0, 2: 2.5}, 1.0)
        assert p.maximize_set == {2} and not p.clamp_set
        p = partition_variables(f, 1, {1: 0.0, 2: 5.0}, 1.0)
        assert p.clamp_set == {2} and not p.maximize_set

    def test_earlier_estimate_clamps_other_side_maximizes(self):
        # the agent updating sooner clamps its partner; seen from the
        # later-updating partner, the early agent is maximized
        f = FactorNode("p", (1, 2), table=np.zeros((3, 3)))
        est = {1: 0.5, 2: 4.0}
        assert partition_variables(f, 1, est, 1.0).clamp_set == {2}
        assert partition_variables(f, 2, est, 1.0).maximize_set == {1}

    def test_missing_estimate_raises(self):
        f = FactorNode("p", (1, 2), table=np.zeros((3, 3)))
        with pytest.raises(StaleBroadcastError):
            partition_variables(f, 1, {1: 0.0}, 1.0)

    def test_overlapping_sets_rejected(self):
        with pytest.raises(ValueError):
            PartitionResult(frozenset({1}), frozenset({1}))


class TestStandard:
    def test_single_factor_passthrough(self):
        f = FactorNode("s", (1,), table=np.array([0.0, -12.0, 0.0]))
        np.testing.assert_array_equal(
            compute_r_standard(f, 1, {}, DOMAIN3), [0, -12, 0])

    def test_pairwise_flat_factor_max_of_q(self):
        f = FactorNode("p", (1, 2), table=np.zeros((3, 3)))
        r = compute_r_standard(f, 1, {2: np.array([-1.0, 0.0, 1.0])}, DOMAIN3)
        np.testing.assert_array_equal(r, [1, 1, 1])

    def test_matches_bruteforce_pairwise(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            f = random_factor(rng, 2)
            q = {2: rng.uniform(-5, 5, 15)}
            got = compute_r_standard(f, 1, q, DOMAIN15)
            want = brute_force_r(f.table, [1, 2], 1, q)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_matches_bruteforce_arity3(self):
        rng = np.random.default_rng(43)
        for _ in range(5):
            f = random_factor(rng, 3)
            q = {2: rng.uniform(-5, 5, 15), 3: rng.uniform(-5, 5, 15)}
            target = int(rng.integers(1, 4))
            got = compute_r_standard(f, target, q, DOMAIN15)
            want = brute_force_r(f.table, [1, 2, 3], target, q)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_missing_q_is_zero_vector(self):
        rng = np.random.default_rng(44)
        f = random_factor(rng, 2)
        got = compute_r_standard(f, 1, {}, DOMAIN15)
        want = brute_force_r(f.table, [1, 2], 1, {})
        np.testing.assert_allclose(got, want, atol=1e-9)


class TestConditional:
    def test_empty_clamp_is_bit_identical_to_standard(self):
        rng = np.random.default_rng(45)
        for _ in range(10):
            f = random_factor(rng, 2)
            q = {2: rng.uniform(-5, 5, 15)}
            part = PartitionResult(frozenset({2}), frozenset())
            cond = compute_r_conditional(f, 1, q, part, {}, DOMAIN15)
            std = compute_r_standard(f, 1, q, DOMAIN15)
            assert np.array_equal(cond, std)

    def test_pairwise_clamped_example(self):
        # F(x_i, 0) column [3, 1, 2] plus the partner's q at its assignment
        table = np.array([[9, 3, 9], [9, 1, 9], [9, 2, 9]], dtype=float)
        f = FactorNode("p", (1, 2), table=table)
        part = PartitionResult(frozenset(), frozenset({2}))
        r = compute_r_conditional(f, 1, {2: np.array([0.0, 0.5, 0.0])},
                                  part, {2: 0.0}, DOMAIN3)
        np.testing.assert_array_equal(r, [3.5, 1.5, 2.5])

    def test_arity3_one_clamped_matches_bruteforce(self):
        rng = np.random.default_rng(46)
        for _ in range(8):
            f = random_factor(rng, 3)
            q = {2: rng.uniform(-5, 5, 15), 3: rng.uniform(-5, 5, 15)}
            part = PartitionResult(frozenset({2}), frozenset({3}))
            x_star = float(rng.choice(DOMAIN15.values))
            got = compute_r_conditional(f, 1, q, part, {3: x_star}, DOMAIN15)
            want = brute_force_r(f.table, [1, 2, 3], 1, q,
                                 clamp_idx={3: DOMAIN15.snap_index(x_star)})
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_assignment_outside_domain_raises(self):
        f = FactorNode("p", (1, 2), table=np.zeros((15, 15)))
        part = PartitionResult(frozenset(), frozenset({2}))
        with pytest.raises(InconsistentBroadcastError):
            compute_r_conditional(f, 1, {}, part, {2: 9.0}, DOMAIN15)

    def test_missing_clamped_assignment_raises(self):
        f = FactorNode("p", (1, 2), table=np.zeros((15, 15)))
        part = PartitionResult(frozenset(), frozenset({2}))
        with pytest.raises(StaleBroadcastError):
            compute_r_conditional(f, 1, {}, part, {}, DOMAIN15)

    def test_partition_must_cover_factor(self):
        f = FactorNode("p", (1, 2, 3), table=np.zeros((3, 3, 3)))
        part = PartitionResult(frozenset({2}), frozenset())
        with pytest.raises(ValueError):
            compute_r_conditional(f, 1, {}, part, {}, DOMAIN3)


class TestFixed:
    def test_matches_conditional_all_clamped(self):
        rng = np.random.default_rng(47)
        f = random_factor(rng, 2)
        q = {2: rng.uniform(-5, 5, 15)}
        part = PartitionResult(frozenset(), frozenset({2}))
        a = compute_r_fixed(f, 1, q, {2: 0.0}, DOMAIN15)
        b = compute_r_conditional(f, 1, q, part, {2: 0.0}, DOMAIN15)
        assert np.array_equal(a, b)

    def test_ignores_time_estimates_by_construction(self):
        # the fixed rule clamps even when estimates would allow maximizing
        rng = np.random.default_rng(48)
        f = random_factor(rng, 2)
        fixed = compute_r_fixed(f, 1, {}, {2: 0.0}, DOMAIN15)
        np.testing.assert_array_equal(fixed,
                                      f.table[:, DOMAIN15.snap_index(0.0)])

    def test_differs_from_standard_when_argmax_moves(self):
        # brute-force a table whose per-row max is never at the clamp column
        table = np.zeros((3, 3))
        table[:, 0] = 5.0
        f = FactorNode("p", (1, 2), table=table)
        fixed = compute_r_fixed(f, 1, {}, {2: 0.0}, DOMAIN3)
        std = compute_r_standard(f, 1, {}, DOMAIN3)
        assert np.all(std > fixed)


class TestComputeQ:
    def test_only_factor_gives_zeros(self):
        q = compute_q("j", {"j": np.array([1.0, 2.0, 3.0])})
        np.testing.assert_array_equal(q, [0, 0, 0])

    def test_two_factor_example(self):
        r = {"j": np.array([9.0, 9.0, 9.0]), "k": np.array([2.0, 4.0, 0.0])}
        np.testing.assert_array_equal(compute_q("j", r), [0, 2, -2])

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(49)
        for _ in range(50):
            r = {f"f{i}": rng.uniform(-10, 10, 15) for i in range(3)}
            got = compute_q("f0", r)
            naive = normalize(r["f1"] + r["f2"])
            np.testing.assert_allclose(got, naive, atol=1e-12)
            assert abs(got.sum()) < 1e-9


class TestSelect:
    def test_unique_max(self):
        x, idx = select_assignment({"j": np.array([0.0, 5.0, 0.0])}, DOMAIN3)
        assert (x, idx) == (0.0, 1)

    def test_tie_break_prefers_small_abs_then_low_index(self):
        r = {"a": np.array([1.0, 0.0, 0.0]), "b": np.array([0.0, 0.0, 1.0])}
        x, idx = select_assignment(r, DOMAIN3)
        assert (x, idx) == (-3.5, 0)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(50)
        for _ in range(50):
            r = {"a": rng.uniform(-5, 5, 15), "b": rng.uniform(-5, 5, 15)}
            _, idx = select_assignment(r, DOMAIN15)
            shifted = {"a": r["a"] + 300.0, "b": r["b"]}
            _, idx2 = select_assignment(shifted, DOMAIN15)
            assert idx == idx2


def dyadic(rng, size, scale=2 ** -8, span=64):
    """Random values on a fixed binary grid; sums and shifts stay exact."""
    return rng.integers(-span * 2 ** 8, span * 2 ** 8, size=size) * scale


class TestCancellation:
    """Constant terms on r messages never reach other agents or decisions."""

    def test_injected_constants_cancel_bitwise(self):
        rng = np.random.default_rng(51)
        for _ in range(100):
            n_factors = int(rng.integers(2, 5))
            r = {f"f{i}": dyadic(rng, 15) for i in range(n_factors)}
            consts = {fid: float(dyadic(rng, 1)[0]) for fid in r}
            shifted = {fid: r[fid] + consts[fid] for fid in r}
            for fid in r:
                assert np.array_equal(compute_q(fid, r),
                                      compute_q(fid, shifted))
            _, idx = select_assignment(r, DOMAIN15)
            _, idx_shifted = select_assignment(shifted, DOMAIN15)
            assert idx == idx_shifted

    def test_clamped_q_term_is_constant_shift(self):
        # the conditional rule's clamped q contribution is exactly the kind
        # of constant the normalization cancels
        rng = np.random.default_rng(52)
        f = FactorNode("p", (1, 2), table=dyadic(rng, (15, 15)))
        part = PartitionResult(frozenset(), frozenset({2}))
        q2 = dyadic(rng, 15)
        with_q = compute_r_conditional(f, 1, {2: q2}, part, {2: 0.0},
                                       DOMAIN15)
        without_q = compute_r_conditional(f, 1, {}, part, {2: 0.0}, DOMAIN15)
        other = dyadic(rng, 15)
        q_with = compute_q("s", {"s": other, "p": with_q})
        q_without = compute_q("s", {"s": other, "p": without_q})
        assert np.array_equal(q_with, q_without)


class TestBroadcastPacket:
    def test_validate_accepts_normalized(self):
        pkt = BroadcastPacket(1, 0, {"p": np.array([-1.0, 0.0, 1.0])}, 0.0,
                              0.5)
        pkt.validate()

    def test_validate_rejects_unnormalized_or_negative_estimate(self):
        with pytest.raises(ValueError):
            BroadcastPacket(1, 0, {"p": np.array([1.0, 1.0])}, 0.0,
                            0.5).validate()
        with pytest.raises(ValueError):
            BroadcastPacket(1, 0, {}, 0.0, -0.1).validate()


class TestFactorNode:
    def test_duplicate_variables_rejected(self):
        with pytest.raises(ValueError):
            FactorNode("p", (1, 1), table=np.zeros((3, 3)))

    def test_kind_from_arity(self):
        assert FactorNode("s", (1,), table=np.zeros(3)).kind == "single"
        assert FactorNode("p", (1, 2), table=np.zeros((3, 3))).kind == "pairwise"
        assert FactorNode("g", (1, 2, 3),
                          table=np.zeros((3, 3, 3))).kind == "generic"

    def test_evaluator_builds_table(self):
        f = FactorNode("p", (1, 2), evaluator=lambda a, b: a + 2 * b)
        tab = f.utility_table(DOMAIN3)
        assert tab[0, 2] == -3.5 + 7.0
        assert tab.shape == (3, 3)
