import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from pseudo3d.errors import BadHeadCountError, ShapeMismatchError, WrongStrategyError
from pseudo3d.fusion import (
    ALL_STRATEGIES,
    FusionParams,
    Strategy,
    fuse,
    fuse_add,
    fuse_concat,
    fuse_cross_attention,
    fuse_self_attention,
    fusion_bench,
    init_fusion_params,
    layer_norm,
    multi_head_attention,
    softmax,
)


def random_pair(h=3, w=4, c=8, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((h, w, c)), rng.standard_normal((h, w, c))


class TestSoftmax:
    def test_rows_sum_to_one(self):
        x = np.random.default_rng(1).standard_normal((5, 9))
        s = softmax(x)
        assert_allclose(s.sum(axis=-1), 1.0, rtol=1e-14)
        assert (s > 0).all()

    def test_shift_invariance(self):
        x = np.random.default_rng(2).standard_normal((4, 6))
        assert_allclose(softmax(x + 123.0), softmax(x), atol=1e-15)

    def test_survives_huge_logits(self):
        s = softmax(np.array([[1e300, 1e300, 0.0]]))
        assert np.isfinite(s).all()
        assert_allclose(s[0, :2], 0.5, rtol=1e-12)


class TestLayerNorm:
    def test_zero_mean_unit_spread(self):
        x = np.random.default_rng(3).standard_normal((7, 16)) * 4 + 2
        y = layer_norm(x)
        assert_allclose(y.mean(axis=-1), 0.0, atol=1e-12)
        # variance slightly below 1 because of the epsilon
        assert_allclose(y.var(axis=-1), 1.0, rtol=1e-4)

    def test_constant_row_maps_to_zero(self):
        y = layer_norm(np.full((2, 8), 3.7))
        assert_array_equal(y, 0.0)


class TestAdd:
    def test_is_elementwise_sum(self):
        a, b = random_pair()
        assert_array_equal(fuse_add(a, b), a + b)

    def test_commutative(self):
        a, b = random_pair(seed=4)
        assert_array_equal(fuse_add(a, b), fuse_add(b, a))

    def test_locality_exact(self):
        a, b = random_pair(seed=5)
        bumped = a.copy()
        bumped[2, 1, 3] += 1.0
        delta = fuse_add(bumped, b) - fuse_add(a, b)
        expected = np.zeros_like(delta)
        expected[2, 1, 3] = delta[2, 1, 3]
        assert_array_equal(delta, expected)
        assert delta[2, 1, 3] != 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            fuse_add(np.zeros((2, 2, 4)), np.zeros((2, 3, 4)))


class TestConcat:
    def test_matches_per_position_matmul(self):
        a, b = random_pair(c=6, seed=6)
        params = init_fusion_params(Strategy.CONCAT, 6, seed=7)
        out = fuse_concat(a, b, params)
        for v in range(a.shape[0]):
            for u in range(a.shape[1]):
                stacked = np.concatenate([a[v, u], b[v, u]])
                expected = params.proj_weight @ stacked + params.proj_bias
                assert_allclose(out[v, u], expected, atol=1e-13)

    def test_identity_pair_collapses_to_add(self):
        a, b = random_pair(c=5, seed=8)
        params = FusionParams(
            strategy=Strategy.CONCAT, channels=5,
            proj_weight=np.hstack([np.eye(5), np.eye(5)]),
            proj_bias=np.zeros(5),
        )
        assert_allclose(fuse_concat(a, b, params), fuse_add(a, b), atol=1e-12)

    def test_wrong_strategy_params_rejected(self):
        a, b = random_pair(c=4, seed=9)
        add_params = FusionParams(strategy=Strategy.ADD, channels=4)
        with pytest.raises(WrongStrategyError):
            fuse_concat(a, b, add_params)

    def test_channel_count_must_match_params(self):
        a, b = random_pair(c=4, seed=10)
        params = init_fusion_params(Strategy.CONCAT, 8, seed=11)
        with pytest.raises(ShapeMismatchError):
            fuse_concat(a, b, params)


def naive_attention(q_in, kv_in, params):
    """Per-position loops; reuses nothing from the library internals."""
    nq, c = q_in.shape
    heads, dk = params.heads, c // params.heads
    out = np.empty((nq, c))
    for i in range(nq):
        merged = []
        for h in range(heads):
            lo, hi = h * dk, (h + 1) * dk
            qh = (params.wq @ q_in[i])[lo:hi]
            logits = np.array([
                qh @ (params.wk @ kv_in[j])[lo:hi] / np.sqrt(dk)
                for j in range(kv_in.shape[0])
            ])
            weights = np.exp(logits - logits.max())
            weights = weights / weights.sum()
            vh = np.array([(params.wv @ kv_in[j])[lo:hi] for j in range(kv_in.shape[0])])
            merged.append(weights @ vh)
        out[i] = params.wo @ np.concatenate(merged)
    return out


class TestCrossAttention:
    def test_matches_naive_oracle(self):
        a, b = random_pair(h=2, w=3, c=6, seed=12)
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 6, seed=13, heads=3)
        n, c = 6, 6
        expected = a.reshape(n, c) + naive_attention(a.reshape(n, c), b.reshape(n, c), params)
        assert_allclose(fuse_cross_attention(a, b, params), expected.reshape(2, 3, 6),
                        atol=1e-12)

    def test_single_position_closed_form(self):
        """One key-value position: softmax collapses to 1, so the output is
        the 2-D feature plus wo @ (wv @ f3d) regardless of wq and wk."""
        rng = np.random.default_rng(14)
        a = rng.standard_normal((1, 1, 4))
        b = rng.standard_normal((1, 1, 4))
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 4, seed=15, heads=2)
        expected = a[0, 0] + params.wo @ (params.wv @ b[0, 0])
        assert_allclose(fuse_cross_attention(a, b, params)[0, 0], expected, atol=1e-12)

    def test_invariant_to_key_value_permutation(self):
        a, b = random_pair(h=2, w=4, c=4, seed=16)
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 4, seed=17, heads=2)
        rng = np.random.default_rng(18)
        perm = rng.permutation(8)
        b_perm = b.reshape(8, 4)[perm].reshape(2, 4, 4)
        assert_allclose(fuse_cross_attention(a, b_perm, params),
                        fuse_cross_attention(a, b, params), atol=1e-12)

    def test_is_global_not_local(self):
        # a single changed 3-D position moves every output position
        a, b = random_pair(h=2, w=2, c=4, seed=19)
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 4, seed=20, heads=2)
        bumped = b.copy()
        bumped[0, 0] += 2.0
        delta = fuse_cross_attention(a, bumped, params) - fuse_cross_attention(a, b, params)
        assert (np.abs(delta) > 0).all()

    def test_head_count_must_divide_channels(self):
        with pytest.raises(BadHeadCountError):
            init_fusion_params(Strategy.CROSS_ATTENTION, 6, seed=0, heads=4)


class TestSelfAttention:
    def test_matches_naive_oracle(self):
        a, b = random_pair(h=2, w=2, c=4, seed=21)
        params = init_fusion_params(Strategy.SELF_ATTENTION, 4, seed=22, heads=2)
        n, c = 4, 4
        x = np.concatenate([a.reshape(n, c), b.reshape(n, c)], axis=0)
        normed = layer_norm(x)
        x1 = x + naive_attention(normed, normed, params)
        hidden = np.maximum(layer_norm(x1) @ params.w_ff1.T + params.b_ff1, 0.0)
        expected = (x1 + hidden @ params.w_ff2.T + params.b_ff2)[:n].reshape(2, 2, 4)
        assert_allclose(fuse_self_attention(a, b, params), expected, atol=1e-12)

    def test_invariant_to_3d_position_permutation(self):
        a, b = random_pair(h=2, w=3, c=4, seed=23)
        params = init_fusion_params(Strategy.SELF_ATTENTION, 4, seed=24, heads=2)
        perm = np.random.default_rng(25).permutation(6)
        b_perm = b.reshape(6, 4)[perm].reshape(2, 3, 4)
        assert_allclose(fuse_self_attention(a, b_perm, params),
                        fuse_self_attention(a, b, params), atol=1e-12)

    def test_requires_own_params(self):
        a, b = random_pair(c=4, seed=26)
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 4, seed=27, heads=2)
        with pytest.raises(WrongStrategyError):
            fuse_self_attention(a, b, params)

    def test_missing_ffn_weights_rejected(self):
        with pytest.raises(ValueError, match="w_ff1"):
            FusionParams(strategy=Strategy.SELF_ATTENTION, channels=4, heads=2,
                         wq=np.eye(4), wk=np.eye(4), wv=np.eye(4), wo=np.eye(4))


class TestMultiHead:
    def test_single_head_equals_direct_formula(self):
        rng = np.random.default_rng(28)
        q = rng.standard_normal((5, 4))
        kv = rng.standard_normal((7, 4))
        params = init_fusion_params(Strategy.CROSS_ATTENTION, 4, seed=29, heads=1)
        scores = (q @ params.wq.T) @ (kv @ params.wk.T).T / 2.0  # sqrt(4)
        expected = softmax(scores) @ (kv @ params.wv.T) @ params.wo.T
        assert_allclose(multi_head_attention(q, kv, params), expected, atol=1e-12)

    def test_heads_partition_channels(self):
        """With wo = I, head h's output occupies its own channel slice."""
        rng = np.random.default_rng(30)
        q = rng.standard_normal((3, 6))
        kv = rng.standard_normal((4, 6))
        base = init_fusion_params(Strategy.CROSS_ATTENTION, 6, seed=31, heads=2)
        params = FusionParams(strategy=Strategy.CROSS_ATTENTION, channels=6, heads=2,
                              wq=base.wq, wk=base.wk, wv=base.wv, wo=np.eye(6))
        out = multi_head_attention(q, kv, params)
        assert_allclose(out, naive_attention(q, kv, params), atol=1e-12)


class TestDispatchAndShapes:
    def test_every_strategy_preserves_shape(self):
        a, b = random_pair(h=3, w=5, c=4, seed=32)
        for strategy in ALL_STRATEGIES:
            params = init_fusion_params(strategy, 4, seed=33, heads=2)
            assert fuse(a, b, params).shape == (3, 5, 4)

    def test_init_deterministic(self):
        p1 = init_fusion_params(Strategy.SELF_ATTENTION, 8, seed=1234, heads=4)
        p2 = init_fusion_params(Strategy.SELF_ATTENTION, 8, seed=1234, heads=4)
        assert_array_equal(p1.wq, p2.wq)
        assert_array_equal(p1.w_ff1, p2.w_ff1)
        assert_array_equal(p1.b_ff1, 0.0)


class TestBench:
    def test_fixed_strategy_order(self):
        results = fusion_bench(4, 4, 4, reps=0, seed=1, heads=2)
        assert [r.strategy for r in results] == list(ALL_STRATEGIES)

    def test_checksums_reproducible(self):
        a = fusion_bench(4, 5, 4, reps=0, seed=42, heads=2)
        b = fusion_bench(4, 5, 4, reps=1, seed=42, heads=2)
        assert [r.checksum for r in a] == [r.checksum for r in b]

    def test_checksums_depend_on_seed(self):
        a = fusion_bench(4, 4, 4, reps=0, seed=1, heads=2)
        b = fusion_bench(4, 4, 4, reps=0, seed=2, heads=2)
        assert a[0].checksum != b[0].checksum

    def test_zero_reps_keeps_timings_empty(self):
        results = fusion_bench(4, 4, 4, reps=0, seed=1, heads=2)
        assert all(r.timings_s == () for r in results)

    def test_reps_counted(self):
        results = fusion_bench(4, 4, 4, strategies=(Strategy.ADD,), reps=5, seed=1)
        assert len(results) == 1
        assert len(results[0].timings_s) == 5
