import numpy as np
import pytest

from flexconn.network import (
    NetworkConfig,
    PathwayConfig,
    backward,
    build_network,
    count_biases,
    count_parameters,
    forward_batch,
    forward_slice,
    forward_training,
    receptive_radius,
)

from oracles import central_difference, rel_err

DEFAULT_PATHWAY_COUNTS = [1152, 204800, 18432, 12800, 1152]


def tiny_config(depth=2, last=2, num_contrasts=2):
    return NetworkConfig.from_depth(depth, num_contrasts=num_contrasts, last_filters=last)


class TestTopology:
    def test_default_pathway_counts(self):
        net = build_network(NetworkConfig(), seed=0)
        assert [layer.n_weights for layer in net.pathways[0]] == DEFAULT_PATHWAY_COUNTS
        assert count_parameters(net.pathways[0]) == sum(DEFAULT_PATHWAY_COUNTS)

    def test_from_depth_5_is_default(self):
        assert PathwayConfig.from_depth(5) == PathwayConfig()

    def test_fusion_input_channels(self):
        net = build_network(NetworkConfig(), seed=0)
        assert net.fusion[0].c_in == 16
        assert net.fusion[0].n_weights == 3 * 3 * 16 * 128
        assert net.head.weights.shape == (1, 8, 3, 3)

    def test_total_counts(self):
        net = build_network(NetworkConfig(), seed=0)
        fusion = 3 * 3 * 16 * 128 + sum(DEFAULT_PATHWAY_COUNTS[1:])
        assert count_parameters(net) == 2 * sum(DEFAULT_PATHWAY_COUNTS) + fusion + 72
        assert count_biases(net) == 3 * (128 + 64 + 32 + 16 + 8) + 1

    def test_depth_two_reduced(self):
        cfg = NetworkConfig.from_depth(2)
        assert cfg.contrast_pathway.banks == ((16, 3), (8, 5))

    @pytest.mark.parametrize("depth", [1, 7])
    def test_depth_bounds(self, depth):
        with pytest.raises(ValueError, match="depth"):
            NetworkConfig.from_depth(depth)

    def test_receptive_radius(self):
        assert receptive_radius(NetworkConfig()) == 15
        assert receptive_radius(NetworkConfig.from_depth(2)) == 7

    def test_determinism(self):
        a = build_network(tiny_config(), seed=3)
        b = build_network(tiny_config(), seed=3)
        c = build_network(tiny_config(), seed=4)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)
        assert any(not np.array_equal(p, q) for p, q in zip(a.parameters(), c.parameters()))

    def test_biases_start_at_zero(self):
        net = build_network(tiny_config(), seed=0)
        assert all(not layer.bias.any() for layer in net.layers())


class TestForward:
    def test_output_range_and_shape(self):
        net = build_network(tiny_config(3, 4), seed=1)
        rng = np.random.default_rng(0)
        s = [rng.normal(size=(23, 31)) * 5 for _ in range(2)]
        out = forward_slice(net, s)
        assert out.shape == (23, 31)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_clamp_only_at_inference(self):
        net = build_network(tiny_config(), seed=0)
        params = net.parameters()
        params[-1] = params[-1] + 5  # head bias pushes output above 1
        net = net.with_parameters(params)
        x = [np.zeros((1, 1, 8, 8), np.float32)] * 2
        raw, _ = forward_training(net, x)
        assert raw.max() > 1
        assert forward_batch(net, x).max() == 1.0

    def test_contrast_count_checked(self):
        net = build_network(tiny_config(), seed=0)
        with pytest.raises(ValueError, match="contrasts"):
            forward_slice(net, [np.zeros((5, 5))])
        with pytest.raises(ValueError, match="differ"):
            forward_slice(net, [np.zeros((5, 5)), np.zeros((5, 6))])

    def test_translation_equivariance(self):
        net = build_network(tiny_config(2, 4), seed=2)
        rng = np.random.default_rng(1)
        big = [np.zeros((48, 48), np.float32) for _ in range(2)]
        for b in big:
            b[10:25, 12:26] = rng.random((15, 14))
        out = forward_slice(net, big)
        shifted = [np.roll(b, (6, 9), axis=(0, 1)) for b in big]
        out_s = forward_slice(net, shifted)
        np.testing.assert_allclose(out_s[16:31, 21:35], out[10:25, 12:26], atol=1e-6)

    def test_patch_embedding_center(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            net = build_network(tiny_config(3, 4), seed=seed)
            patch = [rng.random((35, 35)).astype(np.float32) for _ in range(2)]
            alone = forward_slice(net, patch)[17, 17]
            big = [np.zeros((90, 101), np.float32) for _ in range(2)]
            for b, p in zip(big, patch):
                b[30:65, 40:75] = p
            embedded = forward_slice(net, big)[47, 57]
            assert abs(alone - embedded) <= 1e-5

    def test_single_contrast_network(self):
        net = build_network(tiny_config(num_contrasts=1), seed=0)
        assert net.fusion[0].c_in == 2
        assert forward_slice(net, [np.ones((6, 6))]).shape == (6, 6)


class TestBackward:
    def test_whole_network_finite_differences(self):
        net = build_network(tiny_config(2, 2), seed=5, dtype=np.float64)
        rng = np.random.default_rng(0)
        x = [rng.random((2, 1, 7, 7)) for _ in range(2)]
        target = rng.random((2, 1, 7, 7))
        # lift biases so most units are active and the loss surface is smooth
        params = [p + 0.1 if p.ndim == 1 else p for p in net.parameters()]
        net = net.with_parameters(params)

        def loss():
            out, _ = forward_training(net, x)
            return float(np.mean((out - target) ** 2))

        out, cache = forward_training(net, x)
        grads = backward(net, cache, 2 * (out - target) / out.size)
        worst = 0.0
        for _ in range(20):
            i = int(rng.integers(len(params)))
            idx = tuple(int(rng.integers(s)) for s in params[i].shape)
            num = central_difference(loss, params[i], idx, step=1e-5)
            worst = max(worst, rel_err(grads[i][idx], num, floor=1e-7))
        assert worst < 1e-4

    def test_gradient_order_matches_parameters(self):
        net = build_network(tiny_config(3, 2), seed=1)
        x = [np.ones((1, 1, 5, 5), np.float32)] * 2
        out, cache = forward_training(net, x)
        grads = backward(net, cache, np.ones_like(out))
        assert [g.shape for g in grads] == [p.shape for p in net.parameters()]


class TestParameters:
    def test_with_parameters_roundtrip(self):
        net = build_network(tiny_config(), seed=0)
        clone = net.with_parameters(net.parameters())
        for p, q in zip(net.parameters(), clone.parameters()):
            assert p is q

    def test_wrong_length(self):
        net = build_network(tiny_config(), seed=0)
        with pytest.raises(ValueError, match="parameter arrays"):
            net.with_parameters(net.parameters()[:-1])

    def test_copy_is_deep(self):
        net = build_network(tiny_config(), seed=0)
        c = net.copy()
        c.head.weights[...] = 0
        assert net.head.weights.any()

    def test_astype(self):
        net = build_network(tiny_config(), seed=0).astype(np.float64)
        assert net.dtype == np.float64
