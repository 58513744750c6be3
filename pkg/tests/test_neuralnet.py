import math

import numpy as np
import pytest
from scipy.special import expit

from src.reconstruction import neuralnet
from src.reconstruction.config import MAX_HIDDEN, WIDTHS, TrainConfig
from src.reconstruction.errors import ConfigurationError, NumericOverflowError, TrainingDivergedError
from src.reconstruction.geometry import VoxelGrid, support_set, voxel_centers
from src.reconstruction.neuralnet import (
    ELU,
    RELU,
    SWISH,
    Activation,
    ActivationKind,
    ArchSpec,
    Layer,
    MlpNetwork,
    activate,
    activate_derivative,
    forward,
    full_grid_accuracy,
    loss,
    loss_and_gradients,
    parameter_count,
    reconstruct,
    train,
)
from src.reconstruction.sampling import build_training_set


class TestParameterCount:
    @pytest.mark.parametrize("depth,width,expected", [
        (8, 32, 7553),
        (6, 64, 21121),
        (8, 42, 12853),
        (1, 8, 41),
    ])
    def test_goldens(self, depth, width, expected):
        assert parameter_count(ArchSpec.uniform(depth, width)) == expected

    def test_matches_allocated_scalars(self):
        for depth in range(1, MAX_HIDDEN + 1):
            for width in WIDTHS:
                arch = ArchSpec.uniform(depth, width)
                assert parameter_count(arch) == MlpNetwork.initialize(arch).parameter_count

    def test_mixed_widths(self):
        arch = ArchSpec.from_string("32:relu,16:elu")
        assert parameter_count(arch) == (3 * 32 + 32) + (32 * 16 + 16) + 17


class TestActivations:
    def test_values(self):
        assert activate(RELU, -1.0) == 0.0
        assert activate(ELU, 0.0) == 0.0
        assert activate(SWISH, 0.0) == 0.0
        assert activate(SWISH, 1.0) == pytest.approx(0.7310586, abs=1e-7)
        assert activate(ELU, -1.0) == pytest.approx(math.exp(-1) - 1, abs=1e-12)

    @pytest.mark.parametrize("kind", list(ActivationKind))
    def test_derivative_matches_finite_difference(self, kind):
        a = Activation(kind)
        x = np.linspace(-3, 3, 41) + 0.013
        numeric = (activate(a, x + 1e-6) - activate(a, x - 1e-6)) / 2e-6
        np.testing.assert_allclose(activate_derivative(a, x), numeric, atol=1e-6)

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            ActivationKind.from_name("gelu")


class TestArchSpec:
    def test_parse(self):
        arch = ArchSpec.from_string("32:relu, 16:elu")
        assert arch.widths == (32, 16)
        assert str(arch) == "32:relu,16:elu"
        assert ArchSpec.from_string(str(arch)) == arch

    def test_repeat(self):
        arch = ArchSpec.from_string("6x32:relu")
        assert arch == ArchSpec.uniform(6, 32)
        assert ArchSpec.from_string("8x32").depth == 8

    def test_bad_layer(self):
        with pytest.raises(ConfigurationError):
            ArchSpec.from_string("abc")

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            ArchSpec.from_string("")

    def test_caps(self):
        ArchSpec.uniform(6, 64).validate()
        with pytest.raises(ConfigurationError):
            ArchSpec.uniform(8, 32).validate()
        with pytest.raises(ConfigurationError):
            ArchSpec.uniform(1, 42).validate()


def _reference_forward(net, x):
    h = x
    for layer, w, b in zip(net.arch.hidden, net.weights, net.biases):
        z = np.array([[sum(w[j, k] * row[k] for k in range(len(row))) + b[j] for j in range(len(b))] for row in h])
        h = layer.activation(z)
    logits = np.array([sum(net.head_weight[0, k] * row[k] for k in range(len(row))) + net.head_bias[0] for row in h])
    return 1.0 / (1.0 + np.exp(-logits))


class TestForward:
    def test_zero_network(self):
        net = MlpNetwork.zeros(ArchSpec.uniform(2, 8))
        np.testing.assert_array_equal(forward(net, np.random.default_rng(0).uniform(-1, 1, (5, 3))), 0.5)

    def test_batching(self):
        net = MlpNetwork.initialize(ArchSpec.from_string("16:swish,8:elu"), seed=2)
        x = np.random.default_rng(1).uniform(-1, 1, (1000, 3))
        single = forward(net, x[417:418])
        assert single[0] == pytest.approx(forward(net, x)[417], abs=1e-6)

    def test_batch_order_does_not_matter(self):
        rng = np.random.default_rng(4)
        net = MlpNetwork.initialize(ArchSpec.from_string("24:swish,12:elu,8:relu"), seed=3)
        x = rng.uniform(-1, 1, (257, 3))
        perm = rng.permutation(len(x))
        np.testing.assert_allclose(forward(net, x[perm]), forward(net, x)[perm], rtol=0, atol=1e-12)

    def test_matches_reference(self):
        rng = np.random.default_rng(9)
        net = MlpNetwork.initialize(ArchSpec.from_string("8:relu,8:elu,8:swish"), seed=5)
        for p in net.parameters():
            p += rng.normal(0, 0.1, p.shape)
        x = rng.uniform(-1, 1, (20, 3))
        np.testing.assert_allclose(forward(net, x), _reference_forward(net, x), atol=1e-6)

    def test_overflow(self):
        net = MlpNetwork.zeros(ArchSpec.uniform(1, 8))
        for p in net.parameters():
            p[...] = 1e300
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericOverflowError, match="numeric overflow"):
                forward(net, np.ones((1, 3)))


class TestLoss:
    def test_perfect(self):
        assert loss([1.0, 0.0], [1, 0]) <= 1e-6

    def test_half(self):
        assert loss([0.5] * 4, [0, 1, 1, 0]) == pytest.approx(math.log(2), abs=1e-7)

    def test_confident_miss(self):
        assert loss([0.9], [0]) == pytest.approx(-math.log(0.1), abs=1e-7)

    def test_clamped(self):
        assert loss([0.0], [1]) == pytest.approx(-math.log(1e-7), rel=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            loss([0.5, 0.5], [1])


def _numeric_gradients(net, x, y, h=1e-4):
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        flat, out = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = loss(forward(net, x), y)
            flat[i] = saved - h
            down = loss(forward(net, x), y)
            flat[i] = saved
            out[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def test_gradient_check():
    rng = np.random.default_rng(2024)
    kinds = list(ActivationKind)
    errors = []
    for trial in range(20):
        depth = int(rng.integers(1, 4))
        layers = [Layer(8, Activation(kinds[(trial + i) % len(kinds)])) for i in range(depth)]
        net = MlpNetwork.initialize(ArchSpec(tuple(layers)), seed=trial)
        for b in net.biases:
            b += rng.normal(0, 0.1, b.shape)
        x = rng.uniform(-1, 1, (16, 3))
        y = rng.integers(0, 2, 16)
        _, analytic = loss_and_gradients(net, x, y)
        numeric = _numeric_gradients(net, x, y)
        for a, n in zip(analytic, numeric):
            errors.append(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-6))
    errors = np.concatenate([e.ravel() for e in errors])
    assert np.mean(errors < 1e-4) > 0.99


class TestTrain:
    def test_zero_epochs(self, cube_data):
        net = MlpNetwork.initialize(ArchSpec.uniform(1, 8), seed=1)
        before = [p.copy() for p in net.parameters()]
        result = train(net, cube_data, TrainConfig(epochs=0))
        assert result.network is net
        assert result.losses == []
        for a, b in zip(before, net.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_half_space(self):
        occ = np.zeros((16, 16, 16), dtype=bool)
        occ[:8] = True
        grid = VoxelGrid(occ)
        data = build_training_set(grid, support_set(grid), seed=0)
        net = MlpNetwork.initialize(ArchSpec.from_string("8:elu"), seed=0)
        train(net, data, TrainConfig(epochs=30, batch_size=64, learning_rate=0.05))
        assert full_grid_accuracy(net, grid) >= 0.999

    def test_loss_decreases(self, sphere_grid, sphere_data):
        net = MlpNetwork.initialize(ArchSpec.uniform(2, 16), seed=0)
        result = train(net, sphere_data, TrainConfig(epochs=15, batch_size=128, learning_rate=0.01))
        assert len(result.losses) == 15
        assert result.losses[-1] < result.losses[0]

    def test_divergence_reports_checkpoint(self, cube_data, monkeypatch):
        net = MlpNetwork.initialize(ArchSpec.uniform(1, 8), seed=1)
        start = [p.copy() for p in net.parameters()]

        def nan_loss(network, positions, labels):
            return float("nan"), [np.zeros_like(p) for p in network.parameters()]

        monkeypatch.setattr(neuralnet, "loss_and_gradients", nan_loss)
        with pytest.raises(TrainingDivergedError) as info:
            train(net, cube_data, TrainConfig(epochs=3))
        assert info.value.epoch == 1
        for a, b in zip(start, info.value.checkpoint.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_empty_data(self):
        class Empty:
            positions = np.zeros((0, 3))
            labels = np.zeros(0)

        with pytest.raises(ValueError):
            train(MlpNetwork.initialize(ArchSpec.uniform(1, 8)), Empty(), TrainConfig(epochs=1))


class TestAccuracyAndReconstruct:
    def _constant(self, bias):
        net = MlpNetwork.zeros(ArchSpec.uniform(1, 8))
        net.head_bias[0] = bias
        return net

    def test_constant_negative_predictor(self):
        occ = np.zeros((10, 10, 10), dtype=bool)
        occ[:1] = True
        assert full_grid_accuracy(self._constant(-1.0), VoxelGrid(occ)) == pytest.approx(0.9)

    def test_matches_per_voxel_loop(self, sphere_grid):
        net = MlpNetwork.initialize(ArchSpec.uniform(2, 8), seed=3)
        centers = voxel_centers(16)
        hits = sum(
            int((forward(net, centers[i:i + 1])[0] >= 0.5) == sphere_grid.bits[i]) for i in range(16 ** 3)
        )
        assert full_grid_accuracy(net, sphere_grid) == pytest.approx(hits / 16 ** 3, abs=1e-12)

    def test_subsample(self, sphere_grid):
        net = MlpNetwork.initialize(ArchSpec.uniform(2, 8), seed=3)
        acc = full_grid_accuracy(net, sphere_grid, subsample=500, seed=1)
        assert 0.0 <= acc <= 1.0
        assert acc == full_grid_accuracy(net, sphere_grid, subsample=500, seed=1)

    def test_positive_logit_fills_grid(self):
        grid = reconstruct(self._constant(2.0), 8)
        assert grid.occupied_count() == 8 ** 3

    def test_reconstruct_resolution(self):
        with pytest.raises(ConfigurationError):
            reconstruct(self._constant(2.0), 7)

    def test_perfect_predictor(self):
        # Occupied where x < 0: one ReLU unit on -x.
        net = MlpNetwork.zeros(ArchSpec.uniform(1, 8))
        net.weights[0][0, 0] = -100.0
        net.head_weight[0, 0] = 1.0
        net.head_bias[0] = -1.0
        occ = np.zeros((8, 8, 8), dtype=bool)
        occ[:4] = True
        grid = VoxelGrid(occ)
        assert full_grid_accuracy(net, grid) == 1.0
        assert reconstruct(net, 8) == grid


def test_activation_sigmoid_is_expit():
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(activate(Activation(ActivationKind.SIGMOID), x), expit(x))
