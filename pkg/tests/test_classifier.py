import numpy as np
import pytest

from prunedoc.classifier import (
    ClassifierModel,
    PatchDataset,
    TrainConfig,
    average_precision,
    bce_gradients,
    bce_loss,
    classify_grid,
    forward,
    forward_batch,
    init_model,
    load_model,
    model_bytes,
    model_from_bytes,
    param_count,
    save_model,
    train,
)
from prunedoc.errors import (
    ConfigurationError,
    DegenerateDataError,
    FormatVersionError,
    ShapeError,
    TruncatedPayloadError,
    UndefinedMetricError,
)
from prunedoc.imagegrid import GrayImage, extract_grid, patch_at


def zero_model(P, hidden=2, b2=0.0):
    return ClassifierModel(P, hidden, np.zeros((hidden, P * P)), np.zeros(hidden), np.zeros(hidden), b2)


def separable_dataset(n=16, P=2, seed=0):
    """Dark patches labeled 1, bright patches labeled 0."""
    rng = np.random.default_rng(seed)
    dark = rng.integers(0, 60, size=(n // 2, P * P), dtype=np.uint8)
    bright = rng.integers(200, 256, size=(n // 2, P * P), dtype=np.uint8)
    pixels = np.concatenate([dark, bright]).astype(np.uint8)
    labels = np.array([1] * (n // 2) + [0] * (n // 2), dtype=np.uint8)
    return PatchDataset(P, pixels, labels)


class TestParamCount:
    @pytest.mark.parametrize("P,expected", [(14, 50_689), (28, 201_217), (56, 803_329)])
    def test_formula(self, P, expected):
        assert param_count(P, 256) == expected

    def test_counts_stored_parameters(self):
        m = init_model(5, 7, seed=0)
        stored = m.W1.size + m.b1.size + m.w2.size + 1
        assert param_count(5, 7) == stored

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            param_count(0, 256)


class TestForward:
    def test_zero_weights_give_bias(self):
        m = zero_model(3, b2=2.5)
        assert forward(m, np.full(9, 128, dtype=np.uint8)) == 2.5

    def test_zero_patch_relu_kills_hidden(self):
        m = init_model(3, 4, seed=1)
        m.b1[:] = 0.0
        m.b2 = -0.75
        # relu(W1 @ 0 + 0) = 0, so the logit is exactly b2
        assert forward(m, np.zeros(9, dtype=np.uint8)) == -0.75

    def test_hand_instance(self):
        # x = (0.5, 0.5, 0.5, 0.5), W1 row of 0.5 -> pre-act 1, w2 = 2, b2 = -1
        m = ClassifierModel(2, 1, np.full((1, 4), 0.5), np.zeros(1), np.array([2.0]), -1.0)
        assert forward(m, np.array([0.5, 0.5, 0.5, 0.5])) == pytest.approx(1.0)

    def test_normalization_applied_exactly_once(self):
        m = init_model(2, 3, seed=2)
        raw = np.array([0, 51, 204, 255], dtype=np.uint8)
        assert forward(m, raw) == forward(m, raw.astype(np.float64) / 255.0)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            forward(zero_model(3), np.zeros(8, dtype=np.uint8))


class TestGradients:
    @pytest.mark.parametrize("P,hidden,seed", [(2, 2, 0), (3, 4, 1), (4, 3, 2), (2, 4, 3)])
    def test_match_central_finite_differences(self, P, hidden, seed):
        rng = np.random.default_rng(seed)
        m = init_model(P, hidden, seed=seed)
        pixels = rng.integers(0, 256, size=(6, P * P), dtype=np.uint8)
        labels = rng.integers(0, 2, size=6)

        gW1, gb1, gw2, gb2 = bce_gradients(m, pixels, labels)
        analytic = np.concatenate([gW1.reshape(-1), gb1, gw2, [gb2]])

        eps = 1e-4
        params = [m.W1, m.b1, m.w2]
        numeric = []
        for arr in params:
            flat = arr.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = bce_loss(forward_batch(m, pixels), labels)
                flat[i] = orig - eps
                lo = bce_loss(forward_batch(m, pixels), labels)
                flat[i] = orig
                numeric.append((hi - lo) / (2 * eps))
        m.b2 += eps
        hi = bce_loss(forward_batch(m, pixels), labels)
        m.b2 -= 2 * eps
        lo = bce_loss(forward_batch(m, pixels), labels)
        m.b2 += eps
        numeric.append((hi - lo) / (2 * eps))

        numeric = np.array(numeric)
        denom = np.maximum(np.abs(numeric), 1e-8)
        assert (np.abs(analytic - numeric) / denom).max() < 1e-4


class TestTrain:
    def test_two_point_separable_converges(self):
        pixels = np.array([[20, 20, 20, 20], [240, 240, 240, 240]], dtype=np.uint8)
        labels = np.array([1, 0], dtype=np.uint8)
        data = PatchDataset(2, pixels, labels)
        m = train(data, TrainConfig(epochs=200, batch_size=2, seed=0))
        assert bce_loss(forward_batch(m, pixels), labels) < 0.1

    def test_single_class_rejected(self):
        pixels = np.zeros((4, 4), dtype=np.uint8)
        labels = np.ones(4, dtype=np.uint8)
        with pytest.raises(DegenerateDataError):
            train(PatchDataset(2, pixels, labels), TrainConfig(epochs=1))

    def test_deterministic_given_seed(self):
        data = separable_dataset()
        cfg = TrainConfig(epochs=5, batch_size=4, seed=42)
        a = train(data, cfg, hidden_dim=4)
        b = train(data, cfg, hidden_dim=4)
        assert model_bytes(a) == model_bytes(b)

    def test_loss_non_increasing_on_separable_data(self):
        data = separable_dataset(n=32)
        losses = []
        for epochs in range(1, 9):
            m = train(data, TrainConfig(epochs=epochs, batch_size=8, seed=3), hidden_dim=4)
            losses.append(bce_loss(forward_batch(m, data.pixels), data.labels))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_bad_config(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(epochs=0)


class TestClassifyGrid:
    def test_single_patch_grid(self):
        m = init_model(4, 3, seed=5)
        g = extract_grid(GrayImage(np.random.default_rng(5).integers(0, 256, (4, 4), dtype=np.uint8)), 4)
        assert classify_grid(m, g)[0, 0] == pytest.approx(forward(m, patch_at(g, 0, 0).pixels), rel=1e-12)

    def test_constant_model(self):
        m = zero_model(4, b2=3.0)
        g = extract_grid(GrayImage(np.zeros((8, 8), dtype=np.uint8)), 4)
        assert (classify_grid(m, g) == 3.0).all()

    def test_matches_patchwise_loop(self):
        rng = np.random.default_rng(6)
        m = init_model(4, 8, seed=6)
        g = extract_grid(GrayImage(rng.integers(0, 256, (12, 20), dtype=np.uint8)), 4)
        logits = classify_grid(m, g)
        for r in range(g.rows):
            for c in range(g.cols):
                assert logits[r, c] == pytest.approx(forward(m, patch_at(g, r, c).pixels), rel=1e-10)

    def test_patch_size_mismatch(self):
        g = extract_grid(GrayImage(np.zeros((8, 8), dtype=np.uint8)), 4)
        with pytest.raises(ConfigurationError):
            classify_grid(zero_model(3), g)


class TestAveragePrecision:
    def test_hand_ranking(self):
        ap = average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert ap == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)

    def test_perfect_separation(self):
        assert average_precision([3.0, 2.0, 1.0, 0.0], [1, 1, 0, 0]) == 1.0

    def test_all_positive(self):
        assert average_precision([0.1, 0.5, 0.3], [1, 1, 1]) == 1.0

    def test_no_positives(self):
        with pytest.raises(UndefinedMetricError):
            average_precision([0.1, 0.2], [0, 0])

    def test_ties_broken_by_position(self):
        # tied scores keep original order: negative first, then positive
        assert average_precision([0.5, 0.5], [0, 1]) == pytest.approx(0.5)
        assert average_precision([0.5, 0.5], [1, 0]) == pytest.approx(1.0)


class TestModelFile:
    def test_round_trip_bit_exact(self, tmp_path):
        m = init_model(3, 4, seed=7)
        raw = model_bytes(m)
        again = model_bytes(model_from_bytes(raw))
        assert raw == again
        save_model(m, tmp_path / "m.bin")
        loaded = load_model(tmp_path / "m.bin")
        assert model_bytes(loaded) == raw

    def test_bad_magic(self):
        raw = bytearray(model_bytes(init_model(2, 2, seed=0)))
        raw[0] = ord("X")
        with pytest.raises(FormatVersionError):
            model_from_bytes(bytes(raw))

    def test_truncation(self):
        raw = model_bytes(init_model(2, 2, seed=0))
        with pytest.raises(TruncatedPayloadError):
            model_from_bytes(raw[:-3])
