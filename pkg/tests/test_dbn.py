import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavedbn.dbn import (Dbn, DbnTrainConfig, accuracy, build_dbn, derive_seed, finetune, forward,
                         loss_and_gradients, predict, pretrain)
from wavedbn.errors import ValidationError
from wavedbn.rbm import Rbm, RbmTrainConfig, make_rng, train_rbm


def head_only(weights, bias):
    """A one-layer DBN whose hidden layer is irrelevant to the logits."""
    weights = np.asarray(weights, dtype=float)
    layer = Rbm(np.zeros((1, weights.shape[0])), np.zeros(1), np.zeros(weights.shape[0]))
    return Dbn([layer], weights, bias)


def logit_dbn(logits):
    """A DBN whose output logits equal ``logits`` for any input."""
    logits = np.asarray(logits, dtype=float)
    return head_only(np.zeros((1, logits.size)), logits)


def separable(n=100, seed=0, margin=0.1):
    rng = np.random.default_rng(seed)
    x = rng.random((4 * n, 6))
    score = x[:, 0] + x[:, 1] - x[:, 2] - x[:, 3]
    x = x[np.abs(score) > margin][:n]
    return x, (x[:, 0] + x[:, 1] > x[:, 2] + x[:, 3]).astype(int)


def prototypes(seed, n=400, dim=32, classes=4, flip=0.15):
    rng = np.random.default_rng(seed)
    protos = rng.integers(0, 2, size=(classes, dim))
    y = rng.integers(0, classes, n)
    x = np.abs(protos[y] - (rng.random((n, dim)) < flip)).astype(float)
    return x, y


class TestBuild:
    def test_coil_architecture(self):
        d = build_dbn(256, [40, 20, 20], 20, seed=1)
        assert [l.weights.shape for l in d.layers] == [(256, 40), (40, 20), (20, 20)]
        assert d.softmax_weights.shape == (20, 20)
        assert d.input_dim == 256 and d.n_classes == 20

    def test_subset_architecture(self):
        d = build_dbn(16, [10], 5)
        assert [l.weights.shape for l in d.layers] == [(16, 10)]
        assert d.softmax_weights.shape == (10, 5)

    def test_seeded(self):
        a, b = build_dbn(16, [8, 4], 3, seed=9), build_dbn(16, [8, 4], 3, seed=9)
        for la, lb in zip(a.layers, b.layers):
            assert la.weights.tobytes() == lb.weights.tobytes()
        assert a.softmax_weights.tobytes() == b.softmax_weights.tobytes()
        assert not np.array_equal(a.layers[0].weights, build_dbn(16, [8, 4], 3, seed=10).layers[0].weights)

    @pytest.mark.parametrize("hidden", [[], [0], [4, -1]])
    def test_bad_sizes(self, hidden):
        with pytest.raises(ValidationError):
            build_dbn(16, hidden, 3)

    @given(st.integers(1, 30), st.lists(st.integers(1, 12), min_size=1, max_size=4),
           st.integers(1, 10))
    @settings(max_examples=50, deadline=None)
    def test_dimensions_chain(self, nin, hidden, classes):
        d = build_dbn(nin, hidden, classes)
        assert d.hidden_sizes == hidden
        assert d.layers[0].n_visible == nin
        for lower, upper in zip(d.layers, d.layers[1:]):
            assert lower.n_hidden == upper.n_visible
        assert d.softmax_weights.shape == (hidden[-1], classes)

    def test_unchained_rejected(self):
        layers = [Rbm(np.zeros((4, 3)), np.zeros(4), np.zeros(3)),
                  Rbm(np.zeros((2, 2)), np.zeros(2), np.zeros(2))]
        with pytest.raises(ValidationError):
            Dbn(layers, np.zeros((2, 2)), np.zeros(2))

    def test_parameter_count(self):
        d = build_dbn(256, [40, 20, 20], 20)
        assert d.n_parameters() == 256 * 40 + 40 + 40 * 20 + 20 + 20 * 20 + 20 + 20 * 20 + 20

    def test_derived_seeds_differ(self):
        assert len({derive_seed(0, k) for k in range(50)}) == 50


class TestPretrain:
    def test_single_layer_is_train_rbm(self):
        x, _ = prototypes(0, n=60)
        d = build_dbn(32, [8], 4, seed=3)
        cfg = DbnTrainConfig(RbmTrainConfig(epochs=3), seed=5)
        trained, traces = pretrain(d, x, cfg)
        layer_cfg = RbmTrainConfig(epochs=3, seed=derive_seed(5, 1, 0))
        expected, trace = train_rbm(d.layers[0], x, layer_cfg)
        assert trained.layers[0].weights.tobytes() == expected.weights.tobytes()
        assert traces == [trace]

    def test_head_untouched_and_upper_inputs_in_unit_interval(self):
        x, _ = prototypes(1, n=60)
        d = build_dbn(32, [8, 6], 4, seed=3)
        trained, traces = pretrain(d, x, DbnTrainConfig(RbmTrainConfig(epochs=2)))
        np.testing.assert_array_equal(trained.softmax_weights, d.softmax_weights)
        upper_inputs = forward_hidden(trained, x, 1)
        assert np.all((upper_inputs > 0) & (upper_inputs < 1))
        assert len(traces) == 2

    def test_deterministic(self):
        x, y = prototypes(2, n=80)
        cfg = DbnTrainConfig(RbmTrainConfig(epochs=3), finetune_epochs=3, seed=11)

        def run():
            d, _ = pretrain(build_dbn(32, [8, 6], 4, seed=1), x, cfg)
            return finetune(d, x, y, cfg)

        (a, ta), (b, tb) = run(), run()
        assert ta == tb
        for la, lb in zip(a.layers, b.layers):
            assert la.weights.tobytes() == lb.weights.tobytes()
        assert a.softmax_weights.tobytes() == b.softmax_weights.tobytes()

    @pytest.mark.slow
    def test_pretraining_speeds_up_finetuning(self):
        threshold = 0.95

        def epochs_needed(dbn, x, y, cfg):
            reached = []

            def stop(epoch, model):
                if accuracy(model, x, y) >= threshold:
                    reached.append(epoch + 1)
                    return True
                return False

            finetune(dbn, x, y, cfg, on_epoch=stop)
            return reached[0] if reached else cfg.finetune_epochs + 1

        wins = 0
        for seed in range(10):
            x, y = prototypes(seed)
            cfg = DbnTrainConfig(RbmTrainConfig(epochs=20, batch_size=20),
                                 finetune_epochs=100, seed=seed)
            start = build_dbn(32, [16, 16], 4, seed=seed)
            warm, _ = pretrain(start, x, cfg)
            wins += epochs_needed(warm, x, y, cfg) < epochs_needed(start, x, y, cfg)
        assert wins > 5


def forward_hidden(dbn, x, depth):
    from scipy.special import expit
    for layer in dbn.layers[:depth]:
        x = expit(x @ layer.weights + layer.hidden_bias)
    return x


class TestForward:
    @given(st.lists(st.floats(-500, 500), min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_normalized_for_extreme_logits(self, logits):
        p = forward(logit_dbn(logits), [0.0])
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(np.isfinite(p))

    def test_uniform_when_head_zero(self, rng):
        d = build_dbn(5, [4], 7)
        d = Dbn(d.layers, np.zeros((4, 7)), np.zeros(7))
        np.testing.assert_allclose(forward(d, rng.random((3, 5))), 1 / 7, rtol=0, atol=1e-15)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-100, 100))
    @settings(max_examples=60, deadline=None)
    def test_shift_invariant(self, logits, c):
        base = forward(logit_dbn(logits), [0.0])
        shifted = forward(logit_dbn(np.asarray(logits) + c), [0.0])
        np.testing.assert_allclose(shifted, base, rtol=0, atol=1e-12)

    def test_batch_matches_single(self, rng):
        d = build_dbn(6, [5, 4], 3, seed=2)
        x = rng.random((4, 6))
        batch = forward(d, x)
        for i in range(4):
            np.testing.assert_allclose(batch[i], forward(d, x[i]), rtol=0, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            forward(build_dbn(6, [4], 2), np.zeros(5))


class TestPredictAccuracy:
    def test_argmax(self):
        assert predict(logit_dbn(np.log([0.1, 0.7, 0.2])), [0.0]) == 1

    def test_tie_goes_low(self):
        assert predict(logit_dbn([0.0, 0.0]), [0.0]) == 0
        assert predict(logit_dbn([-1.0, 3.0, 3.0]), [0.0]) == 1

    # Grid-valued logits, so the transform stays strictly monotone in floating point.
    @given(st.lists(st.integers(-2000, 2000).map(lambda k: k / 100), min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_monotone_invariance(self, logits):
        base = predict(logit_dbn(logits), [0.0])
        assert predict(logit_dbn(np.tanh(np.asarray(logits) / 40) * 3 + 1), [0.0]) == base

    def test_accuracy_values(self):
        # Class 1 is always predicted.
        d = logit_dbn([0.0, 1.0])
        x = np.zeros((4, 1))
        assert accuracy(d, x, [1, 1, 1, 1]) == 1.0
        assert accuracy(d, x, [0, 0, 0, 0]) == 0.0
        assert accuracy(d, x, [1, 1, 0, 1]) == 0.75

    def test_accuracy_errors(self):
        d = logit_dbn([0.0, 1.0])
        with pytest.raises(ValidationError):
            accuracy(d, np.zeros((0, 1)), [])
        with pytest.raises(ValidationError):
            accuracy(d, np.zeros((2, 1)), [0, 2])
        with pytest.raises(ValidationError):
            accuracy(d, np.zeros((2, 1)), [0])


def numeric_gradient(dbn, x, y, array, eps=1e-5):
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        old = array[idx]
        array[idx] = old + eps
        up, _ = loss_and_gradients(dbn, x, y)
        array[idx] = old - eps
        down, _ = loss_and_gradients(dbn, x, y)
        array[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad


class TestFinetune:
    def test_gradient_check(self):
        rng = make_rng(7)
        worst = 0.0
        for trial in range(10):
            sizes = list(rng.integers(2, 9, size=rng.integers(1, 4)))
            nin, classes = int(rng.integers(2, 9)), int(rng.integers(2, 6))
            d = build_dbn(nin, [int(s) for s in sizes], classes, seed=trial)
            for layer in d.layers:
                layer.weights[:] = rng.normal(0, 1, layer.weights.shape)
                layer.hidden_bias[:] = rng.normal(0, 1, layer.hidden_bias.shape)
            d.softmax_weights[:] = rng.normal(0, 1, d.softmax_weights.shape)
            x = rng.random((5, nin))
            y = rng.integers(0, classes, 5)
            _, grads = loss_and_gradients(d, x, y)
            params = [(l.weights, l.hidden_bias) for l in d.layers]
            params.append((d.softmax_weights, d.softmax_bias))
            for (w, b), (gw, gb) in zip(params, grads):
                for array, analytic in ((w, gw), (b, gb)):
                    numeric = numeric_gradient(d, x, y, array)
                    scale = np.maximum(np.abs(numeric) + np.abs(analytic), 1e-7)
                    rel = np.abs(numeric - analytic) / scale
                    worst = max(worst, float(rel.max()))
        assert worst < 1e-4

    def test_separable_reaches_full_accuracy(self):
        x, y = separable()
        cfg = DbnTrainConfig(RbmTrainConfig(epochs=10), finetune_epochs=200, seed=0)
        d, _ = pretrain(build_dbn(6, [10], 2, seed=0), x, cfg)
        d, trace = finetune(d, x, y, cfg)
        assert accuracy(d, x, y) == 1.0
        assert len(trace) == 200 and all(np.isfinite(trace))

    def test_loss_decreases(self):
        x, y = prototypes(3, n=100)
        cfg = DbnTrainConfig(RbmTrainConfig(epochs=1), finetune_epochs=30)
        _, trace = finetune(build_dbn(32, [8], 4), x, y, cfg)
        assert trace[-1] < trace[0]

    def test_label_out_of_range(self):
        x, _ = separable(10)
        with pytest.raises(ValidationError):
            finetune(build_dbn(6, [4], 2), x, np.full(10, 2), DbnTrainConfig())

    def test_early_stop(self):
        x, y = separable(20)
        calls = []
        _, trace = finetune(build_dbn(6, [4], 2), x, y, DbnTrainConfig(finetune_epochs=50),
                            on_epoch=lambda e, m: calls.append(e) or e == 2)
        assert calls == [0, 1, 2] and len(trace) == 3

    def test_input_not_mutated(self):
        x, y = separable(20)
        d = build_dbn(6, [4], 2)
        before = d.softmax_weights.copy()
        finetune(d, x, y, DbnTrainConfig(finetune_epochs=2))
        np.testing.assert_array_equal(d.softmax_weights, before)

    def test_batch_size_fallback(self):
        assert DbnTrainConfig(RbmTrainConfig(batch_size=7)).batch_size == 7
        assert DbnTrainConfig(finetune_batch_size=3).batch_size == 3
        with pytest.raises(ValidationError):
            DbnTrainConfig(finetune_epochs=0)
