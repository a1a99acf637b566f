import math

import numpy as np
import pytest

import cnnqoe


def test_selu_scalar_and_array():
    assert cnnqoe.selu(0.0) == 0.0
    assert cnnqoe.selu(2.0) == pytest.approx(2.1014, abs=1e-12)
    x = np.array([[-1.0, 0.0, 2.0]])
    y = cnnqoe.selu(x)
    assert y.shape == (1, 3)
    assert y[0, 2] == pytest.approx(2.1014)
    assert y[0, 0] == pytest.approx(1.0507 * 1.67733 * (math.exp(-1.0) - 1.0))


def test_causal_convolution():
    x = np.arange(1.0, 6.0).reshape(1, 5)
    w = np.array([1.0, 1.0]).reshape(1, 1, 2)
    b = np.zeros(1)
    y = cnnqoe.conv1d_dilated_causal(x, w, b, dilation=1)
    assert y.tolist() == [[1.0, 3.0, 5.0, 7.0, 9.0]]
    y2 = cnnqoe.conv1d_dilated_causal(x, w, b, dilation=2)
    assert y2.tolist() == [[1.0, 2.0, 4.0, 6.0, 8.0]]


def test_conv_backward_matches_finite_difference():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 6))
    w = rng.normal(size=(3, 2, 2))
    b = rng.normal(size=3)
    dy = rng.normal(size=(3, 6))
    dx, dw, db = cnnqoe.conv1d_backward(x, w, b, 2, dy)

    eps = 1e-6
    xp = x.copy()
    xp[1, 3] += eps
    xm = x.copy()
    xm[1, 3] -= eps
    lp = float((cnnqoe.conv1d_dilated_causal(xp, w, b, 2) * dy).sum())
    lm = float((cnnqoe.conv1d_dilated_causal(xm, w, b, 2) * dy).sum())
    assert dx[1, 3] == pytest.approx((lp - lm) / (2 * eps), rel=1e-5)
    assert dw.shape == w.shape and db.shape == b.shape


def test_model_roundtrip(tmp_path):
    cfg = cnnqoe.ModelConfig(k=2, l=3, n=32, in_channels=4)
    assert cnnqoe.validate_config(cfg) == []
    model = cnnqoe.build_model(cfg, seed=11)
    assert model.param_count == 6561
    window = np.zeros((4, model.receptive_field))
    y = model.forward(window)

    path = tmp_path / "m.cqoe"
    model.save(str(path))
    clone = cnnqoe.Model.load(str(path))
    assert clone.forward(window) == y
    assert clone.complexity()["param_count"] == 6561


def test_synth_train_predict_loop():
    traces = [
        cnnqoe.synth_trace(duration=40, seed=s, id=f"t{s}",
                           rebuffers=[(18, 2)] if s % 2 else [])
        for s in range(4)
    ]
    stats = cnnqoe.compute_stats(traces)
    cfg = cnnqoe.ModelConfig(k=2, l=2, n=4, in_channels=4)
    model = cnnqoe.build_model(cfg, seed=3)
    history = cnnqoe.train(model, traces, stats,
                           config=cnnqoe.TrainConfig(epochs=3, seed=3))
    assert len(history) == 3
    assert history[-1][1] < history[0][1]

    pred = cnnqoe.predict_trace(model, traces[0], stats)
    assert pred.shape == (40,)
    assert np.isfinite(pred).all()
    assert cnnqoe.rmse(list(pred), list(traces[0].qoe)) >= 0.0


def test_trace_csv_roundtrip():
    t = cnnqoe.synth_trace(duration=12, seed=5)
    text = t.to_csv()
    back = cnnqoe.Trace.from_csv(text)
    assert back.to_csv() == text
    assert len(back) == 12
    assert back.qoe.min() >= t.qoe_min and back.qoe.max() <= t.qoe_max


def test_metrics():
    assert cnnqoe.pcc([1, 2, 3], [1, 4, 9]) == pytest.approx(0.989743318610787)
    assert cnnqoe.srocc([1, 2, 3], [1, 4, 9]) == pytest.approx(1.0)
    assert cnnqoe.rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ArithmeticError):
        cnnqoe.pcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    assert cnnqoe.average_ranks([10.0, 20.0, 20.0, 5.0]).tolist() == [2.0, 3.5, 3.5, 1.0]


def test_split_protocols():
    traces = [
        cnnqoe.synth_trace(duration=10, seed=i, id=f"tr{i}",
                           content=f"c{i % 3}", pattern=f"p{i // 3}")
        for i in range(9)
    ]
    folds = cnnqoe.split(traces, "leave_one_out_excluding_content_and_pattern")
    assert len(folds) == 9
    train, test = folds[0]
    assert len(test) == 1
    assert len(train) == 4  # 8 others minus same-content (2) minus same-pattern (2)

    folds = cnnqoe.split(traces, "random_80_20", seed=1)
    assert len(folds) == 1
    assert len(folds[0][0]) == 7 and len(folds[0][1]) == 2
