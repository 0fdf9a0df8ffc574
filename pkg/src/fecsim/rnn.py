"""Small neural classifier scoring motion intensity in [0, 1].

The network is fully connected: inputs -> 7 sigmoid hidden units -> 1
sigmoid output, trained full-batch with Adam on the mean squared error.
Inputs are standardised with statistics stored in the model.  The
evaluation interface (vector in, score in [0, 1] out) is all callers rely
on, so another neuron model can be dropped in behind it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .motion import IntensityClass, mv_ratio
from .video import FrameRecord, FrameType, GopLayout, synthesize_video

HIDDEN = 7
FORMAT_VERSION = 1
DEFAULT_CUTS = (1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True)
class RnnTopology:
    input_count: int
    hidden_count: int = HIDDEN
    output_count: int = 1

    def __post_init__(self):
        if self.input_count not in (3, 4):
            raise ValueError("input_count must be 3 or 4")
        if self.hidden_count != HIDDEN or self.output_count != 1:
            raise ValueError("topology is fixed at 7 hidden units and 1 output")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class RnnModel:
    topology: RnnTopology
    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    w2: np.ndarray  # (hidden,)
    b2: float
    mean: np.ndarray = field(default=None)
    scale: np.ndarray = field(default=None)
    history: tuple[float, ...] = ()

    def __post_init__(self):
        n = self.topology.input_count
        h = self.topology.hidden_count
        if np.shape(self.w1) != (h, n) or np.shape(self.b1) != (h,) or np.shape(self.w2) != (h,):
            raise ValueError("weight shapes do not match the topology")
        if self.mean is None:
            object.__setattr__(self, "mean", np.zeros(n))
        if self.scale is None:
            object.__setattr__(self, "scale", np.ones(n))
        for name in ("w1", "b1", "w2", "mean", "scale"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b2", float(self.b2))
        object.__setattr__(self, "history", tuple(float(v) for v in self.history))

    @classmethod
    def zeros(cls, topology: RnnTopology) -> "RnnModel":
        h, n = topology.hidden_count, topology.input_count
        return cls(topology, np.zeros((h, n)), np.zeros(h), np.zeros(h), 0.0)

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "input_count": self.topology.input_count,
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RnnModel":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        return cls(RnnTopology(int(d["input_count"])), np.array(d["w1"]), np.array(d["b1"]),
                   np.array(d["w2"]), d["b2"], np.array(d["mean"]), np.array(d["scale"]),
                   tuple(d["history"]))


def _forward(model_params, x: np.ndarray):
    w1, b1, w2, b2 = model_params
    hidden = _sigmoid(x @ w1.T + b1)
    return hidden, _sigmoid(hidden @ w2 + b2)


def rnn_eval(model: RnnModel, inputs: Sequence[float]) -> float:
    x = np.asarray(inputs, dtype=float)
    if x.shape != (model.topology.input_count,):
        raise ValueError(f"expected {model.topology.input_count} inputs, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    z = (x - model.mean) / model.scale
    _, out = _forward((model.w1, model.b1, model.w2, model.b2), z[None, :])
    return float(out[0])


def rnn_train(topology: RnnTopology, dataset, max_iterations: int = 600, seed: int = 0,
              tolerance: float = 1e-9, learning_rate: float = 0.03) -> RnnModel:
    """Fit on ``dataset = (features, labels)`` by full-batch Adam on the MSE.

    Training stops after ``max_iterations`` or once an iteration lowers the
    error by less than ``tolerance``.  ``history`` holds the error before
    each update.
    """
    x, y = dataset
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(x) == 0:
        raise ValueError("training set is empty")
    if x.ndim != 2 or x.shape[1] != topology.input_count or len(y) != len(x):
        raise ValueError("dataset shape does not match the topology")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("labels must lie in [0, 1]")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale

    rng = np.random.default_rng(seed)
    h, n = topology.hidden_count, topology.input_count
    params = [rng.normal(0, 1 / math.sqrt(n), (h, n)), np.zeros(h), rng.normal(0, 1 / math.sqrt(h), h), np.zeros(1)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1_, b2_, eps = 0.9, 0.999, 1e-8
    history = []
    m_count = len(x)
    for it in range(1, max_iterations + 1):
        hid, out = _forward((params[0], params[1], params[2], params[3][0]), z)
        err = out - y
        mse = float(np.mean(err ** 2))
        if history and 0.0 <= history[-1] - mse < tolerance:
            history.append(mse)
            break
        history.append(mse)
        d_out = (2.0 / m_count) * err * out * (1 - out)
        g_w2 = hid.T @ d_out
        g_b2 = np.array([d_out.sum()])
        d_hid = np.outer(d_out, params[2]) * hid * (1 - hid)
        g_w1 = d_hid.T @ z
        g_b1 = d_hid.sum(axis=0)
        for i, g in enumerate((g_w1, g_b1, g_w2, g_b2)):
            m[i] = b1_ * m[i] + (1 - b1_) * g
            v[i] = b2_ * v[i] + (1 - b2_) * g * g
            mh = m[i] / (1 - b1_ ** it)
            vh = v[i] / (1 - b2_ ** it)
            params[i] = params[i] - learning_rate * mh / (np.sqrt(vh) + eps)
    return RnnModel(topology, params[0], params[1], params[2], float(params[3][0]), mean, scale, tuple(history))


def score_to_class(score: float, cuts: tuple[float, float] = DEFAULT_CUTS) -> IntensityClass:
    lo, hi = cuts
    if score < lo:
        return IntensityClass.Low
    return IntensityClass.Medium if score < hi else IntensityClass.High


def score_to_ratio(score: float) -> float:
    """Affine map of a [0, 1] score onto the redundancy range [0.55, 1.0]."""
    return 0.55 + 0.45 * min(1.0, max(0.0, score))


_FT = {FrameType.I: 0.0, FrameType.P: 1.0, FrameType.B: 2.0}


def frame_inputs(frame: FrameRecord, input_count: int) -> list[float]:
    """Network inputs for a frame.

    Three inputs: frame type code, size, mv count / mv distance (0 for
    intra or static frames).  Four inputs: type, size, mv count, mv distance.
    """
    if input_count == 3:
        try:
            ratio = mv_ratio(frame)
        except ValueError:
            ratio = 0.0
        return [_FT[frame.kind], float(frame.size_bytes), ratio]
    if input_count == 4:
        return [_FT[frame.kind], float(frame.size_bytes), float(frame.mv_count), float(frame.mv_total_distance)]
    raise ValueError("input_count must be 3 or 4")


_LABELS = {IntensityClass.Low: 0.0, IntensityClass.Medium: 0.5, IntensityClass.High: 1.0}


def toy_dataset(input_count: int = 3, gops: int = 4, seed: int = 7):
    """All frames of synthetic Low/Medium/High sequences labelled 0, 0.5, 1."""
    xs, ys = [], []
    for offset, cls in enumerate(IntensityClass):
        trace, _ = synthesize_video(GopLayout(19, 3), gops, cls, seed + offset, with_pixels=False)
        for f in trace.frames:
            xs.append(frame_inputs(f, input_count))
            ys.append(_LABELS[cls])
    return np.array(xs), np.array(ys)


class RnnIntensityClassifier:
    """Adapter giving a trained model the ``classify`` interface."""

    def __init__(self, model: RnnModel, cuts: tuple[float, float] = DEFAULT_CUTS):
        self.model = model
        self.cuts = cuts

    def score(self, frame: FrameRecord) -> float:
        return rnn_eval(self.model, frame_inputs(frame, self.model.topology.input_count))

    def classify(self, features) -> IntensityClass:
        if isinstance(features, FrameRecord):
            s = self.score(features)
        else:
            s = rnn_eval(self.model, features)
        return score_to_class(s, self.cuts)


def save_model(model: RnnModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path) -> RnnModel:
    return RnnModel.from_dict(json.loads(Path(path).read_text()))


_DEFAULT_MODELS: dict[int, RnnModel] = {}


def default_model(input_count: int = 3) -> RnnModel:
    """Model trained once per process on the shipped toy dataset."""
    if input_count not in _DEFAULT_MODELS:
        _DEFAULT_MODELS[input_count] = rnn_train(RnnTopology(input_count), toy_dataset(input_count), seed=1)
    return _DEFAULT_MODELS[input_count]
