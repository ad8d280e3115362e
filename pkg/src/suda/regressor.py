"""Windowed sequence regressor: FC -> stacked LSTM -> FC -> FC, in numpy.

The network maps a window of W normalized reading pairs to one joint angle.
Per time step, FC1 lifts the 2-channel input; a 3-layer LSTM runs over the
window; the last layer's hidden and cell states from all W steps are
concatenated (2*W*hidden features) and fed through FC2/FC3. The scalar
output is scaled by 180 so the network internally regresses angle/180.

Gradients are computed analytically by backpropagation through time with a
flat float64 parameter vector, which keeps training deterministic and lets
tests compare against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, NormStats, normalize_fit
from .errors import ConfigError, DataError, NumericalError, SchemaError
from .rng import substream

LABEL_SCALE = 180.0


@dataclass(frozen=True)
class RegressorConfig:
    window: int = 6
    fc1_out: int = 256
    lstm_layers: int = 3
    lstm_hidden: int = 256
    fc2_out: int = 128
    fc3_out: int = 1
    input_dim: int = 2

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if self.fc3_out != 1:
            raise ConfigError("fc3_out must be 1 (single joint angle output)")

    @property
    def feature_dim(self) -> int:
        # hidden and cell states of the last layer, all W steps
        return 2 * self.window * self.lstm_hidden


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch: int = 32
    epochs: int = 50
    sched_gamma: float = 0.0003
    sched_decay: float = 0.8
    sched: str = "inverse"  # inverse: lr0*(1+g*i)^-d; exp: lr0*d^(g*i)
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0 or self.batch < 1 or self.epochs < 1:
            raise ConfigError("lr0 > 0, batch >= 1, epochs >= 1 required")
        if self.momentum < 0 or self.weight_decay < 0 or self.sched_gamma < 0:
            raise ConfigError("momentum, weight_decay, sched_gamma must be >= 0")
        if self.sched not in ("inverse", "exp"):
            raise ConfigError(f"unknown scheduler {self.sched!r}")
        if self.sched == "exp" and not (0 < self.sched_decay <= 1):
            raise ConfigError("exp scheduler needs 0 < sched_decay <= 1")


def lr_at(tc: TrainConfig, it: int) -> float:
    """Learning rate at global iteration `it` (0-based)."""
    if it < 0:
        raise ConfigError(f"iteration must be >= 0, got {it}")
    if tc.sched == "inverse":
        return tc.lr0 * (1.0 + tc.sched_gamma * it) ** (-tc.sched_decay)
    return tc.lr0 * tc.sched_decay ** (tc.sched_gamma * it)


def _layout(cfg: RegressorConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """Parameter layout: (name, shape, fan_in) in a fixed order."""
    h = cfg.lstm_hidden
    entries = [
        ("fc1_w", (cfg.fc1_out, cfg.input_dim), cfg.input_dim),
        ("fc1_b", (cfg.fc1_out,), 0),
    ]
    for layer in range(cfg.lstm_layers):
        d_in = cfg.fc1_out if layer == 0 else h
        entries += [
            (f"lstm{layer}_wx", (4 * h, d_in), d_in),
            (f"lstm{layer}_wh", (4 * h, h), h),
            (f"lstm{layer}_b", (4 * h,), 0),
        ]
    entries += [
        ("fc2_w", (cfg.fc2_out, cfg.feature_dim), cfg.feature_dim),
        ("fc2_b", (cfg.fc2_out,), 0),
        ("fc3_w", (1, cfg.fc2_out), cfg.fc2_out),
        ("fc3_b", (1,), 0),
    ]
    return entries


def param_count(cfg: RegressorConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape, _ in _layout(cfg))


def _views(cfg: RegressorConfig, flat: np.ndarray) -> dict[str, np.ndarray]:
    out = {}
    pos = 0
    for name, shape, _ in _layout(cfg):
        size = int(np.prod(shape))
        out[name] = flat[pos:pos + size].reshape(shape)
        pos += size
    return out


class RegressorModel:
    """Configuration + flat parameter vector + input normalization."""

    def __init__(self, config: RegressorConfig, params: np.ndarray,
                 norm: NormStats | None = None, label_scale: float = LABEL_SCALE):
        expected = param_count(config)
        if params.shape != (expected,):
            raise ConfigError(f"parameter vector must have shape ({expected},), got {params.shape}")
        self.config = config
        self.params = np.asarray(params, dtype=np.float64)
        self.norm = norm
        self.label_scale = float(label_scale)
        self.w = _views(config, self.params)


def init_model(cfg: RegressorConfig, seed: int) -> RegressorModel:
    """Weights uniform in +-1/sqrt(fan_in) per layer, biases zero."""
    flat = np.zeros(param_count(cfg))
    model = RegressorModel(cfg, flat)
    rng = substream(seed, "model-init")
    for name, shape, fan_in in _layout(cfg):
        if fan_in > 0:
            bound = 1.0 / np.sqrt(fan_in)
            model.w[name][...] = rng.uniform(-bound, bound, size=shape)
    return model


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def forward(model: RegressorModel, windows: np.ndarray, train_mode: bool = False):
    """Predict angles (degrees) for normalized windows.

    `windows` is (N, W, input_dim) or a single (W, input_dim) window, already
    mapped through model.norm. With train_mode=True returns (preds, cache)
    for a subsequent backward pass.
    """
    cfg = model.config
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != cfg.window or x.shape[2] != cfg.input_dim:
        raise DataError(f"windows must have shape (N, {cfg.window}, {cfg.input_dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("window input contains non-finite values")
    w = model.w
    n, W, _ = x.shape
    h_dim = cfg.lstm_hidden

    z1 = x.reshape(n * W, cfg.input_dim) @ w["fc1_w"].T + w["fc1_b"]
    a1 = np.maximum(z1, 0.0).reshape(n, W, cfg.fc1_out)

    cache = {"x": x, "a1": a1, "layers": []} if train_mode else None
    inp = a1
    hs = cs = None
    for layer in range(cfg.lstm_layers):
        wx = w[f"lstm{layer}_wx"]
        wh = w[f"lstm{layer}_wh"]
        b = w[f"lstm{layer}_b"]
        d_in = inp.shape[2]
        xproj = inp.reshape(n * W, d_in) @ wx.T
        xproj = xproj.reshape(n, W, 4 * h_dim) + b
        h = np.zeros((n, h_dim))
        c = np.zeros((n, h_dim))
        hs = np.empty((n, W, h_dim))
        cs = np.empty((n, W, h_dim))
        lc = {"inp": inp, "gates": np.empty((n, W, 4 * h_dim)),
              "tanh_c": np.empty((n, W, h_dim))} if train_mode else None
        for t in range(W):
            gates = xproj[:, t] + h @ wh.T
            gi = _sigmoid(gates[:, :h_dim])
            gf = _sigmoid(gates[:, h_dim:2 * h_dim])
            gg = np.tanh(gates[:, 2 * h_dim:3 * h_dim])
            go = _sigmoid(gates[:, 3 * h_dim:])
            c = gf * c + gi * gg
            tc_ = np.tanh(c)
            h = go * tc_
            hs[:, t] = h
            cs[:, t] = c
            if train_mode:
                lc["gates"][:, t, :h_dim] = gi
                lc["gates"][:, t, h_dim:2 * h_dim] = gf
                lc["gates"][:, t, 2 * h_dim:3 * h_dim] = gg
                lc["gates"][:, t, 3 * h_dim:] = go
                lc["tanh_c"][:, t] = tc_
        if train_mode:
            lc["hs"] = hs
            lc["cs"] = cs
            cache["layers"].append(lc)
        inp = hs

    feat = np.concatenate([hs.reshape(n, W * h_dim), cs.reshape(n, W * h_dim)], axis=1)
    z2 = feat @ w["fc2_w"].T + w["fc2_b"]
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ w["fc3_w"].T + w["fc3_b"]
    preds = z3[:, 0] * model.label_scale
    if train_mode:
        cache["feat"] = feat
        cache["a2"] = a2
        cache["preds"] = preds
        return preds, cache
    return float(preds[0]) if single else preds


def backward(model: RegressorModel, cache: dict, dpreds: np.ndarray | None,
             dfeat2: np.ndarray | None = None) -> np.ndarray:
    """Gradient of a scalar objective w.r.t. the flat parameter vector.

    `dpreds` is dL/dprediction (degrees) per window; `dfeat2`, when given,
    injects an additional dL/d(FC2 output) term, which is how transfer
    losses attached at the feature layer flow into the shared parameters.
    """
    cfg = model.config
    w = model.w
    a2 = cache["a2"]
    feat = cache["feat"]
    n = a2.shape[0]
    W = cfg.window
    h_dim = cfg.lstm_hidden

    grad_flat = np.zeros_like(model.params)
    g = _views(cfg, grad_flat)

    da2 = np.zeros_like(a2)
    if dpreds is not None:
        dz3 = np.asarray(dpreds, dtype=np.float64)[:, None] * model.label_scale
        g["fc3_w"][...] = dz3.T @ a2
        g["fc3_b"][...] = dz3.sum(axis=0)
        da2 += dz3 @ w["fc3_w"]
    if dfeat2 is not None:
        da2 += dfeat2
    dz2 = np.where(a2 > 0.0, da2, 0.0)
    g["fc2_w"][...] = dz2.T @ feat
    g["fc2_b"][...] = dz2.sum(axis=0)
    dfeat = dz2 @ w["fc2_w"]

    dh_ext = dfeat[:, :W * h_dim].reshape(n, W, h_dim)
    dc_ext = dfeat[:, W * h_dim:].reshape(n, W, h_dim)

    for layer in reversed(range(cfg.lstm_layers)):
        lc = cache["layers"][layer]
        wx = w[f"lstm{layer}_wx"]
        wh = w[f"lstm{layer}_wh"]
        gates = lc["gates"]
        tanh_c = lc["tanh_c"]
        hs = lc["hs"]
        cs = lc["cs"]
        inp = lc["inp"]
        dgates_all = np.empty((n, W, 4 * h_dim))
        dh_rec = np.zeros((n, h_dim))
        dc_rec = np.zeros((n, h_dim))
        for t in reversed(range(W)):
            gi = gates[:, t, :h_dim]
            gf = gates[:, t, h_dim:2 * h_dim]
            gg = gates[:, t, 2 * h_dim:3 * h_dim]
            go = gates[:, t, 3 * h_dim:]
            tc_ = tanh_c[:, t]
            c_prev = cs[:, t - 1] if t > 0 else 0.0
            dh = dh_ext[:, t] + dh_rec
            dc = dc_rec + dh * go * (1.0 - tc_ * tc_)
            if layer == cfg.lstm_layers - 1:
                dc = dc + dc_ext[:, t]
            dgo = dh * tc_ * go * (1.0 - go)
            dgi = dc * gg * gi * (1.0 - gi)
            dgf = (dc * c_prev) * gf * (1.0 - gf) if t > 0 else np.zeros_like(gf)
            dgg = dc * gi * (1.0 - gg * gg)
            dg_t = dgates_all[:, t]
            dg_t[:, :h_dim] = dgi
            dg_t[:, h_dim:2 * h_dim] = dgf
            dg_t[:, 2 * h_dim:3 * h_dim] = dgg
            dg_t[:, 3 * h_dim:] = dgo
            dh_rec = dg_t @ wh
            dc_rec = dc * gf
        flat_dg = dgates_all.reshape(n * W, 4 * h_dim)
        d_in = inp.shape[2]
        g[f"lstm{layer}_wx"][...] = flat_dg.T @ inp.reshape(n * W, d_in)
        h_prev = np.concatenate([np.zeros((n, 1, h_dim)), hs[:, :-1]], axis=1)
        g[f"lstm{layer}_wh"][...] = flat_dg.T @ h_prev.reshape(n * W, h_dim)
        g[f"lstm{layer}_b"][...] = flat_dg.sum(axis=0)
        dx = (flat_dg @ wx).reshape(n, W, d_in)
        if layer > 0:
            dh_ext = dx
        else:
            da1 = dx
    dz1 = np.where(cache["a1"] > 0.0, da1, 0.0).reshape(n * W, cfg.fc1_out)
    g["fc1_w"][...] = dz1.T @ cache["x"].reshape(n * W, cfg.input_dim)
    g["fc1_b"][...] = dz1.sum(axis=0)
    if not np.all(np.isfinite(grad_flat)):
        bad = int(np.argmax(~np.isfinite(grad_flat)))
        raise NumericalError(f"non-finite gradient at parameter index {bad}")
    return grad_flat


def loss_mae(preds, labels) -> float:
    """Mean absolute error in degrees."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape or preds.ndim != 1 or len(preds) == 0:
        raise DataError(f"need equal-length non-empty series, got {preds.shape} vs {labels.shape}")
    return float(np.mean(np.abs(preds - labels)))


def loss_and_grad(model: RegressorModel, windows: np.ndarray, labels: np.ndarray):
    """Mean-MAE loss over a batch and its analytic parameter gradient."""
    labels = np.asarray(labels, dtype=np.float64)
    if len(labels) == 0:
        raise DataError("empty batch")
    preds, cache = forward(model, windows, train_mode=True)
    residual = preds - labels
    loss = float(np.mean(np.abs(residual)))
    dpreds = np.sign(residual) / len(labels)  # subgradient 0 at exact zeros
    return loss, backward(model, cache, dpreds)


def make_windows(ds: Dataset, window: int):
    """Sliding stride-1 windows; label = last frame's angle (if labeled).

    Returns (ends, labels) where ends are the last-row indices; the caller
    gathers readings lazily to keep memory flat.
    """
    n = len(ds)
    if n < window:
        raise DataError(f"need at least {window} frames for one window, got {n}")
    ends = np.arange(window - 1, n)
    labels = ds.angles[ends] if ds.labeled else None
    return ends, labels


def gather_windows(readings_norm: np.ndarray, ends: np.ndarray, window: int) -> np.ndarray:
    idx = ends[:, None] + np.arange(-window + 1, 1)[None, :]
    return readings_norm[idx]


def train(model: RegressorModel, ds: Dataset, tc: TrainConfig):
    """SGD with momentum and L2 weight decay; returns (model, epoch losses).

    Normalization stats are fitted on `ds` and stored on the model. Batches
    follow a seeded shuffle per epoch; the final partial batch is kept.
    The optimizer descends the unit-scaled MAE (labels mapped to [0, 1] by
    the label scale) for conditioning; the recorded trace is in degrees.
    """
    ds.require_labeled("train")
    if len(ds) < model.config.window:
        raise DataError(f"dataset of {len(ds)} frames is smaller than one window")
    model.norm = normalize_fit(ds, 1.0, 99.0)
    readings_norm = model.norm.apply(ds.readings)
    ends, labels = make_windows(ds, model.config.window)
    n_win = len(ends)
    rng = substream(tc.seed, "train-shuffle")
    velocity = np.zeros_like(model.params)
    trace = []
    it = 0
    for epoch in range(tc.epochs):
        perm = rng.permutation(n_win)
        abs_sum = 0.0
        for start in range(0, n_win, tc.batch):
            sel = perm[start:start + tc.batch]
            x = gather_windows(readings_norm, ends[sel], model.config.window)
            y = labels[sel]
            preds, cache = forward(model, x, train_mode=True)
            residual = preds - y
            batch_abs = float(np.sum(np.abs(residual)))
            if not np.isfinite(batch_abs):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, iteration {it} "
                    f"(lr={lr_at(tc, it):.3e})"
                )
            abs_sum += batch_abs
            grad = backward(model, cache, np.sign(residual) / (len(sel) * model.label_scale))
            lr = lr_at(tc, it)
            velocity *= tc.momentum
            velocity -= lr * (grad + tc.weight_decay * model.params)
            model.params += velocity
            it += 1
        if not np.all(np.isfinite(model.params)):
            raise NumericalError(f"non-finite parameters after epoch {epoch}")
        trace.append(abs_sum / n_win)
    return model, trace


def predict_series(model: RegressorModel, ds: Dataset) -> np.ndarray:
    """Per-frame predictions; early frames pad the window with frame 0."""
    ds.require_nonempty("predict_series")
    if model.norm is None:
        raise ConfigError("model has no normalization stats; train or load it first")
    readings_norm = model.norm.apply(ds.readings)
    W = model.config.window
    n = len(ds)
    out = np.empty(n)
    offsets = np.arange(-W + 1, 1)
    for start in range(0, n, 2048):
        stop = min(start + 2048, n)
        idx = np.clip(np.arange(start, stop)[:, None] + offsets[None, :], 0, None)
        out[start:stop] = forward(model, readings_norm[idx])
    return out


def evaluate_mae(model: RegressorModel, ds: Dataset) -> float:
    """MAE of window predictions against labels on a labeled dataset.

    Uses proper (unpadded) windows only, so every prediction sees real
    history; the first W-1 frames are not scored.
    """
    ds.require_labeled("evaluate_mae")
    ends, labels = make_windows(ds, model.config.window)
    if model.norm is None:
        raise ConfigError("model has no normalization stats")
    readings_norm = model.norm.apply(ds.readings)
    preds = np.empty(len(ends))
    for start in range(0, len(ends), 2048):
        sel = slice(start, min(start + 2048, len(ends)))
        preds[sel] = forward(model, gather_windows(readings_norm, ends[sel], model.config.window))
    return loss_mae(preds, labels)


# ---------------------------------------------------------------------------
# model file format: one JSON header line + raw little-endian float64 params

_MODEL_MAGIC = "suda-model v1"


def save_model(model: RegressorModel, path) -> None:
    header = {
        "format": _MODEL_MAGIC,
        "config": asdict(model.config),
        "norm": None if model.norm is None else {
            "lo": list(model.norm.lo), "hi": list(model.norm.hi),
            "lo_pct": model.norm.lo_pct, "hi_pct": model.norm.hi_pct,
        },
        "label_scale": model.label_scale,
        "param_count": int(model.params.size),
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(model.params, dtype="<f8").tobytes())


def load_model(path) -> RegressorModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise SchemaError(f"{path}: not a model file") from None
    if header.get("format") != _MODEL_MAGIC:
        raise SchemaError(f"{path}: unsupported model format {header.get('format')!r}")
    cfg = RegressorConfig(**header["config"])
    params = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    if params.size != header["param_count"] or params.size != param_count(cfg):
        raise SchemaError(f"{path}: parameter payload size mismatch")
    norm = None
    if header["norm"] is not None:
        hn = header["norm"]
        norm = NormStats(tuple(hn["lo"]), tuple(hn["hi"]), hn["lo_pct"], hn["hi_pct"])
    return RegressorModel(cfg, params.copy(), norm, header["label_scale"])
