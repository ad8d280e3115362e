"""Distribution-alignment baselines sharing the regressor architecture.

All three transfer losses attach at the FC2 output (the 128-d feature
layer): multi-kernel MMD, CORAL on feature covariances, and a domain
classifier behind a gradient-reversal layer. Source-only is the degenerate
case with no transfer term. Gradients w.r.t. features are analytic and flow
into the shared network through the regressor's backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, normalize_fit
from .errors import ConfigError, DataError, NumericalError
from .regressor import (
    RegressorModel,
    TrainConfig,
    backward,
    forward,
    gather_windows,
    lr_at,
    make_windows,
)
from .rng import substream

DIDA_METHODS = ("source-only", "mmd", "coral", "adversarial")


@dataclass(frozen=True)
class DidaConfig:
    method: str = "source-only"
    transfer_weight: float = 1.0
    mmd_bandwidth_scales: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    adv_hidden: int = 64

    def __post_init__(self):
        if self.method not in DIDA_METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {DIDA_METHODS}")
        if self.transfer_weight < 0:
            raise ConfigError(f"transfer_weight must be >= 0, got {self.transfer_weight}")
        if not self.mmd_bandwidth_scales or min(self.mmd_bandwidth_scales) <= 0:
            raise ConfigError("at least one positive bandwidth scale is required")
        if self.adv_hidden < 1:
            raise ConfigError("adv_hidden must be >= 1")


def _check_batches(feat_s, feat_t):
    feat_s = np.asarray(feat_s, dtype=np.float64)
    feat_t = np.asarray(feat_t, dtype=np.float64)
    if feat_s.ndim != 2 or feat_t.ndim != 2 or feat_s.shape[1] != feat_t.shape[1]:
        raise DataError(f"feature batches must share dimension, got {feat_s.shape} vs {feat_t.shape}")
    if feat_s.shape[0] < 2 or feat_t.shape[0] < 2:
        raise DataError("each feature batch needs at least 2 rows")
    return feat_s, feat_t


def median_bandwidth(feat_s, feat_t) -> float:
    """Median pairwise distance of the joint batch (the usual heuristic)."""
    joint = np.concatenate([feat_s, feat_t], axis=0)
    d2 = np.sum((joint[:, None, :] - joint[None, :, :]) ** 2, axis=-1)
    off = d2[~np.eye(len(joint), dtype=bool)]
    med = float(np.median(np.sqrt(off)))
    return med if med > 1e-12 else 1.0


def mmd_loss(feat_s, feat_t, bandwidths, with_grad: bool = False):
    """Biased V-statistic MMD with a sum of Gaussian kernels.

    Kernel: k(x, y) = exp(-||x - y||^2 / (2 h^2)) summed over bandwidths h.
    Returns the scalar, or (scalar, grad_s, grad_t) with with_grad=True.
    """
    feat_s, feat_t = _check_batches(feat_s, feat_t)
    bandwidths = np.asarray(bandwidths, dtype=np.float64)
    if bandwidths.ndim != 1 or len(bandwidths) == 0 or bandwidths.min() <= 0:
        raise ConfigError("bandwidths must be a non-empty positive sequence")
    ns, nt = len(feat_s), len(feat_t)

    def pair(a, b):
        diff = a[:, None, :] - b[None, :, :]
        return diff, np.sum(diff * diff, axis=-1)

    diff_ss, d2_ss = pair(feat_s, feat_s)
    diff_tt, d2_tt = pair(feat_t, feat_t)
    diff_st, d2_st = pair(feat_s, feat_t)

    loss = 0.0
    gs = np.zeros_like(feat_s)
    gt = np.zeros_like(feat_t)
    for h in bandwidths:
        k_ss = np.exp(-d2_ss / (2.0 * h * h))
        k_tt = np.exp(-d2_tt / (2.0 * h * h))
        k_st = np.exp(-d2_st / (2.0 * h * h))
        loss += k_ss.mean() + k_tt.mean() - 2.0 * k_st.mean()
        if with_grad:
            # d k(x,y)/dx = k * (y - x) / h^2; V-statistic means double-count
            # symmetric pairs, hence the factor 2 on the same-domain terms
            inv = 1.0 / (h * h)
            gs += (-2.0 * inv / (ns * ns)) * np.einsum("ij,ijk->ik", k_ss, diff_ss)
            gs -= (-2.0 * inv / (ns * nt)) * np.einsum("ij,ijk->ik", k_st, diff_st)
            gt += (-2.0 * inv / (nt * nt)) * np.einsum("ij,ijk->ik", k_tt, diff_tt)
            gt -= (2.0 * inv / (ns * nt)) * np.einsum("ij,ijk->jk", k_st, diff_st)
    if with_grad:
        return float(loss), gs, gt
    return float(loss)


def coral_loss(feat_s, feat_t, with_grad: bool = False):
    """||C_s - C_t||_F^2 / (4 d^2) with unbiased sample covariances."""
    feat_s, feat_t = _check_batches(feat_s, feat_t)
    d = feat_s.shape[1]
    xs = feat_s - feat_s.mean(axis=0)
    xt = feat_t - feat_t.mean(axis=0)
    cs = xs.T @ xs / (len(feat_s) - 1)
    ct = xt.T @ xt / (len(feat_t) - 1)
    diff = cs - ct
    loss = float(np.sum(diff * diff) / (4.0 * d * d))
    if not with_grad:
        return loss
    dC = diff / (2.0 * d * d)  # symmetric
    gs = 2.0 * xs @ dC / (len(feat_s) - 1)
    gt = -2.0 * xt @ dC / (len(feat_t) - 1)
    gs -= gs.mean(axis=0)
    gt -= gt.mean(axis=0)
    return loss, gs, gt


class DomainClassifier:
    """Two-layer logistic domain discriminator used behind the reversal layer."""

    def __init__(self, in_dim: int, hidden: int, seed: int):
        rng = substream(seed, "domain-classifier-init")
        b1 = 1.0 / np.sqrt(in_dim)
        b2 = 1.0 / np.sqrt(hidden)
        self.w1 = rng.uniform(-b1, b1, size=(hidden, in_dim))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.uniform(-b2, b2, size=(1, hidden))
        self.b2 = np.zeros(1)

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, feats):
        z1 = feats @ self.w1.T + self.b1
        a1 = np.maximum(z1, 0.0)
        logit = (a1 @ self.w2.T + self.b2)[:, 0]
        return logit, a1

    def loss_and_grads(self, feats, labels):
        """Mean BCE on domain labels; returns (loss, dfeats, param grads)."""
        n = len(feats)
        logit, a1 = self.forward(feats)
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + np.exp(-logit))
        eps = 1e-12
        loss = float(-np.mean(labels * np.log(p + eps) + (1 - labels) * np.log(1 - p + eps)))
        dlogit = (p - labels) / n
        gw2 = dlogit[None, :] @ a1
        gb2 = np.array([dlogit.sum()])
        da1 = np.where(a1 > 0.0, dlogit[:, None] * self.w2, 0.0)
        gw1 = da1.T @ feats
        gb1 = da1.sum(axis=0)
        dfeats = da1 @ self.w1
        return loss, dfeats, [gw1, gb1, gw2, gb2]


def adversarial_step(feat_s, feat_t, classifier: DomainClassifier, weight: float):
    """Domain-classification loss plus reversed feature gradients.

    Source carries domain label 0, target label 1. The returned feature
    gradients are already multiplied by -weight (the reversal), while the
    classifier gradients descend the plain BCE.
    """
    feat_s, feat_t = _check_batches(feat_s, feat_t)
    feats = np.concatenate([feat_s, feat_t], axis=0)
    labels = np.concatenate([np.zeros(len(feat_s)), np.ones(len(feat_t))])
    loss, dfeats, cls_grads = classifier.loss_and_grads(feats, labels)
    if not np.isfinite(loss):
        raise NumericalError("non-finite domain loss")
    rev_s = -weight * dfeats[:len(feat_s)]
    rev_t = -weight * dfeats[len(feat_s):]
    return loss, rev_s, rev_t, cls_grads


def train_dida(dida: DidaConfig, model: RegressorModel, d_s: Dataset, d_t: Dataset | None,
               tc: TrainConfig):
    """Train with supervised MAE on source plus a weighted transfer loss.

    Feature batches from both domains are taken at the FC2 output with the
    same batch size; target windows are drawn with replacement from their
    own stream. Returns (model, supervised trace, transfer trace).
    """
    d_s.require_labeled("train_dida")
    if len(d_s) < model.config.window:
        raise DataError("source dataset smaller than one window")
    use_transfer = dida.method != "source-only" and dida.transfer_weight > 0.0
    if dida.method != "source-only" and (d_t is None or len(d_t) == 0):
        raise DataError(f"method {dida.method!r} needs a non-empty target dataset")

    model.norm = normalize_fit(d_s, 1.0, 99.0)
    src_norm = model.norm.apply(d_s.readings)
    ends_s, labels_s = make_windows(d_s, model.config.window)
    n_win = len(ends_s)

    tgt_norm = None
    ends_t = None
    if use_transfer:
        if len(d_t) < model.config.window:
            raise DataError("target dataset smaller than one window")
        tgt_norm = model.norm.apply(d_t.readings)  # same stats: no hidden calibration
        ends_t, _ = make_windows(d_t, model.config.window)

    classifier = None
    cls_velocity = None
    if dida.method == "adversarial":
        classifier = DomainClassifier(model.config.fc2_out, dida.adv_hidden, tc.seed)
        cls_velocity = [np.zeros_like(p) for p in classifier.params()]

    shuffle_rng = substream(tc.seed, "train-shuffle")
    target_rng = substream(tc.seed, "target-batches")
    velocity = np.zeros_like(model.params)
    sup_trace, tr_trace = [], []
    it = 0
    for epoch in range(tc.epochs):
        perm = shuffle_rng.permutation(n_win)
        sup_sum = 0.0
        tr_sum = 0.0
        n_batches = 0
        for start in range(0, n_win, tc.batch):
            sel = perm[start:start + tc.batch]
            xs = gather_windows(src_norm, ends_s[sel], model.config.window)
            ys = labels_s[sel]
            preds, cache_s = forward(model, xs, train_mode=True)
            residual = preds - ys
            sup_loss = float(np.mean(np.abs(residual)))
            if not np.isfinite(sup_loss):
                raise NumericalError(f"non-finite supervised loss at epoch {epoch}, iter {it}")
            # unit-scaled MAE objective, matching the supervised trainer
            dpreds = np.sign(residual) / (len(sel) * model.label_scale)

            transfer_loss = 0.0
            grad = None
            if use_transfer:
                pick = target_rng.integers(0, len(ends_t), size=len(sel))
                xt = gather_windows(tgt_norm, ends_t[pick], model.config.window)
                _, cache_t = forward(model, xt, train_mode=True)
                feat_s = cache_s["a2"]
                feat_t = cache_t["a2"]
                # the whole objective (supervised + weighted transfer) sits in
                # unit label scale, so the relative weighting matches a plain
                # degree-scale `mae + weight * transfer` composition
                lam = dida.transfer_weight / model.label_scale
                if dida.method == "mmd":
                    bws = dida.mmd_bandwidth_scales
                    h0 = median_bandwidth(feat_s, feat_t)
                    transfer_loss, gfs, gft = mmd_loss(
                        feat_s, feat_t, [s * h0 for s in bws], with_grad=True)
                    gfs, gft = lam * gfs, lam * gft
                elif dida.method == "coral":
                    transfer_loss, gfs, gft = coral_loss(feat_s, feat_t, with_grad=True)
                    gfs, gft = lam * gfs, lam * gft
                else:
                    transfer_loss, gfs, gft, cls_grads = adversarial_step(
                        feat_s, feat_t, classifier, lam)
                    lr = lr_at(tc, it)
                    for p, v, gp in zip(classifier.params(), cls_velocity, cls_grads):
                        v *= tc.momentum
                        v -= lr * gp
                        p += v
                grad = backward(model, cache_s, dpreds, dfeat2=gfs)
                grad += backward(model, cache_t, None, dfeat2=gft)
            else:
                grad = backward(model, cache_s, dpreds)

            sup_sum += sup_loss * len(sel)
            tr_sum += transfer_loss
            n_batches += 1
            lr = lr_at(tc, it)
            velocity *= tc.momentum
            velocity -= lr * (grad + tc.weight_decay * model.params)
            model.params += velocity
            it += 1
        if not np.all(np.isfinite(model.params)):
            raise NumericalError(f"non-finite parameters after epoch {epoch}")
        sup_trace.append(sup_sum / n_win)
        tr_trace.append(tr_sum / n_batches)
    return model, sup_trace, tr_trace


def save_loss_trace(sup_trace, tr_trace, path) -> None:
    """CSV `epoch,supervised_loss,transfer_loss` (one row per epoch)."""
    if len(sup_trace) != len(tr_trace) or not sup_trace:
        raise DataError("traces must be non-empty and equal length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,supervised_loss,transfer_loss\n")
        for e, (s, t) in enumerate(zip(sup_trace, tr_trace)):
            fh.write(f"{e},{s!r},{t!r}\n")
