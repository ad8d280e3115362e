"""Hand-rolled SVG plots: dependency-free, diffable, byte-deterministic.

Every coordinate is formatted with a fixed precision and nothing
time-dependent is emitted, so identical inputs always produce identical
bytes. Five artifact kinds cover the diagnostics the harness needs:
support overlays, registration correspondences, parameter-vs-label
evidence curves, prediction traces, and training-loss traces.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import DataError
from .support import EvidenceTable, RegistrationMap, SupportCurve, register

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 64, 16, 28, 44

_COLORS = {
    "source": "#d43d3d",
    "target": "#e8962f",
    "proxy": "#222222",
    "pred": "#2b6fd4",
    "truth": "#3aa655",
    "line": "#888888",
}


def _f(v: float) -> str:
    return f"{v:.3f}"


class SvgCanvas:
    """Minimal data-space SVG canvas with linear axes."""

    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        x0, x1 = xlim
        y0, y1 = ylim
        if not (x1 > x0 and y1 > y0):
            raise DataError(f"degenerate plot limits x={xlim} y={ylim}")
        self.xlim = (float(x0), float(x1))
        self.ylim = (float(y0), float(y1))
        self.body: list[str] = []
        self._frame(title, xlabel, ylabel)

    def _px(self, x, y):
        sx = _ML + (x - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * (_W - _ML - _MR)
        sy = _H - _MB - (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * (_H - _MT - _MB)
        return sx, sy

    def _frame(self, title, xlabel, ylabel):
        b = self.body
        b.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
                 'fill="none" stroke="#333333" stroke-width="1"/>')
        if title:
            b.append(f'<text x="{_W // 2}" y="18" text-anchor="middle" font-size="14">{title}</text>')
        if xlabel:
            b.append(f'<text x="{_W // 2}" y="{_H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
        if ylabel:
            b.append(f'<text x="14" y="{_H // 2}" text-anchor="middle" font-size="12" '
                     f'transform="rotate(-90 14 {_H // 2})">{ylabel}</text>')
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = self.xlim[0] + frac * (self.xlim[1] - self.xlim[0])
            yv = self.ylim[0] + frac * (self.ylim[1] - self.ylim[0])
            sx, _ = self._px(xv, self.ylim[0])
            _, sy = self._px(self.xlim[0], yv)
            b.append(f'<line x1="{_f(sx)}" y1="{_H - _MB}" x2="{_f(sx)}" y2="{_H - _MB + 4}" '
                     'stroke="#333333" stroke-width="1"/>')
            b.append(f'<text x="{_f(sx)}" y="{_H - _MB + 16}" text-anchor="middle" font-size="10">{xv:.4g}</text>')
            b.append(f'<line x1="{_ML - 4}" y1="{_f(sy)}" x2="{_ML}" y2="{_f(sy)}" '
                     'stroke="#333333" stroke-width="1"/>')
            b.append(f'<text x="{_ML - 6}" y="{_f(sy + 3)}" text-anchor="end" font-size="10">{yv:.4g}</text>')

    def polyline(self, xs, ys, color, width=1.5, opacity=1.0):
        pts = " ".join(f"{_f(px)},{_f(py)}" for px, py in (self._px(x, y) for x, y in zip(xs, ys)))
        self.body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="{width}" stroke-opacity="{opacity}"/>')

    def dots(self, xs, ys, color, r=1.6, opacity=0.5):
        for x, y in zip(xs, ys):
            px, py = self._px(x, y)
            self.body.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="{r}" fill="{color}" '
                             f'fill-opacity="{opacity}"/>')

    def segments(self, starts, ends, color, width=0.8, opacity=0.6):
        for (xa, ya), (xb, yb) in zip(starts, ends):
            pa = self._px(xa, ya)
            pb = self._px(xb, yb)
            self.body.append(f'<line x1="{_f(pa[0])}" y1="{_f(pa[1])}" x2="{_f(pb[0])}" '
                             f'y2="{_f(pb[1])}" stroke="{color}" stroke-width="{width}" '
                             f'stroke-opacity="{opacity}"/>')

    def legend(self, entries):
        y = _MT + 14
        for label, color in entries:
            self.body.append(f'<rect x="{_W - _MR - 150}" y="{y - 9}" width="10" height="10" fill="{color}"/>')
            self.body.append(f'<text x="{_W - _MR - 136}" y="{y}" font-size="11">{label}</text>')
            y += 16

    def to_svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
                f'viewBox="0 0 {_W} {_H}"><rect width="{_W}" height="{_H}" fill="white"/>')
        return head + "".join(self.body) + "</svg>\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_svg())


def _subsample(arr: np.ndarray, cap: int = 1500) -> np.ndarray:
    if len(arr) <= cap:
        return arr
    step = int(np.ceil(len(arr) / cap))
    return arr[::step]


def plot_support_overlay(curve_s: SupportCurve, d_s: Dataset,
                         curve_t: SupportCurve, d_t: Dataset, path) -> None:
    """Both domains' normalized clouds with their fitted curves and proxies."""
    for ds in (d_s, d_t):
        ds.require_nonempty("plot_support_overlay")
    ps = curve_s.norm.apply(_subsample(d_s.readings))
    pt = curve_t.norm.apply(_subsample(d_t.readings))
    allpts = np.concatenate(
        [ps, pt, curve_s.vertices, curve_t.vertices], axis=0)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * (hi - lo + 1e-9)
    cv = SvgCanvas((lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1]),
                   title="support curves (normalized reading space)",
                   xlabel="channel 1 (normalized)", ylabel="channel 2 (normalized)")
    cv.dots(ps[:, 0], ps[:, 1], _COLORS["source"], opacity=0.25)
    cv.dots(pt[:, 0], pt[:, 1], _COLORS["target"], opacity=0.25)
    cv.polyline(curve_s.vertices[:, 0], curve_s.vertices[:, 1], _COLORS["source"], width=2.0)
    cv.polyline(curve_t.vertices[:, 0], curve_t.vertices[:, 1], _COLORS["target"], width=2.0)
    cv.dots(curve_s.proxies[:, 0], curve_s.proxies[:, 1], _COLORS["proxy"], r=2.2, opacity=0.9)
    cv.dots(curve_t.proxies[:, 0], curve_t.proxies[:, 1], _COLORS["proxy"], r=2.2, opacity=0.9)
    cv.legend([("source", _COLORS["source"]), ("target", _COLORS["target"]),
               ("proxies", _COLORS["proxy"])])
    cv.write(path)


def plot_registration_lines(rmap: RegistrationMap, d_s: Dataset, path,
                            max_lines: int = 300) -> None:
    """Correspondence segments from source samples to registered points
    (raw counts)."""
    d_s.require_nonempty("plot_registration_lines")
    xs = _subsample(d_s.readings, max_lines)
    xt = register(rmap, xs)
    allpts = np.concatenate([xs, xt], axis=0)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    pad = 0.05 * (hi - lo + 1e-9)
    cv = SvgCanvas((lo[0] - pad[0], hi[0] + pad[0]), (lo[1] - pad[1], hi[1] + pad[1]),
                   title="support registration correspondences",
                   xlabel="channel 1 (counts)", ylabel="channel 2 (counts)")
    cv.segments(xs, xt, _COLORS["line"])
    cv.dots(xs[:, 0], xs[:, 1], _COLORS["source"], opacity=0.8)
    cv.dots(xt[:, 0], xt[:, 1], _COLORS["target"], opacity=0.8)
    cv.legend([("source sample", _COLORS["source"]), ("registered", _COLORS["target"])])
    cv.write(path)


def plot_evidence(table: EvidenceTable, path) -> None:
    """Mean label vs arc-length parameter for both domains."""
    centers = 0.5 * (table.edges[:-1] + table.edges[1:])
    ok_s = table.count_source > 0
    ok_t = table.count_target > 0
    if not ok_s.any() or not ok_t.any():
        raise DataError("evidence table has an empty side")
    vals = np.concatenate([table.mean_source[ok_s], table.mean_target[ok_t]])
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.05 * (hi - lo + 1e-9)
    cv = SvgCanvas((0.0, 1.0), (lo - pad, hi + pad),
                   title="label vs support parameter",
                   xlabel="arc-length parameter l", ylabel="mean angle (deg)")
    cv.polyline(centers[ok_s], table.mean_source[ok_s], _COLORS["source"], width=2.0)
    cv.polyline(centers[ok_t], table.mean_target[ok_t], _COLORS["target"], width=2.0)
    cv.dots(centers[ok_s], table.mean_source[ok_s], _COLORS["source"], r=2.4, opacity=1.0)
    cv.dots(centers[ok_t], table.mean_target[ok_t], _COLORS["target"], r=2.4, opacity=1.0)
    cv.legend([("source", _COLORS["source"]), ("target", _COLORS["target"])])
    cv.write(path)


def plot_prediction_trace(labels, preds, path, max_frames: int = 1200) -> None:
    """Ground-truth and predicted angle over time."""
    labels = np.asarray(labels, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    if labels.shape != preds.shape or len(labels) == 0:
        raise DataError("labels and predictions must be equal-length and non-empty")
    n = min(len(labels), max_frames)
    vals = np.concatenate([labels[:n], preds[:n]])
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.05 * (hi - lo + 1e-9)
    cv = SvgCanvas((0.0, float(n)), (lo - pad, hi + pad),
                   title="prediction trace", xlabel="frame", ylabel="angle (deg)")
    t = np.arange(n)
    cv.polyline(t, labels[:n], _COLORS["truth"], width=1.5)
    cv.polyline(t, preds[:n], _COLORS["pred"], width=1.5)
    cv.legend([("truth", _COLORS["truth"]), ("prediction", _COLORS["pred"])])
    cv.write(path)


def plot_loss_trace(sup_trace, tr_trace, path) -> None:
    """Supervised and transfer loss per epoch."""
    sup = np.asarray(sup_trace, dtype=np.float64)
    tr = np.asarray(tr_trace, dtype=np.float64)
    if len(sup) == 0 or sup.shape != tr.shape:
        raise DataError("traces must be non-empty and equal length")
    vals = np.concatenate([sup, tr])
    lo, hi = float(min(vals.min(), 0.0)), float(vals.max())
    pad = 0.05 * (hi - lo + 1e-9)
    cv = SvgCanvas((0.0, float(max(len(sup) - 1, 1))), (lo - pad, hi + pad),
                   title="training losses", xlabel="epoch", ylabel="loss")
    t = np.arange(len(sup))
    cv.polyline(t, sup, _COLORS["source"], width=2.0)
    cv.polyline(t, tr, _COLORS["pred"], width=2.0)
    cv.legend([("supervised", _COLORS["source"]), ("transfer", _COLORS["pred"])])
    cv.write(path)
