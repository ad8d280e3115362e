"""Support-curve estimation, arc-length parameterization, and registration.

The sensor cloud of a hinge-joint motion traces a one-dimensional curve in
reading space (one intrinsic degree of freedom). Each domain's curve is
recovered as a polyline of bin medians along the cloud's principal
direction, parameterized by normalized arc length l in [0, 1], and
quantized into n+1 proxy points at equal arc-length spacing. Registration
maps a source sample to its nearest source proxy and returns the target
proxy with the same index, de-normalized to raw target units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, DatasetMeta, NormStats, normalize_fit
from .errors import ConfigError, CoverageError, DataError, DegenerateDataError, SchemaError

_CHUNK = 8192  # rows per projection block, bounds temporary memory


@dataclass(frozen=True)
class SupportCurve:
    """Oriented polyline through normalized reading space with proxies.

    vertices/cum_len describe the polyline; proxies[i] sits at arc length
    i * total_len / n. Orientation is fixed so the channel-1 coordinate at
    l=1 exceeds the one at l=0 (readings grow with bending).
    """

    norm: NormStats
    vertices: np.ndarray
    cum_len: np.ndarray
    proxies: np.ndarray
    n: int

    @property
    def total_len(self) -> float:
        return float(self.cum_len[-1])

    def point_at(self, l):
        """Polyline point(s) at arc-length fraction l in [0, 1]."""
        l = np.asarray(l, dtype=np.float64)
        s = l * self.total_len
        x = np.interp(s, self.cum_len, self.vertices[:, 0])
        y = np.interp(s, self.cum_len, self.vertices[:, 1])
        return np.stack([x, y], axis=-1)


def curve_from_vertices(norm: NormStats, vertices: np.ndarray, n: int) -> SupportCurve:
    """Build an oriented curve with proxies from polyline vertices
    (normalized space)."""
    if n < 1:
        raise ConfigError(f"proxy count must be >= 1, got {n}")
    vertices = np.asarray(vertices, dtype=np.float64)
    if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 2:
        raise DegenerateDataError("a support polyline needs at least 2 vertices")
    # collapse consecutive duplicates so cumulative arc length is strictly increasing
    keep = np.ones(len(vertices), dtype=bool)
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    keep[1:] = seg > 1e-12
    vertices = vertices[keep]
    if len(vertices) < 2:
        raise DegenerateDataError("support collapsed to a point")
    if vertices[-1, 0] < vertices[0, 0]:
        vertices = vertices[::-1].copy()
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    cum_len = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum_len[-1])
    if total < 1e-9:
        raise DegenerateDataError(f"support arc length {total:g} is degenerate")
    arcs = np.linspace(0.0, total, n + 1)
    px = np.interp(arcs, cum_len, vertices[:, 0])
    py = np.interp(arcs, cum_len, vertices[:, 1])
    proxies = np.stack([px, py], axis=1)
    for a in (vertices, cum_len, proxies):
        a.setflags(write=False)
    return SupportCurve(norm, vertices, cum_len, proxies, n)


def fit_support(ds: Dataset, bins: int = 100, proxies: int = 100) -> SupportCurve:
    """Estimate the support curve of a dataset's sensor cloud.

    Steps: robust 1/99-percentile normalization, principal-direction sort,
    equal-count bin medians as polyline vertices, orientation fix, and
    equal-arc-length proxy placement.
    """
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    if proxies < 1:
        raise ConfigError(f"proxy count must be >= 1, got {proxies}")
    need = max(2 * bins, 50)
    if len(ds) < need:
        raise DataError(f"support fit needs at least {need} frames, got {len(ds)}")

    norm = normalize_fit(ds, 1.0, 99.0)
    pts = norm.apply(ds.readings)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    w, v = np.linalg.eigh(cov)
    direction = v[:, int(np.argmax(w))]
    # deterministic sign for the sort order
    if direction[0] < 0 or (direction[0] == 0 and direction[1] < 0):
        direction = -direction
    order = np.argsort(centered @ direction, kind="stable")

    edges = (np.arange(bins + 1) * len(ds)) // bins
    vertices = np.empty((bins, 2))
    for b in range(bins):
        chunk = pts[order[edges[b]:edges[b + 1]]]
        if len(chunk) == 0:
            raise DataError(f"bin {b} received no samples")
        vertices[b] = np.median(chunk, axis=0)
    return curve_from_vertices(norm, vertices, proxies)


def _project(curve: SupportCurve, q: np.ndarray):
    """Project normalized points onto the polyline.

    Returns (l, dist): arc-length fraction of the closest polyline point and
    the Euclidean distance to it. Ties go to the smaller segment index.
    """
    a = curve.vertices[:-1]
    d = curve.vertices[1:] - curve.vertices[:-1]
    len2 = np.sum(d * d, axis=1)
    seg_len = np.sqrt(len2)
    ls = np.empty(len(q))
    dist = np.empty(len(q))
    for start in range(0, len(q), _CHUNK):
        qq = q[start:start + _CHUNK]
        t = ((qq[:, None, :] - a[None]) * d[None]).sum(-1) / len2[None]
        t = np.clip(t, 0.0, 1.0)
        p = a[None] + t[..., None] * d[None]
        d2 = ((qq[:, None, :] - p) ** 2).sum(-1)
        seg = np.argmin(d2, axis=1)
        rows = np.arange(len(qq))
        ls[start:start + _CHUNK] = (curve.cum_len[seg] + t[rows, seg] * seg_len[seg]) / curve.total_len
        dist[start:start + _CHUNK] = np.sqrt(d2[rows, seg])
    return ls, dist


def param_of(curve: SupportCurve, x):
    """Arc-length parameter l in [0, 1] of reading pair(s) x (raw units).

    Also returns the distance to the curve in normalized units as a
    diagnostic. Scalar input gives scalar outputs.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    q = curve.norm.apply(x.reshape(-1, 2))
    ls, dist = _project(curve, q)
    if single:
        return float(ls[0]), float(dist[0])
    return ls, dist


@dataclass(frozen=True)
class RegistrationMap:
    """Paired source/target curves with a shared proxy count."""

    source: SupportCurve
    target: SupportCurve

    def __post_init__(self):
        if self.source.n != self.target.n:
            raise ConfigError(
                f"proxy counts differ: source {self.source.n}, target {self.target.n}"
            )

    @property
    def n(self) -> int:
        return self.source.n


def register_indices(rmap: RegistrationMap, x) -> np.ndarray:
    """Index of the source proxy nearest to each sample (ties: smaller i)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    q = rmap.source.norm.apply(x)
    idx = np.empty(len(q), dtype=np.int64)
    p = rmap.source.proxies
    for start in range(0, len(q), _CHUNK):
        qq = q[start:start + _CHUNK]
        d2 = ((qq[:, None, :] - p[None]) ** 2).sum(-1)
        idx[start:start + _CHUNK] = np.argmin(d2, axis=1)
    return idx


def register(rmap: RegistrationMap, x):
    """Map source reading pair(s) to registered target readings (raw units)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    idx = register_indices(rmap, x.reshape(-1, 2))
    out = rmap.target.norm.invert(rmap.target.proxies[idx])
    return out[0] if single else out


def build_pseudo_dataset(d_s: Dataset, rmap: RegistrationMap) -> Dataset:
    """Registered source data: target-unit inputs with source labels."""
    d_s.require_nonempty("build_pseudo_dataset")
    d_s.require_labeled("build_pseudo_dataset")
    readings = register(rmap, d_s.readings)
    meta = DatasetMeta(domain="target", provenance="pseudo-registered; " + d_s.meta.provenance,
                       sample_rate_hz=d_s.meta.sample_rate_hz)
    return Dataset(d_s.t, readings, d_s.angles, meta)


@dataclass(frozen=True)
class EvidenceTable:
    """Per-l-bin mean labels of both domains (NaN where a bin is empty)."""

    edges: np.ndarray
    mean_source: np.ndarray
    mean_target: np.ndarray
    count_source: np.ndarray
    count_target: np.ndarray

    @property
    def k(self) -> int:
        return len(self.mean_source)

    def common_gap(self) -> np.ndarray:
        """|source - target| per bin where both sides have samples."""
        both = (self.count_source > 0) & (self.count_target > 0)
        return np.abs(self.mean_source[both] - self.mean_target[both])


def support_evidence(curve_s: SupportCurve, d_s: Dataset,
                     curve_t: SupportCurve, d_t_eval: Dataset,
                     k_bins: int = 20) -> EvidenceTable:
    """Empirically compare label-vs-parameter profiles of the two domains.

    If equal parameter change implies equal label change, the per-bin mean
    labels should coincide; a systematic gap flags a violated premise.
    """
    if k_bins < 1:
        raise ConfigError(f"k_bins must be >= 1, got {k_bins}")
    for name, ds in (("source", d_s), ("target", d_t_eval)):
        ds.require_nonempty(f"support_evidence ({name})")
        ds.require_labeled(f"support_evidence ({name})")

    def binned(curve, ds):
        ls, _ = param_of(curve, ds.readings)
        which = np.clip((ls * k_bins).astype(np.int64), 0, k_bins - 1)
        count = np.bincount(which, minlength=k_bins).astype(np.int64)
        total = np.bincount(which, weights=ds.angles, minlength=k_bins)
        mean = np.full(k_bins, np.nan)
        nz = count > 0
        mean[nz] = total[nz] / count[nz]
        return mean, count

    mean_s, count_s = binned(curve_s, d_s)
    mean_t, count_t = binned(curve_t, d_t_eval)
    if count_s.sum() == 0 or count_t.sum() == 0:
        raise CoverageError("one domain contributed no samples to any bin")
    edges = np.linspace(0.0, 1.0, k_bins + 1)
    return EvidenceTable(edges, mean_s, mean_t, count_s, count_t)


# ---------------------------------------------------------------------------
# curve file format

_CURVE_MAGIC = "suda-support-curve v1"


def save_curve(curve: SupportCurve, path) -> None:
    """Write a curve to its text format (norm stats, vertices, proxies)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_CURVE_MAGIC + "\n")
        n = curve.norm
        fh.write(f"norm {n.lo[0]!r} {n.hi[0]!r} {n.lo[1]!r} {n.hi[1]!r} {n.lo_pct!r} {n.hi_pct!r}\n")
        fh.write(f"n {curve.n}\n")
        fh.write(f"vertices {len(curve.vertices)}\n")
        for vx, vy in curve.vertices:
            fh.write(f"{float(vx)!r} {float(vy)!r}\n")
        fh.write(f"proxies {len(curve.proxies)}\n")
        for px, py in curve.proxies:
            fh.write(f"{float(px)!r} {float(py)!r}\n")


def load_curve(path) -> SupportCurve:
    """Read a curve written by save_curve (exact round-trip)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CURVE_MAGIC:
        raise SchemaError(f"{path}: not a support-curve file")
    try:
        nv = lines[1].split()
        assert nv[0] == "norm"
        norm = NormStats((float(nv[1]), float(nv[3])), (float(nv[2]), float(nv[4])),
                         float(nv[5]), float(nv[6]))
        assert lines[2].split()[0] == "n"
        n = int(lines[2].split()[1])
        assert lines[3].split()[0] == "vertices"
        n_vert = int(lines[3].split()[1])
        rows = lines[4:4 + n_vert]
        vertices = np.array([[float(a) for a in r.split()] for r in rows])
        pk = 4 + n_vert
        assert lines[pk].split()[0] == "proxies"
        n_prox = int(lines[pk].split()[1])
        rows = lines[pk + 1:pk + 1 + n_prox]
        proxies = np.array([[float(a) for a in r.split()] for r in rows])
    except (AssertionError, IndexError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed curve file ({exc})") from None
    if n_prox != n + 1:
        raise SchemaError(f"{path}: expected {n + 1} proxies, found {n_prox}")
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    cum_len = np.concatenate([[0.0], np.cumsum(seg)])
    for a in (vertices, cum_len, proxies):
        a.setflags(write=False)
    return SupportCurve(norm, vertices, cum_len, proxies, n)
