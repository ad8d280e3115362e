"""Metrics, multi-seed aggregation, dataset-size sweeps, and report tables."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError
from .pipeline import BenchmarkSpec, adapt, benchmark_train_config
from .regressor import RegressorConfig, evaluate_mae, loss_mae

# shared definition: the evaluation metric is the training loss
mae_deg = loss_mae


def aggregate(runs) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1) of per-run scalars."""
    runs = np.asarray(runs, dtype=np.float64)
    if runs.ndim != 1 or len(runs) < 2:
        raise DataError(f"aggregate needs at least 2 runs, got shape {runs.shape}")
    return float(runs.mean()), float(runs.std(ddof=1))


def fmt_mean_std(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _sweep_epochs(spec: BenchmarkSpec, size: int, batch: int) -> int:
    if not spec.sweep_steps:
        return spec.epochs
    windows = size - RegressorConfig().window + 1
    batches = -(-windows // batch)
    return max(1, -(-spec.sweep_steps // batches))


def _sweep_cell(args):
    d_s, d_t_train, d_t_test, spec, size, seed = args
    truncated = d_s.slice(0, size, replace(d_s.meta,
                                           provenance=f"{d_s.meta.provenance}; truncated:{size}"))
    tc = benchmark_train_config(spec, seed)
    tc = replace(tc, epochs=_sweep_epochs(spec, size, tc.batch))
    result = adapt(truncated, d_t_train, spec.bins, spec.proxies, train_cfg=tc)
    return size, seed, evaluate_mae(result.model, d_t_test), tc.epochs


def size_sweep(sizes, d_s: Dataset, d_t_train: Dataset, d_t_test: Dataset,
               spec: BenchmarkSpec, progress=None, workers: int = 1):
    """MAE of the adaptation pipeline vs. source dataset size.

    For each size the source set is truncated chronologically and the whole
    pipeline (support fits, registration, training) reruns; the target data
    and test set stay fixed. The optimizer step count is equalized across
    sizes (spec.sweep_steps) by raising the epoch count for small sets, so
    the curve reflects data coverage rather than step budget. Each size
    runs once per training seed; cells are independent and can fan out over
    `workers` processes without affecting results. Returns (rows, table):
    rows are (size, seed, mae), table rows are (size, mean, std) by size.
    """
    sizes = list(sizes)
    if not sizes or any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError(f"sizes must be ascending, got {sizes}")
    floor = max(2 * spec.bins, 50)
    if sizes[0] < floor:
        raise ConfigError(f"smallest size {sizes[0]} is below the support-fit minimum {floor}")
    if sizes[-1] > len(d_s):
        raise ConfigError(f"largest size {sizes[-1]} exceeds the source set ({len(d_s)} frames)")

    cells = [(d_s, d_t_train, d_t_test, spec, size, seed)
             for size in sizes for seed in spec.train_seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_cell, cells))
    else:
        outcomes = [_sweep_cell(c) for c in cells]

    rows = []
    for (size, seed, mae, epochs) in outcomes:
        rows.append((size, seed, mae))
        if progress:
            progress(f"size {size} seed {seed} epochs {epochs}: mae {mae:.3f}")
    table = []
    k = len(spec.train_seeds)
    for i, size in enumerate(sizes):
        maes = [outcomes[i * k + j][2] for j in range(k)]
        if len(maes) >= 2:
            mean, std = aggregate(maes)
        else:
            mean, std = maes[0], 0.0
        table.append((size, mean, std))
    return rows, table


def save_sweep_csv(rows, path) -> None:
    """CSV `size,seed,mae` with full-precision mae values."""
    if not rows:
        raise DataError("no sweep rows to write")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("size,seed,mae\n")
        for size, seed, mae in rows:
            fh.write(f"{size},{seed},{mae!r}\n")


def render_report(rows, headers, path=None) -> str:
    """Render a deterministic markdown table; optionally write it to a file.

    Cells are used verbatim when strings; floats are formatted with %.4f.
    """
    if not rows:
        raise DataError("cannot render a report from an empty result set")
    if any(len(r) != len(headers) for r in rows):
        raise DataError("row widths do not match the header")

    def cell(v):
        return v if isinstance(v, str) else (f"{v:.4f}" if isinstance(v, float) else str(v))

    grid = [[cell(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in grid)) for i, h in enumerate(headers)]
    lines = [
        "| " + " | ".join(h.ljust(w) for h, w in zip(headers, widths)) + " |",
        "|" + "|".join("-" * (w + 2) for w in widths) + "|",
    ]
    for row in grid:
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def method_table(results, path=None) -> str:
    """Method-by-MAE table: rows of (label, [per-seed maes])."""
    rows = []
    for label, maes in results:
        mean, std = aggregate(maes)
        rows.append((label, fmt_mean_std(mean, std)))
    return render_report(rows, ["Method", "MAE (deg)"], path)
