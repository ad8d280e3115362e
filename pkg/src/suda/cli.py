"""Command-line surface: one subcommand per workflow step.

Every subcommand takes --seed and --out, prints a one-line summary to
stdout, writes its artifacts under --out, and exits 0 on success, 1 on a
library error (with a machine-readable line on stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bvh as bvh_mod
from . import plots
from .baselines import DIDA_METHODS, DidaConfig, save_loss_trace, train_dida
from .data import load_csv, save_csv, split_chrono, strip_labels
from .errors import ConfigError, SudaError
from .evaluate import method_table, render_report, save_sweep_csv, size_sweep
from .pipeline import BenchmarkSpec, adapt, train_supervised
from .regressor import (
    RegressorConfig,
    TrainConfig,
    evaluate_mae,
    init_model,
    load_model,
    predict_series,
    save_model,
    train,
)
from .simulate import load_pair_config, make_domain_pair, simulate_from_angles
from .support import (
    RegistrationMap,
    fit_support,
    load_curve,
    save_curve,
    support_evidence,
)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, seed=args.seed)


def cmd_simulate(args):
    out = _outdir(args)
    source, target = load_pair_config(args.config)
    frames_t = args.target_frames or args.frames
    if args.angles:
        angles = bvh_mod.load_angle_csv(args.angles)
        d_s = simulate_from_angles(angles, source.sensor, args.seed, domain="source")
        _, d_t, d_t_eval = make_domain_pair(source, target, 1, frames_t,
                                            seed_source=args.seed, seed_target=args.seed + 1)
    else:
        d_s, d_t, d_t_eval = make_domain_pair(source, target, args.frames, frames_t,
                                              seed_source=args.seed, seed_target=args.seed + 1)
    save_csv(d_s, os.path.join(out, "source.csv"))
    if args.split > 0.0:
        train_labeled, test = split_chrono(d_t_eval, args.split)
        save_csv(strip_labels(train_labeled), os.path.join(out, "target_train.csv"))
        save_csv(train_labeled, os.path.join(out, "target_train_labeled.csv"))
        save_csv(test, os.path.join(out, "target_test.csv"))
        print(f"simulate: wrote source.csv ({len(d_s)} frames) and target splits "
              f"{len(train_labeled)}/{len(test)} to {out}")
    else:
        save_csv(d_t, os.path.join(out, "target_train.csv"))
        save_csv(d_t_eval, os.path.join(out, "target_eval.csv"))
        print(f"simulate: wrote source.csv ({len(d_s)} frames), target_train.csv and "
              f"target_eval.csv ({len(d_t_eval)} frames) to {out}")


def cmd_bvh_angle(args):
    out = _outdir(args)
    doc = bvh_mod.load_bvh(args.file)
    triple = bvh_mod.JointTriple(args.parent, args.vertex, args.child)
    path = os.path.join(out, "angles.csv")
    bvh_mod.export_angles(doc, triple, path)
    angles = bvh_mod.load_angle_csv(path)
    print(f"bvh-angle: wrote {len(angles)} angles to {path} "
          f"(range {angles.min():.2f}..{angles.max():.2f} deg)")


def cmd_fit_support(args):
    out = _outdir(args)
    ds = load_csv(args.data, labeled=False)
    curve = fit_support(ds, args.bins, args.proxies)
    path = os.path.join(out, "curve.txt")
    save_curve(curve, path)
    print(f"fit-support: wrote {path} (total arc length {curve.total_len:.6f}, "
          f"{curve.n + 1} proxies)")


def cmd_register(args):
    out = _outdir(args)
    curve_s = load_curve(args.source_curve)
    curve_t = load_curve(args.target_curve)
    rmap = RegistrationMap(curve_s, curve_t)
    ds = load_csv(args.data, labeled=False)
    from .support import register as register_points

    registered = register_points(rmap, ds.readings)
    from .data import Dataset, DatasetMeta

    reg_ds = Dataset(ds.t, registered, None,
                     DatasetMeta(domain="target", provenance="registered; " + ds.meta.provenance))
    path = os.path.join(out, "registered.csv")
    save_csv(reg_ds, path)
    print(f"register: wrote {path} ({len(reg_ds)} frames)")


def _save_trace(trace, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_mae\n")
        for e, v in enumerate(trace):
            fh.write(f"{e},{v!r}\n")


def cmd_adapt(args):
    out = _outdir(args)
    d_s = load_csv(args.source, labeled=True)
    d_t = load_csv(args.target, labeled=False)
    result = adapt(d_s, d_t, args.bins, args.proxies, train_cfg=_train_cfg(args))
    save_model(result.model, os.path.join(out, "model.bin"))
    save_curve(result.curve_source, os.path.join(out, "source_curve.txt"))
    save_curve(result.curve_target, os.path.join(out, "target_curve.txt"))
    _save_trace(result.trace, os.path.join(out, "trace.csv"))
    print(f"adapt: wrote model.bin (final epoch train MAE {result.trace[-1]:.4f} deg) to {out}")


def cmd_train(args):
    out = _outdir(args)
    ds = load_csv(args.data, labeled=True)
    model, trace = train_supervised(ds, train_cfg=_train_cfg(args))
    save_model(model, os.path.join(out, "model.bin"))
    _save_trace(trace, os.path.join(out, "trace.csv"))
    print(f"train: wrote model.bin (final epoch train MAE {trace[-1]:.4f} deg) to {out}")


def cmd_baseline(args):
    out = _outdir(args)
    d_s = load_csv(args.source, labeled=True)
    d_t = load_csv(args.target, labeled=False) if args.target else None
    model = init_model(RegressorConfig(), args.seed)
    dida = DidaConfig(method=args.method, transfer_weight=args.transfer_weight)
    model, sup_trace, tr_trace = train_dida(dida, model, d_s, d_t, _train_cfg(args))
    save_model(model, os.path.join(out, "model.bin"))
    save_loss_trace(sup_trace, tr_trace, os.path.join(out, "loss_trace.csv"))
    print(f"baseline: method {args.method} wrote model.bin and loss_trace.csv "
          f"(final sup {sup_trace[-1]:.4f}, transfer {tr_trace[-1]:.6f}) to {out}")


def cmd_eval(args):
    out = _outdir(args)
    model = load_model(args.model)
    ds = load_csv(args.test, labeled=True)
    mae = evaluate_mae(model, ds)
    with open(os.path.join(out, "mae.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{mae!r}\n")
    print(f"eval: mae_deg={mae:.6f}")


def cmd_predict(args):
    out = _outdir(args)
    model = load_model(args.model)
    ds = load_csv(args.data, labeled=False)
    preds = predict_series(model, ds)
    path = os.path.join(out, "predictions.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,angle_deg\n")
        for t, p in zip(ds.t, preds):
            fh.write(f"{t},{p:.6f}\n")
    print(f"predict: wrote {path} ({len(preds)} frames)")


def cmd_sweep(args):
    out = _outdir(args)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    d_s = load_csv(args.source, labeled=True)
    d_t = load_csv(args.target, labeled=False)
    d_test = load_csv(args.test, labeled=True)
    spec = BenchmarkSpec(bins=args.bins, proxies=args.proxies, epochs=args.epochs,
                         train_seeds=seeds, sweep_steps=args.steps)
    rows, table = size_sweep(sizes, d_s, d_t, d_test, spec, workers=args.workers,
                             progress=lambda msg: print(f"  {msg}", file=sys.stderr))
    save_sweep_csv(rows, os.path.join(out, "sweep.csv"))
    report_rows = [(str(size), f"{mean:.4f}", f"{std:.4f}") for size, mean, std in table]
    render_report(report_rows, ["size", "mae_mean", "mae_std"],
                  os.path.join(out, "sweep_report.md"))
    print(f"sweep: wrote sweep.csv and sweep_report.md ({len(rows)} runs) to {out}")


def cmd_evidence(args):
    out = _outdir(args)
    d_s = load_csv(args.source, labeled=True)
    d_t = load_csv(args.target, labeled=True)
    curve_s = fit_support(d_s, args.bins, args.proxies)
    curve_t = fit_support(d_t, args.bins, args.proxies)
    table = support_evidence(curve_s, d_s, curve_t, d_t, args.k)
    path = os.path.join(out, "evidence.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_lo,bin_hi,mean_source,mean_target,count_source,count_target\n")
        for i in range(table.k):
            fh.write(f"{float(table.edges[i])!r},{float(table.edges[i + 1])!r},"
                     f"{float(table.mean_source[i])!r},{float(table.mean_target[i])!r},"
                     f"{table.count_source[i]},{table.count_target[i]}\n")
    plots.plot_evidence(table, os.path.join(out, "evidence.svg"))
    gap = table.common_gap()
    print(f"evidence: wrote evidence.csv and evidence.svg "
          f"(max per-bin gap {gap.max():.4f} deg over {len(gap)} common bins)")


def cmd_plot(args):
    out = _outdir(args)
    path = os.path.join(out, f"{args.kind}.svg")
    if args.kind == "support-overlay":
        d_s = load_csv(args.source, labeled=False)
        d_t = load_csv(args.target, labeled=False)
        curve_s = fit_support(d_s, args.bins, args.proxies)
        curve_t = fit_support(d_t, args.bins, args.proxies)
        plots.plot_support_overlay(curve_s, d_s, curve_t, d_t, path)
    elif args.kind == "registration-lines":
        d_s = load_csv(args.source, labeled=False)
        d_t = load_csv(args.target, labeled=False)
        curve_s = fit_support(d_s, args.bins, args.proxies)
        curve_t = fit_support(d_t, args.bins, args.proxies)
        plots.plot_registration_lines(RegistrationMap(curve_s, curve_t), d_s, path)
    elif args.kind == "evidence-curves":
        d_s = load_csv(args.source, labeled=True)
        d_t = load_csv(args.target, labeled=True)
        curve_s = fit_support(d_s, args.bins, args.proxies)
        curve_t = fit_support(d_t, args.bins, args.proxies)
        plots.plot_evidence(support_evidence(curve_s, d_s, curve_t, d_t, args.k), path)
    elif args.kind == "prediction-trace":
        model = load_model(args.model)
        ds = load_csv(args.test, labeled=True)
        preds = predict_series(model, strip_labels(ds))
        plots.plot_prediction_trace(ds.angles, preds, path)
    else:  # loss-trace
        rows = np.loadtxt(args.trace, delimiter=",", skiprows=1, ndmin=2)
        plots.plot_loss_trace(rows[:, 1], rows[:, 2], path)
    print(f"plot: wrote {path}")


def cmd_report(args):
    out = _outdir(args)
    with open(args.results, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0] != "method,seed,mae":
        raise ConfigError(f"{args.results}: expected header 'method,seed,mae'")
    by_method: dict[str, list[float]] = {}
    order: list[str] = []
    for ln in lines[1:]:
        method, _seed, mae = ln.split(",")
        if method not in by_method:
            by_method[method] = []
            order.append(method)
        by_method[method].append(float(mae))
    results = [(m, by_method[m]) for m in order]
    path = os.path.join(out, "report.md")
    method_table(results, path)
    print(f"report: wrote {path} ({len(order)} methods)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="suda",
                                 description="support-based domain adaptation workflows")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, epochs_default=3):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")
        if epochs_default is not None:
            p.add_argument("--epochs", type=int, default=epochs_default)

    p = sub.add_parser("simulate", help="generate source/target CSVs from a pair config")
    p.add_argument("--config", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--target-frames", type=int, default=0)
    p.add_argument("--split", type=float, default=0.0,
                   help="also split the target chronologically (e.g. 0.7)")
    p.add_argument("--angles", default="", help="drive the source with a frame,angle_deg CSV")
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bvh-angle", help="extract a joint-angle CSV from a BVH file")
    p.add_argument("--file", required=True)
    p.add_argument("--parent", required=True)
    p.add_argument("--vertex", required=True)
    p.add_argument("--child", required=True)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_bvh_angle)

    p = sub.add_parser("fit-support", help="fit and serialize a support curve")
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--proxies", type=int, default=100)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_fit_support)

    p = sub.add_parser("register", help="register a dataset through two fitted curves")
    p.add_argument("--source-curve", required=True)
    p.add_argument("--target-curve", required=True)
    p.add_argument("--data", required=True)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("adapt", help="end-to-end adaptation: fit, register, train")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--proxies", type=int, default=100)
    common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("train", help="supervised training on a labeled CSV")
    p.add_argument("--data", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="train a distribution-based baseline")
    p.add_argument("--method", required=True, choices=DIDA_METHODS)
    p.add_argument("--source", required=True)
    p.add_argument("--target", default="")
    p.add_argument("--transfer-weight", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="MAE of a model on a labeled CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-frame predictions for a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="MAE vs source dataset size")
    p.add_argument("--sizes", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seeds", default="0,1,2,3")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--proxies", type=int, default=100)
    p.add_argument("--steps", type=int, default=1876,
                   help="equalized optimizer steps per sweep cell (0: use --epochs)")
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent sweep cells (results independent of this)")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evidence", help="label-vs-parameter agreement of two labeled sets")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--proxies", type=int, default=100)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("plot", help="render an SVG diagnostic")
    p.add_argument("--kind", required=True,
                   choices=["support-overlay", "registration-lines", "evidence-curves",
                            "prediction-trace", "loss-trace"])
    p.add_argument("--source", default="")
    p.add_argument("--target", default="")
    p.add_argument("--model", default="")
    p.add_argument("--test", default="")
    p.add_argument("--trace", default="")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--proxies", type=int, default=100)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("report", help="aggregate a method,seed,mae CSV into a table")
    p.add_argument("--results", required=True)
    common(p, epochs_default=None)
    p.set_defaults(func=cmd_report)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (SudaError, OSError) as exc:
        sys.stderr.write(f'error kind={type(exc).__name__} msg="{exc}"\n')
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
