"""Command-line entry point: sample, gen-data, extract-lhg, train, eval, dse.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import dse as dse_mod
from .metrics import class_report, error_report, format_error_table
from .netlist import LogicalHierarchyGraph, NetlistError, extract_lhg
from .oracle import METRICS, OracleParams, records_from_csv, records_to_csv
from .param_space import configs_to_csv
from .pipeline import (
    PROTOCOLS,
    SPLITS,
    DesignSpace,
    configs_from_points,
    load_design_space,
    make_splits,
    metric_targets,
    model_inputs,
    preset_path,
    roi_labels,
    sample_blocks,
    train_surrogate,
)
from .sampling import lhs_strata
from .surrogate import SchemaMismatch, load_model, save_model

EPS_DEFAULT = 0.1


class CliError(Exception):
    """Runtime/data failure reported with exit code 1."""


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def threads_from_env() -> int:
    """Parallelism cap from ACCEL_DSE_THREADS (default 1; all work here is serial)."""
    raw = os.environ.get("ACCEL_DSE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"ACCEL_DSE_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise CliError("ACCEL_DSE_THREADS must be >= 1")
    return n


def _space(args) -> DesignSpace:
    path = Path(args.space) if args.space else preset_path("axiline.json")
    try:
        return load_design_space(path)
    except (OSError, ValueError, KeyError) as e:
        raise CliError(f"cannot load space {path}: {e}") from e


def _oracle(args) -> OracleParams:
    path = Path(args.oracle_params) if args.oracle_params else preset_path("axiline_oracle.json")
    try:
        return OracleParams.load(path)
    except (OSError, ValueError, TypeError) as e:
        raise CliError(f"cannot load oracle params {path}: {e}") from e


# --- sample -------------------------------------------------------------------

def cmd_sample(args) -> int:
    ds = _space(args)
    space = {"arch": ds.arch, "backend": ds.backend, "full": ds.full}[args.part]
    pts = sample_blocks(args.method, len(space), [args.n], args.seed)[0]
    cfgs = configs_from_points(space, pts)
    out = Path(args.out_dir) / (args.output or f"samples_{args.method}.csv")
    atomic_write(out, configs_to_csv(space, cfgs))
    strata = lhs_strata(pts)
    print(f"wrote {len(cfgs)} configurations to {out}")
    for j, name in enumerate(space.names):
        print(f"  {name:<16} strata occupied {len(np.unique(strata[:, j]))}/{args.n}")
    return 0


# --- gen-data -------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    ds = _space(args)
    params = _oracle(args)
    if any(n < 1 for n in args.n_arch + args.n_knobs):
        raise CliError("split sizes must be positive")
    if args.protocol == "unseen-backend" and len(args.n_knobs) != 3:
        raise CliError("unseen-backend needs three knob counts (train val test)")
    if args.protocol == "unseen-arch" and len(args.n_arch) != 3:
        raise CliError("unseen-arch needs three architecture counts (train val test)")
    split = make_splits(ds, params, args.protocol, args.eps, args.seed, args.n_arch, args.n_knobs, args.method)
    out = Path(args.out_dir)
    for s in SPLITS:
        atomic_write(out / f"{s}.csv", records_to_csv(ds.arch, split.records[s]))
    for d, g in split.graphs.items():
        atomic_write(out / "lhg" / f"{d}.json", g.dumps())
    manifest = dict(split.manifest)
    manifest.update(
        space=ds.to_json(),
        oracle_params=params.to_json(),
        files={s: f"{s}.csv" for s in SPLITS},
        lhg_dir="lhg",
    )
    write_json(out / "manifest.json", manifest)
    print(f"{args.protocol}: " + ", ".join(f"{s} {len(split.records[s])} rows" for s in SPLITS) + f" -> {out}")
    return 0


# --- extract-lhg ------------------------------------------------------------------

def cmd_extract_lhg(args) -> int:
    try:
        text = Path(args.netlist).read_text()
    except OSError as e:
        raise CliError(f"cannot read netlist: {e}") from e
    try:
        lhg = extract_lhg(text, args.top)
    except NetlistError as e:
        raise CliError(f"{args.netlist}: {e}") from e
    out = Path(args.out_dir) / (args.output or f"{args.top}.lhg.json")
    atomic_write(out, json.dumps(lhg.to_json(), indent=1) + "\n")
    print(f"{lhg.n_nodes} nodes, {len(lhg.edges)} edges -> {out}")
    return 0


# --- train / eval -------------------------------------------------------------------

def _load_split_dir(data_dir: Path):
    try:
        manifest = json.loads((data_dir / "manifest.json").read_text())
        ds = DesignSpace.from_json(manifest["space"])
        records = {s: records_from_csv(ds.arch, (data_dir / manifest["files"][s]).read_text()) for s in SPLITS}
    except (OSError, KeyError, ValueError) as e:
        raise CliError(f"cannot load dataset from {data_dir}: {e}") from e
    if manifest.get("schema_hash") != ds.schema_hash():
        raise CliError("dataset manifest schema hash does not match its space")
    graphs = {}
    lhg_dir = data_dir / manifest.get("lhg_dir", "lhg")
    if lhg_dir.is_dir():
        for p in sorted(lhg_dir.glob("*.json")):
            graphs[p.stem] = LogicalHierarchyGraph.load(p)
    return manifest, ds, records, graphs


def cmd_train(args) -> int:
    data_dir = Path(args.data_dir)
    manifest, ds, records, graphs = _load_split_dir(data_dir)
    kinds = [k.strip() for k in args.models.split(",") if k.strip()]
    try:
        fit = train_surrogate(
            ds, records, float(manifest["eps"]), graphs or None, kinds, args.budget, args.seed, args.epochs, args.final
        )
    except ValueError as e:
        raise CliError(str(e)) from e
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(fit.model, out / "model.json", ds.schema_hash(), fit.model.eps)
    write_json(out / "training_log.json", {**fit.log, "data_dir": str(data_dir)})
    for m, kind in fit.model.info["chosen"].items():
        print(f"  {m:<11} -> {kind}")
    print(f"model -> {out / 'model.json'}")
    return 0


def _read_predictions(path: Path, n: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    import csv

    rows = list(csv.DictReader(path.read_text().splitlines()))
    if len(rows) != n:
        raise CliError(f"{path}: {len(rows)} prediction rows for {n} records")
    roi = np.array([r["roi"] in ("1", "True", "true") for r in rows])
    return roi, {m: np.array([float(r[m]) for r in rows]) for m in METRICS}


def cmd_eval(args) -> int:
    data_dir = Path(args.data_dir)
    manifest, ds, records, graphs = _load_split_dir(data_dir)
    recs = records[args.split]
    truth_roi = roi_labels(recs)
    truth = metric_targets(recs)
    if args.predictions:
        pred_roi, preds = _read_predictions(Path(args.predictions), len(recs))
        name = "given"
    else:
        if not args.model:
            raise CliError("eval needs --model or --predictions")
        try:
            model = load_model(args.model, ds.schema_hash())
        except SchemaMismatch as e:
            raise CliError(str(e)) from e
        except (OSError, ValueError) as e:
            raise CliError(f"cannot load model: {e}") from e
        data = model_inputs(ds, recs, graphs if graphs else None)
        pred_roi = model.in_roi(data)
        keep = np.flatnonzero(truth_roi)
        preds = {m: np.full(len(recs), np.nan) for m in model.metrics}
        sub = data.subset(keep)
        for m, reg in model.regressors.items():
            preds[m][keep] = reg.predict(sub)
        name = "model"
    keep = np.flatnonzero(truth_roi)
    if len(keep) == 0:
        raise CliError("evaluation split has no ROI records")
    reports = {m: error_report(truth[m][keep], preds[m][keep]) for m in preds}
    cls = class_report(truth_roi, pred_roi)
    print(format_error_table({name: reports}))
    print(f"ROI classifier: accuracy {cls.accuracy:.4f}  F1 {cls.f1:.4f}  (tp {cls.tp} fp {cls.fp} tn {cls.tn} fn {cls.fn})")
    result = {"split": args.split, "errors": {m: r.to_json() for m, r in reports.items()}, "classifier": cls.to_json()}
    write_json(Path(args.out_dir) / f"eval_{args.split}.json", result)
    return 0


# --- dse ----------------------------------------------------------------------------

def cmd_dse(args) -> int:
    ref = _space(args)
    params = _oracle(args)
    dse_space = load_design_space(Path(args.dse_space) if args.dse_space else preset_path("axiline_dse.json"))
    cost = dse_mod.CostSpec(args.alpha, args.beta, args.p_max, args.r_max)
    oracle = dse_mod.OraclePredictor(ref, params, args.eps)
    if args.model:
        try:
            model = load_model(args.model, ref.schema_hash())
        except SchemaMismatch as e:
            raise CliError(str(e)) from e
        except (OSError, ValueError) as e:
            raise CliError(f"cannot load model: {e}") from e
        predictor = dse_mod.SurrogatePredictor(ref, model)
    else:
        predictor = oracle
    try:
        report = dse_mod.run_dse(dse_space.full, predictor, args.budget, cost, args.seed)
    except dse_mod.NoFeasibleConfiguration as e:
        raise CliError(str(e)) from e
    out = Path(args.out_dir)
    atomic_write(out / "dse_report.json", report.dumps() + "\n")
    atomic_write(out / "dse_scatter.svg", dse_mod.scatter_svg(report.trials) + "\n")
    top = []
    print("top configurations (predicted vs oracle):")
    for t in report.top(3, cost):
        truth = oracle(t.cfg).metrics
        pred = {"energy_mj": t.energy, "area_um2": t.area, "power_mw": t.aux["power_mw"], "runtime_ms": t.aux["runtime_ms"]}
        deltas = {m: 100.0 * (pred[m] - truth[m]) / truth[m] for m in pred}
        top.append({"trial": t.to_json(), "oracle": truth, "delta_pct": deltas})
        print(f"  trial {t.index}: " + "  ".join(f"{m} {d:+.2f}%" for m, d in deltas.items()))
    write_json(out / "top3.json", top)
    b = report.best
    print(f"best: trial {b.index} cost {cost.cost(b.energy, b.area):.4f} cfg {b.cfg.to_json()}")
    return 0


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--space", help="design space JSON (default: Axiline preset)")
    common.add_argument("--oracle-params", help="oracle parameter JSON (default: Axiline preset)")

    p = argparse.ArgumentParser(prog="accel-dse", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="sample configurations")
    s.add_argument("--method", choices=["lhs", "sobol", "halton"], default="lhs")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--part", choices=["arch", "backend", "full"], default="arch")
    s.add_argument("--output")
    s.set_defaults(func=cmd_sample)

    g = sub.add_parser("gen-data", parents=[common], help="generate train/val/test datasets")
    g.add_argument("--protocol", choices=PROTOCOLS, default="unseen-backend")
    g.add_argument("--n-arch", type=int, nargs="+", default=[24, 10, 10])
    g.add_argument("--n-knobs", type=int, nargs="+", default=[30, 10, 10])
    g.add_argument("--method", choices=["lhs", "sobol", "halton"], default="lhs")
    g.add_argument("--eps", type=float, default=EPS_DEFAULT)
    g.set_defaults(func=cmd_gen_data)

    e = sub.add_parser("extract-lhg", parents=[common], help="netlist to logical hierarchy graph")
    e.add_argument("--netlist", required=True)
    e.add_argument("--top", required=True)
    e.add_argument("--output")
    e.set_defaults(func=cmd_extract_lhg)

    t = sub.add_parser("train", parents=[common], help="train a two-stage model")
    t.add_argument("--data-dir", required=True)
    t.add_argument("--models", default="gbdt,mlp")
    t.add_argument("--final", default="best", help="'best' (validation RMSE) or one trained kind")
    t.add_argument("--budget", type=int, default=4)
    t.add_argument("--epochs", type=int, help="override the MLP/GCN epoch defaults")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("eval", parents=[common], help="error tables on a dataset split")
    v.add_argument("--data-dir", required=True)
    v.add_argument("--split", choices=SPLITS, default="test")
    v.add_argument("--model")
    v.add_argument("--predictions", help="CSV in dataset layout to score instead of a model")
    v.set_defaults(func=cmd_eval)

    d = sub.add_parser("dse", parents=[common], help="multi-objective design space exploration")
    d.add_argument("--model", help="two-stage model JSON (default: oracle as predictor)")
    d.add_argument("--dse-space", help="search space JSON (default: Axiline DSE preset)")
    d.add_argument("--budget", type=int, default=200)
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--beta", type=float, default=0.001)
    d.add_argument("--p-max", type=float, default=80.0)
    d.add_argument("--r-max", type=float, default=800.0)
    d.add_argument("--eps", type=float, default=EPS_DEFAULT)
    d.set_defaults(func=cmd_dse)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        threads_from_env()
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
