"""``varlatent`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure during training or post-processing.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import svg
from .gradfield import cross_product_timeseries, gradient_map
from .ingest import (
    DataError,
    DataTable,
    NormalizationRecord,
    generate_synthetic,
    load_csv,
    load_idx,
    minmax_normalize,
    rate_attributes,
    write_csv,
)
from .latent import DedupeError, LatentTable, compute_frames, read_latent_csv
from .metadata import cdf_grid_table, pdf_table, stats_table
from .metrics import METRICS, TRANSFORMS, metric_comparison_report, metric_matrix
from .pipeline import FLOWS, FlowSpec, SpecError, load_config, represent_observations, represent_variables
from .vae import TrainConfig, TrainingError, VaeModel, decode, encode_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GROUP_MODES = ("none", "prefix", "rates", "onehot")



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage is 1 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    raw = os.environ.get("VARLATENT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"VARLATENT_SEED must be an integer, got {raw!r}") from None


# --------------------------------------------------------------------------
# data sources


def _data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data source")
    g.add_argument("--data", help="CSV file (header row required)")
    g.add_argument("--id-column", action="store_true", help="first CSV column holds row ids")
    g.add_argument("--synthetic", type=int, metavar="SEED", help="use the built-in synthetic table")
    g.add_argument("--idx", nargs=2, metavar=("IMAGES", "LABELS"), help="IDX image and label files")
    g.add_argument("--limit", type=int, default=2000, help="number of IDX images to read")


def _data_source(args, cfg_data: dict | None = None, base: Path | None = None) -> dict | None:
    if args.data:
        return {"csv": args.data, "id_column": args.id_column}
    if args.synthetic is not None:
        return {"synthetic": {"seed": args.synthetic}}
    if args.idx:
        return {"idx": {"images": args.idx[0], "labels": args.idx[1], "limit": args.limit}}
    if cfg_data:
        out = dict(cfg_data)
        for key in ("csv",):
            if key in out and base is not None:
                out[key] = str((base / out[key]).resolve()) if not Path(out[key]).is_absolute() else out[key]
        if "idx" in out and base is not None:
            idx = dict(out["idx"])
            for k in ("images", "labels"):
                if not Path(idx[k]).is_absolute():
                    idx[k] = str((base / idx[k]).resolve())
            out["idx"] = idx
        return out
    return None


def load_data(source: dict | None) -> DataTable:
    if not source:
        raise UsageError("no data source: give --data, --synthetic or --idx (or a 'data' config entry)")
    if "csv" in source:
        return load_csv(source["csv"], id_column=bool(source.get("id_column", False)))
    if "synthetic" in source:
        opts = source["synthetic"] if isinstance(source["synthetic"], dict) else {"seed": source["synthetic"]}
        return generate_synthetic(int(opts.get("seed", 0)), int(opts.get("num_obs", 250)))
    if "idx" in source:
        idx = source["idx"]
        return load_idx(idx["images"], idx["labels"], int(idx.get("limit", 2000)))
    raise UsageError(f"data: unknown source keys {sorted(source)}; valid: csv, synthetic, idx")


# --------------------------------------------------------------------------
# plotting helpers


def variable_groups(names: Sequence[str], mode: str, dummies: Sequence[str] = ()) -> list[str] | None:
    if mode == "none":
        return None
    if mode == "prefix":
        return ["_".join(n.split("_")[:2]) for n in names]
    if mode == "rates":
        return [rate_attributes(n)[0] for n in names]
    if mode == "onehot":
        ds = set(dummies)
        return ["dummy" if n in ds else ("reinforced" if n.startswith("reinforce_") else "other") for n in names]
    raise UsageError(f"groups: unknown mode {mode!r}; valid: {', '.join(GROUP_MODES)}")


def latent_scatter(lt: LatentTable, title: str, pairs: Sequence[Sequence[str]] = (), labels: bool = True) -> str:
    lines = []
    for a, b in pairs:
        if a not in lt.keys or b not in lt.keys:
            raise DataError(f"plot pair ({a!r}, {b!r}) names an unknown variable")
        lines.append((lt.index(a), lt.index(b)))
    return svg.scatter(lt.frame("Lp"), labels=lt.keys if labels else None, groups=lt.groups,
                       lines=lines, title=title, bounds=(-1.05, 1.05, -1.05, 1.05), unit_circle=True)


def _json_default(o: Any):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_json(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _train_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--seed", type=int, help="base seed (default: $VARLATENT_SEED or 0)")
    g.add_argument("--beta", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int, dest="batch_size")
    g.add_argument("--runs", type=int)
    g.add_argument("--dtype", choices=("float32", "float64"))


def _train_config(args, base: dict | None = None) -> TrainConfig:
    d = dict(base or {})
    known = {f.name for f in fields(TrainConfig)}
    bad = sorted(set(d) - known)
    if bad:
        raise SpecError(f"train.{bad[0]}: unknown field; valid: {', '.join(sorted(known))}")
    for k in ("beta", "epochs", "batch_size", "runs", "dtype"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    elif "seed" not in d:
        d["seed"] = default_seed()
    try:
        return TrainConfig(**d)
    except ValueError as exc:
        raise SpecError(f"train: {exc}") from None


# --------------------------------------------------------------------------
# subcommands


def cmd_synthetic(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    t = generate_synthetic(seed, args.num_obs)
    write_csv(t, args.out, id_header=None)
    print(f"wrote {t.n_rows}x{t.n_cols} table to {args.out}")
    return EXIT_OK


def _flow_overrides(args) -> dict:
    d: dict[str, Any] = {}
    for k in ("flow", "metric", "transform", "option", "spots", "bins", "budget", "max_columns",
              "categorical", "train_copies", "monitor_copies", "grid"):
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    if args.parts:
        d["parts"] = [p.strip() for p in args.parts.split(",") if p.strip()]
    if args.reinforce:
        d["reinforce"] = True
    if args.screen:
        d["screen"] = True
    return d


def cmd_run(args) -> int:
    flow_raw: dict = {}
    train_raw: dict = {}
    rest: dict = {}
    base = None
    if args.config:
        path = Path(args.config)
        spec0, cfg0, rest = load_config(path)
        flow_raw, train_raw, base = spec0.to_dict(), asdict(cfg0), path.parent
        raw_train = json.loads(path.read_text(encoding="utf-8")).get("train", {})
        if "seed" not in raw_train:
            train_raw.pop("seed")
    spec = FlowSpec.from_dict({**flow_raw, **_flow_overrides(args)})
    cfg = _train_config(args, train_raw)
    source = _data_source(args, rest.get("data"), base)
    plot = dict(rest.get("plot", {}))
    if args.groups:
        plot["groups"] = args.groups
    if args.pair:
        plot["pairs"] = [list(p) for p in args.pair]
    unknown = sorted(set(plot) - {"groups", "pairs", "labels"})
    if unknown:
        raise SpecError(f"plot.{unknown[0]}: unknown field; valid: groups, labels, pairs")

    t = load_data(source)
    observations = read_latent_csv(args.observations) if args.observations else None
    out = Path(args.out)
    (out / "plots").mkdir(parents=True, exist_ok=True)

    lt, report = represent_variables(t, spec, cfg, observations)
    dummies = report["block"]["dummy_names"] if report.get("block") else ()
    lt.groups = variable_groups(lt.keys, plot.get("groups", "none"), dummies)

    write_csv(lt.extra["input"], out / "input.csv", id_header="variable")
    lt.write_csv(out / "latent.csv")
    lt.extra["model"].save(out / "model.npz")
    if "observations" in lt.extra:
        lt.extra["observations"].write_csv(out / "observations.csv")
    report["config"] = {"flow": spec.to_dict(), "train": asdict(cfg), "data": source, "plot": plot}
    report["abs_corr"] = [r["abs_corr"] for r in report["fit"]["runs"]]
    write_json(report, out / "report.json")
    svg.write(latent_scatter(lt, f"{spec.label} (seed {cfg.seed})", plot.get("pairs", ()),
                             plot.get("labels", True)), out / "plots" / "latent.svg")
    print(f"{len(lt)} variables -> {out}; |corr| per run: "
          + ", ".join(f"{c:.4f}" for c in report["abs_corr"]))
    return EXIT_OK


def _observation_latent(args, t: DataTable, cfg: TrainConfig, out: Path) -> LatentTable:
    if args.latent:
        lt = read_latent_csv(args.latent)
        if lt.Lu is None:
            compute_frames(lt)
        return lt
    lt, model, _ = represent_observations(t, cfg, args.train_copies, args.monitor_copies)
    lt.write_csv(out / "observations.csv")
    model.save(out / "observation_model.npz")
    return lt


def cmd_gradmap(args) -> int:
    cfg = _train_config(args)
    t = load_data(_data_source(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(args.variable or []) + list(args.pair or [])
    for n in names:
        if n not in t.variable_names:
            raise KeyError(f"unknown variable {n!r}")
    obs = _observation_latent(args, t, cfg, out)
    gmap = gradient_map(minmax_normalize(t)[0], obs, args.grid)
    if args.variable:
        for name in args.variable:
            grid = gmap.field(name).values
            _write_matrix(grid, out / f"field_{_safe(name)}.csv")
            svg.write(svg.heatmap(grid, f"{name} ({args.grid}x{args.grid})"), out / f"field_{_safe(name)}.svg")
    if args.pair:
        a, b = args.pair
        mag = np.abs(gmap.pair_map(a, b))
        stem = f"cp_{_safe(a)}__{_safe(b)}"
        _write_matrix(mag, out / f"{stem}.csv")
        svg.write(svg.heatmap(mag, f"|cp| {a} x {b}"), out / f"{stem}.svg")
        cp = gmap.cross_products("observations")
        keys, series = cross_product_timeseries(cp, a, b)
        with (out / f"{stem}_series.csv").open("w", encoding="utf-8") as fh:
            fh.write("key,abs_cp\n")
            for k, v in zip(keys, series):
                fh.write(f"{k},{float(v)!r}\n")
        svg.write(svg.line_chart({f"|cp| {a} x {b}": series}, "cross-product magnitude by observation", keys),
                  out / f"{stem}_series.svg")
    print(f"wrote gradient maps to {out}")
    return EXIT_OK


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _write_matrix(m: np.ndarray, path: Path) -> None:
    G = m.shape[1]
    write_csv(DataTable([f"y{j}" for j in range(G)], m, [f"x{i}" for i in range(m.shape[0])]), path, id_header="node")


def cmd_metrics(args) -> int:
    t = load_data(_data_source(args))
    t.require_analysis_shape()
    out = Path(args.out)
    if args.features:
        table = {"stats": stats_table, "pdf": pdf_table, "cdf_grid": cdf_grid_table}[args.features](t)
        write_csv(table, out, id_header="variable")
        print(f"wrote {table.n_rows}x{table.n_cols} {args.features} features to {out}")
    elif args.matrix:
        a = metric_matrix(t, args.matrix, args.transform, args.bins)
        write_csv(a.to_table(), out, id_header="variable")
        print(f"wrote {len(a.names)}x{len(a.names)} {args.matrix} matrix to {out}")
    else:
        rep = metric_comparison_report(t, args.bins)
        rep.write_csv(out)
        print(f"wrote {len(rep.pairs)} variable pairs to {out}")
    return EXIT_OK


def cmd_encode(args) -> int:
    t = load_data(_data_source(args))
    out = Path(args.out)
    if args.model:
        model = VaeModel.load(args.model)
        norm = model.history.get("normalization")
        if norm is None:
            raise DataError(f"model {args.model} carries no normalization record")
        if norm["names"] != list(t.variable_names):
            raise DataError("data columns differ from the columns the model was trained on")
        rec = NormalizationRecord(np.array(norm["min"]), np.array(norm["max"]), "minmax_01")
        scaled = DataTable(t.variable_names, np.clip(rec.apply(t.values), 0.0, 1.0), t.row_ids)
        lt = compute_frames(encode_table(model, scaled))
    else:
        cfg = _train_config(args)
        lt, model, report = represent_observations(t, cfg, args.train_copies, args.monitor_copies)
        if args.save_model:
            model.save(args.save_model)
        if args.report:
            write_json(report, Path(args.report))
    lt.write_csv(out)
    print(f"encoded {len(lt)} rows to {out}")
    return EXIT_OK


def cmd_decode(args) -> int:
    model = VaeModel.load(args.model)
    lt = read_latent_csv(args.latent)
    x = decode(model, lt.mu)
    norm = model.history.get("normalization")
    if norm is not None and not args.scaled:
        rec = NormalizationRecord(np.array(norm["min"]), np.array(norm["max"]), "minmax_01")
        x = rec.invert(x)
        names = list(norm["names"])
    else:
        names = [f"x{i}" for i in range(x.shape[1])]
    write_csv(DataTable(names, np.asarray(x, dtype=np.float64), list(lt.keys)), args.out, id_header="key")
    print(f"decoded {len(lt)} points to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="varlatent", description="Represent dataset variables on a 2-D beta-VAE latent space.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synthetic", help="write the synthetic benchmark table")
    s.add_argument("--seed", type=int)
    s.add_argument("--num-obs", type=int, default=250, dest="num_obs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthetic)

    r = sub.add_parser("run", help="represent variables with one flow")
    r.add_argument("--config", help="JSON file with flow/train/data/plot sections")
    r.add_argument("--out", required=True, help="results directory")
    _data_args(r)
    f = r.add_argument_group("flow")
    f.add_argument("--flow", choices=FLOWS)
    f.add_argument("--metric", help=f"one of: {', '.join(METRICS)}")
    f.add_argument("--transform", help=f"one of: {', '.join(TRANSFORMS)}")
    f.add_argument("--option", type=int, help="gradient-field aggregation option (1-4)")
    f.add_argument("--spots", choices=("observations", "grid"))
    f.add_argument("--parts", help="comma-separated flows for the combined flow")
    f.add_argument("--bins", type=int)
    f.add_argument("--budget", type=int, help="subsampling budget for options 3 and 4")
    f.add_argument("--max-columns", type=int, dest="max_columns")
    f.add_argument("--grid", type=int)
    f.add_argument("--train-copies", type=int, dest="train_copies")
    f.add_argument("--monitor-copies", type=int, dest="monitor_copies")
    f.add_argument("--categorical", help="column to one-hot encode")
    f.add_argument("--reinforce", action="store_true", help="append reinforcement columns to the dummies")
    f.add_argument("--screen", action="store_true", help="drop constant and non-finite columns")
    f.add_argument("--observations", help="observation latent CSV for the gradfield flow")
    f.add_argument("--groups", choices=GROUP_MODES, help="scatter coloring")
    f.add_argument("--pair", nargs=2, action="append", metavar=("A", "B"), help="draw a line from A to B")
    _train_args(r)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gradmap", help="interpolated fields and cross-product maps")
    g.add_argument("--out", required=True, help="output directory")
    _data_args(g)
    g.add_argument("--latent", help="observation latent CSV (trained if omitted)")
    g.add_argument("--variable", action="append", help="emit this variable's field (repeatable)")
    g.add_argument("--pair", nargs=2, metavar=("A", "B"), help="emit |cp| map and series for a pair")
    g.add_argument("--grid", type=int, default=35)
    g.add_argument("--train-copies", type=int, default=50, dest="train_copies")
    g.add_argument("--monitor-copies", type=int, default=30, dest="monitor_copies")
    _train_args(g)
    g.set_defaults(func=cmd_gradmap)

    m = sub.add_parser("metrics", help="pairwise metric report, single matrix, or feature table")
    m.add_argument("--out", required=True)
    _data_args(m)
    m.add_argument("--bins", type=int)
    m.add_argument("--matrix", help=f"write one K x K matrix: {', '.join(METRICS)}")
    m.add_argument("--transform", default="none", choices=TRANSFORMS)
    m.add_argument("--features", choices=("stats", "pdf", "cdf_grid"))
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("encode", help="embed observations (rows)")
    e.add_argument("--out", required=True, help="latent CSV")
    _data_args(e)
    e.add_argument("--model", help="existing model; trains a new one when omitted")
    e.add_argument("--save-model", dest="save_model")
    e.add_argument("--report")
    e.add_argument("--train-copies", type=int, default=50, dest="train_copies")
    e.add_argument("--monitor-copies", type=int, default=30, dest="monitor_copies")
    _train_args(e)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="map latent points back to rows")
    d.add_argument("--model", required=True)
    d.add_argument("--latent", required=True, help="latent CSV (L1, L2 columns are decoded)")
    d.add_argument("--out", required=True)
    d.add_argument("--scaled", action="store_true", help="keep [0, 1] values, skip de-normalization")
    d.set_defaults(func=cmd_decode)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "pair", None) is not None and args.command == "gradmap" and len(set(args.pair)) != 2:
            raise UsageError("--pair needs two different variables")
        if args.command == "gradmap" and not (args.variable or args.pair):
            raise UsageError("gradmap needs --variable or --pair")
        return args.func(args)
    except (UsageError, SpecError) as exc:
        print(f"varlatent: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, DedupeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"varlatent: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"varlatent: data error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
