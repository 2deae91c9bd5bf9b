"""End-to-end variable representation.

A :class:`FlowSpec` names one input construction:

* ``transposed``: the normalized table flipped so rows are variables
* ``stats`` / ``pdf`` / ``cdf_grid``: per-variable univariate descriptors
* ``adjacency``: a pairwise metric matrix, optionally Laplacian or 1 - A
* ``gradfield``: cross products of gradient fields over an observation
  latent, aggregated by option 1-4
* ``combined``: column-wise concatenation of other flows

:func:`represent_variables` builds that input, trains the beta-VAE on
duplicated, shuffled copies, and returns one latent point per variable.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .categorical import OneHotBlock, one_hot_encode, reinforce_entanglement
from .gradfield import (
    DEFAULT_GRID,
    aggregate_option1,
    aggregate_option2,
    aggregate_option3,
    aggregate_option4,
    gradient_map,
    option4_rows,
)
from .ingest import (
    DataError,
    DataTable,
    minmax_normalize,
    rescale_signed,
    screen_degenerate_variables,
    subsample,
)
from .latent import LatentTable, compute_frames
from .metadata import cdf_grid_table, pdf_table, stats_table
from .metrics import METRICS, SIGNED_METRICS, TRANSFORMS, AdjacencyMatrix, laplacian_transform, metric_matrix, ones_complement_transform
from .vae import TrainConfig, VaeModel, fit_select

FLOWS = ("transposed", "stats", "pdf", "cdf_grid", "adjacency", "gradfield", "combined")


class SpecError(ValueError):
    """Invalid flow configuration; the message names the field."""


@dataclass
class FlowSpec:
    flow: str = "adjacency"
    metric: str = "pearson"
    transform: str = "none"
    option: int = 1
    spots: str = "observations"
    parts: list = field(default_factory=list)
    train_copies: int = 50
    monitor_copies: int = 30
    grid: int = DEFAULT_GRID
    bins: int | None = None
    budget: int | None = None
    max_columns: int | None = None
    screen: bool = False
    categorical: str | None = None
    reinforce: bool = False

    def __post_init__(self) -> None:
        self.parts = [p if isinstance(p, FlowSpec) else FlowSpec.from_dict(p) for p in self.parts]
        self.validate()

    def validate(self) -> None:
        if self.flow not in FLOWS:
            raise SpecError(f"flow: unknown value {self.flow!r}; valid: {', '.join(FLOWS)}")
        if self.flow == "adjacency" and self.metric not in METRICS:
            raise SpecError(f"metric: unknown value {self.metric!r}; valid: {', '.join(METRICS)}")
        if self.transform not in TRANSFORMS:
            raise SpecError(f"transform: unknown value {self.transform!r}; valid: {', '.join(TRANSFORMS)}")
        if self.flow == "adjacency" and self.transform == "laplacian" and self.metric in SIGNED_METRICS:
            raise SpecError(f"transform: laplacian is not defined for signed metric {self.metric!r}")
        if self.flow == "gradfield" and self.option not in (1, 2, 3, 4):
            raise SpecError(f"option: must be 1, 2, 3 or 4, got {self.option!r}")
        if self.spots not in ("observations", "grid"):
            raise SpecError(f"spots: must be 'observations' or 'grid', got {self.spots!r}")
        if self.flow == "combined":
            if len(self.parts) < 2:
                raise SpecError("parts: combined flow needs at least two parts")
            if any(p.flow in ("combined",) or (p.flow == "gradfield" and p.option == 4) for p in self.parts):
                raise SpecError("parts: nested combined flows and gradfield option 4 cannot be combined")
        if self.train_copies < 1 or self.monitor_copies < 0:
            raise SpecError("train_copies must be >= 1 and monitor_copies >= 0")
        if self.grid < 3:
            raise SpecError(f"grid: must be >= 3, got {self.grid}")
        if self.reinforce and not self.categorical:
            raise SpecError("reinforce: requires a categorical column")

    @classmethod
    def from_dict(cls, d: dict | str) -> "FlowSpec":
        if isinstance(d, str):
            d = {"flow": d}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise SpecError(f"{unknown[0]}: unknown field; valid: {', '.join(sorted(known))}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["parts"] = [p.to_dict() for p in self.parts]
        return d

    @property
    def label(self) -> str:
        if self.flow == "adjacency":
            return self.metric + ("" if self.transform == "none" else f"+{self.transform}")
        if self.flow == "gradfield":
            return f"cp_option{self.option}" + ("" if self.transform == "none" else f"+{self.transform}")
        if self.flow == "combined":
            return "+".join(p.label for p in self.parts)
        return self.flow


def load_config(path: str | Path) -> tuple[FlowSpec, TrainConfig, dict]:
    """Read ``{"flow": {...}, "train": {...}, ...}``; other top-level keys are returned as-is."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SpecError("config: top level must be an object")
    spec = FlowSpec.from_dict(raw.get("flow", {}))
    train_raw = raw.get("train", {})
    known = {f.name for f in fields(TrainConfig)}
    bad = sorted(set(train_raw) - known)
    if bad:
        raise SpecError(f"train.{bad[0]}: unknown field; valid: {', '.join(sorted(known))}")
    try:
        cfg = TrainConfig(**train_raw)
    except ValueError as exc:
        raise SpecError(f"train: {exc}") from None
    rest = {k: v for k, v in raw.items() if k not in ("flow", "train")}
    return spec, cfg, rest


# --------------------------------------------------------------------------
# scaling onto [0, 1]


def matrix_to_unit(a: AdjacencyMatrix) -> DataTable:
    """Bring a pairwise matrix onto [0, 1] for the sigmoid decoder.

    Signed correlations and cosine use (x + 1) / 2; the antisymmetric
    mean-gradient matrix is divided by its largest magnitude first; matrices
    already inside [0, 1] pass through; anything else is min-max scaled as a
    whole so relative structure survives.
    """
    v = a.values
    if a.metric == "cp_of_means":
        top = np.abs(v).max()
        scaled = v / top if top > 0 else v
        return rescale_signed(AdjacencyMatrix(a.names, scaled, a.metric, a.transform))
    if a.metric in SIGNED_METRICS and a.transform == "none":
        return rescale_signed(a)
    if v.min() >= 0.0 and v.max() <= 1.0:
        return a.to_table()
    return DataTable(list(a.names), _global_unit(v), list(a.names))


def _global_unit(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5)
    return (v - lo) / (hi - lo)


def _apply_transform(a: AdjacencyMatrix, transform: str) -> AdjacencyMatrix:
    if transform == "laplacian":
        return laplacian_transform(a)
    if transform == "ones_complement":
        return ones_complement_transform(a)
    return a


# --------------------------------------------------------------------------
# inputs


def represent_observations(t: DataTable, cfg: TrainConfig, train_copies: int = 50,
                           monitor_copies: int = 30) -> tuple[LatentTable, VaeModel, dict]:
    """Ordinary beta-VAE over the rows of ``t`` (min-max normalized first).

    Returns the observation latent with frames, the selected model, and the
    run report (which carries the normalization bounds).
    """
    t.require_analysis_shape()
    tn, rec = minmax_normalize(t)
    model, lt, report = fit_select(tn, cfg, train_copies, monitor_copies)
    model.history["normalization"] = {"min": rec.min.tolist(), "max": rec.max.tolist(),
                                      "names": list(t.variable_names)}
    report["normalization"] = model.history["normalization"]
    return compute_frames(lt), model, report


def _transposed(t: DataTable, spec: FlowSpec, seed: int) -> DataTable:
    inp = minmax_normalize(t)[0].transpose()
    if spec.max_columns and inp.n_cols > spec.max_columns:
        inp = subsample(inp, "columns", spec.max_columns, seed)
    return inp


def build_input(t: DataTable, spec: FlowSpec, cfg: TrainConfig | None = None,
                observations: LatentTable | None = None, context: dict | None = None) -> DataTable:
    """Variable-representation input for ``spec``: one row per variable, values in [0, 1].

    ``observations`` supplies the observation latent for the gradfield flow;
    without it one is trained with ``cfg``. ``context`` (optional dict)
    receives intermediate products such as the observation latent.
    """
    cfg = cfg or TrainConfig()
    context = context if context is not None else {}
    t.require_analysis_shape()
    if spec.flow == "transposed":
        inp = _transposed(t, spec, cfg.seed)
    elif spec.flow == "stats":
        inp = minmax_normalize(stats_table(t))[0]
    elif spec.flow == "pdf":
        p = pdf_table(t, spec.bins or 20)
        inp = DataTable(p.variable_names, p.values / p.values.max(), p.row_ids)
    elif spec.flow == "cdf_grid":
        inp = cdf_grid_table(t)
    elif spec.flow == "adjacency":
        inp = matrix_to_unit(metric_matrix(t, spec.metric, spec.transform, spec.bins))
    elif spec.flow == "gradfield":
        inp = _gradfield_input(t, spec, cfg, observations, context)
    else:
        parts = [build_input(t, p, cfg, observations, context) for p in spec.parts]
        keys = parts[0].row_ids
        for p, ps in zip(parts[1:], spec.parts[1:]):
            if p.row_ids != keys:
                raise DataError(f"combined part {ps.label!r} has different row keys")
        names = [f"{ps.label}:{n}" for p, ps in zip(parts, spec.parts) for n in p.variable_names]
        inp = DataTable(names, np.concatenate([p.values for p in parts], axis=1), list(keys))
    return inp


def _gradient_map(t, spec, cfg, observations, context):
    """Observation latent (trained if absent) and the variables' gradient fields over it."""
    if observations is None:
        observations, _, obs_report = represent_observations(t, cfg, spec.train_copies, spec.monitor_copies)
        context["observation_report"] = obs_report
    context["observations"] = observations
    gmap = gradient_map(minmax_normalize(t)[0], observations, spec.grid)
    context["gradient_map"] = gmap
    return gmap


def _gradfield_input(t, spec, cfg, observations, context) -> DataTable:
    gmap = _gradient_map(t, spec, cfg, observations, context)
    if spec.option == 2:
        xv, yv, _ = gmap.spot_gradients(spec.spots)
        return matrix_to_unit(_apply_transform(aggregate_option2(gmap.names, xv, yv), spec.transform))
    cp = gmap.cross_products(spec.spots)
    context["cross_products"] = cp
    if spec.option == 1:
        return matrix_to_unit(_apply_transform(aggregate_option1(cp), spec.transform))
    if spec.option == 3:
        table = aggregate_option3(cp, spec.budget, cfg.seed)
    else:
        table = option4_rows(cp, spec.budget, cfg.seed)
    return DataTable(table.variable_names, _global_unit_nonneg(table.values), table.row_ids)


def _global_unit_nonneg(v: np.ndarray) -> np.ndarray:
    top = v.max()
    return v / top if top > 0 else v


def prepare_table(t: DataTable, spec: FlowSpec) -> tuple[DataTable, OneHotBlock | None, list[str]]:
    """Optional degenerate-column screening and one-hot expansion."""
    removed: list[str] = []
    if spec.screen:
        t, removed = screen_degenerate_variables(t)
    block = None
    if spec.categorical:
        t, block = one_hot_encode(t, spec.categorical)
    return t, block, removed


def represent_variables(t: DataTable, spec: FlowSpec, cfg: TrainConfig,
                        observations: LatentTable | None = None) -> tuple[LatentTable, dict]:
    """Full protocol: input construction, duplicated multi-run fit, dedupe, frames."""
    t, block, removed = prepare_table(t, spec)
    context: dict[str, Any] = {}
    report: dict[str, Any] = {"flow": spec.to_dict(), "label": spec.label, "removed_columns": removed}
    if spec.flow == "gradfield" and spec.option == 4:
        # aggregation happens after fitting, on (variable, spot) rows
        cp = _gradient_map(t, spec, cfg, observations, context).cross_products(spec.spots)
        context["cross_products"] = cp
        lt, fit_report = aggregate_option4(cp, spec.budget, cfg.seed, cfg)
        report["input_shape"] = list(lt.extra["input"].shape)
    else:
        inp = build_input(t, spec, cfg, observations, context)
        if spec.reinforce:
            inp = reinforce_entanglement(inp, block)
        report["input_shape"] = list(inp.shape)
        model, lt, fit_report = fit_select(inp, cfg, spec.train_copies, spec.monitor_copies)
        compute_frames(lt)
        lt.extra.update(input=inp, model=model)
    if "observation_report" in context:
        report["observation_fit"] = context["observation_report"]
    report["fit"] = fit_report
    report["block"] = asdict(block) if block is not None else None
    lt.extra.update({k: v for k, v in context.items() if k != "observation_report"})
    return lt, report
