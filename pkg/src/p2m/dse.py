"""Design-space sweep, constraint filtering, Pareto extraction, accuracy join.

A design point pairs one workload (LayerSpec) with one technology stack and
carries every model output in a MetricSet, normalized against the
conventional-readout baseline. Sweeps enumerate the Cartesian grid in a
fixed deterministic order; infeasible points stay in the output, flagged
with the violated constraint or the geometry failure.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import area_model, bandwidth_model, energy_model, latency_model
from .errors import ConfigError, GeometryError
from .techlib import (
    BaselineConfig,
    LayerSpec,
    ReadoutMode,
    TechLibrary,
    TechStack,
    load_tech_library,
)
from .units import parse_count, parse_quantity


@dataclass(frozen=True)
class MetricSet:
    """Every model output for one design point (SI units)."""

    n_t: int = 0
    w_px_m: float = 0.0
    h_px_m: float = 0.0
    min_pitch_m: float = 0.0
    limiter_w: str = ""
    limiter_h: str = ""
    pitch_limiter: str = ""
    pixel_area_m2: float = 0.0
    norm_area: float = 0.0  # weight-die pixel area / native CIS pixel area

    h_conv: int = 0
    w_conv: int = 0
    h_o: int = 0
    w_o: int = 0
    o_elems: int = 0
    i_elems: int = 0
    br: float = 0.0
    p2m_bits: int = 0
    conventional_bits: int = 0

    n_read_cycles: int = 0
    t_exp_total_s: float = 0.0
    t_adc_total_s: float = 0.0
    t_io_total_s: float = 0.0
    t_frontend_s: float = 0.0
    frame_rate_hz: float = 0.0
    conv_t_frontend_s: float = 0.0
    conv_frame_rate_hz: float = 0.0
    norm_latency: float = 0.0  # t_frontend / conventional t_frontend

    n_conv_ops: int = 0
    e_compute_j: float = 0.0
    e_io_j: float = 0.0
    e_frontend_j: float = 0.0
    conv_e_frontend_j: float = 0.0
    norm_energy: float = 0.0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


METRIC_NAMES = tuple(f.name for f in fields(MetricSet))


@dataclass(frozen=True)
class AccuracyRecord:
    dataset: str
    metric: str
    value: float


@dataclass(frozen=True)
class DesignPoint:
    stack_name: str
    stack: TechStack
    layer: LayerSpec
    metrics: MetricSet | None
    feasible: bool
    violations: tuple[str, ...] = ()
    accuracy: tuple[AccuracyRecord, ...] = ()


@dataclass(frozen=True)
class Constraints:
    max_pixel_pitch: float | None = None  # meters
    min_frame_rate: float | None = None  # Hz
    min_br: float | None = None
    max_energy_norm: float | None = None

    def violations_for(self, m: MetricSet) -> tuple[str, ...]:
        out = []
        if self.max_pixel_pitch is not None and m.min_pitch_m > self.max_pixel_pitch:
            out.append("max_pixel_pitch")
        if self.min_frame_rate is not None and m.frame_rate_hz < self.min_frame_rate:
            out.append("min_frame_rate")
        if self.min_br is not None and m.br < self.min_br:
            out.append("min_br")
        if self.max_energy_norm is not None and m.norm_energy > self.max_energy_norm:
            out.append("max_energy_norm")
        return tuple(out)


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition: layer value lists crossed with named stacks.

    Enumeration order is fixed: stacks outermost, then k, s, c_o, p,
    binning, pool_stride, each in the order given.
    """

    stacks: tuple[tuple[str, TechStack], ...]
    baseline: BaselineConfig
    input_dims: tuple[int, int]
    k: tuple[int, ...]
    s: tuple[int, ...]
    c_o: tuple[int, ...]
    p: tuple[int, ...] = (0,)
    binning: tuple[int, ...] = (1,)
    pool_stride: tuple[int, ...] = (1,)
    constraints: Constraints = field(default_factory=Constraints)

    def __post_init__(self):
        for name in ("stacks", "k", "s", "c_o", "p", "binning", "pool_stride"):
            if not getattr(self, name):
                raise ConfigError(f"sweep grid axis {name!r} must be non-empty")

    def layers(self):
        h_i, w_i = self.input_dims
        for k in self.k:
            for s in self.s:
                for c_o in self.c_o:
                    for p in self.p:
                        for b in self.binning:
                            for s_p in self.pool_stride:
                                yield LayerSpec(k=k, s=s, c_o=c_o, h_i=h_i, w_i=w_i,
                                                p=p, binning=b, pool_stride=s_p)


def evaluate(
    layer: LayerSpec,
    stack: TechStack,
    baseline: BaselineConfig,
    constraints: Constraints | None = None,
    stack_name: str = "",
) -> DesignPoint:
    """Run all four models on one (layer, stack) pair.

    Geometry failures mark the point infeasible with the failing stage as
    the reason instead of raising, so sweeps survive degenerate corners.
    """
    constraints = constraints or Constraints()
    footprint = area_model.weight_footprint(layer, stack.node, stack.bond)
    area = footprint.w_px * footprint.h_px
    try:
        geo = bandwidth_model.output_dims(layer)
    except GeometryError as exc:
        return DesignPoint(stack_name, stack, layer, metrics=None, feasible=False,
                           violations=(f"geometry: {exc}",))

    p2m_bits = geo.o_elems * stack.adc.bits
    conv_bits = bandwidth_model.conventional_bits(layer)
    latency = latency_model.frontend_latency(layer, stack, ReadoutMode.P2M, baseline=baseline)
    conv_latency = latency_model.frontend_latency(
        layer, stack, ReadoutMode.CONVENTIONAL, baseline=baseline
    )
    energy = energy_model.frontend_energy(layer, stack, baseline, ReadoutMode.P2M)
    conv_energy = energy_model.frontend_energy(layer, stack, baseline, ReadoutMode.CONVENTIONAL)

    metrics = MetricSet(
        n_t=footprint.n_t,
        w_px_m=footprint.w_px,
        h_px_m=footprint.h_px,
        min_pitch_m=footprint.min_pitch,
        limiter_w=footprint.limiter_w.value,
        limiter_h=footprint.limiter_h.value,
        pitch_limiter=footprint.pitch_limiter.value,
        pixel_area_m2=area,
        norm_area=area / (stack.pixel.cis_pixel_pitch ** 2),
        h_conv=geo.h_conv,
        w_conv=geo.w_conv,
        h_o=geo.h_o,
        w_o=geo.w_o,
        o_elems=geo.o_elems,
        i_elems=geo.i_elems,
        br=conv_bits / p2m_bits,
        p2m_bits=p2m_bits,
        conventional_bits=conv_bits,
        n_read_cycles=latency.n_c,
        t_exp_total_s=latency.t_exp_total,
        t_adc_total_s=latency.t_adc_total,
        t_io_total_s=latency.t_io_total,
        t_frontend_s=latency.t_frontend,
        frame_rate_hz=latency.frame_rate,
        conv_t_frontend_s=conv_latency.t_frontend,
        conv_frame_rate_hz=conv_latency.frame_rate,
        norm_latency=latency.t_frontend / conv_latency.t_frontend,
        n_conv_ops=energy.n_read,
        e_compute_j=energy.e_compute,
        e_io_j=energy.e_io,
        e_frontend_j=energy.e_frontend,
        conv_e_frontend_j=conv_energy.e_frontend,
        norm_energy=energy.normalized,
    )
    violations = constraints.violations_for(metrics)
    return DesignPoint(stack_name, stack, layer, metrics,
                       feasible=not violations, violations=violations)


def sweep(spec: SweepSpec, jobs: int = 1) -> list[DesignPoint]:
    """Evaluate every grid point; output order is the grid order regardless
    of the worker count."""
    tasks = [
        (name, stack, layer)
        for name, stack in spec.stacks
        for layer in spec.layers()
    ]

    def run(task):
        name, stack, layer = task
        return evaluate(layer, stack, spec.baseline, spec.constraints, stack_name=name)

    if jobs <= 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, tasks))


# ---------------------------------------------------------------------------
# Pareto extraction

def pareto_front(
    points: list[DesignPoint],
    objectives: list[tuple[str, str]],
) -> list[DesignPoint]:
    """Non-dominated subset of the feasible points, in input order.

    Objectives are (metric_name, "min"|"max") pairs over MetricSet fields.
    A point dominates another when it is no worse on every objective and
    strictly better on at least one; exact ties survive.
    """
    if not objectives:
        raise ConfigError("at least one objective is required")
    for name, direction in objectives:
        if name not in METRIC_NAMES:
            raise ConfigError(
                f"unknown metric {name!r}; valid metrics: {', '.join(METRIC_NAMES)}"
            )
        if direction not in ("min", "max"):
            raise ConfigError(f"objective direction must be 'min' or 'max' (got {direction!r})")

    candidates = [pt for pt in points if pt.feasible and pt.metrics is not None]
    vectors = [
        tuple(
            float(getattr(pt.metrics, name)) * (1.0 if direction == "min" else -1.0)
            for name, direction in objectives
        )
        for pt in candidates
    ]
    keep = non_dominated_indices(vectors)
    return [candidates[i] for i in keep]


def non_dominated_indices(vectors: list[tuple[float, ...]]) -> list[int]:
    """Indices of the non-dominated vectors (all objectives minimized),
    preserving input order. Incremental front maintenance."""
    front: list[int] = []
    for i, v in enumerate(vectors):
        dominated = False
        survivors = []
        for j in front:
            u = vectors[j]
            if _dominates(u, v):
                dominated = True
                survivors = front
                break
            if not _dominates(v, u):
                survivors.append(j)
        if not dominated:
            survivors.append(i)
        front = survivors
    return front


def _dominates(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# accuracy tables

@dataclass(frozen=True)
class AccuracyTable:
    """External accuracy measurements keyed by (dataset, k, s, c_o, metric)."""

    rows: dict[tuple[str, int, int, int, str], float]

    @classmethod
    def from_csv(cls, source) -> "AccuracyTable":
        text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")
        reader = csv.DictReader(io.StringIO(text))
        expected = ["dataset", "k", "s", "c_o", "metric", "value"]
        if reader.fieldnames != expected:
            raise ConfigError(
                f"accuracy table header must be {','.join(expected)} "
                f"(got {','.join(reader.fieldnames or [])})"
            )
        rows: dict[tuple[str, int, int, int, str], float] = {}
        for lineno, row in enumerate(reader, start=2):
            key = (
                row["dataset"],
                parse_count(row["k"], "k"),
                parse_count(row["s"], "s"),
                parse_count(row["c_o"], "c_o"),
                row["metric"],
            )
            if key in rows:
                raise ConfigError(f"accuracy table line {lineno}: duplicate key {key}")
            try:
                rows[key] = float(row["value"])
            except (TypeError, ValueError):
                raise ConfigError(f"accuracy table line {lineno}: bad value {row['value']!r}") from None
        return cls(rows)


def join_accuracy(points: list[DesignPoint], table: AccuracyTable) -> list[DesignPoint]:
    """Attach accuracy records on exact (k, s, c_o) matches, per dataset.

    Unmatched points keep an empty record tuple; nothing is interpolated.
    """
    by_layer: dict[tuple[int, int, int], list[AccuracyRecord]] = {}
    for (dataset, k, s, c_o, metric), value in table.rows.items():
        by_layer.setdefault((k, s, c_o), []).append(AccuracyRecord(dataset, metric, value))
    for records in by_layer.values():
        records.sort(key=lambda r: (r.dataset, r.metric))

    out = []
    for pt in points:
        records = by_layer.get((pt.layer.k, pt.layer.s, pt.layer.c_o), [])
        out.append(DesignPoint(pt.stack_name, pt.stack, pt.layer, pt.metrics,
                               pt.feasible, pt.violations, tuple(records)))
    return out


# ---------------------------------------------------------------------------
# serialization

LAYER_COLUMNS = ("k", "s", "c_o", "p", "binning", "pool_stride", "h_i", "w_i")
POINT_COLUMNS = ("stack", "node", "bond", "io") + LAYER_COLUMNS + METRIC_NAMES + (
    "feasible",
    "violations",
    "accuracy",
)


def point_row(pt: DesignPoint) -> dict:
    row = {
        "stack": pt.stack_name,
        "node": pt.stack.node.name,
        "bond": pt.stack.bond.name,
        "io": pt.stack.io.name,
        "feasible": "true" if pt.feasible else "false",
        "violations": ";".join(pt.violations),
        "accuracy": ";".join(f"{r.dataset}:{r.metric}={r.value!r}" for r in pt.accuracy),
    }
    for name in LAYER_COLUMNS:
        row[name] = getattr(pt.layer, name)
    metric_dict = pt.metrics.to_dict() if pt.metrics is not None else {}
    for name in METRIC_NAMES:
        value = metric_dict.get(name, "")
        row[name] = repr(value) if isinstance(value, float) else value
    return row


def points_to_csv(points: list[DesignPoint], manifest_lines: tuple[str, ...] = ()) -> str:
    """RFC-4180 CSV with '#'-prefixed manifest lines ahead of the header."""
    buf = io.StringIO()
    for line in manifest_lines:
        buf.write(f"# {line}\r\n")
    writer = csv.DictWriter(buf, fieldnames=POINT_COLUMNS, lineterminator="\r\n")
    writer.writeheader()
    for pt in points:
        writer.writerow(point_row(pt))
    return buf.getvalue()


def points_to_json(points: list[DesignPoint], manifest: dict | None = None) -> str:
    doc = {
        "manifest": manifest or {},
        "points": [
            {
                "stack": pt.stack_name,
                "node": pt.stack.node.name,
                "bond": pt.stack.bond.name,
                "io": pt.stack.io.name,
                "layer": {name: getattr(pt.layer, name) for name in LAYER_COLUMNS},
                "metrics": pt.metrics.to_dict() if pt.metrics is not None else None,
                "feasible": pt.feasible,
                "violations": list(pt.violations),
                "accuracy": [
                    {"dataset": r.dataset, "metric": r.metric, "value": r.value}
                    for r in pt.accuracy
                ],
            }
            for pt in points
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


FIGURE_SERIES = {
    # series name -> (columns, metric extraction)
    "fig_area": ("stack", "node", "bond", "k", "s", "c_o",
                 "pixel_area_m2", "norm_area_sweep", "min_pitch_m", "pitch_limiter"),
    "fig_br": ("stack", "k", "c_o", "pool_stride", "s", "br"),
    "fig_latency": ("stack", "k", "c_o", "binning", "s", "frame_rate_hz"),
    "fig_energy": ("stack", "io", "k", "c_o", "s", "norm_energy"),
}


def figure_series(points: list[DesignPoint], manifest_lines: tuple[str, ...] = ()) -> dict[str, str]:
    """Plot-ready CSV series keyed to the four trade-off views.

    fig_area's norm_area_sweep column normalizes each point's weight-die
    area to the smallest area among the sweep's evaluated points.
    """
    evaluated = [pt for pt in points if pt.metrics is not None]
    min_area = min((pt.metrics.pixel_area_m2 for pt in evaluated), default=0.0)

    out = {}
    for name, columns in FIGURE_SERIES.items():
        buf = io.StringIO()
        for line in manifest_lines:
            buf.write(f"# {line}\r\n")
        writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
        writer.writeheader()
        for pt in evaluated:
            row = point_row(pt)
            if name == "fig_area" and min_area > 0:
                row["norm_area_sweep"] = repr(pt.metrics.pixel_area_m2 / min_area)
            writer.writerow({col: row.get(col, "") for col in columns})
        out[f"{name}.csv"] = buf.getvalue()
    return out


# ---------------------------------------------------------------------------
# sweep spec ingestion

def load_sweep_spec(path, tech_search_path: str | None = None) -> SweepSpec:
    """Load a sweep definition document (JSON).

    The optional "tech_library" path resolves relative to the spec file,
    then against `tech_search_path` (the P2M_TECH_PATH directory).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: sweep spec must be a JSON object")

    lib = TechLibrary()
    if "tech_library" in doc:
        lib_path = _resolve_path(doc["tech_library"], path.parent, tech_search_path)
        lib = load_tech_library(lib_path.read_bytes())
    # Tech sections declared inline in the sweep spec shadow the library's.
    inline = load_tech_library(json.dumps(doc))
    for section in ("process_nodes", "bond_techs", "io_techs", "adcs", "pixels"):
        getattr(lib, section).update(getattr(inline, section))

    stacks_doc = doc.get("stacks")
    if not stacks_doc:
        raise ConfigError("sweep spec needs a non-empty 'stacks' list")
    stacks = []
    for entry in stacks_doc:
        if "name" not in entry:
            raise ConfigError("each stack entry needs a 'name'")
        stacks.append((entry["name"], lib.resolve_stack(entry)))

    baseline = lib.resolve_baseline(doc.get("baseline"))
    if baseline is None:
        raise ConfigError("sweep spec needs a 'baseline' section (or one in its tech library)")

    dims = doc.get("input_dims")
    if not (isinstance(dims, (list, tuple)) and len(dims) == 2):
        raise ConfigError("sweep spec needs 'input_dims': [h_i, w_i]")

    grid = doc.get("layer_grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("'layer_grid' must be an object of value lists")

    def axis(name, default=None):
        values = grid.get(name, default)
        if values is None:
            raise ConfigError(f"layer_grid is missing axis {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"layer_grid.{name} must be a non-empty list")
        return tuple(parse_count(v, f"layer_grid.{name}") for v in values)

    constraints = _constraints_from(doc.get("constraints", {}))

    return SweepSpec(
        stacks=tuple(stacks),
        baseline=baseline,
        input_dims=(parse_count(dims[0], "input_dims[0]"), parse_count(dims[1], "input_dims[1]")),
        k=axis("k"),
        s=axis("s"),
        c_o=axis("c_o"),
        p=axis("p", [0]),
        binning=axis("binning", [1]),
        pool_stride=axis("pool_stride", [1]),
        constraints=constraints,
    )


def _constraints_from(doc: dict) -> Constraints:
    if not isinstance(doc, dict):
        raise ConfigError("'constraints' must be an object")
    known = {"max_pixel_pitch", "min_frame_rate", "min_br", "max_energy_norm"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown constraint names: {', '.join(sorted(unknown))}")
    kwargs = {}
    if "max_pixel_pitch" in doc:
        kwargs["max_pixel_pitch"] = parse_quantity(doc["max_pixel_pitch"], "length", "max_pixel_pitch")
    if "min_frame_rate" in doc:
        kwargs["min_frame_rate"] = float(doc["min_frame_rate"])
    if "min_br" in doc:
        kwargs["min_br"] = float(doc["min_br"])
    if "max_energy_norm" in doc:
        kwargs["max_energy_norm"] = float(doc["max_energy_norm"])
    for name, bound in kwargs.items():
        if bound is not None and bound <= 0:
            raise ConfigError(f"constraint {name} must be positive (got {bound})")
    return Constraints(**kwargs)


def _resolve_path(raw: str, spec_dir: Path, tech_search_path: str | None) -> Path:
    candidate = Path(raw)
    if candidate.is_absolute():
        if candidate.exists():
            return candidate
        raise ConfigError(f"tech library not found: {candidate}")
    for base in (spec_dir, Path.cwd(), Path(tech_search_path) if tech_search_path else None):
        if base is None:
            continue
        resolved = base / candidate
        if resolved.exists():
            return resolved
    raise ConfigError(f"tech library not found: {raw}")
