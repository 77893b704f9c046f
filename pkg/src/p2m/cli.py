"""Command-line surface: evaluate, sweep, pareto, simulate.

Exit codes: 0 success, 2 usage/config error, 3 infeasible under --strict.
Every file artifact embeds the run manifest (as '#' comment lines in CSV,
a "manifest" key in JSON, or a .manifest.json sidecar for binary files).
Set SOURCE_DATE_EPOCH to pin the manifest timestamp for byte-identical
re-runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, bandwidth_model, dse, pixel_sim
from .errors import P2MError, ShapeMismatchError
from .pixel_sim import io as sim_io
from .techlib import AdcSpec, layer_from_json, load_tech_library

TECH_PATH_ENV = "P2M_TECH_PATH"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    seed: int | None
    version: str
    timestamp: str

    @classmethod
    def create(cls, command, inputs, outputs=(), seed=None) -> "RunManifest":
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        moment = (
            datetime.fromtimestamp(int(epoch), tz=timezone.utc)
            if epoch
            else datetime.now(tz=timezone.utc)
        )
        return cls(
            command=command,
            inputs=tuple(str(p) for p in inputs),
            outputs=tuple(str(p) for p in outputs),
            seed=seed,
            version=__version__,
            timestamp=moment.isoformat(),
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "seed": self.seed,
            "version": self.version,
            "timestamp": self.timestamp,
        }

    def lines(self) -> tuple[str, ...]:
        return (
            f"command: {self.command}",
            f"inputs: {' '.join(self.inputs)}",
            f"outputs: {' '.join(self.outputs)}",
            f"seed: {self.seed}",
            f"version: {self.version}",
            f"timestamp: {self.timestamp}",
        )


def _fmt_quantity(value: float, unit: str) -> str:
    """Engineering formatting: pick a prefix that lands in [1, 1000)."""
    if value == 0:
        return f"0 {unit}"
    for scale, prefix in ((1.0, ""), (1e-3, "m"), (1e-6, "u"), (1e-9, "n"),
                          (1e-12, "p"), (1e-15, "f")):
        if abs(value) >= scale:
            return f"{value / scale:.2f} {prefix}{unit}"
    return f"{value:.3e} {unit}"


def _load_tech_file(path: str):
    resolved = _resolve_input(path)
    return load_tech_library(resolved.read_bytes())


def _resolve_input(path: str) -> Path:
    candidate = Path(path)
    if candidate.exists():
        return candidate
    search = os.environ.get(TECH_PATH_ENV)
    if search and not candidate.is_absolute():
        fallback = Path(search) / candidate
        if fallback.exists():
            return fallback
    raise P2MError(f"file not found: {path}")


def _load_json_file(path: str) -> dict:
    resolved = _resolve_input(path)
    try:
        return json.loads(resolved.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise P2MError(
            f"{resolved}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


# ---------------------------------------------------------------------------
# evaluate

def cmd_evaluate(args) -> int:
    lib = _load_tech_file(args.tech)
    stack = lib.resolve_stack()
    layer = layer_from_json(_load_json_file(args.layer))
    if args.baseline:
        baseline_lib = _load_tech_file(args.baseline)
        # Entries in the baseline file take priority; names it references
        # may live in either file.
        for section in ("process_nodes", "bond_techs", "io_techs", "adcs", "pixels"):
            getattr(lib, section).update(getattr(baseline_lib, section))
        baseline = lib.resolve_baseline(baseline_lib.baseline_spec)
    else:
        baseline = lib.resolve_baseline()
    if baseline is None:
        raise P2MError("no baseline section found; give --baseline or add one to the tech file")

    point = dse.evaluate(layer, stack, baseline)
    manifest = RunManifest.create(
        "evaluate",
        [args.tech, args.layer] + ([args.baseline] if args.baseline else []),
        [args.out] if args.out else [],
    )
    payload = dse.points_to_json([point], manifest.to_dict())

    if args.format == "json":
        print(payload)
    else:
        _print_point_table(point)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")

    if args.strict and not point.feasible:
        print(f"infeasible: {'; '.join(point.violations)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _print_point_table(point: dse.DesignPoint) -> None:
    m = point.metrics
    if m is None:
        print(f"point is infeasible: {'; '.join(point.violations)}")
        return
    rows = [
        ("weight transistors", f"{m.n_t}"),
        ("pixel width", f"{_fmt_quantity(m.w_px_m, 'm')} ({m.limiter_w})"),
        ("pixel height", f"{_fmt_quantity(m.h_px_m, 'm')} ({m.limiter_h})"),
        ("min_pitch", f"{_fmt_quantity(m.min_pitch_m, 'm')} ({m.pitch_limiter})"),
        ("pixel area", f"{m.pixel_area_m2 * 1e12:.2f} um^2"),
        ("norm area (vs CIS pixel)", f"{m.norm_area:.4g}"),
        ("output map", f"{m.h_o} x {m.w_o} x {point.layer.c_o}"),
        ("bandwidth reduction", f"{m.br:.4g}"),
        ("transmitted bits", f"{m.p2m_bits}"),
        ("read cycles", f"{m.n_read_cycles}"),
        ("frontend latency", _fmt_quantity(m.t_frontend_s, "s")),
        ("frame rate", f"{m.frame_rate_hz:.4g} fps"),
        ("norm latency (vs conventional)", f"{m.norm_latency:.4g}"),
        ("conv ops", f"{m.n_conv_ops}"),
        ("frontend energy", _fmt_quantity(m.e_frontend_j, "J")),
        ("norm energy (vs conventional)", f"{m.norm_energy:.4g}"),
        ("feasible", "yes" if point.feasible else f"no ({'; '.join(point.violations)})"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    spec = dse.load_sweep_spec(_resolve_input(args.spec), os.environ.get(TECH_PATH_ENV))
    points = dse.sweep(spec, jobs=args.jobs)
    if args.accuracy:
        table = dse.AccuracyTable.from_csv(_resolve_input(args.accuracy))
        points = dse.join_accuracy(points, table)

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise P2MError(f"output directory {out_dir} is not writable: {exc}") from exc

    names = ["points.csv", "points.json"] + sorted(f"{k}.csv" for k in dse.FIGURE_SERIES)
    manifest = RunManifest.create(
        "sweep",
        [args.spec] + ([args.accuracy] if args.accuracy else []),
        [str(out_dir / n) for n in names],
    )
    (out_dir / "points.csv").write_text(
        dse.points_to_csv(points, manifest.lines()), encoding="utf-8", newline=""
    )
    (out_dir / "points.json").write_text(
        dse.points_to_json(points, manifest.to_dict()) + "\n", encoding="utf-8"
    )
    for name, payload in dse.figure_series(points, manifest.lines()).items():
        (out_dir / name).write_text(payload, encoding="utf-8", newline="")

    feasible = sum(1 for pt in points if pt.feasible)
    print(f"swept {len(points)} points ({feasible} feasible) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pareto

def _parse_objectives(raw: str) -> list[tuple[str, str]]:
    objectives = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise P2MError(f"objective {part!r} must be <metric>:<min|max>")
        name, direction = part.rsplit(":", 1)
        objectives.append((name.strip(), direction.strip()))
    if not objectives:
        raise P2MError("no objectives given")
    return objectives


def read_points_csv(path) -> tuple[list[str], list[dict]]:
    """Read a points CSV, skipping '#' manifest lines."""
    text = Path(path).read_text(encoding="utf-8")
    payload = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    reader = csv.DictReader(io.StringIO(payload))
    return list(reader.fieldnames or []), list(reader)


def cmd_pareto(args) -> int:
    objectives = _parse_objectives(args.objectives)
    columns, rows = read_points_csv(_resolve_input(args.points))
    numeric = [c for c in columns if c in dse.METRIC_NAMES]
    for name, direction in objectives:
        if name not in numeric:
            raise P2MError(f"unknown metric {name!r}; valid metrics: {', '.join(numeric)}")
        if direction not in ("min", "max"):
            raise P2MError(f"objective direction must be 'min' or 'max' (got {direction!r})")

    candidates = [row for row in rows if row.get("feasible") == "true"]
    vectors = []
    for row in candidates:
        try:
            vectors.append(tuple(
                float(row[name]) * (1.0 if direction == "min" else -1.0)
                for name, direction in objectives
            ))
        except ValueError as exc:
            raise P2MError(f"non-numeric value in objective column: {exc}") from exc
    keep = dse.non_dominated_indices(vectors)
    front = [candidates[i] for i in keep]

    manifest = RunManifest.create("pareto", [args.points], [args.out] if args.out else [])
    if args.out:
        buf = io.StringIO()
        for line in manifest.lines():
            buf.write(f"# {line}\r\n")
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n")
        writer.writeheader()
        for row in front:
            writer.writerow(row)
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8", newline="")
    print(f"pareto front: kept {len(front)} of {len(candidates)} feasible points "
          f"({len(rows) - len(candidates)} infeasible excluded)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _load_sim_image(spec: str, seed: int | None) -> np.ndarray:
    if spec.startswith("random:"):
        dims = spec.split(":", 1)[1]
        try:
            h, w = (int(v) for v in dims.lower().split("x"))
        except ValueError:
            raise P2MError(f"random image spec must be random:<h>x<w> (got {spec!r})") from None
        rng = np.random.default_rng(seed)
        return rng.random((h, w, 3))
    return sim_io.load_image(_resolve_input(spec))


def cmd_simulate(args) -> int:
    image = _load_sim_image(args.image, args.seed)
    banks = sim_io.load_weight_banks(_resolve_input(args.weights))
    layer = layer_from_json(_load_json_file(args.layer))
    adc = sim_io.load_adc_model(_resolve_input(args.adc))
    tf = sim_io.load_transfer(_resolve_input(args.transfer)) if args.transfer else pixel_sim.identity()

    if image.shape[:2] != (layer.h_i, layer.w_i):
        raise ShapeMismatchError((layer.h_i, layer.w_i, 3), image.shape, "image")

    activations = pixel_sim.forward(image, banks, layer, tf, adc, pool_kind=args.pool)
    bits_emitted = pixel_sim.emitted_bits(activations, adc)

    # Cross-check the analytical bit volume for the same layer/ADC specs.
    adc_spec = AdcSpec(bits=adc.bits)
    bits_model = bandwidth_model.transmitted_bits(layer, adc_spec)
    conv_bits = bandwidth_model.conventional_bits(layer)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bin_path = out_dir / "activations.bin"
    csv_path = out_dir / "activations.csv"
    manifest = RunManifest.create(
        "simulate",
        [args.image, args.weights, args.layer, args.adc] + ([args.transfer] if args.transfer else []),
        [str(bin_path), str(csv_path)],
        seed=args.seed,
    )
    sim_io.write_activations_binary(bin_path, activations, adc)
    csv_path.write_text(
        sim_io.activations_to_csv(activations, manifest.lines()), encoding="utf-8", newline=""
    )
    (out_dir / "activations.manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    agreement = "match" if bits_emitted == bits_model else "MISMATCH"
    print(f"activations {activations.shape[0]} x {activations.shape[1]} x {activations.shape[2]}")
    print(f"emitted_bits {bits_emitted}")
    print(f"model_transmitted_bits {bits_model} [{agreement}]")
    print(f"conventional_bits {conv_bits}")
    print(f"bandwidth_reduction {conv_bits / bits_emitted!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p2m",
        description="Design-space exploration and first-layer simulation "
                    "for in-pixel-compute image sensors",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate one design point")
    p_eval.add_argument("--tech", required=True, help="technology library JSON with a 'stack' section")
    p_eval.add_argument("--layer", required=True, help="layer workload JSON")
    p_eval.add_argument("--baseline", help="baseline config JSON (defaults to tech file's section)")
    p_eval.add_argument("--format", choices=("table", "json"), default="table")
    p_eval.add_argument("--out", help="also write the JSON report to this path")
    p_eval.add_argument("--strict", action="store_true", help="exit 3 when the point is infeasible")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="evaluate a design-space grid")
    p_sweep.add_argument("--spec", required=True, help="sweep spec JSON")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent point evaluations")
    p_sweep.add_argument("--accuracy", help="accuracy table CSV to join")
    p_sweep.set_defaults(func=cmd_sweep)

    p_pareto = sub.add_parser("pareto", help="extract the non-dominated subset of a points CSV")
    p_pareto.add_argument("--points", required=True, help="points.csv from a sweep")
    p_pareto.add_argument("--objectives", required=True,
                          help='comma list of "<metric>:<min|max>"')
    p_pareto.add_argument("--out", help="write the front as CSV")
    p_pareto.set_defaults(func=cmd_pareto)

    p_sim = sub.add_parser("simulate", help="run the pixel-array simulator on an image")
    p_sim.add_argument("--image", required=True, help="PPM/PNG path or random:<h>x<w>")
    p_sim.add_argument("--weights", required=True, help="weight banks JSON")
    p_sim.add_argument("--layer", required=True, help="layer workload JSON")
    p_sim.add_argument("--adc", required=True, help="ADC model JSON (bits, full_scale)")
    p_sim.add_argument("--transfer", help="transfer function JSON (default: identity)")
    p_sim.add_argument("--pool", choices=("max", "average"), default="max")
    p_sim.add_argument("--seed", type=int, help="RNG seed for random image inputs")
    p_sim.add_argument("--out", default="sim-out", help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except P2MError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
