"""Command-line interface: file I/O and end-to-end orchestration.

Commands
--------
moments      histogram + dark -> detected moments, feasibility, var_p interval
reconstruct  histogram + dark + detector -> fitted state + scan curve + diagnostics
simulate     config -> synthetic histogram + dark histogram (seeded)
qdii         state params -> quasi-distribution grid file(s)
diagnose     state params -> sum distribution, noise reduction, non-classicality

Exit codes: 0 success, 2 parse/validation error, 3 infeasible moments,
4 numerical failure.

Histogram files are plain text: a first line ``# frames: <number>`` followed
by comma-separated rows indexed by m_s (rows) and m_i (columns).  Results are
JSON; grids and curves are CSV with ``#``-prefixed header lines.  All numbers
are serialized with full round-trip precision and outputs carry no
timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    GridResolutionError,
    InfeasibleMomentsError,
    NumericsError,
    ReconstructionError,
    TwinbeamError,
    ValidationError,
)
from .fit import reconstruct
from .model import DetectorModel, Histogram2D, TwinBeamParams
from .moments import (
    dark_corrected_moments,
    feasibility,
    field_moments_from_params,
    inversion_family,
    photocount_moments,
)
from .photostat import (
    default_cutoffs,
    joint_photon_distribution,
    noise_reduction_factor,
    sum_distribution,
)
from .qdii import joint_qdii_grid, nonclassicality, ordering_threshold
from .simgen import SimConfig, simulate_histogram

__all__ = ["main", "RunConfig"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

COMMANDS = ("moments", "reconstruct", "simulate", "qdii", "diagnose")


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: command, input paths and output settings."""

    command: str
    inputs: tuple[Path, ...]
    out_dir: Path | None
    out_file: Path | None
    fmt: str

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.fmt not in ("json", "csv"):
            raise ValidationError(f"unknown output format {self.fmt!r}")
        for p in self.inputs:
            if not p.is_file():
                raise ValidationError(f"input file not found: {p}")


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def load_histogram(path: Path) -> Histogram2D:
    rows = []
    frames = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("frames:"):
                    try:
                        frames = float(body.split(":", 1)[1])
                    except ValueError as exc:
                        raise ValidationError(
                            f"{path}:{lineno}: bad frames header: {line!r}") from exc
                continue
            try:
                rows.append([float(c) for c in line.split(",")])
            except ValueError as exc:
                raise ValidationError(
                    f"{path}:{lineno}: unparseable histogram row: {line!r}") from exc
    if frames is None:
        raise ValidationError(f"{path}: missing '# frames:' header line")
    if not rows:
        raise ValidationError(f"{path}: histogram has no data rows")
    width = max(len(r) for r in rows)
    counts = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        counts[i, :len(r)] = r
    return Histogram2D(counts, frames)


def save_histogram(path: Path, h: Histogram2D) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        frames = h.total_frames
        header = int(frames) if float(frames).is_integer() else frames
        fh.write(f"# frames: {header}\n")
        for row in h.counts:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def load_params(path: Path) -> TwinBeamParams:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return TwinBeamParams(**{k: float(raw[k]) for k in (
            "m_pairs", "b_pairs", "m_noise_s", "b_noise_s", "m_noise_i", "b_noise_i")})
    except KeyError as exc:
        raise ValidationError(f"{path}: missing parameter field {exc}") from exc


def load_sim_config(path: Path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        params = TwinBeamParams(**{k: float(v) for k, v in raw["params"].items()})
        det = {}
        for arm in ("detector_s", "detector_i"):
            spec = raw[arm]
            det[arm] = DetectorModel(
                efficiency=float(spec["efficiency"]),
                pixels=int(spec["pixels"]),
                dark_rate=float(spec.get("dark_rate", 0.0)),
            )
        return SimConfig(params=params, detector_s=det["detector_s"],
                         detector_i=det["detector_i"],
                         frames=int(raw["frames"]), seed=int(raw["seed"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed simulation config ({exc})") from exc


def _write_report(report: dict, fmt: str, out_file: Path | None) -> None:
    if fmt == "json":
        text = json.dumps(report, sort_keys=True, indent=2, allow_nan=True) + "\n"
    else:
        lines = []

        def flatten(prefix, obj):
            if isinstance(obj, dict):
                for k in sorted(obj):
                    flatten(f"{prefix}{k}." if prefix else f"{k}.", obj[k]) \
                        if isinstance(obj[k], dict) else \
                        lines.append(f"{prefix}{k},{_csv_cell(obj[k])}")
            else:
                lines.append(f"{prefix.rstrip('.')},{_csv_cell(obj)}")

        flatten("", report)
        text = "\n".join(lines) + "\n"
    if out_file is None:
        sys.stdout.write(text)
    else:
        out_file.write_text(text, encoding="utf-8")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_csv_cell(x) for x in v)
    return str(v)


def save_grid(path: Path, grid) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# ws: " + ",".join(_fmt(x) for x in grid.w_s_axis) + "\n")
        fh.write("# wi: " + ",".join(_fmt(x) for x in grid.w_i_axis) + "\n")
        fh.write(f"# ordering: {_fmt(grid.ordering)}\n")
        fh.write(f"# normalization: {_fmt(grid.normalization)}\n")
        for row in grid.values:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


def save_curve(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {header}\n")
        for row in rows:
            fh.write(",".join(_fmt(c) for c in row) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _detector_from_args(args, arm: str) -> DetectorModel:
    return DetectorModel(
        efficiency=getattr(args, f"eta_{arm}"),
        pixels=getattr(args, f"pixels_{arm}"),
        dark_rate=getattr(args, f"dark_{arm}"),
    )


def cmd_moments(args) -> int:
    cfg = RunConfig("moments", (Path(args.histogram), Path(args.dark)),
                    None, Path(args.out) if args.out else None, args.format)
    h = load_histogram(cfg.inputs[0])
    dark = load_histogram(cfg.inputs[1])
    mom = photocount_moments(h)
    dmom = photocount_moments(dark)
    detected = dark_corrected_moments(mom, dmom)
    margin = feasibility(detected, args.eta_s, args.eta_i)
    report = {
        "photocount_moments": asdict(mom),
        "dark_moments": asdict(dmom),
        "detected_moments": asdict(detected),
        "efficiencies": {"eta_s": args.eta_s, "eta_i": args.eta_i},
        "feasibility_margin": margin,
    }
    if margin >= 0:
        family = inversion_family(detected, args.eta_s, args.eta_i)
        report["var_p_interval"] = {"low_exclusive": 0.0, "high": family.var_p_max}
    else:
        report["var_p_interval"] = None
    _write_report(report, cfg.fmt, cfg.out_file)
    return EXIT_OK if margin >= 0 else EXIT_INFEASIBLE


def cmd_reconstruct(args) -> int:
    cfg = RunConfig("reconstruct", (Path(args.histogram), Path(args.dark)),
                    Path(args.out_dir), None, args.format)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    h = load_histogram(cfg.inputs[0])
    dark = load_histogram(cfg.inputs[1])
    d_s = _detector_from_args(args, "s")
    d_i = _detector_from_args(args, "i")
    result = reconstruct(h, dark, d_s, d_i, scan_points=args.scan_points)

    p = joint_photon_distribution(result.params, default_cutoffs(result.params))
    psum = sum_distribution(p)
    threshold = ordering_threshold(result.params)
    verdict = nonclassicality(result.field_moments)
    report = {
        "var_p_opt": result.var_p_opt,
        "declination": result.declination,
        "at_boundary": result.at_boundary,
        "params": asdict(result.params),
        "field_moments": asdict(result.field_moments),
        "diagnostics": {
            "noise_reduction_factor": noise_reduction_factor(result.field_moments),
            "nonclassical": verdict.nonclassical,
            "nonclassicality_margin": verdict.margin,
            "s_th": threshold.s_th,
            "s_th_beta": threshold.beta,
            "s_th_gamma": threshold.gamma,
        },
    }
    _write_report(report, cfg.fmt, cfg.out_dir / f"result.{cfg.fmt}")
    save_curve(cfg.out_dir / "scan.csv", "var_p,declination", result.scan)
    save_curve(cfg.out_dir / "p_sum.csv", "k,p_sum",
               list(enumerate(psum.tolist())))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = RunConfig("simulate", (Path(args.config),), Path(args.out_dir), None, "json")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    sim = load_sim_config(cfg.inputs[0])
    if args.seed is not None or args.frames is not None:
        sim = replace(sim,
                      seed=sim.seed if args.seed is None else args.seed,
                      frames=sim.frames if args.frames is None else args.frames)
    h, dark = simulate_histogram(sim)
    save_histogram(cfg.out_dir / "histogram.txt", h)
    save_histogram(cfg.out_dir / "dark.txt", dark)
    manifest = {
        "seed": sim.seed,
        "frames": sim.frames,
        "params": asdict(sim.params),
        "detector_s": asdict(sim.detector_s),
        "detector_i": asdict(sim.detector_i),
    }
    _write_report(manifest, "json", cfg.out_dir / "manifest.json")
    return EXIT_OK


def _auto_grid_max(params: TwinBeamParams, s: float) -> float:
    sigma = (1.0 - s) / 2.0
    mean = (params.m_pairs * (params.b_pairs + sigma)
            + params.m_noise_s * (params.b_noise_s + sigma))
    var = (params.m_pairs * (params.b_pairs + sigma) ** 2
           + params.m_noise_s * (params.b_noise_s + sigma) ** 2)
    return mean + 10.0 * math.sqrt(var) + 3.0


def cmd_qdii(args) -> int:
    cfg = RunConfig("qdii", (Path(args.params),), Path(args.out_dir), None, "json")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    params = load_params(cfg.inputs[0])
    grid_max = args.grid_max if args.grid_max else _auto_grid_max(params, args.ordering)
    axis = np.linspace(0.0, grid_max, args.grid_cells)
    grid = joint_qdii_grid(params, args.ordering, axis, axis)
    save_grid(cfg.out_dir / "qdii.csv", grid)
    if args.paired_only:
        paired = joint_qdii_grid(params, args.ordering, axis, axis, paired_only=True)
        save_grid(cfg.out_dir / "qdii_paired.csv", paired)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = RunConfig("diagnose", (Path(args.params),), None,
                    Path(args.out) if args.out else None, args.format)
    params = load_params(cfg.inputs[0])
    fm = field_moments_from_params(params)
    p = joint_photon_distribution(params, default_cutoffs(params))
    psum = sum_distribution(p)
    threshold = ordering_threshold(params)
    verdict = nonclassicality(fm)
    report = {
        "params": asdict(params),
        "field_moments": asdict(fm),
        "noise_reduction_factor": noise_reduction_factor(fm),
        "nonclassical": verdict.nonclassical,
        "nonclassicality_margin": verdict.margin,
        "s_th": threshold.s_th,
        "s_th_beta": threshold.beta,
        "s_th_gamma": threshold.gamma,
        "p_sum_head": psum[:41].tolist(),
    }
    _write_report(report, cfg.fmt, cfg.out_file)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_detector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta-s", type=float, required=True, help="signal detection efficiency")
    p.add_argument("--eta-i", type=float, required=True, help="idler detection efficiency")
    p.add_argument("--pixels-s", type=int, default=1000)
    p.add_argument("--pixels-i", type=int, default=1000)
    p.add_argument("--dark-s", type=float, default=0.0, help="per-pixel dark rate, signal arm")
    p.add_argument("--dark-i", type=float, default=0.0, help="per-pixel dark rate, idler arm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinbeam",
        description="Twin-beam state reconstruction from joint photocount histograms.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="dark-corrected moments and feasibility")
    p.add_argument("histogram")
    p.add_argument("dark")
    p.add_argument("--eta-s", type=float, required=True)
    p.add_argument("--eta-i", type=float, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("reconstruct", help="fit the six-parameter state")
    p.add_argument("histogram")
    p.add_argument("dark")
    _add_detector_args(p)
    p.add_argument("--scan-points", type=int, default=200)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("simulate", help="generate a synthetic run")
    p.add_argument("config", help="JSON simulation config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--frames", type=int, default=None, help="override the config frame count")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("qdii", help="quasi-distribution grid")
    p.add_argument("params", help="JSON state parameters")
    p.add_argument("--ordering", type=float, default=0.0)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-cells", type=int, default=201)
    p.add_argument("--paired-only", action="store_true",
                   help="also write the paired-field-only grid")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_qdii)

    p = sub.add_parser("diagnose", help="photon-statistics diagnostics of a state")
    p.add_argument("params", help="JSON state parameters")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleMomentsError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericsError, GridResolutionError, ReconstructionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TwinbeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
