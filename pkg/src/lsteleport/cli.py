"""Command-line entry point: ``lsteleport {sample,collapse,threshold-line,validate,dem-dump}``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from .circuit import CircuitError, ProtocolSpec, build_teleportation_circuit
from .dem import DemError, decompose_to_graph, extract_dem
from .geometry import LayoutError, build_merged_layout
from .noise import NoiseError, NoiseProfile, apply_noise_profile
from .scaling import (
    ALL_PARAMS,
    CollapsePoint,
    ScalingError,
    ScalingFamily,
    bootstrap_uncertainty,
    crossing_estimate,
    fit_collapse,
    point_from_counts,
    threshold_line,
)
from .sweep import (
    ConfigError,
    SchemaError,
    SweepConfig,
    iter_config_lines,
    read_results,
    run_sweep,
)
from .tableau import record_parities, sample_noiseless, validate_circuit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

FIT_SCHEMA = "lsteleport.fit/1"
FIT_COLUMNS = ["family", "objective", "n_points"] + [c for p in ALL_PARAMS for c in (p, f"{p}_err")]
POINTS_SCHEMA = "lsteleport.points/1"
POINTS_COLUMNS = ["p", "d", "w", "p_L", "sigma", "shots"]
LINE_SCHEMA = "lsteleport.threshold_line/1"
LINE_COLUMNS = ["w", "p_star"]

log = logging.getLogger("lsteleport")

# default starting points for the collapse fit
_INITIAL = {"p_star_3d": 0.008, "p_star_2d": 0.07, "p_star_w": 0.03, "nu2": 1.3, "nu3": 1.0, "z": 0.05}


class UsageError(ValueError):
    """Bad configuration or input; maps to exit code 2."""


# --- value parsing --------------------------------------------------------------


def _float_list(text: str) -> tuple[float, ...]:
    """Comma list of floats; ``lo:hi:step`` expands to an inclusive range."""
    out: list[float] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if ":" in part:
            try:
                lo, hi, step = (float(x) for x in part.split(":"))
            except ValueError:
                raise UsageError(f"bad range {part!r}, expected lo:hi:step") from None
            if step <= 0 or hi < lo:
                raise UsageError(f"bad range {part!r}")
            n = int(math.floor((hi - lo) / step + 1e-9))
            out.extend(round(lo + i * step, 12) for i in range(n + 1))
        else:
            try:
                out.append(float(part))
            except ValueError:
                raise UsageError(f"not a number: {part!r}") from None
    return tuple(out)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _width_list(text: str) -> tuple[int | str, ...]:
    out: list[int | str] = []
    for x in text.replace(" ", "").split(","):
        if not x:
            continue
        if x == "d":
            out.append("d")
            continue
        try:
            out.append(int(x))
        except ValueError:
            raise UsageError(f"width must be an integer or 'd', got {x!r}") from None
    return tuple(out)


_CONFIG_KEYS = {
    "state": str,
    "d": _int_list,
    "w": _width_list,
    "p_bulk": _float_list,
    "p_link": _float_list,
    "shots": int,
    "seed": int,
    "output": str,
    "max_failures": int,
    "workers": int,
}


def load_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    values = {}
    try:
        for lineno, key, value in iter_config_lines(text):
            if key not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
            except UsageError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return values


def build_sweep_config(args: argparse.Namespace) -> SweepConfig:
    values = load_config_file(args.config) if args.config else {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    missing = [k for k in ("d", "w", "p_bulk", "p_link", "shots") if k not in values]
    if missing:
        raise UsageError(f"missing sweep settings: {', '.join(missing)}")
    try:
        return SweepConfig(**values)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


# --- subcommands ----------------------------------------------------------------


def cmd_sample(args: argparse.Namespace) -> int:
    config = build_sweep_config(args)
    rows = run_sweep(config, progress=not args.quiet)
    expected = len(config.points())
    if len(rows) < expected:
        print(f"{expected - len(rows)} of {expected} points failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def read_points(path: str | Path) -> list[CollapsePoint]:
    """Points CSV: ``p,d,w,p_L,sigma,shots`` with ``w`` and ``shots`` optional per row."""
    pts = []
    with open(path, newline="") as fh:
        fh.readline()
        reader = csv.reader(fh)
        if next(reader, None) != POINTS_COLUMNS:
            raise UsageError(f"{path}:2: expected header {','.join(POINTS_COLUMNS)}")
        for lineno, rec in enumerate(reader, start=3):
            if not rec:
                continue
            if len(rec) != len(POINTS_COLUMNS):
                raise UsageError(f"{path}:{lineno}: expected {len(POINTS_COLUMNS)} fields, got {len(rec)}")
            try:
                p, d, w, p_L, sigma, shots = rec
                pts.append(
                    CollapsePoint(
                        float(p), int(d), float(p_L), float(sigma),
                        int(shots) if shots else None, int(w) if w else None,
                    )
                )
            except (ValueError, ScalingError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return pts


def _load_points(path: str, param: str | None, state: str | None):
    try:
        with open(path) as fh:
            first = fh.readline().strip()
        if first == f"# schema={POINTS_SCHEMA}":
            return read_points(path)
        rows = read_results(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if state:
        rows = [r for r in rows if r.state == state]
    if not rows:
        raise UsageError(f"{path}: no result rows")
    if param is None:
        varying = [c for c in ("p_bulk", "p_link") if len({getattr(r, c) for r in rows}) > 1]
        if len(varying) != 1:
            raise UsageError("cannot tell which error rate is swept; pass --param p_bulk or --param p_link")
        param = varying[0]
    return [point_from_counts(getattr(r, param), r.d, r.failures, r.shots, r.w) for r in rows]


def _parse_assignments(items: Sequence[str] | None, what: str) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"{what} must look like name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_fit(path: str | None, fit) -> None:
    row = {"family": fit.family.kind.value, "objective": repr(fit.objective), "n_points": str(fit.n_points)}
    for name in ALL_PARAMS:
        row[name] = repr(fit.params[name]) if name in fit.params else ""
        row[f"{name}_err"] = repr(fit.errors[name]) if name in fit.errors else ""
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        fh.write(f"# schema={FIT_SCHEMA}\n")
        writer = csv.DictWriter(fh, FIT_COLUMNS)
        writer.writeheader()
        writer.writerow(row)
    finally:
        if path:
            fh.close()


def read_fit(path: str) -> dict[str, float]:
    try:
        with open(path, newline="") as fh:
            first = fh.readline().strip()
            if first != f"# schema={FIT_SCHEMA}":
                raise UsageError(f"{path}:1: expected '# schema={FIT_SCHEMA}'")
            reader = csv.DictReader(fh)
            if reader.fieldnames != FIT_COLUMNS:
                raise UsageError(f"{path}:2: unexpected header")
            rec = next(reader, None)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if rec is None:
        raise UsageError(f"{path}: no fit row")
    out = {}
    for name in ALL_PARAMS:
        if rec[name]:
            try:
                out[name] = float(rec[name])
            except ValueError:
                raise UsageError(f"{path}:3: bad value for {name}") from None
    return out


def _crossing_seed(points, fallback: float) -> float:
    """Mean crossing of adjacent-distance curves, when the grid allows one."""
    try:
        value = crossing_estimate(points).value
    except ScalingError:
        return fallback
    return fallback if math.isnan(value) or value <= 0 else value


def cmd_collapse(args: argparse.Namespace) -> int:
    try:
        family = ScalingFamily.parse(args.family)
        points = _load_points(args.input, args.param, args.state)
        if family.needs_width and any(pt.w is None for pt in points):
            raise UsageError("the quasi2d family needs a width on every row")
        given = {k: float(v) for k, v in _parse_assignments(args.init, "--init").items()}
        init = {k: v for k, v in _INITIAL.items() if k in family.parameters}
        star = family.parameters[0]
        if star not in given and not family.needs_width:
            init[star] = _crossing_seed(points, init[star])
        init.update(given)
        bounds = {}
        for k, v in _parse_assignments(args.bound, "--bound").items():
            lo, hi = (float(x) for x in v.split(":"))
            bounds[k] = (lo, hi)
        fit = fit_collapse(points, family, init, bounds or None, restarts=args.restarts, seed=args.seed, x_max=args.x_max)
        if args.resamples > 0:
            bootstrap_uncertainty(points, fit, args.resamples, args.seed, bounds or None, args.x_max)
    except (ScalingError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if not fit.converged:
        log.warning(fit.message)
    write_fit(args.output, fit)
    return EXIT_OK


def cmd_threshold_line(args: argparse.Namespace) -> int:
    params = read_fit(args.fit)
    missing = [k for k in ("p_star_3d", "z", "nu3") if k not in params]
    if missing:
        raise UsageError(f"fit lacks {', '.join(missing)}; fit the quasi2d family first")
    widths = _int_list(args.w)
    if not widths:
        raise UsageError("empty width list")
    try:
        values = [threshold_line(w, params["p_star_3d"], params["z"], params["nu3"]) for w in widths]
    except ScalingError as exc:
        raise UsageError(str(exc)) from None
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        fh.write(f"# schema={LINE_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(LINE_COLUMNS)
        for w, v in zip(widths, values):
            writer.writerow([w, repr(v)])
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def _protocol(args):
    try:
        layout = build_merged_layout(args.d, args.w)
        circuit = build_teleportation_circuit(ProtocolSpec(args.d, args.w, args.state), layout)
    except (LayoutError, CircuitError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return circuit


def cmd_validate(args: argparse.Namespace) -> int:
    circuit = _protocol(args)
    report = validate_circuit(circuit)
    print(report)
    if not report.ok:
        return EXIT_RUNTIME
    if args.shots:
        det_bits, obs_bits = record_parities(circuit, sample_noiseless(circuit, args.shots, args.seed))
        det = int(det_bits.any(axis=1).sum())
        obs = int(obs_bits.any(axis=1).sum())
        print(f"noiseless sampling: {args.shots} shots, {det} with detector flips, {obs} with observable flips")
        if det or obs:
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_dem_dump(args: argparse.Namespace) -> int:
    circuit = _protocol(args)
    try:
        noisy = apply_noise_profile(circuit, NoiseProfile(args.p_bulk, args.p_link))
    except NoiseError as exc:
        raise UsageError(str(exc)) from None
    if args.circuit:
        text = noisy.to_text()
    else:
        dem = extract_dem(noisy)
        text = decompose_to_graph(dem).edge_list() if args.graph else dem.to_text()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsteleport", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run a Monte Carlo sweep and append rows to a results CSV")
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--state", choices=("plus", "zero"))
    p.add_argument("--d", type=_int_list, help="distances, e.g. 3,5,7")
    p.add_argument("--w", type=_width_list, help="link widths, integers or 'd'")
    p.add_argument("--p-bulk", dest="p_bulk", type=_float_list, help="comma list or lo:hi:step")
    p.add_argument("--p-link", dest="p_link", type=_float_list, help="comma list or lo:hi:step")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--max-failures", dest="max_failures", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("collapse", help="fit a finite-size scaling collapse to a results or points CSV")
    p.add_argument("input")
    p.add_argument("--family", required=True, help="threed, twod, fixedw or quasi2d")
    p.add_argument("--param", choices=("p_bulk", "p_link"), help="swept error rate (default: the one that varies)")
    p.add_argument("--state", choices=("plus", "zero"), help="only use rows of this state")
    p.add_argument("--init", action="append", metavar="NAME=VALUE")
    p.add_argument("--bound", action="append", metavar="NAME=LO:HI")
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--resamples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("threshold-line", help="evaluate the crossover threshold line from a quasi2d fit")
    p.add_argument("fit")
    p.add_argument("--w", required=True, help="comma list of widths")
    p.add_argument("--output")
    p.set_defaults(func=cmd_threshold_line)

    for name, func, text in (
        ("validate", cmd_validate, "check detectors and observables of the protocol circuit"),
        ("dem-dump", cmd_dem_dump, "print the detector error model of the noisy circuit"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--w", type=int, required=True)
        p.add_argument("--state", choices=("plus", "zero"), default="plus")
        p.set_defaults(func=func)
        if name == "validate":
            p.add_argument("--shots", type=int, default=0, help="also sample this many noiseless shots")
            p.add_argument("--seed", type=int, default=0)
        else:
            p.add_argument("--p-bulk", dest="p_bulk", type=float, default=0.001)
            p.add_argument("--p-link", dest="p_link", type=float, default=0.001)
            p.add_argument("--graph", action="store_true", help="print the matching-graph edges instead")
            p.add_argument("--circuit", action="store_true", help="print the noisy circuit instead")
            p.add_argument("--output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DemError, CircuitError, OSError, RuntimeError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
