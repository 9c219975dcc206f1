"""Command-line driver: evaluate, minimize and morph from files or bundled fixtures.

Exit codes: 0 success, 1 other domain error, 2 missing file / parse error /
invalid input, 3 optimizer did not converge, 4 morph or flow folded.  Errors go
to stderr as one JSON line.  When a command fails after choosing an output
directory, a ``FAILED`` marker with the same JSON is written there.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import fixtures, formats
from .errors import DistminError, FlowFoldError, InvalidParameterError, MorphFoldError
from .formats import FormatError, csv_text, dumps, write_text
from .functionals import (
    VolumeSchedule,
    energy_E_curve,
    phi1,
    phi2_curve,
    phi2_mesh,
    psi_pairwise,
    psi_total,
    xi,
    xi_minimum,
)
from .geometry import ClosedCurve, SurfaceMesh
from .maps import CurveMap, MeshMap, TimeVectorField
from .minimizers import (
    OptimizerConfig,
    linear_lift,
    minimize_phi1,
    minimize_phi2_curve,
    minimize_xi_numeric,
    optimal_schedule,
    random_monotone_lift,
    sphere_family_phi2,
    wrapping_sequence,
)
from .morphing import (
    is_pairwise_minimal,
    make_linear_morph,
    optimal_morph_curve,
    pairwise_minimalize_curve,
    psi_gap,
)

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_FOLD = 0, 1, 2, 3, 4
MARKER = "FAILED"


class CommandError(DistminError):
    code = "usage"


# -- helpers ------------------------------------------------------------------

def _geometry(arg: str | None, flag: str):
    if arg is None:
        raise CommandError(f"{flag} is required")
    return formats.read_geometry(fixtures.resolve(arg))


def _curve(arg: str | None, flag: str) -> ClosedCurve:
    g = _geometry(arg, flag)
    if not isinstance(g, ClosedCurve):
        raise CommandError(f"{flag} must be a curve (JSON), got a mesh")
    return g


def _curve_map(args, M: ClosedCurve, N: ClosedCurve) -> CurveMap:
    if args.map:
        h = formats.read_curve_map(fixtures.resolve(args.map))
        if not (np.array_equal(h.source.vertices, M.vertices) and np.array_equal(h.target.vertices, N.vertices)):
            raise CommandError("--map does not connect --input to --target")
        return h
    return linear_lift(M, N)


def _map(args):
    M = _geometry(args.input, "--input")
    N = _geometry(args.target, "--target") if args.target else M
    if isinstance(M, SurfaceMesh):
        if not isinstance(N, SurfaceMesh):
            raise CommandError("--input and --target must both be meshes")
        return MeshMap(M, N)
    if not isinstance(N, ClosedCurve):
        raise CommandError("--input and --target must both be curves")
    return _curve_map(args, M, N)


def _config(args, **defaults) -> OptimizerConfig:
    kw = dict(defaults)
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    if args.tol is not None:
        kw["tol"] = args.tol
    kw["seed"] = args.seed
    return OptimizerConfig(**kw)


def _num(x: float):
    return None if not math.isfinite(x) else float(x)


class Outputs:
    """Collects output files and writes them only once the command has finished."""

    def __init__(self, directory: Path):
        self.dir = directory
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        marker = self.dir / MARKER
        if marker.exists():
            marker.unlink()
        for name, text in self.files.items():
            write_text(self.dir / name, text)


# -- commands -----------------------------------------------------------------

def cmd_eval_phi(args, out: Outputs, which: int) -> int:
    h = _map(args)
    if which == 1:
        rep = phi1(h)
    else:
        rep = phi2_curve(h) if isinstance(h, CurveMap) else phi2_mesh(h)
    out.add("report.json", dumps(rep.to_dict()))
    out.add("densities.csv", rep.densities_csv())
    out.add("summary.json", dumps({"command": args.command, "value": rep.value}))
    print(repr(rep.value))
    return EXIT_OK


def cmd_eval_xi(args, out: Outputs) -> int:
    if args.schedule:
        data = json.loads(fixtures.resolve(args.schedule).read_text(encoding="utf-8"))
        phi = VolumeSchedule(data["samples"])
    else:
        phi = optimal_schedule(args.a, args.b, args.grid)
    value = xi(phi)
    out.add("summary.json", dumps({
        "command": args.command, "value": value, "grid": len(phi),
        "lower_bound": xi_minimum(float(phi.samples[0]), float(phi.samples[-1])),
    }))
    out.add("schedule.csv", csv_text(["t", "phi"], zip(phi.times, phi.samples)))
    print(repr(value))
    return EXIT_OK


def _finish_trace(args, out: Outputs, trace, extra: dict) -> int:
    out.add("trace.csv", trace.to_csv())
    summary = {"command": args.command, "converged": trace.converged, "iterations": trace.iterations,
               "final_energy": trace.final_energy, "seed": args.seed}
    summary.update(extra)
    out.add("summary.json", dumps(summary))
    print(repr(trace.final_energy))
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_minimize_phi(args, out: Outputs, which: int) -> int:
    M = _curve(args.input, "--input")
    N = _curve(args.target, "--target")
    cfg = _config(args)
    init = formats.read_curve_map(fixtures.resolve(args.map)) if args.map else random_monotone_lift(M, N, cfg.seed)
    if which == 1:
        trace = minimize_phi1(M, N, init, cfg)
        extra = {"J_max": float(np.max(trace.result.slopes)), "J_min": float(np.min(trace.result.slopes))}
    else:
        trace = minimize_phi2_curve(M, N, init, cfg, monotone=not args.non_monotone)
        extra = {"monotone": not args.non_monotone}
    out.add("map.json", dumps(formats.curve_map_to_dict(trace.result)))
    return _finish_trace(args, out, trace, extra)


def cmd_minimize_xi(args, out: Outputs) -> int:
    cfg = _config(args, max_iters=200, tol=1e-12)
    trace = minimize_xi_numeric(args.a, args.b, args.grid, cfg)
    phi = trace.result
    ref = optimal_schedule(args.a, args.b, args.grid).samples
    out.add("schedule.csv", csv_text(["t", "phi", "phi_optimal"], zip(phi.times, phi.samples, ref)))
    return _finish_trace(args, out, trace, {
        "closed_form": xi_minimum(args.a, args.b),
        "sup_rel_error": float(np.max(np.abs(phi.samples - ref) / ref)),
    })


def cmd_wrap_sequence(args, out: Outputs) -> int:
    M = _curve(args.input, "--input")
    N = _curve(args.target, "--target")
    ks = np.arange(1, args.k_max + 1)
    energies = np.array([phi2_curve(wrapping_sequence(M, N, int(k))).value for k in ks])
    slope = float(np.polyfit(np.log(ks), np.log(energies), 1)[0]) if len(ks) > 1 else float("nan")
    out.add("energies.csv", csv_text(["k", "phi2"], zip(ks.tolist(), energies)))
    out.add("summary.json", dumps({
        "command": args.command, "k_max": args.k_max, "loglog_slope": _num(slope),
        "strictly_decreasing": bool(np.all(np.diff(energies) < 0)),
        "first": float(energies[0]), "last": float(energies[-1]),
    }))
    print(repr(float(energies[-1])))
    return EXIT_OK


def cmd_sphere_check(args, out: Outputs) -> int:
    grid = np.linspace(-args.s_max, args.s_max, args.grid)
    res = sphere_family_phi2(args.radius, grid, args.subdivisions)
    out.add("family.csv", res.to_csv())
    out.add("summary.json", dumps({
        "command": args.command, "radius": args.radius, "argmin": res.argmin,
        "reference": res.reference, "energy_at_zero": float(res.energies[np.argmin(np.abs(grid))]),
    }))
    print(repr(res.argmin))
    return EXIT_OK


def _morph_outputs(args, out: Outputs, F, **extra) -> None:
    report = is_pairwise_minimal(F, args.tol if args.tol is not None else 1e-6)
    out.add("morph.json", dumps(formats.morph_to_dict(F)))
    out.add("volume.csv", formats.volume_path_csv(F))
    summary = {"command": args.command, "frames": len(F), "psi_total": psi_total(F),
               "pairwise_minimal": report.verdict, "pairwise_deviation": report.max_deviation}
    if F.is_curve and report.verdict:
        summary["psi_pairwise"] = psi_pairwise(F, report.tol)
    summary.update(extra)
    out.add("summary.json", dumps(summary))
    print(repr(summary["psi_total"]))


def cmd_morph_make(args, out: Outputs) -> int:
    h = _map(args)
    F = make_linear_morph(h.source, h.target, h, args.frames)
    _morph_outputs(args, out, F)
    return EXIT_OK


def cmd_morph_pairwise(args, out: Outputs) -> int:
    F = formats.read_morph(fixtures.resolve(args.input))
    P = pairwise_minimalize_curve(F)
    _morph_outputs(args, out, P, psi_before=psi_total(F), psi_gap=psi_gap(F))
    return EXIT_OK


def cmd_morph_optimal(args, out: Outputs) -> int:
    if args.morph:
        base = formats.read_morph(fixtures.resolve(args.morph))
        M, N = base.source, base.target
    else:
        M = _curve(args.input, "--input")
        N = _curve(args.target, "--target")
        base = make_linear_morph(M, N, _curve_map(args, M, N), args.frames)
    F = optimal_morph_curve(M, N, base)
    _morph_outputs(args, out, F, closed_form=xi_minimum(M.length, N.length))
    return EXIT_OK


def cmd_flow_energy(args, out: Outputs) -> int:
    g1 = _curve(args.input, "--input")
    g2 = _curve(args.target, "--target") if args.target else g1
    if args.field:
        v = formats.read_field(fixtures.resolve(args.field), g1)
    else:
        v = TimeVectorField.constant_in_time(g1, np.zeros(len(g1)))
    rep = energy_E_curve(v, g1, g2, args.dt)
    out.add("report.json", dumps(rep.to_dict()))
    out.add("densities.csv", rep.densities_csv())
    out.add("summary.json", dumps({"command": args.command, "value": rep.value, **rep.metadata}))
    print(repr(rep.value))
    return EXIT_OK


COMMANDS = {
    "eval-phi1": lambda a, o: cmd_eval_phi(a, o, 1),
    "eval-phi2": lambda a, o: cmd_eval_phi(a, o, 2),
    "eval-xi": cmd_eval_xi,
    "minimize-phi1": lambda a, o: cmd_minimize_phi(a, o, 1),
    "minimize-phi2": lambda a, o: cmd_minimize_phi(a, o, 2),
    "minimize-xi": cmd_minimize_xi,
    "wrap-sequence": cmd_wrap_sequence,
    "sphere-check": cmd_sphere_check,
    "morph-make": cmd_morph_make,
    "morph-pairwise": cmd_morph_pairwise,
    "morph-optimal": cmd_morph_optimal,
    "flow-energy": cmd_flow_energy,
}


HELP = {
    "eval-phi1": "volume-distortion energy of a map (default: constant-speed lift)",
    "eval-phi2": "deformation energy of a curve map or mesh map",
    "eval-xi": "volume-schedule energy of a sampled schedule",
    "minimize-phi1": "descend the volume-distortion energy from a random or given lift",
    "minimize-phi2": "descend the deformation energy from a random or given lift",
    "minimize-xi": "minimize the schedule energy numerically and compare with the closed form",
    "wrap-sequence": "deformation energies of the wrapping maps k = 1..k_max",
    "sphere-check": "deformation energy along the dilation family onto a sphere of radius R",
    "morph-make": "straight-line morph along a map, with its distortion summary",
    "morph-pairwise": "make a curve morph pairwise minimal and report the distortion removed",
    "morph-optimal": "distortion-minimal curve morph built from a base morph",
    "flow-energy": "distortion energy of a time-dependent vector field on a curve",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CommandError(message)


def _common_flags(grid: int = 200) -> argparse.ArgumentParser:
    # a fresh parent per subcommand: argparse shares parent actions, so defaults would leak
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input curve JSON, mesh OBJ or morph JSON (or @fixture)")
    common.add_argument("--target", help="target curve or mesh (or @fixture)")
    common.add_argument("--map", help="curve map JSON; defaults to the constant-speed lift")
    common.add_argument("--frames", type=int, default=32, help="number of time steps K")
    common.add_argument("--grid", type=int, default=grid, help="schedule samples or s-grid points")
    common.add_argument("--seed", type=int, default=0, help="seed for random initial maps")
    common.add_argument("--tol", type=float, default=None,
                        help="optimizer tolerance, or pairwise-minimality tolerance for morphs")
    common.add_argument("--max-iters", type=int, default=None, help="optimizer iteration cap")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--config", help="JSON file of flag defaults (keys are flag names)")
    return common


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="distmin", description="Distortion energies of curve and surface maps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p.subcommands = {}
    for name in COMMANDS:
        sp = p.subcommands[name] = sub.add_parser(
            name, help=HELP[name], description=HELP[name],
            parents=[_common_flags(11 if name == "sphere-check" else 200)])
        if name in ("eval-xi", "minimize-xi"):
            sp.add_argument("--a", type=float, default=2.0 * math.pi, help="initial volume")
            sp.add_argument("--b", type=float, default=4.0 * math.pi, help="final volume")
        if name == "eval-xi":
            sp.add_argument("--schedule", help='JSON {"samples": [...]}; defaults to the optimal schedule')
        if name == "minimize-phi2":
            sp.add_argument("--non-monotone", action="store_true", help="admit folding maps")
        if name == "wrap-sequence":
            sp.add_argument("--k-max", type=int, default=20)
        if name == "sphere-check":
            sp.add_argument("--radius", type=float, default=2.0)
            sp.add_argument("--s-max", type=float, default=0.5)
            sp.add_argument("--subdivisions", type=int, default=3)
        if name == "morph-optimal":
            sp.add_argument("--morph", help="base morph JSON; defaults to the straight-line morph")
        if name == "flow-energy":
            sp.add_argument("--field", help='vector field JSON {"grid_t", "values"}; defaults to zero')
            sp.add_argument("--dt", type=float, default=1e-3)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = json.loads(fixtures.resolve(args.config).read_text(encoding="utf-8"))
    if not isinstance(cfg, dict):
        raise FormatError(f"{args.config}: expected a JSON object")
    known = vars(args)
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("command", "config"):
            raise FormatError(f"{args.config}: unknown option '{key}'")
        defaults[dest] = value
    parser.subcommands[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def _fail(args, code: int, kind: str, message: str) -> int:
    line = json.dumps({"error": kind, "message": message, "exit_code": code,
                       "command": getattr(args, "command", None)}, sort_keys=True)
    print(line, file=sys.stderr)
    out = getattr(args, "out", None)
    if out is not None:
        try:
            d = Path(out)
            d.mkdir(parents=True, exist_ok=True)
            write_text(d / MARKER, line + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = _apply_config(parser, argv)
        out = Outputs(Path(args.out))
        code = COMMANDS[args.command](args, out)
        out.flush()
        return code
    except FileNotFoundError as exc:
        return _fail(args, EXIT_INPUT, "missing-file", f"no such file: {exc.filename}")
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        return _fail(args, EXIT_INPUT, "parse-error", str(exc))
    except (MorphFoldError, FlowFoldError) as exc:
        return _fail(args, EXIT_FOLD, exc.code, str(exc))
    except (FormatError, CommandError, InvalidParameterError) as exc:
        return _fail(args, EXIT_INPUT, exc.code, str(exc))
    except DistminError as exc:
        kind = exc.code
        code = EXIT_INPUT if kind in ("invalid-geometry", "invalid-map", "domain-mismatch",
                                      "invalid-schedule", "unknown-fixture") else EXIT_ERROR
        return _fail(args, code, kind, str(exc))
    except OSError as exc:
        return _fail(args, EXIT_INPUT, "io-error", str(exc))
    except Exception as exc:  # noqa: BLE001 - still report as one JSON line
        return _fail(args, EXIT_ERROR, "internal-error", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
