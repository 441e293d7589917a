"""Command-line entry point ``perfospec``.

Exit codes: 0 success or pass verdict, 1 execution error, 2 fail verdict, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, serialize
from .errors import PerfospecError

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def write(self, path) -> None:
        Path(path).write_text(serialize.dumps(self.__dict__) + "\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _hash_inputs(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, Path) and p.is_file():
            h.update(p.read_bytes())
        else:
            h.update(repr(p).encode())
        h.update(b"\0")
    return h.hexdigest()


def _point(text: str) -> tuple[float, float]:
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return a, b


def _emit(obj) -> None:
    sys.stdout.write(serialize.dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_shape(args) -> int:
    from . import geometry

    shape = geometry.StarShape.load(args.file)
    if args.action == "area":
        sys.stdout.write(serialize.num(geometry.area(shape)) + "\n")
        return EXIT_OK
    rep = geometry.check_assumptions(shape, tol=args.tol)
    out = rep.to_dict()
    out["area"] = geometry.area(shape) if rep.winding_number == 1 else None
    out["effective_radius"] = geometry.effective_radius(shape) if rep.winding_number == 1 else None
    _emit(out)
    return EXIT_OK if rep.passes else EXIT_FAIL


def _hole_from_spec(spec: dict, base: Path):
    from . import geometry

    if spec is None:
        return None
    if "file" in spec:
        p = Path(spec["file"])
        shape = geometry.StarShape.load(p if p.is_absolute() else base / p)
    else:
        shape = geometry.StarShape.from_dict(spec["shape"])
    return geometry.HoleInstance(shape, float(spec["eps"]), tuple(spec.get("center", (0.0, 0.0))))


def cmd_mesh(args) -> int:
    from . import mesh as meshing

    cfg_path = Path(args.config)
    cfg = json.loads(cfg_path.read_text())
    started = _now()
    outer = meshing.outer_from_dict(cfg["domain"])
    hole = _hole_from_spec(cfg.get("hole"), cfg_path.parent)
    m = meshing.generate(
        outer,
        hole,
        h_far=float(cfg.get("h_far", 0.1)),
        h_near=cfg.get("h_near"),
        grading=float(cfg.get("grading", 0.3)),
        min_angle=float(cfg.get("min_angle", 25.0)),
    )
    for _ in range(int(cfg.get("refine", 0))):
        m = meshing.refine_uniform(m)
    meshing.write_mesh(m, args.output)
    q = meshing.quality(m)
    inv = meshing.check_invariants(m)
    _emit({"vertices": m.n_vertices, "triangles": m.n_triangles, "quality": dataclasses.asdict(q), "invariants": inv})
    RunManifest("mesh", _hash_inputs(cfg_path), started=started, finished=_now(), outputs=[str(args.output)]).write(
        str(args.output) + ".manifest.json"
    )
    return EXIT_OK if all(inv.values()) else EXIT_FAIL


def cmd_solve(args) -> int:
    from . import eigensolver, fem
    from . import mesh as meshing

    m = meshing.read_mesh(args.mesh)
    op = fem.assemble(m, args.order)
    spec = eigensolver.smallest_eigenpairs(op, args.k, tol=args.tol, max_iter=args.max_iter)
    out = {
        "eigenvalues": spec.eigenvalues.tolist(),
        "residuals": spec.residuals.tolist(),
        "n_dofs": op.n_free,
        "order": args.order,
        "orthonormality_defect": spec.orthonormality_defect(),
    }
    _emit(out)
    if args.output:
        Path(args.output).write_text(serialize.dumps(out) + "\n")
    return EXIT_OK


def _unperturbed_for(domain, mode: str, center):
    from . import asymptotics
    from . import mesh as meshing

    if isinstance(domain, meshing.Disk):
        if not mode.startswith("radial:"):
            raise UsageError("disk domains support --mode radial:K")
        if center is not None and np.hypot(center[0] - domain.center[0], center[1] - domain.center[1]) > 0:
            raise UsageError("closed-form disk data is available at the disk center only")
        return asymptotics.disk_radial_mode(domain.R, int(mode.split(":", 1)[1]))
    if center is None:
        raise UsageError("--center is required for rectangle domains")
    if "," in mode:
        m, n = (int(t) for t in mode.split(","))
    else:
        m, n = asymptotics.rectangle_modes_sorted(domain.a, domain.b, int(mode))[-1]
    c = (center[0] - domain.origin[0], center[1] - domain.origin[1])
    return asymptotics.rectangle_mode(domain.a, domain.b, m, n, c)


def cmd_predict(args) -> int:
    from . import asymptotics, geometry
    from . import mesh as meshing

    try:
        domain = meshing.parse_domain(args.domain)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = _unperturbed_for(domain, args.mode, args.center)
    shape = geometry.StarShape.load(args.hole)
    area_E = geometry.area(shape)
    out = {
        "mu": data.mu,
        "coefficient": asymptotics.coefficient(data, area_E),
        "predicted": asymptotics.predict(data, area_E, args.eps),
        "eps": args.eps,
        "area_E": area_E,
        "phi_at_center": data.phi_at_center,
        "grad_at_center": list(data.grad_at_center),
    }
    _emit(out)
    return EXIT_OK


_KERNEL_OPS = ("log", "green", "regular", "F", "Kn", "corrected")


def _kernel_value(op: str, x, y, ns) -> float:
    from . import kernels

    if op == "log":
        return kernels.log_kernel(x, y)
    if op == "green":
        return kernels.disk_green(x, y, ns.R)
    if op == "regular":
        return kernels.regular_part(x, y, ns.R)
    if op == "F":
        return kernels.hole_log_potential(x, ns.M, ns.eps)
    if op == "Kn":
        return kernels.hole_moment_potential(x, ns.n, ns.M, ns.eps)
    return kernels.corrected_kernel(x, y, ns.R, ns.mu, ns.M, ns.eps)


def cmd_kernels(args) -> int:
    needs_y = args.op in ("log", "green", "regular", "corrected")
    if args.op in ("F", "Kn", "corrected") and args.eps is None:
        raise UsageError(f"--eps is required for --op {args.op}")
    if args.csv:
        with open(args.csv, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["x1", "x2"] + (["y1", "y2"] if needs_y else []) + ["value"])
        for r in rows:
            vals = [float(t) for t in r]
            x = vals[0:2]
            if needs_y:
                if len(vals) < 4:
                    raise UsageError("CSV rows need x1,x2,y1,y2 for this operator")
                y = vals[2:4]
            else:
                y = None
            w.writerow([serialize.num(v) for v in vals[: 4 if needs_y else 2]] + [serialize.num(_kernel_value(args.op, x, y, args))])
        return EXIT_OK
    if args.x is None:
        raise UsageError("--x is required (or --csv)")
    if needs_y and args.y is None:
        raise UsageError(f"--y is required for --op {args.op}")
    _emit({"op": args.op, "value": _kernel_value(args.op, args.x, args.y, args)})
    return EXIT_OK


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def cmd_study(args) -> int:
    from . import study

    started = _now()
    cfg = study.ExperimentConfig.load(args.config)
    report = study.run_study(cfg, jobs=args.jobs)
    outs = study.write_outputs(report, args.output)
    out = Path(args.output)
    RunManifest("study", cfg.config_hash(), started=started, finished=_now(), outputs=outs).write(out / "manifest.json")
    _emit(
        {
            "verdict": report.verdict,
            "c_hat": report.c_hat,
            "stderr": report.stderr,
            "c_pred": report.c_pred,
            "relative_discrepancy": report.relative_discrepancy,
            "reasons": report.reasons,
        }
    )
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="perfospec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"perfospec {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("shape", help="validate a hole shape or print its area")
    s.add_argument("action", choices=["check", "area"])
    s.add_argument("file", help="shape JSON file")
    s.add_argument("--tol", type=float, default=1e-8, help="orthogonality tolerance")
    s.set_defaults(func=cmd_shape)

    s = sub.add_parser("mesh", help="mesh a domain described by a JSON config")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="mesh file to write")
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("solve", help="smallest Dirichlet eigenvalues on a mesh file")
    s.add_argument("mesh")
    s.add_argument("-k", type=int, default=5)
    s.add_argument("--order", type=int, choices=[1, 2], default=1)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("predict", help="leading-order eigenvalue with a small hole")
    s.add_argument("--domain", required=True, help="rect:AxB or disk:R")
    s.add_argument("--mode", required=True, help="m,n or index i (rectangle); radial:K (disk)")
    s.add_argument("--center", type=_point, help="hole center x,y")
    s.add_argument("--hole", required=True, help="shape JSON file")
    s.add_argument("--eps", type=float, required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("kernels", help="evaluate Green-kernel objects")
    ks = s.add_subparsers(dest="kaction", parser_class=_Parser, required=True)
    e = ks.add_parser("eval")
    e.add_argument("--op", required=True, choices=_KERNEL_OPS)
    e.add_argument("--x", type=_point)
    e.add_argument("--y", type=_point)
    e.add_argument("--R", type=float, default=1.0)
    e.add_argument("--M", type=float, default=1.0)
    e.add_argument("--eps", type=float)
    e.add_argument("--mu", type=float, default=0.0)
    e.add_argument("--n", type=int, choices=[1, 2], default=1)
    e.add_argument("--csv", help="batch mode: CSV of x1,x2[,y1,y2] rows")
    e.set_defaults(func=cmd_kernels)

    s = sub.add_parser("study", help="run a full verification study")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"perfospec: error: {exc}\n")
        return EXIT_USAGE
    except (PerfospecError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"perfospec: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
