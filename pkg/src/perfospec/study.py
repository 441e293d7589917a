"""End-to-end verification runs: sweep eps, refine, extrapolate, fit the eps^2 coefficient.

A study meshes the perforated domain once per eps and refines it uniformly,
so consecutive levels differ by exactly a factor two in mesh size and a
two-level Richardson step applies.  The hole-free reference is computed on
the same mesh family, which cancels most of the discretization bias in
mu(eps) - mu.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, eigensolver, fem, geometry, serialize
from . import mesh as meshing
from .errors import AmbiguousMatch, IllConditionedFit, PerfospecError, StudyError, TrackingError

FIT_MODELS = ("pure_quadratic", "quadratic_plus_log")
OVERLAP_MIN = 0.8
OVERLAP_MARGIN = 0.1


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class MeshPlan:
    h_far: float
    h_near_ratio: float = 0.125
    grading: float = 0.3
    levels: int = 2

    def h_near(self, eps: float) -> float:
        return self.h_near_ratio * eps

    def pairs(self, eps: float) -> list[tuple[float, float]]:
        """(h_far, h_near) realized at each level."""
        return [(self.h_far / 2**l, self.h_near(eps) / 2**l) for l in range(self.levels)]


@dataclass(frozen=True)
class ExperimentConfig:
    domain: dict  # normalized outer-domain dict; strings like "rect:1.3x0.9" are accepted
    hole_shape: geometry.StarShape
    center: tuple[float, float]
    eps_list: tuple[float, ...]
    mesh: MeshPlan
    mode: int = 1
    tol: float = 1e-8
    fit_model: str = "pure_quadratic"
    coefficient_tolerance: float = 0.1
    reference: str = "numeric"  # how mu for the fit is obtained
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "domain", meshing.outer_from_dict(self.domain).to_dict())
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        eps = tuple(sorted((float(e) for e in self.eps_list), reverse=True))
        object.__setattr__(self, "eps_list", eps)
        if len(set(eps)) != len(eps):
            raise ValueError("eps values must be pairwise distinct")
        if not eps or eps[-1] <= 0:
            raise ValueError("eps values must be positive")
        dim = self.outer.min_dimension
        if eps[0] > 0.25 * dim:
            raise ValueError(f"eps={eps[0]} exceeds a quarter of the domain size {dim}")
        if self.fit_model not in FIT_MODELS:
            raise ValueError(f"fit_model must be one of {FIT_MODELS}")
        if self.reference not in ("numeric", "analytic"):
            raise ValueError("reference must be 'numeric' or 'analytic'")
        if self.mesh.levels < 2:
            raise ValueError("at least two mesh levels are needed for extrapolation")
        if self.mode < 1:
            raise ValueError("mode index starts at 1")

    @property
    def outer(self):
        return meshing.outer_from_dict(self.domain)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        hole = d["hole"]
        if "file" in hole:
            path = Path(hole["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            shape = geometry.StarShape.load(path)
        else:
            shape = geometry.StarShape.from_dict(hole["shape"])
        m = d.get("mesh", {})
        plan = MeshPlan(
            h_far=float(m.get("h_far", 0.03)),
            h_near_ratio=float(m.get("h_near_ratio", 0.125)),
            grading=float(m.get("grading", 0.3)),
            levels=int(m.get("levels", 2)),
        )
        return cls(
            domain=d["domain"],
            hole_shape=shape,
            center=tuple(hole.get("center", (0.0, 0.0))),
            eps_list=tuple(d["eps_list"]),
            mesh=plan,
            mode=int(d.get("mode", 1)),
            tol=float(d.get("tol", 1e-8)),
            fit_model=d.get("fit_model", "pure_quadratic"),
            coefficient_tolerance=float(d.get("coefficient_tolerance", 0.1)),
            reference=d.get("reference", "numeric"),
            order=int(d.get("order", 1)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "hole": {"shape": self.hole_shape.to_dict(), "center": list(self.center)},
            "eps_list": list(self.eps_list),
            "mesh": asdict(self.mesh),
            "mode": self.mode,
            "tol": self.tol,
            "fit_model": self.fit_model,
            "coefficient_tolerance": self.coefficient_tolerance,
            "reference": self.reference,
            "order": self.order,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def hole(self, eps: float) -> geometry.HoleInstance:
        return geometry.HoleInstance(self.hole_shape, eps, self.center)


# ---------------------------------------------------------------------------
# statistics


def richardson(values, order: float = 2.0) -> tuple[float, float]:
    """Two-level extrapolation from the last two entries (mesh ratio 2)."""
    if isinstance(values, dict):
        values = [values[k] for k in sorted(values)]
    values = list(values)
    if len(values) < 2:
        raise ValueError("need at least two levels")
    v1, v2 = float(values[-2]), float(values[-1])
    vstar = v2 + (v2 - v1) / (2.0**order - 1.0)
    return vstar, abs(v2 - vstar)


@dataclass(frozen=True)
class FitResult:
    c_hat: float
    stderr: float
    model: str
    d_hat: float | None = None
    condition: float = 1.0


def fit_coefficient(points, mu0: float, model: str = "pure_quadratic") -> FitResult:
    """Weighted least squares for mu(eps) - mu0 = -c eps^2 [+ d eps^3 log^2(1/eps)], weights 1/eps^4."""
    if model not in FIT_MODELS:
        raise ValueError(f"unknown fit model {model!r}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    eps, mu = pts[:, 0], pts[:, 1]
    if eps.max() < 2.0 * eps.min():
        raise ValueError("eps values must span at least a factor of two")
    y = mu - mu0
    cols = [-(eps**2)]
    if model == "quadratic_plus_log":
        cols.append(eps**3 * np.log(1.0 / eps) ** 2)
    X = np.column_stack(cols)
    w = eps**-4.0
    N = X.T @ (w[:, None] * X)
    cond = float(np.linalg.cond(N))
    if not cond <= 1e12:
        raise IllConditionedFit(f"normal matrix condition number {cond:.3e}")
    beta = np.linalg.solve(N, X.T @ (w * y))
    r = y - X @ beta
    dof = len(y) - X.shape[1]
    s2 = float(np.sum(w * r * r) / dof) if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(N)
    d_hat = float(beta[1]) if model == "quadratic_plus_log" else None
    return FitResult(float(beta[0]), float(math.sqrt(max(cov[0, 0], 0.0))), model, d_hat, cond)


# ---------------------------------------------------------------------------
# mode tracking


def mode_overlaps(reference_space: fem.FESpace, reference_nodal: np.ndarray, perturbed: eigensolver.Spectrum) -> np.ndarray:
    """|u^T B v_j| / sqrt(u^T B u) where u interpolates the reference mode on the perturbed mesh."""
    op = perturbed.operator
    nodes = op.space.nodes[op.free_map]
    u = fem.evaluate_nodal_many(reference_space, reference_nodal, nodes, clip=True)
    Bu = op.mass @ u
    nrm = math.sqrt(float(u @ Bu))
    if nrm == 0.0:
        raise TrackingError("reference mode vanishes on the perturbed mesh")
    return np.abs(perturbed.vectors.T @ Bu) / nrm


def _match(eigenvalues, space, nodal, perturbed, i: int, gap_tol: float):
    mu = eigenvalues[i - 1]
    others = np.delete(eigenvalues, i - 1)
    if others.size and np.min(np.abs(others - mu)) <= gap_tol * abs(mu):
        raise AmbiguousMatch(f"mode {i} is not separated from its neighbors (relative gap <= {gap_tol:g})")
    ov = mode_overlaps(space, nodal, perturbed)
    order = np.argsort(-ov, kind="stable")
    best = float(ov[order[0]])
    if best < OVERLAP_MIN:
        raise TrackingError(f"best overlap {best:.3f} below {OVERLAP_MIN}")
    if len(ov) > 1 and best - float(ov[order[1]]) < OVERLAP_MARGIN:
        raise AmbiguousMatch(f"top overlaps {best:.3f} and {float(ov[order[1]]):.3f} are too close")
    return int(order[0]) + 1, best


def track_mode(unperturbed: eigensolver.Spectrum, perturbed: eigensolver.Spectrum, i: int, gap_tol: float = 1e-8):
    """1-based index of the perturbed mode best matching mode ``i``, and its overlap."""
    if not 1 <= i <= unperturbed.k:
        raise ValueError("mode index out of range")
    space = unperturbed.operator.space
    nodal = unperturbed.field(i - 1).nodal_values()
    return _match(unperturbed.eigenvalues, space, nodal, perturbed, i, gap_tol)


# ---------------------------------------------------------------------------
# the study


@dataclass(frozen=True)
class Row:
    eps: float
    level: int
    h_far: float
    h_near: float
    n_dofs: int
    mu_h: float
    residual: float
    match_index: int
    match_overlap: float


@dataclass(frozen=True)
class Extrapolated:
    eps: float
    mu: float
    error_estimate: float
    flagged: bool


@dataclass
class StudyReport:
    rows: list[Row]
    extrapolated: list[Extrapolated]
    mu0: float
    mu0_error_estimate: float
    mu0_levels: list[float]
    c_hat: float
    stderr: float
    d_hat: float | None
    c_pred: float
    relative_discrepancy: float
    verdict: str
    reasons: list[str]
    leave_one_out: list[float]
    unperturbed: dict
    provenance: dict
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        d["extrapolated"] = [asdict(e) for e in self.extrapolated]
        return d


def _solve_levels(base: meshing.Mesh2D, levels: int, k: int, tol: float, order: int):
    m = base
    out = []
    for lvl in range(levels):
        op = fem.assemble(m, order)
        out.append((m, eigensolver.smallest_eigenpairs(op, min(k, op.n_free), tol=tol)))
        if lvl < levels - 1:
            m = meshing.refine_uniform(m)
    return out


def _reference_family(cfg: ExperimentConfig):
    base = meshing.generate(cfg.outer, None, h_far=cfg.mesh.h_far, grading=cfg.mesh.grading)
    return _solve_levels(base, cfg.mesh.levels, cfg.mode + 2, cfg.tol, cfg.order)


def _eps_task(args):
    cfg, eps, refs = args
    rows = []
    try:
        hole = cfg.hole(eps)
        base = meshing.generate(
            cfg.outer, hole, h_far=cfg.mesh.h_far, h_near=cfg.mesh.h_near(eps), grading=cfg.mesh.grading
        )
    except PerfospecError as exc:
        raise StudyError(f"meshing failed: {exc}", eps=eps, level=0) from exc
    m = base
    for lvl in range(cfg.mesh.levels):
        try:
            op = fem.assemble(m, cfg.order)
            spec = eigensolver.smallest_eigenpairs(op, min(cfg.mode + 2, op.n_free), tol=cfg.tol)
            ref_space, ref_nodal, ref_lam = refs[lvl]
            ref = _RefSpectrum(ref_space, ref_nodal, ref_lam)
            j, ov = ref.track(spec, cfg.mode, cfg.tol)
        except PerfospecError as exc:
            raise StudyError(str(exc), eps=eps, level=lvl) from exc
        hf, hn = cfg.mesh.pairs(eps)[lvl]
        rows.append(
            Row(eps, lvl, hf, hn, op.n_free, float(spec.eigenvalues[j - 1]), float(spec.residuals[j - 1]), j, ov)
        )
        if lvl < cfg.mesh.levels - 1:
            m = meshing.refine_uniform(m)
    return rows


@dataclass(frozen=True, eq=False)
class _RefSpectrum:
    """Picklable stand-in for the hole-free spectrum used by tracking."""

    space: fem.FESpace
    nodal: np.ndarray  # nodal values of the target mode
    eigenvalues: np.ndarray

    def track(self, perturbed: eigensolver.Spectrum, i: int, gap_tol: float):
        return _match(self.eigenvalues, self.space, self.nodal, perturbed, i, gap_tol)


def predicted_data(cfg: ExperimentConfig, reference_mesh=None) -> asymptotics.UnperturbedData:
    """Closed-form unperturbed data when the domain admits it, numeric otherwise."""
    dom = cfg.outer
    if isinstance(dom, meshing.Rectangle):
        a, b = dom.a, dom.b
        m, n = asymptotics.rectangle_modes_sorted(a, b, cfg.mode)[-1]
        c = (cfg.center[0] - dom.origin[0], cfg.center[1] - dom.origin[1])
        return asymptotics.rectangle_mode(a, b, m, n, c)
    if isinstance(dom, meshing.Disk) and cfg.mode == 1 and np.allclose(cfg.center, dom.center, atol=1e-14):
        return asymptotics.disk_radial_mode(dom.R, 1)
    if reference_mesh is None:
        raise ValueError("a reference mesh is needed for numeric unperturbed data")
    return asymptotics.numeric_unperturbed(reference_mesh, cfg.mode, cfg.center, tol=cfg.tol, order=cfg.order)


def _versions() -> dict:
    import scipy
    import triangle

    return {
        "perfospec": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "triangle": getattr(triangle, "__version__", "unknown"),
    }


def run_study(cfg: ExperimentConfig, jobs: int = 1) -> StudyReport:
    try:
        ref_levels = _reference_family(cfg)
    except PerfospecError as exc:
        raise StudyError(f"reference solve failed: {exc}") from exc
    i = cfg.mode
    mu0_levels = [float(s.eigenvalues[i - 1]) for _, s in ref_levels]
    refs = [(s.operator.space, s.field(i - 1).nodal_values(), s.eigenvalues) for _, s in ref_levels]
    data = predicted_data(cfg, ref_levels[-1][0])
    c_pred = asymptotics.coefficient(data, geometry.area(cfg.hole_shape))
    p = 2.0 * cfg.order
    if cfg.reference == "analytic" and data.source == "analytic":
        mu0, mu0_err = data.mu, 0.0
    else:
        mu0, mu0_err = richardson(mu0_levels, p)

    tasks = [(cfg, eps, refs) for eps in cfg.eps_list]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_eps_task, tasks))
    else:
        results = [_eps_task(t) for t in tasks]
    rows = [r for rs in results for r in rs]

    reasons: list[str] = []
    extrap: list[Extrapolated] = []
    for eps, rs in zip(cfg.eps_list, results):
        mu_star, est = richardson([r.mu_h for r in rs], p)
        flagged = not est <= 0.1 * abs(c_pred) * eps * eps
        if flagged:
            reasons.append(f"eps={eps:g}: extrapolation error {est:.3e} exceeds 10% of the predicted shift")
        extrap.append(Extrapolated(eps, mu_star, est, flagged))
    bad_res = [r for r in rows if not r.residual <= cfg.tol]
    if bad_res:
        reasons.append(f"{len(bad_res)} eigen-residual(s) above tol")

    usable = [(e.eps, e.mu) for e in extrap if not e.flagged]
    c_hat = stderr = float("nan")
    d_hat = None
    loo: list[float] = []
    try:
        fit = fit_coefficient(usable, mu0, cfg.fit_model)
        c_hat, stderr, d_hat = fit.c_hat, fit.stderr, fit.d_hat
        if len(usable) > 3:
            for k in range(len(usable)):
                sub = usable[:k] + usable[k + 1 :]
                try:
                    loo.append(fit_coefficient(sub, mu0, cfg.fit_model).c_hat)
                except (ValueError, IllConditionedFit):
                    pass
    except (ValueError, IllConditionedFit) as exc:
        reasons.append(f"fit failed: {exc}")
    rel = abs(c_hat - c_pred) / abs(c_pred) if math.isfinite(c_hat) else float("nan")
    if not rel <= cfg.coefficient_tolerance:
        reasons.append(f"relative discrepancy {rel:.4g} exceeds {cfg.coefficient_tolerance:g}")
    verdict = "pass" if not reasons else "fail"
    return StudyReport(
        rows=rows,
        extrapolated=extrap,
        mu0=mu0,
        mu0_error_estimate=mu0_err,
        mu0_levels=mu0_levels,
        c_hat=c_hat,
        stderr=stderr,
        d_hat=d_hat,
        c_pred=c_pred,
        relative_discrepancy=rel,
        verdict=verdict,
        reasons=reasons,
        leave_one_out=loo,
        unperturbed=data.to_dict(),
        provenance={"config_hash": cfg.config_hash(), "versions": _versions()},
        config=cfg.to_dict(),
    )


# ---------------------------------------------------------------------------
# outputs

CSV_FIELDS = ["eps", "level", "h_far", "h_near", "n_dofs", "mu_h", "residual", "match_index", "match_overlap"]


def fmt(v) -> str:
    return serialize.num(v) if isinstance(v, float) else str(v)


def report_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.rows:
        d = asdict(r)
        w.writerow([fmt(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def report_json(report: StudyReport) -> str:
    return serialize.dumps(report.to_dict()) + "\n"


def write_convergence_svg(report: StudyReport, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "perfospec", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        eps = np.array([e.eps for e in report.extrapolated])
        shift = np.array([abs(e.mu - report.mu0) for e in report.extrapolated])
        ax.loglog(eps, shift, "o", label="|mu(eps) - mu|, extrapolated")
        grid = np.geomspace(eps.min() / 1.2, eps.max() * 1.2, 50)
        ax.loglog(grid, abs(report.c_pred) * grid**2, "-", label="predicted |c| eps^2")
        ax.set_xlabel("eps")
        ax.set_ylabel("eigenvalue shift")
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def write_outputs(report: StudyReport, outdir) -> list[str]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.csv").write_text(report_csv(report))
    (outdir / "report.json").write_text(report_json(report))
    write_convergence_svg(report, outdir / "convergence.svg")
    return ["report.csv", "report.json", "convergence.svg"]


def default_jobs() -> int:
    return max(1, min(4, os.cpu_count() or 1))


__all__ = [
    "ExperimentConfig",
    "MeshPlan",
    "StudyReport",
    "FitResult",
    "richardson",
    "fit_coefficient",
    "track_mode",
    "mode_overlaps",
    "run_study",
    "write_outputs",
    "report_csv",
    "report_json",
]
