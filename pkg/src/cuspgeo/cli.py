"""Command-line front end: ``cuspgeo <task> --config cfg.json [--out dir]``.

Tasks: analyze (critical points, eigenvalues, barriers, convexity), trace
(phase trajectories), boundary-flow (damped boundary system), expmap (atlas
plus injectivity/surjectivity/heteroclinic diagnostics), verify (invariant
suites).  Outputs are deterministic: JSON with sorted keys, CSV with
round-trip float formatting, SVG with fixed layout; no timestamps.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, presets
from ._backend import backend_name
from .dynamics import (
    BoundaryState,
    PhasePoint,
    boundary_energy,
    boundary_field,
    energy,
    integrate,
    rescaled_field,
    shell_point,
)
from .errors import ConfigError
from .expmap import (
    backward_start_check,
    build_atlas,
    classify_heteroclinic,
    injectivity_report,
    surjectivity_report,
)
from .fourier import BoundaryFunction
from .metric import CuspMetric, EmbeddedBoundaryCurve, make_model_metric, metric_from_boundary_curve
from .oracle import compare_trajectories, integrate_geodesic_direct, phase_to_direct
from .svg import render_svg_phase_portrait

TASKS = ("analyze", "trace", "boundary-flow", "expmap", "verify")

_TOP_KEYS = {
    "metric", "k", "task", "tol", "tau0", "fan_size", "r_levels", "t_span",
    "starts", "boundary_starts", "output_dir", "surjectivity_grid",
}
_METRIC_KEYS = {"preset", "R", "c", "b", "mean", "amp", "fourier", "curve_csv"}
_PRESET_PARAMS = {
    "circle": {"R"},
    "offset_circle": {"c"},
    "ellipse": {"c", "b"},
    "cosine": {"mean", "amp"},
}


@dataclass
class RunConfig:
    metric_spec: dict
    task: str
    k: int = 2
    tol: float = 1e-10
    tau0: float = 0.05
    fan_size: int = 64
    r_levels: list = field(default_factory=lambda: [1e-2, 1e-3])
    t_span: tuple = (0.0, 20.0)
    starts: list = field(default_factory=list)
    boundary_starts: list = field(default_factory=list)
    output_dir: str = "out"
    surjectivity_grid: list | None = None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration (strict: unknown keys fail)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "metric" not in raw:
        raise ConfigError("missing required key 'metric'")
    metric_spec = raw["metric"]
    if not isinstance(metric_spec, dict):
        raise ConfigError("'metric' must be an object")
    unknown = set(metric_spec) - _METRIC_KEYS
    if unknown:
        raise ConfigError(f"unknown metric keys: {sorted(unknown)}")
    sources = [key for key in ("preset", "fourier", "curve_csv") if key in metric_spec]
    if len(sources) != 1:
        raise ConfigError(
            f"need exactly one metric source among preset/fourier/curve_csv, got {sources}"
        )
    if "preset" in metric_spec:
        name = metric_spec["preset"]
        if name not in _PRESET_PARAMS:
            raise ConfigError(f"unknown preset {name!r}")
        extra = set(metric_spec) - {"preset"} - _PRESET_PARAMS[name]
        if extra:
            raise ConfigError(f"preset {name!r} does not take keys {sorted(extra)}")
    task = raw.get("task")
    if task is None:
        raise ConfigError("missing required key 'task'")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; choose from {TASKS}")
    k = int(raw.get("k", 2))
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    cfg = RunConfig(
        metric_spec=metric_spec,
        task=task,
        k=k,
        tol=float(raw.get("tol", 1e-10)),
        tau0=float(raw.get("tau0", 0.05)),
        fan_size=int(raw.get("fan_size", 64)),
        r_levels=[float(v) for v in raw.get("r_levels", [1e-2, 1e-3])],
        t_span=tuple(float(v) for v in raw.get("t_span", (0.0, 20.0))),
        starts=list(raw.get("starts", [])),
        boundary_starts=list(raw.get("boundary_starts", [])),
        output_dir=str(raw.get("output_dir", "out")),
        surjectivity_grid=raw.get("surjectivity_grid"),
    )
    if cfg.tol <= 0:
        raise ConfigError("tol must be positive")
    if len(cfg.t_span) != 2:
        raise ConfigError("t_span must be [t0, t1]")
    return cfg


def build_metric(cfg: RunConfig) -> CuspMetric:
    spec = cfg.metric_spec
    if "preset" in spec:
        name = spec["preset"]
        if name == "circle":
            return presets.circle(radius=float(spec.get("R", 1.0)), k=cfg.k)
        if name == "offset_circle":
            return presets.offset_circle(c=float(spec.get("c", 2.0)), k=cfg.k)
        if name == "ellipse":
            return presets.ellipse(c=float(spec.get("c", 2.0)),
                                   b=float(spec.get("b", 1.0)), k=cfg.k)
        return presets.cosine_profile(mean=float(spec.get("mean", 2.0)),
                                      amplitude=float(spec.get("amp", 1.0)), k=cfg.k)
    if "curve_csv" in spec:
        curve = EmbeddedBoundaryCurve.from_csv(spec["curve_csv"])
        return metric_from_boundary_curve(curve, cfg.k)
    four = spec["fourier"]
    s_spec = four.get("S")
    if s_spec is None:
        raise ConfigError("fourier metric needs an 'S' table")
    length = float(four.get("length", 2.0 * np.pi))
    s_fn = BoundaryFunction.from_coefficients(
        s_spec.get("cos", [0.0]), s_spec.get("sin", []), length
    )
    c_spec = four.get("C")
    if c_spec is None:
        c_fn = BoundaryFunction.constant(1.0, length)
    else:
        c_fn = BoundaryFunction.from_coefficients(
            c_spec.get("cos", [1.0]), c_spec.get("sin", []), length
        )
    return make_model_metric(cfg.k, s_fn, c_fn)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


def _task_analyze(metric: CuspMetric, cfg: RunConfig, out: Path) -> int:
    crit = analysis.find_critical_points(metric)
    report: dict = {"k": metric.k, "boundary_length": metric.length,
                    "sup_s": metric.sup_s, "r_max": metric.r_max}
    if isinstance(crit, analysis.ConstantS):
        report["constant_s"] = True
        report["s_value"] = crit.s_value
        report["critical_points"] = []
    else:
        report["constant_s"] = False
        entries = []
        for cp in crit:
            entry = cp.to_dict()
            if cp.type != analysis.DEGENERATE:
                eig = analysis.eigen_data(metric, cp)
                entry.update(eig.to_dict())
                lams = (eig.lambda1, eig.lambda2, eig.lambda3)
                entry["resonances"] = [
                    list(t) for t in analysis.resonance_relations(lams, 8)
                ]
            entries.append(entry)
        report["critical_points"] = entries
        barriers = []
        maxima = [c for c in crit if c.type == analysis.MAXIMUM]
        minima = [c for c in crit if c.type == analysis.MINIMUM]
        for mx in maxima:
            for mn in minima:
                try:
                    rep = analysis.check_barrier(metric, mx, mn)
                except Exception:
                    continue
                barriers.append(rep.to_dict())
        report["barriers"] = barriers
    if metric.curve is not None:
        report["convexity"] = analysis.convexity_bound(metric).to_dict()
    _write_json(out / "analysis.json", report)
    return 0


def _default_starts(metric: CuspMetric, cfg: RunConfig) -> list:
    r0 = min(0.01, metric.r_max / 10.0)
    return [[r0, i * metric.length / 8.0, 0.0] for i in range(8)]


def _task_trace(metric: CuspMetric, cfg: RunConfig, out: Path) -> int:
    starts = cfg.starts or _default_starts(metric, cfg)
    index = []
    for i, row in enumerate(starts):
        if len(row) == 4:
            point = PhasePoint(*(float(v) for v in row))
        else:
            r0, phi0, theta0 = (float(v) for v in row)
            point = shell_point(metric, r0, phi0, theta0)
        traj = integrate(metric, point, cfg.t_span, cfg.tol)
        name = f"trace_{i:03d}.csv"
        traj.to_csv(out / name)
        index.append({
            "file": name,
            "start": [point.r, point.phi, point.xi, point.theta],
            "stop_reason": traj.stop_reason,
            "stop_detail": traj.stop_detail,
            "samples": len(traj),
        })
    _write_json(out / "trace_index.json", index)
    return 0


def _task_boundary_flow(metric: CuspMetric, cfg: RunConfig, out: Path) -> int:
    starts = cfg.boundary_starts or [[i * metric.length / 8.0, 1.0] for i in range(8)]
    trajs = []
    index = []
    for i, row in enumerate(starts):
        state = BoundaryState(float(row[0]), float(row[1]))
        traj = integrate(metric, state, cfg.t_span, cfg.tol)
        name = f"boundary_{i:03d}.csv"
        traj.to_csv(out / name)
        trajs.append(traj)
        index.append({
            "file": name,
            "start": [state.phi, state.theta],
            "stop_reason": traj.stop_reason,
            "e_boundary_final": boundary_energy(
                metric, BoundaryState(float(traj.phi[-1]), float(traj.theta[-1]))
            ),
        })
    _write_json(out / "boundary_index.json", index)
    crit = analysis.find_critical_points(metric)
    marks = [] if isinstance(crit, analysis.ConstantS) else [
        (c.phi0, 0.0) for c in crit
    ]
    theta_span = max(1.0, max(float(np.max(np.abs(t.theta))) for t in trajs))
    svg = render_svg_phase_portrait(
        trajs, ((0.0, metric.length), (-theta_span, theta_span)),
        axes="phi-theta", marks=marks, title="boundary flow",
    )
    (out / "boundary_portrait.svg").write_text(svg)
    return 0


def _task_expmap(metric: CuspMetric, cfg: RunConfig, out: Path) -> int:
    atlas = build_atlas(metric, cfg.tau0, cfg.fan_size, tol=cfg.tol)
    index = []
    for i, geo in enumerate(atlas.geodesics):
        name = f"geodesic_{i:04d}.csv"
        geo.trajectory.to_csv(out / name)
        index.append({
            "file": name,
            "label": geo.label,
            "source_phi0": geo.source_phi0,
            "source_type": geo.source_type,
            "alpha": geo.alpha,
            "stop_reason": geo.trajectory.stop_reason,
        })
    _write_json(out / "atlas_index.json", {
        "kind": atlas.kind,
        "tau0": atlas.tau0,
        "tau0_effective": atlas.tau0_effective,
        "fan_size": atlas.fan_size,
        "label_period": atlas.label_period,
        "warnings": atlas.warnings,
        "geodesics": index,
    })
    inj = injectivity_report(atlas, cfg.r_levels)
    _write_json(out / "injectivity.json", inj.to_dict())
    grid_spec = cfg.surjectivity_grid or [[1e-3, 1e-2, 32], [0.0, metric.length, 32]]
    grid = ((grid_spec[0][0], grid_spec[0][1], int(grid_spec[0][2])),
            (grid_spec[1][0], grid_spec[1][1], int(grid_spec[1][2])))
    surj = surjectivity_report(atlas, grid)
    _write_json(out / "surjectivity.json", surj.to_dict())
    het = []
    if atlas.kind == "morse":
        for mx in atlas.maxima:
            for side in (+1, -1):
                res = classify_heteroclinic(metric, mx, side)
                entry = res.to_dict()
                entry["max_phi0"] = mx.phi0
                entry["side"] = side
                het.append(entry)
    _write_json(out / "heteroclinic.json", het)
    r_hi = min(atlas.tau0_effective, metric.r_max if np.isfinite(metric.r_max) else atlas.tau0_effective)
    svg = render_svg_phase_portrait(
        [g.trajectory for g in atlas.geodesics],
        ((0.0, metric.length), (0.0, 1.05 * r_hi)),
        axes="phi-r", title="geodesic fan",
    )
    (out / "fan_portrait.svg").write_text(svg)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _verify_metric(metric: CuspMetric, cfg: RunConfig) -> list[dict]:
    rng = np.random.default_rng(20240801)
    suites = []
    k = metric.k
    m = 2 * k - 1
    r_hi = metric.r_max / 4.0 if np.isfinite(metric.r_max) else 0.25

    # energy conservation along phase trajectories
    worst = 0.0
    for _ in range(20):
        r0 = float(rng.uniform(r_hi / 20.0, r_hi))
        phi0 = float(rng.uniform(0.0, metric.length))
        theta0 = float(rng.uniform(-2.0, 2.0))
        sign = 1 if rng.random() < 0.5 else -1
        point = shell_point(metric, r0, phi0, theta0, xi_sign=sign)
        traj = integrate(metric, point, (0.0, 20.0), cfg.tol)
        worst = max(worst, float(np.max(np.abs(traj.energies() - 0.5))))
    suites.append({"name": "energy-conservation", "passed": bool(worst <= 1e-8),
                   "max_drift": worst})

    # Lyapunov decay on the boundary
    worst_up = 0.0
    worst_rate = 0.0
    for _ in range(20):
        phi0 = float(rng.uniform(0.0, metric.length))
        theta0 = float(rng.uniform(-3.0, 3.0))
        traj = integrate(metric, BoundaryState(phi0, theta0), (0.0, 20.0), cfg.tol)
        eb = traj.boundary_energies()
        worst_up = max(worst_up, float(np.max(np.diff(eb), initial=-np.inf)))
        for i in range(0, len(traj), max(1, len(traj) // 16)):
            th = float(traj.theta[i])
            c_val = float(metric.C(traj.phi[i]))
            expected = -m * th * th / c_val
            deriv = float(
                np.dot(
                    [0.5 * metric.kappa * metric.S(traj.phi[i], 1)
                     + 0.0, th / c_val],
                    [0.0, 0.0],
                )
            )
            # analytic rate along the field
            f = boundary_field(metric, BoundaryState(float(traj.phi[i]), th))
            e_phi = 0.5 * metric.kappa * metric.S(traj.phi[i], 1) \
                - 0.5 * th * th * metric.C(traj.phi[i], 1) / c_val**2
            e_th = th / c_val
            rate = e_phi * f[0] + e_th * f[1]
            if abs(expected) > 1e-8:
                worst_rate = max(worst_rate, abs(rate - expected) / abs(expected))
    suites.append({"name": "lyapunov-decay", "passed": bool(worst_up <= 1e-10),
                   "max_increase": worst_up})
    suites.append({"name": "lyapunov-rate", "passed": bool(worst_rate <= 1e-6),
                   "max_relative_error": worst_rate})

    # boundary restriction of the full field
    worst = 0.0
    for _ in range(50):
        phi0 = float(rng.uniform(0.0, metric.length))
        theta0 = float(rng.uniform(-3.0, 3.0))
        full = rescaled_field(metric, PhasePoint(0.0, phi0, 1.0, theta0))
        bd = boundary_field(metric, BoundaryState(phi0, theta0))
        worst = max(worst, abs(full[1] - bd[0]), abs(full[3] - bd[1]),
                    abs(full[0]), abs(full[2]))
    suites.append({"name": "boundary-restriction", "passed": bool(worst <= 1e-13),
                   "max_mismatch": worst})

    # field is r times the Hamiltonian field of E (finite differences)
    worst = 0.0
    h_fd = 1e-6
    for _ in range(200):
        r0 = float(rng.uniform(r_hi / 20.0, r_hi))
        phi0 = float(rng.uniform(0.0, metric.length))
        theta0 = float(rng.uniform(-2.0, 2.0))
        point = shell_point(metric, r0, phi0, theta0)
        f = rescaled_field(metric, point)
        de = {}
        for name, delta in (("r", (h_fd, 0, 0, 0)), ("phi", (0, h_fd, 0, 0)),
                            ("xi", (0, 0, h_fd, 0)), ("theta", (0, 0, 0, h_fd))):
            plus = PhasePoint(point.r + delta[0], point.phi + delta[1],
                              point.xi + delta[2], point.theta + delta[3])
            minus = PhasePoint(point.r - delta[0], point.phi - delta[1],
                               point.xi - delta[2], point.theta - delta[3])
            de[name] = (energy(metric, plus) - energy(metric, minus)) / (2 * h_fd)
        r, theta = point.r, point.theta
        expect = np.array([
            r * de["xi"],
            r ** (2 - 2 * k) * de["theta"],
            -r * de["r"] + m * theta * r ** (2 - 2 * k) * de["theta"],
            -(r ** (2 - 2 * k)) * de["phi"] - m * theta * de["xi"],
        ])
        scale = 1.0 + float(np.max(np.abs(f)))
        worst = max(worst, float(np.max(np.abs(f - expect))) / scale)
    suites.append({"name": "field-energy-consistency", "passed": bool(worst <= 1e-6),
                   "max_relative_error": worst})

    # arc-length clock: trapezoid on r reproduces tau
    point = shell_point(metric, r_hi / 10.0, 0.1, 0.3, xi_sign=-1)
    traj = integrate(metric, point, (0.0, 10.0), cfg.tol)
    tau_tr = np.concatenate([[0.0], np.cumsum(
        0.5 * (traj.r[1:] + traj.r[:-1]) * np.diff(traj.t))])
    worst = float(np.max(np.abs(tau_tr - traj.tau)))
    suites.append({"name": "arc-length-clock", "passed": bool(worst <= 1e-8),
                   "max_mismatch": worst})

    # eval_S derivatives against central differences
    worst = 0.0
    h_fd = 1e-5
    for phi0 in np.linspace(0.0, metric.length, 17):
        s0, s1, s2 = metric.s_bundle(float(phi0))
        fd1 = (metric.S(phi0 + h_fd) - metric.S(phi0 - h_fd)) / (2 * h_fd)
        fd2 = (metric.S(phi0 + h_fd) - 2 * s0 + metric.S(phi0 - h_fd)) / h_fd**2
        scale = 1.0 + abs(s1) + abs(s2)
        worst = max(worst, abs(fd1 - s1) / scale, abs(fd2 - s2) / scale)
    suites.append({"name": "fourier-derivatives", "passed": bool(worst <= 1e-4),
                   "max_relative_error": worst})

    # eigen identities at critical points
    crit = analysis.find_critical_points(metric)
    if isinstance(crit, analysis.ConstantS):
        suites.append({"name": "eigen-identities", "passed": True,
                       "note": "constant S: no critical points"})
    else:
        worst = 0.0
        for cp in crit:
            if cp.type == analysis.DEGENERATE:
                continue
            eig = analysis.eigen_data(metric, cp)
            worst = max(
                worst,
                abs(eig.lambda2 + eig.lambda3 + m),
                abs(eig.lambda2 * eig.lambda3 - 0.5 * metric.kappa * cp.a),
                abs(m * eig.lambda1 + eig.lambda2.real + eig.lambda3.real),
            )
        suites.append({"name": "eigen-identities", "passed": bool(worst <= 1e-12),
                       "max_residual": worst})
        # barrier margins stable under grid doubling
        maxima = [c for c in crit if c.type == analysis.MAXIMUM]
        minima = [c for c in crit if c.type == analysis.MINIMUM]
        worst = 0.0
        checked = 0
        for mx in maxima:
            for mn in minima:
                try:
                    rep1 = analysis.check_barrier(metric, mx, mn, grid=4096)
                    rep2 = analysis.check_barrier(metric, mx, mn, grid=8192)
                except Exception:
                    continue
                checked += 1
                worst = max(worst, abs(rep1.margin_a - rep2.margin_a),
                            abs(rep1.margin_b - rep2.margin_b),
                            abs(rep1.margin_c - rep2.margin_c),
                            abs(rep1.margin_b_strict - rep2.margin_b_strict))
        suites.append({"name": "barrier-grid-stability",
                       "passed": bool(worst <= 1e-9), "intervals": checked,
                       "max_margin_shift": worst})

    # direct-coordinates oracle
    worst = 0.0
    for _ in range(3):
        r0 = float(rng.uniform(2e-3, 8e-3))
        phi0 = float(rng.uniform(0.0, metric.length))
        theta0 = float(rng.uniform(-1.0, 1.0))
        point = shell_point(metric, r0, phi0, theta0)
        traj = integrate(metric, point, (0.0, 50.0), cfg.tol, tau_limit=0.05)
        start = phase_to_direct(metric, point.array)
        direct = integrate_geodesic_direct(metric, start, (0.0, float(traj.tau[-1])))
        worst = max(worst, compare_trajectories(traj, direct))
    suites.append({"name": "oracle-agreement", "passed": bool(worst <= 1e-6),
                   "max_deviation": worst})
    return suites


def _task_verify(metric: CuspMetric, cfg: RunConfig, out: Path) -> int:
    suites = _verify_metric(metric, cfg)
    ok = all(s["passed"] for s in suites)
    _write_json(out / "verify_report.json", {
        "backend": backend_name(),
        "passed": ok,
        "suites": suites,
    })
    for s in suites:
        status = "pass" if s["passed"] else "FAIL"
        print(f"[{status}] {s['name']}")
    return 0 if ok else 3


def run(cfg: RunConfig, out_dir: str | None = None) -> int:
    """Execute the configured task; returns the process exit code."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metric = build_metric(cfg)
    if cfg.task == "analyze":
        return _task_analyze(metric, cfg, out)
    if cfg.task == "trace":
        return _task_trace(metric, cfg, out)
    if cfg.task == "boundary-flow":
        return _task_boundary_flow(metric, cfg, out)
    if cfg.task == "expmap":
        return _task_expmap(metric, cfg, out)
    return _task_verify(metric, cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cuspgeo",
        description="Geodesic dynamics near cusp singularities",
    )
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(Path(args.config).read_text())
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if cfg.task != args.task:
        print(
            f"config error: config task {cfg.task!r} does not match requested {args.task!r}",
            file=sys.stderr,
        )
        return 1
    try:
        return run(cfg, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, ConfigError) else 2
    except Exception as exc:  # numerical failures surface as exit 2
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
