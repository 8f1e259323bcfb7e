"""Command line front end: group / solve / verify / sweep / compare."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import assemble_sigma
from .config import RunConfig, parse_config, serialize, validate_config
from .coxeter import (Reflection, cone_distances, generate_group,
                      orbit_and_stabilizer)
from .errors import AcflowError, SeedBallRejected
from .field import (build_grid, load_field_csv, save_field_csv, seed_affine,
                    symmetrize)
from .flow import FlowConfig, run_to_equilibrium
from .potential import (check_hypotheses, make_custom_potential,
                        make_q_spec, make_triangle_potential)
from .verify import (DiagnosticsReport, comparison_ordering_check, decay_fit,
                     energy_scaling_sweep, kato_check, measure_and_degiorgi,
                     subharmonic_check)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2,
                               default=_json_default) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """Per-run inventory: config echo, stage wall times, file checksums.

    Wall times make this the one output that varies between identical runs;
    every other artifact is byte-stable for a fixed config and seed.
    """

    def __init__(self, command: str, cfg: RunConfig, out_dir: Path):
        self.data = {"command": command, "version": __version__,
                     "config": serialize(cfg), "wall_times": {}, "files": {}}
        self.out_dir = out_dir
        self._t0 = time.perf_counter()

    def stage(self, name: str) -> None:
        t = time.perf_counter()
        self.data["wall_times"][name] = round(t - self._t0, 6)
        self._t0 = t

    def add(self, path: Path) -> None:
        self.data["files"][path.name] = _sha256(path)

    def write(self) -> None:
        # completeness: checksum everything in the directory, not only the
        # files this command produced
        for p in sorted(self.out_dir.iterdir()):
            if p.is_file() and p.name != "manifest.json":
                self.data["files"].setdefault(p.name, _sha256(p))
        write_json(self.out_dir / "manifest.json", self.data)


def build_problem(cfg: RunConfig):
    """Group, orbit, potential, and monitor from a validated config."""
    gens = [Reflection(np.asarray(g, dtype=float)) for g in cfg.group_generators]
    group = generate_group(gens, dim=len(cfg.a1))
    orbit = orbit_and_stabilizer(group, np.asarray(cfg.a1, dtype=float))
    if cfg.potential_kind == "triangle":
        spec = make_triangle_potential()
    else:
        table = np.asarray(cfg.potential_table, dtype=float)
        spec = make_custom_potential(table[:, :-1].astype(np.int64), table[:, -1],
                                     np.asarray(cfg.potential_minima, dtype=float))
    if cfg.q_h_table:
        ht = np.asarray(cfg.q_h_table, dtype=float)
        q = make_q_spec(orbit.base_point, spec.M, h_exps=ht[:, :-1].astype(np.int64),
                        h_coeffs=ht[:, -1])
    else:
        q = make_q_spec(orbit.base_point, spec.M)
    return group, orbit, spec, q


def _flow_config(cfg: RunConfig) -> FlowConfig:
    return FlowConfig(dt=cfg.flow_dt, max_steps=cfg.flow_max_steps,
                      residual_tol=cfg.flow_tol, k_sym=cfg.flow_k_sym,
                      clamp=cfg.flow_clamp, energy_stride=cfg.flow_energy_stride,
                      stall_epochs=cfg.flow_stall_epochs)


def cmd_group(cfg: RunConfig, out_dir: Path, quiet: bool) -> int:
    manifest = Manifest("group", cfg, out_dir)
    group, orbit, _, _ = build_problem(cfg)
    payload = {
        "order": group.order,
        "num_reflections": int(len(group.reflections)),
        "N": orbit.count,
        "stabilizer_order": len(orbit.stabilizer),
        "fund_normals": group.fund_normals,
        "region_D_normals": orbit.region_D_normals,
        "orbit": orbit.orbit,
    }
    path = out_dir / "group.json"
    write_json(path, payload)
    manifest.stage("group")
    manifest.add(path)
    manifest.write()
    if not quiet:
        print(json.dumps(payload, sort_keys=True, default=_json_default))
    return 0


def _write_energy_csv(path: Path, steps, values) -> None:
    with open(path, "w") as fh:
        fh.write("step,J\n")
        for s, j in zip(steps, values):
            fh.write(f"{int(s)},{j:.17g}\n")


def cmd_solve(cfg: RunConfig, out_dir: Path, quiet: bool) -> int:
    manifest = Manifest("solve", cfg, out_dir)
    group, orbit, spec, _ = build_problem(cfg)
    grid = build_grid(len(cfg.a1), cfg.grid_R, cfg.grid_h,
                      node_cap=cfg.grid_node_cap)
    manifest.stage("setup")
    if cfg.flow_seed_mode == "file":
        seed = load_field_csv(cfg.flow_seed_file, grid)
        seed = symmetrize(seed, group)
    else:
        seed = seed_affine(grid, orbit)
    result = run_to_equilibrium(seed, spec, _flow_config(cfg), group)
    manifest.stage("flow")

    field_path = out_dir / "field.csv"
    save_field_csv(result.field, field_path)
    energy_path = out_dir / "energy_history.csv"
    _write_energy_csv(energy_path, result.energy_steps, result.energy_history)
    payload = {
        "R": cfg.grid_R, "h": cfg.grid_h, "dt": result.dt,
        "steps": result.steps, "residual": result.residual,
        "converged": result.converged, "stalled": result.stalled,
        "energy_first": float(result.energy_history[0]),
        "energy_last": float(result.energy_history[-1]),
        "positivity_min": result.positivity_min,
        "positivity_samples": [[int(s), float(v)] for s, v in result.positivity_samples],
        "sym_steps": [int(s) for s in result.sym_steps],
    }
    result_path = out_dir / "flow_result.json"
    write_json(result_path, payload)
    manifest.stage("write")
    for p in (field_path, energy_path, result_path):
        manifest.add(p)
    manifest.write()
    if not quiet:
        state = "converged" if result.converged else ("stalled" if result.stalled
                                                      else "max-steps")
        print(f"solve: {state} after {result.steps} steps, "
              f"residual {result.residual:.3e}, J {payload['energy_last']:.6f}")
    return 0 if (result.converged or result.stalled) else 1


def cmd_verify(cfg: RunConfig, out_dir: Path, quiet: bool,
               field_path: str | None = None,
               report_path: str | None = None) -> int:
    manifest = Manifest("verify", cfg, out_dir)
    group, orbit, spec, q = build_problem(cfg)
    grid = build_grid(len(cfg.a1), cfg.grid_R, cfg.grid_h,
                      node_cap=cfg.grid_node_cap)
    fpath = Path(field_path) if field_path else out_dir / "field.csv"
    u = load_field_csv(fpath, grid)
    flow_json = out_dir / "flow_result.json"
    flow_info = json.loads(flow_json.read_text()) if flow_json.exists() else None
    manifest.stage("setup")

    report = DiagnosticsReport()
    checks = cfg.verify_checks
    rep_pass = report.passes

    hyp = check_hypotheses(spec, q, orbit, samples=2000,
                           rng=np.random.default_rng(
                               np.random.SeedSequence([cfg.seed, 0x47])))
    hyp_path = out_dir / "hypotheses.json"
    write_json(hyp_path, {
        "h1_min_eig": hyp.h1_min_eig, "h1_c": hyp.h1_c, "h1_pass": hyp.h1_pass,
        "h2_min": hyp.h2_min, "h2_pass": hyp.h2_pass,
        "h3_minima_in_chamber": hyp.h3_minima_in_chamber, "h3_pass": hyp.h3_pass,
        "h4_min": hyp.h4_min, "h4_pass": hyp.h4_pass,
        "h4_violation_count": int(len(hyp.h4_violations)),
        "h4_quadratic_min": hyp.h4_quadratic_min,
        "admissible": hyp.admissible,
    })
    manifest.add(hyp_path)
    if not hyp.h4_pass:
        report.details["subharmonic_warning"] = (
            "monitor monotonicity fails on cone samples; subharmonicity of "
            "Q(u) is only guaranteed where the solution avoids those values")
    manifest.stage("hypotheses")

    if "kato" in checks:
        report.kato_min, det = kato_check(u, q, trials=cfg.verify_kato_trials,
                                          seed=cfg.seed)
        rep_pass["kato"] = det["pass"]
        manifest.stage("kato")

    if "subharmonic" in checks:
        eq_flag = bool(flow_info and (flow_info["converged"] or flow_info["stalled"]))
        report.subharmonic_min, det = subharmonic_check(
            u, q, orbit, trials=cfg.verify_subharmonic_trials, seed=cfg.seed,
            equilibrium=eq_flag)
        rep_pass["subharmonic"] = det["pass"]
        manifest.stage("subharmonic")

    if "positivity" in checks:
        if flow_info:
            from .field import chamber_masks
            fbar, finterior = chamber_masks(grid, group)
            samples = flow_info["positivity_samples"]
            report.positivity_min = min(v for _, v in samples)
            dots = u.values[finterior] @ group.fund_normals.T
            report.strong_positivity_margin = float(dots.min())
            rep_pass["positivity"] = (report.positivity_min >= -5 * grid.h
                                      and report.strong_positivity_margin > 0)
        else:
            rep_pass["positivity"] = False
        manifest.stage("positivity")

    center = (np.asarray(cfg.verify_ball_center, dtype=float)
              if cfg.verify_ball_center is not None
              else 0.5 * cfg.grid_R * orbit.base_point
              / np.linalg.norm(orbit.base_point))
    radius = (cfg.verify_ball_radius if cfg.verify_ball_radius is not None
              else cfg.grid_R / 4)

    dg = None
    if "degiorgi" in checks:
        dg = measure_and_degiorgi(u, q, center, radius, spec, orbit)
        report.measure_fraction = dg.measure_fraction
        report.degiorgi_sup = dg.degiorgi_sup
        report.degiorgi_levels = dg.levels
        report.eps0 = dg.eps0
        decreasing = all(b < a for a, b in zip(dg.levels, dg.levels[1:]))
        rep_pass["degiorgi"] = (dg.degiorgi_sup < 1.0 and decreasing
                                and dg.levels[-1] < spec.q_bar)
        manifest.stage("degiorgi")

    if "decay" in checks:
        d_min, d_max = cfg.verify_decay_band
        report.decay_K, report.decay_k, report.decay_R2 = decay_fit(
            u, orbit, d_min, d_max)
        rep_pass["decay"] = report.decay_k > 0 and report.decay_R2 >= 0.95
        scatter = out_dir / "decay_scatter.csv"
        in_d, dist = cone_distances(grid.coords, orbit)
        dev = np.linalg.norm(u.values - orbit.base_point, axis=1)
        sel = in_d & (dev > 1e-14)
        with open(scatter, "w") as fh:
            fh.write("dist_D,log_dev\n")
            for dd, lv in zip(dist[sel], np.log(dev[sel])):
                fh.write(f"{dd:.17g},{lv:.17g}\n")
        manifest.add(scatter)
        manifest.stage("decay")

    if "ordering" in checks:
        sigma, _ = assemble_sigma(2 if spec.dim == 2 else spec.dim, spec.c,
                                  spec.q_bar, q.q_max, cfg.compare_l0_hint,
                                  rho=cfg.compare_rho)
        if dg is None:
            dg = measure_and_degiorgi(u, q, center, radius, spec, orbit)
        k_use = next((k for k, lv in enumerate(dg.levels) if lv <= spec.q_bar),
                     None)
        try:
            if k_use is None:
                raise SeedBallRejected("no shrinking ball achieved sup Q <= q_bar")
            res = comparison_ordering_check(u, sigma, orbit, q, center,
                                            radius / 2 ** k_use)
            report.comparison_violations = res.violations
            report.comparison_d0 = res.d0
            report.comparison_coverage = res.coverage
            rep_pass["ordering"] = res.violations == 0
        except SeedBallRejected as exc:
            report.details["ordering_error"] = str(exc)
            rep_pass["ordering"] = False
        manifest.stage("ordering")

    sweep_json = out_dir / "sweep.json"
    if sweep_json.exists():
        report.energy_slope = json.loads(sweep_json.read_text())["slope"]

    payload = {
        "kato_min": report.kato_min,
        "subharmonic_min": report.subharmonic_min,
        "positivity_min": report.positivity_min,
        "strong_positivity_margin": report.strong_positivity_margin,
        "measure_fraction": report.measure_fraction,
        "degiorgi_sup": report.degiorgi_sup,
        "degiorgi_levels": report.degiorgi_levels,
        "decay_K": report.decay_K,
        "decay_k": report.decay_k,
        "decay_R2": report.decay_R2,
        "energy_slope": report.energy_slope,
        "eps0": report.eps0,
        "comparison_violations": report.comparison_violations,
        "comparison_d0": report.comparison_d0,
        "comparison_coverage": report.comparison_coverage,
        "passes": rep_pass,
        "details": report.details,
    }
    rpath = Path(report_path) if report_path else out_dir / "report.json"
    write_json(rpath, payload)
    manifest.add(rpath)
    manifest.write()
    ok = all(rep_pass.values())
    if not quiet:
        for name, passed in sorted(rep_pass.items()):
            print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_sweep(cfg: RunConfig, out_dir: Path, quiet: bool) -> int:
    manifest = Manifest("sweep", cfg, out_dir)
    group, orbit, spec, _ = build_problem(cfg)
    res = energy_scaling_sweep(cfg.sweep_radii, spec, group, orbit,
                               h=cfg.sweep_h, flow=True, cfg=_flow_config(cfg))
    manifest.stage("sweep")
    payload = {"slope": res.slope, "radii": list(res.radii),
               "energies": [float(e) for e in res.energies],
               "residuals": [float(r) for r in res.residuals],
               "converged": [bool(c) for c in res.converged],
               "h": cfg.sweep_h}
    path = out_dir / "sweep.json"
    write_json(path, payload)
    manifest.add(path)
    manifest.write()
    if not quiet:
        print(f"sweep: slope {res.slope:.4f} over radii {list(cfg.sweep_radii)}")
    return 0


def cmd_compare(cfg: RunConfig, out_dir: Path, quiet: bool) -> int:
    manifest = Manifest("compare", cfg, out_dir)
    if None in (cfg.compare_c, cfg.compare_qbar, cfg.compare_qmax):
        _, _, spec, q = build_problem(cfg)
        c = cfg.compare_c if cfg.compare_c is not None else spec.c
        qbar = cfg.compare_qbar if cfg.compare_qbar is not None else spec.q_bar
        qmax = cfg.compare_qmax if cfg.compare_qmax is not None else q.q_max
    else:
        c, qbar, qmax = cfg.compare_c, cfg.compare_qbar, cfg.compare_qmax
    sigma, consts = assemble_sigma(cfg.compare_n, c, qbar, qmax,
                                   cfg.compare_l0_hint, rho=cfg.compare_rho)
    manifest.stage("assemble")
    prof_path = out_dir / "sigma_profile.csv"
    with open(prof_path, "w") as fh:
        fh.write("r,sigma,dsigma\n")
        for r, v, d in zip(sigma.radii, sigma.values, sigma.derivs):
            fh.write(f"{r:.17g},{v:.17g},{d:.17g}\n")
    consts_path = out_dir / "sigma_constants.json"
    write_json(consts_path, consts)
    manifest.add(prof_path)
    manifest.add(consts_path)
    manifest.write()
    if not quiet:
        print(f"compare: l0 {consts['l0']:.4f}, mu {consts['mu']:.4g}, "
              f"q_bar' {consts['q_bar_prime']:.6g} < q_bar {qbar:.6g}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acflow",
                                description="Equivariant vector phase-field "
                                            "solver and structure diagnostics")
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="root random seed (overrides config)")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("group", help="print group order, orbit and cone data")

    ps = sub.add_parser("solve", help="run the flow to equilibrium")
    ps.add_argument("--R", type=float)
    ps.add_argument("--h", type=float)
    ps.add_argument("--dt", type=float)
    ps.add_argument("--tol", type=float)
    ps.add_argument("--max-steps", type=int)
    ps.add_argument("--seed-mode", choices=["affine", "file"])
    ps.add_argument("--seed-file")

    pv = sub.add_parser("verify", help="run diagnostics on a stored field")
    pv.add_argument("--field", help="field CSV (default: <out>/field.csv)")
    pv.add_argument("--report", help="report path (default: <out>/report.json)")

    sub.add_parser("sweep", help="energy scaling over a list of radii")

    pc = sub.add_parser("compare", help="assemble the radial barrier")
    pc.add_argument("--n", type=int)
    pc.add_argument("--c", type=float)
    pc.add_argument("--qbar", type=float)
    pc.add_argument("--qmax", type=float)
    pc.add_argument("--l0-hint", type=float)
    pc.add_argument("--rho", type=float)
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out"] = args.out
    if args.command == "solve":
        for attr, field_name in (("R", "grid_R"), ("h", "grid_h"),
                                 ("dt", "flow_dt"), ("tol", "flow_tol"),
                                 ("max_steps", "flow_max_steps"),
                                 ("seed_mode", "flow_seed_mode"),
                                 ("seed_file", "flow_seed_file")):
            v = getattr(args, attr, None)
            if v is not None:
                updates[field_name] = v
    if args.command == "compare":
        for attr, field_name in (("n", "compare_n"), ("c", "compare_c"),
                                 ("qbar", "compare_qbar"), ("qmax", "compare_qmax"),
                                 ("l0_hint", "compare_l0_hint"),
                                 ("rho", "compare_rho")):
            v = getattr(args, attr, None)
            if v is not None:
                updates[field_name] = v
    if updates:
        cfg = replace(cfg, **updates)
        validate_config(cfg)
    return cfg


def execute(command: str, cfg: RunConfig, quiet: bool = False, **kw) -> int:
    """Dispatch a validated command; returns the process exit status."""
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if command == "group":
        return cmd_group(cfg, out_dir, quiet)
    if command == "solve":
        return cmd_solve(cfg, out_dir, quiet)
    if command == "verify":
        return cmd_verify(cfg, out_dir, quiet, field_path=kw.get("field"),
                          report_path=kw.get("report"))
    if command == "sweep":
        return cmd_sweep(cfg, out_dir, quiet)
    if command == "compare":
        return cmd_compare(cfg, out_dir, quiet)
    raise ValueError(f"unknown command {command!r}")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.config:
            cfg = parse_config(Path(args.config).read_text())
        else:
            cfg = RunConfig()
        cfg = _apply_overrides(cfg, args)
    except (AcflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return execute(args.command, cfg, quiet=args.quiet,
                       field=getattr(args, "field", None),
                       report=getattr(args, "report", None))
    except AcflowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
