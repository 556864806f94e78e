"""Command line driver: ``balans solve|audit|convergence|stability|data-dependence``.

Exit codes: 0 success, 2 configuration error, 3 non-finite values in the
scheme, 4 filesystem error, 5 an audited inequality was violated.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analysis import ENTROPY_TOL, bln_residuals, bounds_report, default_k_samples, entropy_residuals
from .convergence import check_nested, self_convergence
from .expr import ExprDomainError, ExprSyntaxError
from .problem import CATALOG, Grid, Ibvp, build_grid, discretize, make_problem
from .scheme import SchemeBreakdown, run
from .stability import run_data_pair, run_pair

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NAN = 3
EXIT_FS = 4
EXIT_VIOLATION = 5

PROBLEM_KEYS = {"catalog", "name", "f", "g", "u_o", "u_a", "u_b", "a", "b", "T"}
GRID_KEYS = {"N", "alpha", "cfl_fraction", "quad_points", "boundary", "unsafe"}
OUTPUT_KEYS = {"snapshot_times", "dump", "out_dir", "checkpoints"}
AUDIT_KEYS = {"bounds", "entropy", "k_count", "bln", "bln_k_count", "samples", "levels"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: Ibvp
    N: int = 100
    alpha: float | None = None
    cfl_fraction: float = 1.0
    quad_points: int = 3
    boundary: str = "average"
    unsafe: bool = False
    snapshot_times: list = field(default_factory=list)
    dump: bool = False
    out_dir: Path = Path("balans-out")
    checkpoints: list | None = None
    audits: dict = field(default_factory=dict)
    source: str = ""


def _table(doc, name, allowed):
    tab = doc.get(name, {})
    if not isinstance(tab, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(tab) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return tab


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _problem_from_table(tab: dict) -> Ibvp:
    fields = {}
    if "catalog" in tab:
        name = tab["catalog"]
        if name not in CATALOG:
            raise ConfigError(f"unknown catalog problem {name!r}; known: {sorted(CATALOG)}")
        fields.update(CATALOG[name])
        fields["name"] = name
    for key in PROBLEM_KEYS - {"catalog"}:
        if key in tab:
            fields[key] = tab[key]
    if "f" not in fields:
        raise ConfigError("[problem] needs either 'catalog' or a flux 'f'")
    for key in ("f", "g", "u_o", "u_a", "u_b"):
        val = fields.get(key)
        if isinstance(val, bool) or not isinstance(val, (str, int, float, type(None))):
            raise ConfigError(f"[problem] {key} must be an expression string")
    for key in ("a", "b", "T"):
        val = fields.get(key)
        if isinstance(val, bool) or not isinstance(val, (int, float, type(None))):
            raise ConfigError(f"[problem] {key} must be a number")
    try:
        return make_problem(**fields)
    except ExprSyntaxError as exc:
        raise ConfigError(f"[problem] {exc}") from None
    except (ValueError, TypeError, ExprDomainError) as exc:
        raise ConfigError(f"[problem] {exc}") from None


def load_config(path) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    doc = _read_toml(path)
    unknown = set(doc) - {"problem", "grid", "outputs", "audits"}
    if unknown:
        raise ConfigError(f"unknown tables: {sorted(unknown)}")
    p = _problem_from_table(_table(doc, "problem", PROBLEM_KEYS))
    grid = _table(doc, "grid", GRID_KEYS)
    out = _table(doc, "outputs", OUTPUT_KEYS)
    aud = _table(doc, "audits", AUDIT_KEYS)
    cfg = RunConfig(problem=p, source=str(path))
    try:
        cfg.N = int(grid.get("N", 100))
        cfg.alpha = None if grid.get("alpha") is None else float(grid["alpha"])
        cfg.cfl_fraction = float(grid.get("cfl_fraction", 1.0))
        cfg.quad_points = int(grid.get("quad_points", 3))
        cfg.boundary = str(grid.get("boundary", "average"))
        cfg.unsafe = bool(grid.get("unsafe", False))
        cfg.snapshot_times = [float(t) for t in out.get("snapshot_times", [p.T])]
        cfg.dump = bool(out.get("dump", False))
        cfg.checkpoints = None if "checkpoints" not in out else [float(t) for t in out["checkpoints"]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value: {exc}") from None
    if cfg.boundary not in ("average", "point"):
        raise ConfigError("[grid] boundary must be 'average' or 'point'")
    if cfg.quad_points < 1:
        raise ConfigError("[grid] quad_points must be >= 1")
    for t in cfg.snapshot_times + (cfg.checkpoints or []):
        if not 0.0 <= t <= p.T:
            raise ConfigError(f"output time {t} outside [0, T={p.T}]")
    env_out = os.environ.get("BALANS_OUT")
    cfg.out_dir = Path(env_out if env_out else out.get("out_dir", "balans-out"))
    cfg.audits = {
        "bounds": bool(aud.get("bounds", True)),
        "entropy": bool(aud.get("entropy", True)),
        "k_count": int(aud.get("k_count", 21)),
        "bln": bool(aud.get("bln", True)),
        "bln_k_count": int(aud.get("bln_k_count", 21)),
        "samples": int(aud.get("samples", 33)),
        "levels": aud.get("levels", "all"),
    }
    return cfg


def make_grid(cfg: RunConfig) -> Grid:
    try:
        return build_grid(cfg.problem, cfg.N, cfg.alpha, cfg.cfl_fraction, cfg.unsafe)
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _num(v) -> str:
    return format(float(v), ".17g")


def write_json(path: Path, obj) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _num(c) if isinstance(c, float) else str(c) for c in row) + "\n")


def _prepare_out(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory not writable: {path}")
    return path


def problem_dict(p: Ibvp) -> dict:
    return {
        "name": p.name,
        "f": p.f.source,
        "g": p.g.source,
        "u_o": p.u_o.source,
        "u_a": p.u_a.source,
        "u_b": p.u_b.source,
        "a": p.a,
        "b": p.b,
        "T": p.T,
    }


def grid_dict(g: Grid, cfg: RunConfig | None = None) -> dict:
    d = {
        "N": g.N,
        "dx": g.dx,
        "dt": g.dt,
        "lambda": g.lam,
        "alpha": g.alpha,
        "NT": g.NT,
        "horizon": g.horizon,
        "unsafe": g.unsafe,
    }
    if cfg is not None:
        d.update(cfl_fraction=cfg.cfl_fraction, quad_points=cfg.quad_points, boundary=cfg.boundary)
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_solve(config_path) -> int:
    cfg = load_config(config_path)
    g = make_grid(cfg)
    sol = run(cfg.problem, g, discretize(cfg.problem, g, cfg.quad_points, cfg.boundary))
    out = _prepare_out(cfg.out_dir)
    xs = g.centers
    snaps = []
    for i, t in enumerate(cfg.snapshot_times):
        n = g.level(t)
        name = f"snapshot_{i:03d}.csv"
        write_csv(out / name, ["x", "u"], zip(xs.tolist(), sol.u[n].tolist()))
        snaps.append({"requested_t": t, "t": n * g.dt, "n": n, "file": name})
    dump = None
    if cfg.dump:
        dump = "dump.csv"
        xl, ul = xs.tolist(), sol.u.tolist()
        rows = ((n, n * g.dt, j + 1, xl[j], ul[n][j]) for n in range(sol.NT + 1) for j in range(g.N))
        write_csv(out / dump, ["n", "t", "j", "x", "u"], rows)
    write_json(
        out / "manifest.json",
        {"command": "solve", "problem": problem_dict(cfg.problem), "grid": grid_dict(g, cfg), "snapshots": snaps, "dump": dump},
    )
    return EXIT_OK


def cmd_audit(config_path) -> int:
    cfg = load_config(config_path)
    p = cfg.problem
    g = make_grid(cfg)
    data = discretize(p, g, cfg.quad_points, cfg.boundary)
    # an unsafe run audits the levels computed before a blow-up
    ceiling = 1e6 * (1.0 + float(np.max(np.abs(np.concatenate([data.u0, data.ua, data.ub])))))
    sol = run(p, g, data, keep_intermediate=True, truncate_on_breakdown=cfg.unsafe, ceiling=ceiling if cfg.unsafe else np.inf)
    breakdown = None
    if sol.NT < g.NT:
        breakdown = {"n": sol.NT + 1, "planned_NT": g.NT}
    a = cfg.audits
    report = {"problem": problem_dict(p), "grid": grid_dict(sol.grid, cfg), "breakdown": breakdown}
    violations = 0
    if a["bounds"] and sol.NT >= 1:
        levels = None if a["levels"] == "all" else [sol.grid.level(t) for t in (cfg.checkpoints or [p.T])]
        br = bounds_report(p, sol, levels, a["samples"])
        report.update(
            checkpoints=br.checkpoints,
            violations=br.violations,
            alpha_check={"alpha": br.alpha, "observed_L_f": br.observed_lf, "observed_range": br.observed_range},
        )
        violations += len(br.violations)
    if a["entropy"] and sol.NT >= 1:
        er = entropy_residuals(sol, p, default_k_samples(sol, a["k_count"]), ENTROPY_TOL)
        report["entropy"] = {
            "worst_plus": er.worst_plus_residual,
            "worst_minus": er.worst_minus_residual,
            "at": {"plus": er.worst_plus_at, "minus": er.worst_minus_at},
            "violation_count": er.violation_count,
            "tolerance": er.tolerance,
            "k_samples": er.k_samples,
        }
        violations += er.violation_count
    if a["bln"]:
        left, right = bln_residuals(sol, p, a["bln_k_count"])
        report["bln"] = {
            "worst_left": float(left.max()),
            "worst_right": float(right.max()),
            "per_n": {"left": left, "right": right},
        }
    report["ok"] = violations == 0 and breakdown is None
    write_json(_prepare_out(cfg.out_dir) / "report.json", report)
    if violations:
        return EXIT_VIOLATION
    if breakdown is not None:
        return EXIT_NAN
    return EXIT_OK


def cmd_convergence(config_path, N_list) -> int:
    cfg = load_config(config_path)
    try:
        Ns = check_nested(N_list)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = self_convergence(cfg.problem, Ns, cfg.alpha, cfg.cfl_fraction, cfg.quad_points, cfg.boundary)
    out = _prepare_out(cfg.out_dir)
    write_csv(
        out / "convergence.csv",
        ["N", "N_fine", "t", "error", "order"],
        ((r.N, r.N_fine, r.t, r.error, "" if r.order is None else r.order) for r in rows),
    )
    for r in rows:
        order = "" if r.order is None else f"{r.order:.3f}"
        print(f"N={r.N:>6d} -> {r.N_fine:<6d} L1={r.error:.6e} order={order}")
    return EXIT_OK


def _write_stability(out: Path, stem: str, rep, extra: dict) -> None:
    body = {"kind": rep.kind, "checkpoints": rep.checkpoints, "boxes": rep.boxes, "slack": rep.slack, "ok": rep.ok}
    body.update(extra)
    write_json(out / f"{stem}.json", body)
    write_csv(out / f"{stem}.csv", ["t", "measured", "bound"], ((c["t"], c["measured"], c["bound"]) for c in rep.checkpoints))


def cmd_stability(path1, path2) -> int:
    c1, c2 = load_config(path1), load_config(path2)
    try:
        rep = run_pair(
            c1.problem, c2.problem, c1.N, c1.checkpoints, c1.audits["samples"], c1.quad_points, c1.boundary
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    extra = {"problem_1": problem_dict(c1.problem), "problem_2": problem_dict(c2.problem)}
    _write_stability(_prepare_out(c1.out_dir), "stability", rep, extra)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_data_dependence(config_path, delta_path) -> int:
    cfg = load_config(config_path)
    doc = _read_toml(delta_path)
    tab = _table(doc, "problem", {"u_o", "u_a", "u_b"})
    if set(doc) - {"problem"}:
        raise ConfigError("the perturbation file may only contain a [problem] table with u_o, u_a, u_b")
    try:
        q = cfg.problem.with_data(**{k: str(v) for k, v in tab.items()})
        q = make_problem(
            q.f, q.g, q.u_o, q.u_a, q.u_b, q.a, q.b, q.T, name=(cfg.problem.name + "+perturbed").lstrip("+")
        )
        rep = run_data_pair(cfg.problem, q, cfg.N, cfg.checkpoints, cfg.audits["samples"], cfg.quad_points, cfg.boundary)
    except ExprSyntaxError as exc:
        raise ConfigError(f"perturbation: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    extra = {"problem": problem_dict(cfg.problem), "perturbed": problem_dict(q)}
    _write_stability(_prepare_out(cfg.out_dir), "data_dependence", rep, extra)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def _parse_N_list(text: str):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="balans", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="run the scheme and write snapshots").add_argument("config")
    sub.add_parser("audit", help="check the a-priori estimates and entropy inequalities").add_argument("config")
    c = sub.add_parser("convergence", help="nested-grid self-convergence table")
    c.add_argument("config")
    c.add_argument("--N", type=_parse_N_list, default=[50, 100, 200, 400], dest="N_list")
    s = sub.add_parser("stability", help="paired solve with perturbed flux or source")
    s.add_argument("config1")
    s.add_argument("config2")
    d = sub.add_parser("data-dependence", help="paired solve with perturbed data")
    d.add_argument("config")
    d.add_argument("--perturb", required=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "solve":
            return cmd_solve(args.config)
        if args.command == "audit":
            return cmd_audit(args.config)
        if args.command == "convergence":
            return cmd_convergence(args.config, args.N_list)
        if args.command == "stability":
            return cmd_stability(args.config1, args.config2)
        return cmd_data_dependence(args.config, args.perturb)
    except ConfigError as exc:
        print(f"balans: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeBreakdown, ExprDomainError) as exc:
        print(f"balans: numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NAN
    except OSError as exc:
        print(f"balans: filesystem error: {exc}", file=sys.stderr)
        return EXIT_FS


if __name__ == "__main__":
    sys.exit(main())
