"""Command-line front end.

Exit codes: 0 success, 1 failed hypothesis guard, 2 usage or parse error,
3 numerical check out of tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import __version__
from .algebra import center, is_solvable, nilpotency_class
from .analysis import (
    full_pipeline,
    larc_check,
    reach_sample,
    seed_family_scan,
    seed_finder,
)
from .catalog import example, example_names
from .derivation import (
    check_jordan_parts,
    generalized_kernel_report,
    jordan_decomposition,
    kernel_split,
    leibniz_check,
    n0_compactness_criterion,
)
from .dynamics import ControlLaw, ProductSystem
from .linalg import rref_basis
from .errors import GuardFailure, NumericalFailure, ParseError, SolvctrlError
from .sysfile import SystemSpec, dump_system, load_system

SCHEMA = "solvctrl-report/1"
SEED_ENV = "SOLVCTRL_RNG_SEED"

log = logging.getLogger("solvctrl")


# ---------------------------------------------------------------------------
# output helpers


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def to_json(kind: str, payload: dict) -> str:
    doc = {"schema": SCHEMA, "kind": kind, **payload}
    return json.dumps(_plain(doc), indent=2) + "\n"


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _csv(points: np.ndarray, times: np.ndarray, ids: np.ndarray, labels) -> str:
    head = ",".join(["t", *[f"x_{i + 1}" for i in range(points.shape[1])], "law_id"])
    rows = [head]
    for t, p, i in zip(times, points, ids):
        rows.append(",".join(["%.17g" % t, *("%.17g" % c for c in p), str(int(i))]))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# loading


def _load(args) -> SystemSpec:
    if getattr(args, "example", None):
        try:
            return example(args.example)
        except KeyError as e:
            raise ParseError(str(e.args[0]), "--example") from None
    if not getattr(args, "file", None):
        raise ParseError("a system file or --example NAME is required")
    return load_system(args.file)


def _rng_seed(args, spec: SystemSpec | None = None) -> int:
    if getattr(args, "rng_seed", None) is not None:
        return int(args.rng_seed)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParseError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return spec.analysis.rng_seed if spec is not None else 0


# ---------------------------------------------------------------------------
# analyze


def analyze_spec(spec: SystemSpec) -> dict:
    g = spec.algebra
    D = spec.derivation
    rep: dict = {"system": spec.name, "kind": spec.kind}
    rep["algebra"] = {
        "dim": g.dim,
        "labels": list(g.labels),
        "jacobi_residual": g.jacobi_residual(),
        "solvable": is_solvable(g),
        "nilpotency_class": nilpotency_class(g),
        "center_dim": center(g).dim,
    }
    lr = leibniz_check(D, g)
    rep["derivation"] = {"leibniz_residual": lr.residual, "leibniz_pass": lr.passed}
    parts = jordan_decomposition(D)
    rep["jordan"] = {
        "H": parts.H,
        "E": parts.E,
        "N": parts.N,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in parts.eigenvalues],
        "multiplicities": parts.multiplicities,
        "checks": check_jordan_parts(D, parts, g),
    }
    gk = generalized_kernel_report(D, parts)
    rep["generalized_kernel"] = {"dim": gk["dim"], "max_angle": gk["max_angle"], "agree": gk["agree"]}
    if spec.kind == "lcs":
        ks = kernel_split(g, D)
        rep["kernel_split"] = {
            **ks.as_dict(),
            "g0_basis": rref_basis(ks.g0.basis).T,
            "n_basis": rref_basis(ks.n.basis).T,
        }
        verdict, note = n0_compactness_criterion(ks.n0)
        rep["n0_criterion"] = {"verdict": verdict.value, "note": note}
    try:
        model = spec.model()
    except GuardFailure as e:
        rep["stopped_at"] = e.hypothesis
        rep["error"] = str(e)
        return rep
    acc = larc_check(model)
    rep["larc"] = acc.as_dict()
    return rep


def cmd_analyze(args) -> int:
    spec = _load(args)
    rep = analyze_spec(spec)
    _write(args.json, to_json("analysis", rep))
    if "stopped_at" in rep:
        print(f"solvctrl: hypothesis failed: {rep['error']}", file=sys.stderr)
        return 1
    if args.json is not None:
        a = rep["algebra"]
        print(f"{spec.name}: dim {a['dim']}, solvable {a['solvable']}, class {a['nilpotency_class']}")
        if "kernel_split" in rep:
            k = rep["kernel_split"]
            print(f"  dim g0 = {k['dim_g0']}, dim n = {k['dim_n']}, dim n0 = {k['dim_n0']} ({rep['n0_criterion']['verdict']})")
        print(f"  LARC {rep['larc']['larc']}, strong {rep['larc']['strong']}")
    return 0


# ---------------------------------------------------------------------------
# seed


def _parse_law(text: str, m: int) -> ControlLaw:
    p = Path(text)
    src = p.read_text() if p.exists() else text
    try:
        recs = json.loads(src)
    except json.JSONDecodeError as e:
        raise ParseError(f"law is not valid JSON: {e.msg}", "--law") from None
    if not isinstance(recs, list) or not all(isinstance(r, dict) and set(r) == {"duration", "values"} for r in recs):
        raise ParseError("law must be a list of {duration, values} records", "--law")
    law = ControlLaw.from_records(recs, m)
    if law.m != m:
        raise ParseError(f"law has {law.m} channels, system has {m}", "--law")
    return law


def cmd_seed(args) -> int:
    spec = _load(args)
    model = spec.model()
    inner = model.inner if isinstance(model, ProductSystem) else model
    S = args.time if args.time is not None else spec.analysis.S
    seed = _rng_seed(args, spec)
    if args.scan is not None:
        res = seed_family_scan(inner, S, args.scan, seed, pieces=spec.analysis.max_pieces)
        payload = {
            "system": spec.name,
            "report": res.report,
            "certificates": [c.as_dict() for c in res.certificates],
            "failures": {str(k): v for k, v in res.failures.items()},
        }
        _write(args.json, to_json("seeds", payload))
        if res.report.get("status") == "resonant":
            print(res.report["note"], file=sys.stderr)
            return 1
        return 0
    law = _parse_law(args.law, inner.m) if args.law else ControlLaw.zero(inner.m, S)
    law.check_range(inner.range)
    cert = seed_finder(inner, law, spec.analysis.tol_seed)
    _write(args.json, to_json("seeds", {"system": spec.name, "certificates": [cert.as_dict()]}))
    return 0


# ---------------------------------------------------------------------------
# reach


def cmd_reach(args) -> int:
    spec = _load(args)
    model = spec.model()
    cfg = spec.analysis
    seed = _rng_seed(args, spec)
    budget = args.budget if args.budget is not None else cfg.budget
    horizon = args.horizon if args.horizon is not None else cfg.horizon
    inner = model.inner if isinstance(model, ProductSystem) else model
    p = model.V_dim if isinstance(model, ProductSystem) else 0
    if args.start == "seed":
        cert = seed_finder(inner, ControlLaw.zero(inner.m, cfg.S), cfg.tol_seed)
        x0 = np.concatenate([np.zeros(p), cert.x_star])
    elif args.start == "zero":
        x0 = np.zeros(p + inner.dim)
    else:
        try:
            x0 = np.array([float(t) for t in args.start.split(",")])
        except ValueError:
            raise ParseError("--from expects 'seed', 'zero' or comma-separated coordinates", "--from") from None
        if x0.size != p + inner.dim:
            raise ParseError(f"--from needs {p + inner.dim} coordinates", "--from")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fwd = reach_sample(model, x0, "forward", budget, horizon, seed, cfg.max_pieces)
    bwd = reach_sample(model, x0, "backward", budget, horizon, seed + 1, cfg.max_pieces)
    (out / "forward.csv").write_text(_csv(fwd.points, fwd.times, fwd.law_ids, None))
    (out / "backward.csv").write_text(_csv(bwd.points, bwd.times, bwd.law_ids, None))
    dist, _ = cKDTree(bwd.points).query(fwd.points, k=1)
    inl = fwd.points[dist <= cfg.r_match]
    disp = fwd.points - x0
    cov_rank = int(np.linalg.matrix_rank(np.cov(disp.T))) if len(disp) > disp.shape[1] else 0
    payload = {
        "system": spec.name,
        "base": x0,
        "rng_seed": seed,
        "budget": budget,
        "horizon": horizon,
        "r_match": cfg.r_match,
        "forward_displacement_rank": cov_rank,
        "n_inliers": len(inl),
        "bbox": ([float(c) for c in inl.min(axis=0)], [float(c) for c in inl.max(axis=0)]) if len(inl) else None,
        "inliers": inl,
    }
    (out / "estimate.json").write_text(to_json("estimate", payload))
    print(f"wrote {out / 'forward.csv'}, {out / 'backward.csv'}, {out / 'estimate.json'}")
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    from .verify import verify_spec

    specs = []
    if args.all_examples:
        specs = [example(n) for n in example_names()]
    elif args.example:
        specs = [_load(args)]
    elif args.file:
        specs = [load_system(args.file)]
    else:
        raise ParseError("give a system file, --example NAME or --all-examples")
    seed = _rng_seed(args)
    failed = []
    exit_code = 0
    for spec in specs:
        results = verify_spec(spec, rng_seed=seed, quick=args.quick)
        for name, ok, detail in results:
            status = "PASS" if ok else "FAIL"
            print(f"[{status}] {spec.name}: {name} ({detail})")
            if not ok:
                failed.append((spec.name, name))
                exit_code = max(exit_code, 3)
    if failed:
        print(f"{len(failed)} check(s) failed", file=sys.stderr)
    return exit_code


# ---------------------------------------------------------------------------
# export-plots


def cmd_export_plots(args) -> int:
    src = Path(args.estimate)
    try:
        doc = json.loads(src.read_text())
    except OSError as e:
        raise ParseError(f"cannot read estimate: {e.strerror}", str(src)) from None
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", f"{src}:{e.lineno}") from None
    if doc.get("schema") != SCHEMA or "inliers" not in doc:
        raise ParseError(f"not a {SCHEMA} estimate document", str(src))
    pts = np.array(doc["inliers"], dtype=float)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = out / "cloud.dat"
    script = out / "cloud.gp"
    try:
        ax = [int(a) - 1 for a in args.axes.split(",")]
    except ValueError:
        raise ParseError("--axes expects comma-separated 1-based indices", "--axes") from None
    if len(ax) not in (2, 3):
        raise ParseError("--axes takes two or three indices", "--axes")
    if pts.size == 0:
        data.write_text("")
        script.write_text("")
        print("warning: estimate has no inlier points; wrote empty files", file=sys.stderr)
        return 0
    if max(ax) >= pts.shape[1] or min(ax) < 0:
        raise ParseError(f"axis out of range 1..{pts.shape[1]}", "--axes")
    lines = [" ".join("%.17g" % p[a] for a in ax) for p in pts]
    data.write_text("\n".join(lines) + "\n")
    names = [f"x_{a + 1}" for a in ax]
    plot = "splot" if len(ax) == 3 else "plot"
    using = ":".join(str(i + 1) for i in range(len(ax)))
    script.write_text(
        f"# {doc.get('system', '')}: inlier cloud, {len(pts)} points\n"
        f"set xlabel '{names[0]}'\nset ylabel '{names[1]}'\n"
        + (f"set zlabel '{names[2]}'\n" if len(ax) == 3 else "")
        + f"{plot} '{data.name}' using {using} with points pt 7 ps 0.3 notitle\n"
    )
    print(f"wrote {data} and {script}")
    return 0


# ---------------------------------------------------------------------------
# pipeline and catalog


def cmd_pipeline(args) -> int:
    spec = _load(args)
    cfg = spec.analysis
    seed = _rng_seed(args, spec)
    grid = [[float(v)] for v in np.linspace(-cfg.window, cfg.window, cfg.grid_points)]
    rep = full_pipeline(
        spec.semidirect(), S=cfg.S, n_laws=cfg.scan, rng_seed=seed, cloud_budget=cfg.budget,
        horizon=cfg.horizon, r_match=cfg.r_match, search_budget=cfg.search_budget,
        search_horizon=cfg.search_horizon, grid=grid, fiber_ball=cfg.fiber_ball, fiber_horizon=cfg.fiber_horizon,
    )
    _write(args.json, to_json("pipeline", {"system": spec.name, **rep.as_dict()}))
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not rep.ok:
        print(f"solvctrl: hypothesis failed: {rep.error}", file=sys.stderr)
        return 1
    return 0


def cmd_examples(args) -> int:
    if args.name:
        try:
            sys.stdout.write(dump_system(example(args.name)))
        except KeyError as e:
            raise ParseError(str(e.args[0])) from None
    else:
        for n in example_names():
            print(n)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solvctrl", description="Control sets of linear systems on solvable Lie groups.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def system_args(sp):
        sp.add_argument("file", nargs="?", help="system definition (YAML)")
        sp.add_argument("--example", help="use a catalog system instead of a file")

    def seed_arg(sp):
        sp.add_argument("--rng-seed", type=int, default=None, help=f"overrides ${SEED_ENV}")

    sp = sub.add_parser("analyze", help="structure, Jordan parts, N0 criterion and LARC")
    system_args(sp)
    sp.add_argument("--json", type=Path, default=None, help="write the report here instead of stdout")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("seed", help="periodic seed points")
    system_args(sp)
    sp.add_argument("--time", type=float, default=None, help="period S")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--law", help="JSON list of {duration, values} records, or a file holding one")
    g.add_argument("--scan", type=int, help="scan this many laws starting from u = 0")
    seed_arg(sp)
    sp.add_argument("--json", type=Path, default=None)
    sp.set_defaults(func=cmd_seed)

    sp = sub.add_parser("reach", help="forward/backward reach clouds and an inlier estimate")
    system_args(sp)
    sp.add_argument("--from", dest="start", default="seed", help="'seed', 'zero' or coordinates a,b,c")
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--horizon", type=float, default=None)
    seed_arg(sp)
    sp.add_argument("--out-dir", default="reach-out")
    sp.set_defaults(func=cmd_reach)

    sp = sub.add_parser("verify", help="run the invariant suites")
    system_args(sp)
    sp.add_argument("--all-examples", action="store_true")
    sp.add_argument("--quick", action="store_true", help="fewer random cases")
    seed_arg(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("export-plots", help="gnuplot data and script from an estimate")
    sp.add_argument("estimate", help="estimate.json written by 'reach'")
    sp.add_argument("--axes", default="1,2", help="1-based coordinates to plot (2 or 3)")
    sp.add_argument("--out-dir", default="plots")
    sp.set_defaults(func=cmd_export_plots)

    sp = sub.add_parser("pipeline", help="full reduction and sampling pipeline for an lcs system")
    system_args(sp)
    seed_arg(sp)
    sp.add_argument("--json", type=Path, default=None)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("examples", help="list catalog systems or print one as YAML")
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_examples)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SolvctrlError as e:
        if isinstance(e, GuardFailure):
            print(f"solvctrl: hypothesis failed: {e}", file=sys.stderr)
        elif isinstance(e, NumericalFailure):
            print(f"solvctrl: numerical check failed: {e}", file=sys.stderr)
        else:
            print(f"solvctrl: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
