"""Command-line experiment runner.

Progress goes to stderr; machine-readable artifacts (reports, field dumps,
traces) go to files under the output directory.  The run command executes
stages in order, reusing disk-cached barrier estimates whose manifests
match the construction and solver fingerprints, and exits nonzero iff any
checked claim fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .grid import GridField, grid_points, load_field
from .lab import Laboratory
from .odometer import (
    RhoSpec,
    multiplicity_function,
    orbit_of_zero,
    order_of_one,
    rho_prime,
)
from .params import ConstructionParams, params_from_config, params_to_config, validate_params
from .report import DiagnosticsReport

STAGES = (
    "build",
    "barriers",
    "assemble",
    "period",
    "recurrence",
    "structure",
    "odometer",
    "smoothness",
    "reduction",
)


def _load_params(args) -> ConstructionParams:
    p = params_from_config(args.config) if args.config else ConstructionParams()
    if args.grid_n:
        p = replace(p, grid_n=args.grid_n)
    if args.dim:
        p = replace(p, d=args.dim)
    return p


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"[laxlab] wrote {path}", file=sys.stderr)


def _report_out(out_dir: Path, reports: list[DiagnosticsReport], stem: str) -> bool:
    ok = True
    payload = []
    for rep in reports:
        payload.append(json.loads(rep.to_json()))
        for line in rep.summary_lines():
            print(f"[laxlab] {line}", file=sys.stderr)
        ok &= rep.passed
    _write(out_dir / f"{stem}.json", json.dumps(payload, indent=1, sort_keys=True))
    return ok


def cmd_run(args) -> int:
    p = _load_params(args)
    stages = [s.strip() for s in args.stages.split(",") if s.strip()] if args.stages else []
    for s in stages:
        if s not in STAGES:
            print(f"[laxlab] unknown stage {s!r}", file=sys.stderr)
            return 2
    out_dir = Path(args.out)
    lab = Laboratory(p, cache_dir=Path(args.cache), seed=args.seed, verbose=True)
    ok = True

    for stage in stages:
        print(f"[laxlab] stage: {stage}", file=sys.stderr)
        if stage == "build":
            rep = validate_params(p)
            _write(out_dir / "params.cfg", params_to_config(p))
            _write(
                out_dir / "validation.json",
                json.dumps({"errors": rep.errors, "warnings": rep.warnings}, indent=1),
            )
            _export_field_samples(p, out_dir)
        elif stage == "barriers":
            labels = [f"x_{n}^{i}" for n in range(p.N) for i in range(p.rho[n])]
            labels += ["z_inf"]
            if p.d == 2:
                labels += [f"z_{n}^{s}" for n in range(p.N) for s in "+-"]
            labels += [f"auto:x_{n}^0" for n in range(p.N)]
            labels += ["tube_0", "amid_0"]
            summary = {}
            for label in labels:
                run = lab.run(label)
                summary[label] = {
                    "horizon_units": run.horizon_units,
                    "converged": all(e.converged for e in run.estimates.values()),
                }
            _write(out_dir / "barriers.json", json.dumps(summary, indent=1, sort_keys=True))
            ok &= all(v["converged"] for v in summary.values())
        elif stage == "assemble":
            for kind in ("plain", "compensated"):
                sol = lab.solution(kind)
                sol.field.save(out_dir / f"{_sol_stem(kind)}.bin")
            _write(
                out_dir / "constants.json",
                json.dumps(
                    {"constants": list(lab.solution("compensated").constants)}, indent=1
                ),
            )
            reports = [lab.exchange_report(), lab.alpha0_diagnostic()]
            ok &= _report_out(out_dir, reports, "assemble")
        elif stage == "period":
            ok &= _report_out(out_dir, lab.period_reports(), "period")
        elif stage == "recurrence":
            ok &= _report_out(out_dir, lab.recurrence_reports(), "recurrence")
        elif stage == "structure":
            ok &= _report_out(out_dir, lab.structure_reports(), "structure")
        elif stage == "odometer":
            ok &= _report_out(out_dir, lab.factor_reports(), "factor")
            trace = _label_trace(lab)
            _write(out_dir / "trace.json", json.dumps(trace, indent=1, sort_keys=True))
        elif stage == "smoothness":
            ok &= _report_out(out_dir, lab.smoothness_reports(), "smoothness")
        elif stage == "reduction":
            ok &= _report_out(out_dir, lab.reduction_reports(), "reduction")
    print(f"[laxlab] run {'passed' if ok else 'FAILED'}", file=sys.stderr)
    return 0 if ok else 1


def _sol_stem(kind: str) -> str:
    return "u_plain" if kind == "plain" else "u_comp"


def _label_trace(lab: Laboratory) -> dict:
    from .solution import extract_labels

    p = lab.params
    out = {}
    for kind in ("plain", "compensated"):
        iters = lab.iterates(kind)
        rows = []
        for k in sorted(iters.snapshots):
            res = extract_labels(iters.at(k), p, lab.solution(kind).constants)
            rows.append(
                {
                    "k": k,
                    "labels": list(res.labels),
                    "margins": list(res.margins),
                    "ambiguous": res.ambiguous,
                }
            )
        out[kind] = rows
    return out


def _export_field_samples(p: ConstructionParams, out_dir: Path, t: float = 0.25):
    from .fields import x_field, z_field

    n = min(p.grid_n, 64)
    pp = replace(p, grid_n=n)
    pts = grid_points(pp).reshape(-1, p.d)
    xv = x_field(p, t, pts).value
    zv = z_field(p, pts).value
    lines = ["x,y," + ",".join(f"X{t}_{k}" for k in range(p.d)) + ","
             + ",".join(f"Z_{k}" for k in range(p.d))]
    for pt, a, b in zip(pts, xv, zv):
        lines.append(
            ",".join(repr(float(v)) for v in (*pt[:2], *a, *b))
        )
    _write(out_dir / "field_samples.csv", "\n".join(lines) + "\n")


def cmd_export(args) -> int:
    p = _load_params(args)
    out_dir = Path(args.out)
    lab = Laboratory(p, cache_dir=Path(args.cache), seed=args.seed)
    what, ident, fmt = args.what, args.id, args.format
    if what == "field":
        if ident in ("u_plain", "u_comp"):
            kind = "plain" if ident == "u_plain" else "compensated"
            f = lab.solution(kind).field
        elif ident.startswith("h:"):
            _, label, offset = ident.split(":")
            f = lab.run(label).offset(float(offset)).field
        else:
            print(f"[laxlab] unknown field id {ident!r}", file=sys.stderr)
            return 2
        if fmt == "csv":
            _write(out_dir / f"{ident.replace(':', '_')}.csv", f.to_csv())
        elif fmt == "binary":
            path = out_dir / f"{ident.replace(':', '_')}.bin"
            path.parent.mkdir(parents=True, exist_ok=True)
            f.save(path)
            print(f"[laxlab] wrote {path}", file=sys.stderr)
        else:
            print("[laxlab] fields export as csv or binary", file=sys.stderr)
            return 2
        return 0
    if what == "report":
        reports = {
            "period": lab.period_reports,
            "recurrence": lab.recurrence_reports,
            "structure": lab.structure_reports,
            "factor": lab.factor_reports,
            "smoothness": lab.smoothness_reports,
            "reduction": lab.reduction_reports,
            "exchange": lambda: [lab.exchange_report()],
            "critical": lambda: [lab.alpha0_diagnostic()],
        }
        if ident not in reports or fmt != "json":
            print("[laxlab] reports export as json", file=sys.stderr)
            return 2
        payload = [json.loads(r.to_json()) for r in reports[ident]()]
        _write(out_dir / f"{ident}.json", json.dumps(payload, indent=1, sort_keys=True))
        return 0
    if what == "trace":
        if fmt != "json":
            print("[laxlab] traces export as json", file=sys.stderr)
            return 2
        _write(out_dir / "trace.json", json.dumps(_label_trace(lab), indent=1, sort_keys=True))
        return 0
    if what == "curve":
        from .verify import calibrated_curve
        from .geometry import from_polar, marked_point
        from .fields import r_t

        if fmt != "csv":
            print("[laxlab] curves export as csv", file=sys.stderr)
            return 2
        y = marked_point(p, "x_0^0") + from_polar(0.6 * p.delta[0], 0.1)
        curve = calibrated_curve(p, 1.0, r_t(p, 1.0, y), depth=1.0)
        lines = ["t," + ",".join(f"x{k}" for k in range(p.d)) + ","
                 + ",".join(f"v{k}" for k in range(p.d)) + ",action"]
        for t, pt, v, a in zip(curve.times, curve.points, curve.velocities, curve.action_cum):
            lines.append(",".join(repr(float(q)) for q in (t, *pt, *v, a)))
        _write(out_dir / f"curve_{ident}.csv", "\n".join(lines) + "\n")
        return 0
    print(f"[laxlab] unknown export kind {what!r}", file=sys.stderr)
    return 2


def cmd_odometer(args) -> int:
    spec = RhoSpec(tuple(int(m) for m in args.moduli.split(",")))
    out = {"moduli": list(spec.moduli)}
    if args.query in ("multiplicity", "all"):
        out["multiplicity_sup"] = multiplicity_function(spec, "sup").as_dict()
        out["multiplicity_sum"] = multiplicity_function(spec, "sum").as_dict()
    if args.query in ("rho-prime", "all"):
        out["rho_prime"] = list(rho_prime(spec).moduli)
    if args.query in ("order", "all"):
        out["order_of_one"] = order_of_one(spec)
    if args.query in ("trace", "all"):
        orbit = orbit_of_zero(spec)
        out["plus_one_orbit"] = [list(q.coords) for q in orbit[: args.k]]
    json.dump(out, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_bench(args) -> int:
    from .bench import run_bench

    res = run_bench(grid_n=args.grid_n or 128, steps=args.steps, mode=args.mode)
    json.dump(res, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="laxlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None, help="key=value parameter file")
        sp.add_argument("--cache", type=str, default=".laxlab-cache")
        sp.add_argument("--out", type=str, default="laxlab-out")
        sp.add_argument("--seed", type=int, default=20240511)
        sp.add_argument("--grid-n", type=int, default=None)
        sp.add_argument("--dim", type=int, choices=(2, 3), default=None)

    sp = sub.add_parser("run", help="execute experiment stages in order")
    common(sp)
    sp.add_argument("--stages", type=str, default=",".join(STAGES))
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("export", help="export a cached artifact deterministically")
    common(sp)
    sp.add_argument("--what", choices=("field", "curve", "report", "trace"), required=True)
    sp.add_argument("--id", type=str, default="default")
    sp.add_argument("--format", choices=("csv", "json", "binary"), required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("odometer", help="classification queries as JSON")
    sp.add_argument("--moduli", type=str, required=True, help="comma separated")
    sp.add_argument(
        "--query", choices=("multiplicity", "rho-prime", "order", "trace", "all"),
        default="all",
    )
    sp.add_argument("--k", type=int, default=64, help="trace length cap")
    sp.set_defaults(func=cmd_odometer)

    sp = sub.add_parser("bench", help="compare compiled and fallback kernels")
    sp.add_argument("--grid-n", type=int, default=128)
    sp.add_argument("--steps", type=int, default=5)
    sp.add_argument("--mode", choices=("refined", "vgrid"), default="refined")
    sp.set_defaults(func=cmd_bench)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
