"""Command-line front end: ``windows``, ``verify`` and ``report``.

Exit codes: 0 when every certificate passes, 1 when any certificate fails,
2 for usage or configuration errors.  Certificates are written as one JSON
file each (schema ``certificate_v1``) next to a ``summary.csv``.

Config files are flat JSON objects with the keys ``d``, ``a``, ``params``
(list of ``[d, a]`` pairs), ``s``, ``p``, ``alpha``, ``eps``, ``weight``,
``seed``, ``size``, ``T``, ``refine``, ``virial_members``,
``smoothing_members``, ``scan_points`` and ``out``.  Scalar or list values are both accepted.
Command-line flags override config keys, which override the preset.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import glob
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .harness import (
    SCHEMA, SCOPE, Certificate, WeightInadmissibleError, WindowViolationError, make_family,
    verify_difference_square, verify_equivalence, verify_hardy, verify_square_equiv,
)
from .hankel import build_plan
from .kernels import KINDS, bound_ratio_scan
from .morawetz import (
    ESTIMATES, check_beta_bound, check_lap_psi_bound, smoothing_estimate, time_slices,
    verify_virial,
)
from .spectrum import THEOREMS, ParameterError, WeightSpec, make_params, window

SUITES = ("kernel-bounds", "hardy", "equivalence", "square", "difference", "morawetz")
SUMMARY_FIELDS = ("file", "suite", "inequality_id", "d", "a", "s", "p", "alpha", "eps",
                  "weight", "max_ratio", "threshold", "refinement_drift", "pass", "status")

PRESETS = {
    "quick": {"params": [[3, 1.0]], "s": [1.0], "p": [2.0], "alpha": [0.5], "eps": [0.25],
              "weight": ["1"], "seed": 0, "size": 6, "T": math.inf, "refine": True,
              "virial_members": 2, "smoothing_members": 2, "scan_points": 28},
    "full": {"params": [[3, 0.0], [3, 1.0], [4, -1.0], [4, 0.0], [5, -0.5], [5, 2.0]],
             "s": [0.5, 1.0, 1.5], "p": [1.5, 2.0, 3.0], "alpha": [0.25, 0.5, 0.75],
             "eps": [0.1, 0.5, 0.9], "weight": ["1", "power:-0.5"], "seed": 0, "size": 40,
             "T": math.inf, "refine": True, "virial_members": 10, "smoothing_members": 10,
             "scan_points": 28},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: list
    s: list
    p: list
    alpha: list
    eps: list
    weight: list
    seed: int = 0
    size: int = 40
    T: float = math.inf
    refine: bool = True
    virial_members: int = 10
    smoothing_members: int = 10
    scan_points: int = 28
    out: str = "certificates"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if not self.params:
            raise ConfigError("no (d, a) pairs given")
        models = []
        for d, a in self.params:
            if int(d) != d:
                raise ConfigError(f"dimension must be an integer, got {d}")
            try:
                models.append(make_params(int(d), float(a)))
            except ParameterError as exc:
                raise ConfigError(_param_message(exc, d)) from exc
        for w in self.weight:
            try:
                WeightSpec.parse(w)
            except ValueError as exc:
                raise ConfigError(f"bad weight {w!r}: {exc}") from exc
        if self.size < 1:
            raise ConfigError("family size must be positive")
        if not (self.T > 0):
            raise ConfigError("T must be positive")
        for e in self.eps:
            if not 0 < e < 1:
                raise ConfigError(f"eps must lie in (0, 1), got {e}")
        return models


def _param_message(exc: Exception, d) -> str:
    if int(d) < 3:
        return "dimension must be ≥ 3"
    return str(exc)


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def build_config(args: argparse.Namespace) -> RunConfig:
    """Preset, then JSON config file, then explicit flags."""
    base = dict(PRESETS["full" if getattr(args, "full", False) else "quick"])
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(base) - {"d", "a", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base.update(user)
    for key in ("s", "p", "alpha", "eps", "weight"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    for key in ("seed", "size", "T", "out"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    if getattr(args, "no_refine", False):
        base["refine"] = False
    d = args.d if getattr(args, "d", None) is not None else base.pop("d", None)
    a = args.a if getattr(args, "a", None) is not None else base.pop("a", None)
    base.pop("d", None)
    base.pop("a", None)
    if d is not None or a is not None:
        ds = _as_list(d if d is not None else 3)
        as_ = _as_list(a if a is not None else 0.0)
        base["params"] = [[dd, aa] for dd in ds for aa in as_]
    for key in ("s", "p", "alpha", "eps", "weight"):
        base[key] = [str(v) if key == "weight" else float(v) for v in _as_list(base[key])]
    try:
        return RunConfig(params=[[int(d), float(a)] for d, a in base["params"]],
                         s=base["s"], p=base["p"], alpha=base["alpha"], eps=base["eps"],
                         weight=base["weight"], seed=int(base["seed"]), size=int(base["size"]),
                         T=float(base["T"]), refine=bool(base["refine"]),
                         virial_members=int(base["virial_members"]),
                         smoothing_members=int(base["smoothing_members"]),
                         scan_points=int(base["scan_points"]),
                         out=str(base.get("out") or "certificates"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


# ---------------------------------------------------------------------------
# certificate records


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(x: float) -> str:
    return f"{x:g}".replace("-", "m").replace(".", "p")


def _record(suite: str, inequality_id: str, params, passed: bool, body: dict,
            status: str = "ran", **keys) -> dict:
    from .harness import _jsonable
    out = {"schema": SCHEMA, "version": __version__, "scope": SCOPE, "suite": suite,
           "inequality_id": inequality_id, "params": params, "pass": bool(passed),
           "status": status, "keys": keys, "timestamp": _now()}
    out.update(body)
    return _jsonable(out)


def _from_certificate(suite: str, cert: Certificate, **keys) -> dict:
    rec = cert.as_dict()
    rec["suite"] = suite
    rec["status"] = "ran"
    rec["keys"] = keys
    return rec


def _skipped(suite: str, inequality_id: str, params, reason: str, **keys) -> dict:
    return _record(suite, inequality_id, params, True, {"reason": reason}, status="skipped",
                   **keys)


def _file_name(rec: dict) -> str:
    parts = [rec["suite"], rec["inequality_id"]]
    par = rec.get("params") or {}
    if isinstance(par, dict) and "d" in par:
        parts += [f"d{par['d']}", f"a{_fmt(float(par['a']))}"]
    for k, v in sorted(rec.get("keys", {}).items()):
        parts.append(f"{k}{_fmt(v) if isinstance(v, (int, float)) else str(v)}")
    name = "_".join(str(p) for p in parts)
    return "".join(c if c.isalnum() or c in "_-." else "-" for c in name) + ".json"


def _write_atomic(path: str, text: str):
    folder = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=folder, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def strip_timestamps(rec):
    """A certificate without its timestamps, for determinism comparisons."""
    if isinstance(rec, dict):
        return {k: strip_timestamps(v) for k, v in rec.items() if k != "timestamp"}
    if isinstance(rec, list):
        return [strip_timestamps(v) for v in rec]
    return rec


def validate_certificate(rec: dict) -> list:
    """Problems with a certificate record; empty when it matches ``certificate_v1``."""
    problems = []
    required = {"schema": str, "version": str, "scope": str, "suite": str,
                "inequality_id": str, "pass": bool, "status": str}
    for key, typ in required.items():
        if key not in rec:
            problems.append(f"missing {key}")
        elif not isinstance(rec[key], typ):
            problems.append(f"{key} has type {type(rec[key]).__name__}")
    if rec.get("schema") != SCHEMA:
        problems.append(f"schema is {rec.get('schema')!r}")
    if rec.get("status") not in ("ran", "skipped"):
        problems.append(f"status is {rec.get('status')!r}")
    if rec.get("suite") not in SUITES:
        problems.append(f"unknown suite {rec.get('suite')!r}")
    return problems


# ---------------------------------------------------------------------------
# suites


def _weights(cfg: RunConfig) -> list:
    return [WeightSpec.parse(w) for w in cfg.weight]


def run_kernel_bounds(cfg: RunConfig, models) -> list:
    from .kernels import ScanGrid
    grid = ScanGrid(n=cfg.scan_points)
    out = []
    for par in models:
        for kind in KINDS:
            if kind == "difference_a_pos" and par.a < 0 or kind == "difference_a_neg" and par.a >= 0:
                out.append(_skipped("kernel-bounds", kind, par.as_dict(),
                                    f"{kind} does not apply at a={par.a:g}"))
                continue
            rep = bound_ratio_scan(kind, par, grid=grid)
            body = {"max_ratio": rep.sup_ratio, "refinement_drift": rep.refinement_drift,
                    "threshold": "finite", "report": rep.as_dict()}
            out.append(_record("kernel-bounds", kind, par.as_dict(), rep.stable, body))
    return out


def _harness_suite(suite: str, cfg: RunConfig, models, theorem: str, fn, exponent: str) -> list:
    out = []
    values = cfg.alpha if exponent == "alpha" else cfg.s
    for par in models:
        for x in values:
            for p in cfg.p:
                for w, wtext in zip(_weights(cfg), cfg.weight):
                    keys = {exponent: x, "p": p, "w": wtext}
                    try:
                        cert = fn(par, x, p, w, seed=cfg.seed, size=cfg.size, refine=cfg.refine)
                    except (WindowViolationError, WeightInadmissibleError, ValueError) as exc:
                        out.append(_skipped(suite, theorem, par.as_dict(), str(exc), **keys))
                        continue
                    out.append(_from_certificate(suite, cert, **keys))
    return out


def run_hardy(cfg, models):
    return _harness_suite("hardy", cfg, models, "hardy", verify_hardy, "s")


def run_equivalence(cfg, models):
    return _harness_suite("equivalence", cfg, models, "equiv_forward", verify_equivalence, "s")


def run_square(cfg, models):
    return _harness_suite("square", cfg, models, "square", verify_square_equiv, "alpha")


def run_difference(cfg, models):
    return _harness_suite("difference", cfg, models, "difference", verify_difference_square, "s")


def run_morawetz(cfg: RunConfig, models) -> list:
    out = []
    for par in models:
        plan = build_plan(par)
        n = max(cfg.virial_members, cfg.smoothing_members)
        fam = make_family(par, cfg.seed, size=n, plans=[plan], gamma_range=(0.2, 2.0),
                          b_range=(0.0, 6.0), lam_cut=8.0, r_cut=16.0)
        for eps in cfg.eps:
            keys = {"eps": eps}
            for name, fn in (("beta_bound", check_beta_bound), ("lap_psi_bound", check_lap_psi_bound)):
                val, ok = fn(par.d, eps)
                out.append(_record("morawetz", name, par.as_dict(), ok,
                                   {"max_ratio": val, "threshold": 1.0 if name == "beta_bound"
                                    else par.d}, **keys))
            scope = "proven range" if par.delta > 0 and eps <= 1 else "outside proven range"
            for est in ESTIMATES:
                reps = []
                for j, f in enumerate(fam.members[:cfg.smoothing_members]):
                    try:
                        reps.append(smoothing_estimate(est, par, eps, f, plan=plan, member=j,
                                                       check=par.delta > 0))
                    except ValueError as exc:
                        reps = exc
                        break
                if isinstance(reps, Exception):
                    out.append(_skipped("morawetz", est, par.as_dict(), str(reps), **keys))
                    continue
                ratios = [r.ratio for r in reps]
                drift = max(r.drift for r in reps)
                ok = all(r.valid for r in reps)
                body = {"max_ratio": max(ratios), "refinement_drift": drift,
                        "threshold": "finite", "T": cfg.T, "time_range": "inf",
                        "scope_note": scope, "reports": [r.as_dict() for r in reps]}
                out.append(_record("morawetz", est, par.as_dict(), ok, body, **keys))
            worst, rows = 0.0, []
            for j, f in enumerate(fam.members[:cfg.virial_members]):
                try:
                    rep = verify_virial(par, eps, f, 1.0, plan=plan)
                except ValueError as exc:
                    rows = exc
                    break
                worst = max(worst, rep.residual)
                rows.append(rep.as_dict())
            if isinstance(rows, Exception):
                out.append(_skipped("morawetz", "virial", par.as_dict(), str(rows), **keys))
            else:
                out.append(_record("morawetz", "virial", par.as_dict(), worst <= 1e-6,
                                   {"max_ratio": worst, "threshold": 1e-6, "reports": rows},
                                   **keys))
    return out


RUNNERS = {"kernel-bounds": run_kernel_bounds, "hardy": run_hardy,
           "equivalence": run_equivalence, "square": run_square,
           "difference": run_difference, "morawetz": run_morawetz}


def _summary_row(fname: str, rec: dict) -> dict:
    par = rec.get("params") or {}
    keys = rec.get("keys") or {}
    row = {"file": fname, "suite": rec.get("suite"), "inequality_id": rec.get("inequality_id"),
           "d": par.get("d", ""), "a": par.get("a", ""), "s": keys.get("s", ""),
           "p": keys.get("p", ""), "alpha": keys.get("alpha", ""), "eps": keys.get("eps", ""),
           "weight": keys.get("w", ""), "max_ratio": rec.get("max_ratio", ""),
           "threshold": rec.get("threshold", ""),
           "refinement_drift": rec.get("refinement_drift", ""),
           "pass": rec.get("pass"), "status": rec.get("status")}
    return row


def write_records(records: Sequence[dict], out_dir: str) -> list:
    os.makedirs(out_dir, exist_ok=True)
    names, rows = [], []
    for rec in records:
        fname = _file_name(rec)
        if fname in names:
            raise RuntimeError(f"duplicate certificate name {fname}")
        _write_atomic(os.path.join(out_dir, fname), json.dumps(rec, sort_keys=True, indent=2))
        names.append(fname)
        rows.append(_summary_row(fname, rec))
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        wr.writeheader()
        wr.writerows(rows)
    return names


def export_time_slices(cfg: RunConfig, models, out_dir: str, n: int = 41):
    """Plot data ``t, integrand`` for the first family member at each ``(d, a, eps)``."""
    horizon = 5.0 if math.isinf(cfg.T) else min(cfg.T, 5.0)
    times = np.linspace(0.0, horizon, n)
    path = os.path.join(out_dir, "time_slices.csv")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["d", "a", "eps", "t", "integrand"])
        for par in models:
            plan = build_plan(par)
            fam = make_family(par, cfg.seed, size=1, plans=[plan], gamma_range=(0.2, 2.0),
                              b_range=(0.0, 6.0), lam_cut=8.0, r_cut=16.0)
            for eps in cfg.eps:
                for t, val in time_slices(par, eps, fam.members[0], times, plan=plan):
                    wr.writerow([par.d, par.a, eps, f"{t:.6g}", f"{val:.12g}"])
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_windows(args) -> int:
    try:
        par = make_params(args.d, args.a)
    except ParameterError as exc:
        print(_param_message(exc, args.d), file=sys.stderr)
        return 2
    rows = [window(par, args.s, tid) for tid in THEOREMS]
    print(f"d={par.d} a={par.a:g} s={args.s:g} sigma={par.sigma:.6g} nu0={par.nu0:.6g}")
    print(f"{'theorem':<15}{'p_lower':>12}{'p_upper':>12}  valid  reason")
    for w in rows:
        print(f"{w.theorem_id:<15}{w.p_lower:>12.6g}{w.p_upper:>12.6g}  {str(w.valid):<5}  {w.reason}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "windows.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["theorem_id", "p_lower", "p_upper", "ap_index", "rh_index", "valid",
                         "reason"])
            for w in rows:
                wr.writerow([w.theorem_id, w.p_lower, w.p_upper, w.ap_index, w.rh_index,
                             w.valid, w.reason])
    return 0


def cmd_verify(args) -> int:
    try:
        cfg = build_config(args)
        models = cfg.validate()
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    suites = SUITES if args.suite == "all" else (args.suite,)
    records = []
    for suite in suites:
        recs = RUNNERS[suite](cfg, models)
        if args.suite != "all" and recs and all(r["status"] == "skipped" for r in recs):
            for r in recs:
                print(f"invalid combination: {r['inequality_id']} {r['keys']}: {r['reason']}",
                      file=sys.stderr)
            return 2
        records += recs
    names = write_records(records, cfg.out)
    if "morawetz" in suites and not getattr(args, "no_slices", False):
        export_time_slices(cfg, models, cfg.out)
    failed = 0
    for name, rec in zip(names, records):
        tag = "SKIP" if rec["status"] == "skipped" else ("PASS" if rec["pass"] else "FAIL")
        failed += tag == "FAIL"
        print(f"{tag}  {name}")
    print(f"{len(records)} certificates, {failed} failed, written to {cfg.out}")
    return 1 if failed else 0


def _load_records(out_dir: str) -> list:
    recs = []
    for path in sorted(glob.glob(os.path.join(out_dir, "*.json"))):
        try:
            with open(path) as fh:
                rec = json.load(fh)
        except (OSError, json.JSONDecodeError):
            continue
        if isinstance(rec, dict) and rec.get("schema") == SCHEMA:
            recs.append((os.path.basename(path), rec))
    return recs


def render_report(recs: list) -> str:
    lines = [f"# Verification summary", "", f"Scope: {SCOPE} (L_a restricted to radial data).", ""]
    groups: dict = {}
    for _, rec in recs:
        groups.setdefault((rec.get("suite"), rec.get("inequality_id")), []).append(rec)
    lines += ["| suite | inequality | passed | skipped |", "|---|---|---|---|"]
    for (suite, iid), rs in sorted(groups.items()):
        ran = [r for r in rs if r.get("status") != "skipped"]
        ok = sum(bool(r.get("pass")) for r in ran)
        lines.append(f"| {suite} | {iid} | {ok}/{len(ran)} | {len(rs) - len(ran)} |")
    lines += ["", "| suite | inequality | d | a | s | p | alpha | eps | weight | max ratio | pass |",
              "|---|---|---|---|---|---|---|---|---|---|---|"]
    for fname, rec in recs:
        if rec.get("status") == "skipped":
            continue
        row = _summary_row(fname, rec)
        lines.append("| " + " | ".join(str(row[k]) for k in
                                       ("suite", "inequality_id", "d", "a", "s", "p", "alpha",
                                        "eps", "weight", "max_ratio", "pass")) + " |")
    notes = sorted({r.get("scope_note") for _, r in recs if r.get("scope_note")})
    if notes:
        lines += ["", "Scope banners: " + "; ".join(notes)]
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    recs = _load_records(args.out)
    if not recs:
        print(f"no certificates found in {args.out}", file=sys.stderr)
        return 2
    text = render_report(recs)
    with open(os.path.join(args.out, "report.md"), "w") as fh:
        fh.write(text)
    with open(os.path.join(args.out, "report.csv"), "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        wr.writeheader()
        wr.writerows(_summary_row(f, r) for f, r in recs)
    print(text, end="")
    return 0


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="invsq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    w = sub.add_parser("windows", help="print the admissible p-windows for (d, a, s)")
    w.add_argument("--d", type=int, required=True)
    w.add_argument("--a", type=float, required=True)
    w.add_argument("--s", type=float, default=1.0)
    w.add_argument("--out", default=None, help="also write windows.csv here")

    v = sub.add_parser("verify", help="run verification suites and write certificates")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--d", type=int, nargs="+")
    v.add_argument("--a", type=float, nargs="+")
    v.add_argument("--s", type=float, nargs="+")
    v.add_argument("--p", type=float, nargs="+")
    v.add_argument("--alpha", type=float, nargs="+")
    v.add_argument("--eps", type=float, nargs="+")
    v.add_argument("--weight", nargs="+", help='"1", "power:ALPHA" or "composite:EPS"')
    v.add_argument("--seed", type=int)
    v.add_argument("--size", type=int, help="test family size")
    v.add_argument("--T", type=float, help="time horizon label (integrals run over all t)")
    preset = v.add_mutually_exclusive_group()
    preset.add_argument("--quick", action="store_true", help="small preset (default)")
    preset.add_argument("--full", action="store_true", help="thorough preset")
    v.add_argument("--config", help="JSON config file")
    v.add_argument("--out", help="output directory (default: certificates)")
    v.add_argument("--no-refine", action="store_true", help="skip the refinement pass")
    v.add_argument("--no-slices", action="store_true", help="skip time_slices.csv export")

    r = sub.add_parser("report", help="summarize certificates in a directory")
    r.add_argument("--out", default="certificates")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    handler = {"windows": cmd_windows, "verify": cmd_verify, "report": cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
