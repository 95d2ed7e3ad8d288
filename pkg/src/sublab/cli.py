"""Command-line driver: ``sublab analyze``, ``sublab verify`` and ``sublab corpus``.

Exit codes: 0 when every selected check passes, 1 for usage or I/O errors,
2 when at least one check exceeds its tolerance.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    ALL_CHECKS,
    BASIC_CHECKS,
    ONEILL_CHECKS,
    CheckResult,
    ClassificationReport,
    Sampler,
    Tolerances,
    check_tolerance,
    classify,
    merge_point_checks,
    oneill_battery,
)
from .expr import MapDefinition, ParseError, parse_map
from .fixtures import Fixture, builtin_corpus, get_fixture
from .oneill import ProjectorField
from .subspace import ComplexStructure, Frame, principal_angles

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "map", "params", "J", "sampling", "tolerances", "verdict",
                 "theta", "dims", "points", "checks"],
    "properties": {
        "version": {"type": "string"},
        "map": {"type": "object", "required": ["name", "source", "domain", "codomain"]},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "J": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "sampling": {"type": "object", "required": ["strategy", "n", "seed"],
                     "properties": {"strategy": {"type": "string"},
                                    "n": {"type": "integer"}, "seed": {"type": "integer"}}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "verdict": {"enum": ["v-invariant", "v-slant", "v-semi-invariant", "v-semi-slant",
                             "not-classified"]},
        "theta": {"type": ["number", "null"]},
        "dims": {"type": "object", "required": ["m", "n", "vertical", "D1", "D2"]},
        "points": {"type": "array", "items": {
            "type": "object", "required": ["point", "theta", "sigma_sq", "residuals"],
            "properties": {"point": {"type": "array", "items": {"type": "number"}},
                           "theta": {"type": ["number", "null"]},
                           "sigma_sq": {"type": ["array", "null"]},
                           "residuals": {"type": "object"}}}},
        "checks": {"type": "object", "additionalProperties": {
            "type": "object", "required": ["max_residual", "tolerance", "pass", "applicable"],
            "properties": {"max_residual": {"type": ["number", "null"]},
                           "tolerance": {"type": "number"},
                           "pass": {"type": "boolean"}, "applicable": {"type": "boolean"}}}},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}


# -- inputs -----------------------------------------------------------------


def parse_assignment(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise UsageError(f"expected k=v, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise UsageError(f"parameter {key.strip()!r}: {value!r} is not a number") from None


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """``k=a:b:step`` -> (k, [a, a+step, ..., b]) with both ends included."""
    key, sep, rng = text.partition("=")
    parts = rng.split(":")
    if not sep or len(parts) != 3:
        raise UsageError(f"expected k=a:b:step, got {text!r}")
    try:
        a, b, step = map(float, parts)
    except ValueError:
        raise UsageError(f"non-numeric sweep range in {text!r}") from None
    if step <= 0 or b < a:
        raise UsageError(f"empty sweep {text!r}: need step > 0 and a <= b")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return key.strip(), [round(a + i * step, 12) for i in range(count)]


def load_J(source: str | None, m: int) -> np.ndarray:
    if source in (None, "standard"):
        try:
            return ComplexStructure.standard(m).matrix
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        rows = [line.split() for line in Path(source).read_text().splitlines() if line.strip()]
        mat = np.array([[float(v) for v in r] for r in rows])
    except OSError as exc:
        raise UsageError(f"cannot read J file {source}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"J file {source}: {exc}") from None
    if mat.shape != (m, m):
        raise UsageError(f"J file {source}: expected {m}x{m} matrix, got shape {mat.shape}")
    try:
        return ComplexStructure(mat).matrix
    except ValueError as exc:
        raise UsageError(f"J file {source}: {exc}") from None


@dataclass
class Job:
    name: str
    fmap: MapDefinition
    params: dict
    J: np.ndarray
    regular: object = None


def resolve_job(args) -> Job:
    if args.example:
        try:
            fx = get_fixture(args.example)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        name, fmap, params, regular = fx.name, fx.map, dict(fx.params), fx.regular
    else:
        try:
            text = Path(args.map).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read map file {args.map}: {exc.strerror}") from None
        try:
            fmap = parse_map(text)
        except ParseError as exc:
            raise UsageError(f"{args.map}: {exc}") from None
        name, params, regular = args.map, {}, None
    for item in args.param:
        key, value = parse_assignment(item)
        if key not in fmap.params:
            raise UsageError(f"map has no parameter {key!r}")
        params[key] = value
    missing = [p for p in fmap.params if p not in params]
    if missing:
        raise UsageError(f"unbound parameter(s): {', '.join(missing)}")
    return Job(name, fmap, params, load_J(args.J, fmap.domain_dim), regular)


# -- analysis ---------------------------------------------------------------


def run_checks(job: Job, sampler: Sampler, tols: Tolerances, wanted, check_points: int):
    """classify + the requested O'Neill-level checks on the first ``check_points`` regular points."""
    rep = classify(job.fmap, job.J, job.params, sampler, tols, regular=job.regular)
    checks = {k: v for k, v in rep.checks.items() if k in wanted}
    deep = [c for c in ONEILL_CHECKS if c in wanted]
    if deep:
        fld = ProjectorField(job.fmap, job.params, job.J, tols.rank, tols.cluster)
        good = [a for a in rep.analyses if a.ok][:check_points]
        records = [oneill_battery(a, fld, tols, deep) for a in good]
        for name in deep:
            checks[name] = merge_point_checks(name, [r[name] for r in records],
                                              check_tolerance(name, tols))
    return rep, checks


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def check_entry(c: CheckResult) -> dict:
    out = {"max_residual": c.max_residual, "tolerance": c.tolerance,
           "pass": c.passed, "applicable": c.applicable}
    if c.details:
        out["details"] = c.details
    return out


def build_report(job: Job, rep: ClassificationReport, checks: dict, check_points: int) -> dict:
    points = []
    for a in rep.analyses:
        points.append({
            "point": a.point,
            "theta": a.theta,
            "sigma_sq": a.spectrum.sigma_sq if a.spectrum is not None else None,
            "residuals": a.residuals,
            "flags": [str(f) for f in a.flags],
        })
    sampling = dict(rep.sampling)
    sampling["check_points"] = check_points
    return _clean({
        "version": __version__,
        "map": {"name": job.name, "source": job.fmap.source,
                "domain": job.fmap.domain_dim, "codomain": job.fmap.codomain_dim},
        "params": job.params,
        "J": job.J,
        "sampling": sampling,
        "tolerances": asdict(rep.tolerances),
        "verdict": rep.verdict,
        "theta": rep.theta,
        "dims": rep.dims or {"m": job.fmap.domain_dim, "n": job.fmap.codomain_dim,
                             "vertical": None, "D1": None, "D2": None},
        "points": points,
        "checks": {name: check_entry(checks[name]) for name in sorted(checks)},
        "notes": rep.notes,
    })


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def format_text(report: dict) -> str:
    d = report["dims"]
    theta = report["theta"]
    lines = [
        f"map       {report['map']['name']}  R^{d['m']} -> R^{d['n']}",
        f"params    {', '.join(f'{k}={v}' for k, v in report['params'].items()) or '-'}",
        f"sampling  {report['sampling']['strategy']} n={report['sampling']['n']} "
        f"seed={report['sampling']['seed']}",
        f"verdict   {report['verdict']} at {report['sampling']['n']} sampled points",
        f"theta     {'-' if theta is None else f'{theta:.15g}'}",
        f"dims      vertical={d['vertical']} D1={d['D1']} D2={d['D2']}",
    ]
    lines += [f"note      {n}" for n in report.get("notes", [])]
    lines.append("checks")
    for name, c in report["checks"].items():
        status = "n/a " if not c["applicable"] else ("pass" if c["pass"] else "FAIL")
        res = c["max_residual"]
        res = "inf" if res is None else f"{res:.3e}"
        lines.append(f"  {status}  {name:22s} {res:>10s}  (tol {c['tolerance']:.0e})")
    return "\n".join(lines) + "\n"


def _tolerances(args) -> Tolerances:
    tols = Tolerances()
    for field_name, value in (("rank", args.tol_rank), ("cluster", args.tol_cluster),
                              ("angle", args.tol_angle)):
        if value is not None:
            if value <= 0:
                raise UsageError(f"--tol-{field_name} must be positive")
            tols = replace(tols, **{field_name: value})
    return tols


def _wanted(names) -> tuple:
    if not names or "all" in names:
        return ALL_CHECKS
    return tuple(names)


def run_analyze(args, out=None) -> int:
    out = out or sys.stdout
    job = resolve_job(args)
    if args.n <= 0:
        raise UsageError("--n must be positive")
    tols = _tolerances(args)
    sampler = Sampler(args.points, args.n, args.seed)
    start = time.perf_counter()
    rep, checks = run_checks(job, sampler, tols, _wanted(args.check), args.check_points)
    report = build_report(job, rep, checks, args.check_points)
    text = dumps(report) if args.format == "json" else format_text(report)
    if args.report:
        try:
            Path(args.report).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write report {args.report}: {exc.strerror}") from None
    else:
        out.write(text)
    print(f"sublab: {report['verdict']}, {len(checks)} checks, "
          f"{time.perf_counter() - start:.2f} s", file=sys.stderr)
    failed = [n for n, c in checks.items() if not c.passed]
    return EXIT_FAIL if failed else EXIT_OK


# -- corpus regression ------------------------------------------------------


def expected_frames(fx: Fixture, params, point) -> tuple[Frame | None, Frame | None]:
    """Expected D1 and D2 frames; when the angle collapses to 0 everything joins D1."""
    exp = fx.expected
    d1 = exp.d1(params, point) if exp.d1 else None
    d2 = exp.d2(params, point) if exp.d2 else None
    m = fx.map.domain_dim
    if exp.theta(params) is None or exp.theta(params) <= 1e-12:
        cols = [c for c in (d1, d2) if c is not None]
        return (Frame.from_vectors(np.hstack(cols)) if cols else None), Frame.empty(m)
    f1 = Frame.from_vectors(d1) if d1 is not None else Frame.empty(m)
    f2 = Frame.from_vectors(d2) if d2 is not None else None
    return f1, f2


def span_agreement(expected: Frame | None, computed: Frame) -> float:
    """Smallest principal-angle cosine (1.0 means identical subspaces)."""
    if expected is None:
        return 1.0
    if expected.dim != computed.dim:
        return 0.0
    if expected.dim == 0:
        return 1.0
    return float(principal_angles(expected, computed).min())


@dataclass
class CellResult:
    fixture: str
    params: dict
    ok: bool
    messages: list

    def line(self) -> str:
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        head = f"{'PASS' if self.ok else 'FAIL'}  {self.fixture}" + (f" ({ps})" if ps else "")
        return head if self.ok else head + ": " + "; ".join(self.messages)


def verify_cell(fx: Fixture, params: dict, sampler: Sampler, tols: Tolerances,
                check_points: int, deep: bool = True) -> CellResult:
    job = Job(fx.name, fx.map, params, load_J(None, fx.map.domain_dim), fx.regular)
    wanted = ALL_CHECKS if deep else BASIC_CHECKS
    rep, checks = run_checks(job, sampler, tols, wanted, check_points)
    exp_verdict, exp_theta = fx.expected.verdict(params)
    msgs = []
    if rep.verdict != exp_verdict:
        msgs.append(f"verdict {rep.verdict} != {exp_verdict}")
    if exp_theta is not None:
        if rep.theta is None or abs(rep.theta - exp_theta) > 1e-9:
            msgs.append(f"theta {rep.theta} != {exp_theta}")
    for a in [a for a in rep.analyses if a.ok][:check_points]:
        e1, e2 = expected_frames(fx, params, a.point)
        for label, e, c in (("D1", e1, a.ops.D1), ("D2", e2, a.ops.D2)):
            cos = span_agreement(e, c)
            if cos < 1.0 - 1e-10:
                msgs.append(f"{label} span mismatch (min cosine {cos:.3e})")
    for name, c in checks.items():
        should_fail = name in fx.expected.failing
        if c.passed == should_fail:
            msgs.append(f"{name} {'passed' if c.passed else 'failed'} "
                        f"(residual {c.max_residual:.3e})")
    return CellResult(fx.name, params, not msgs, msgs)


def run_verify(args, out=None) -> int:
    out = out or sys.stdout
    corpus = {fx.name: fx for fx in builtin_corpus()}
    if args.example and args.example not in corpus:
        raise UsageError(f"unknown fixture {args.example!r}; choose from {', '.join(corpus)}")
    fixtures = [corpus[args.example]] if args.example else list(corpus.values())
    sweeps = [parse_sweep(s) for s in args.sweep]
    sampler = Sampler("random", args.n, args.seed)
    tols = Tolerances(cluster=args.tol_cluster) if args.tol_cluster else Tolerances()
    results = []
    for fx in fixtures:
        keys = [k for k, _ in sweeps if k in fx.map.params]
        unknown = [k for k, _ in sweeps if k not in fx.map.params]
        if unknown and args.example:
            raise UsageError(f"{fx.name} has no parameter(s) {', '.join(unknown)}")
        grids = [vals for k, vals in sweeps if k in fx.map.params]
        cells = [dict(fx.params, **dict(zip(keys, combo))) for combo in itertools.product(*grids)]
        for params in cells:
            res = verify_cell(fx, params, sampler, tols, args.check_points, deep=len(cells) == 1
                              or not args.fast_sweep)
            results.append(res)
            print(res.line(), file=out)
    bad = sum(not r.ok for r in results)
    print(f"{len(results) - bad}/{len(results)} cells pass", file=out)
    return EXIT_FAIL if bad else EXIT_OK


def run_corpus(args, out=None) -> int:
    out = out or sys.stdout
    for fx in builtin_corpus():
        verdict, theta = fx.expected.verdict(fx.params)
        fm = fx.map
        ps = ", ".join(f"{k}={v:g}" for k, v in fx.params.items()) or "-"
        print(f"{fx.name}: R^{fm.domain_dim} -> R^{fm.codomain_dim}  params: {ps}", file=out)
        print(f"  {fx.description}", file=out)
        print(f"  expected verdict {verdict}, theta "
              f"{'-' if theta is None else f'{theta:.15g}'}", file=out)
        if fx.expected.failing:
            print(f"  expected failing checks: {', '.join(sorted(fx.expected.failing))}", file=out)
        for key, tag in fx.expected.provenance.items():
            print(f"  [{key}] {tag}", file=out)
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sublab", description="Numerical analysis of Riemannian submersions "
                "from flat Kähler space.")
    p.add_argument("--version", action="version", version=f"sublab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="classify one map and run residual checks")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", help="map file in the sublab DSL")
    src.add_argument("--example", help="builtin fixture name")
    a.add_argument("--param", action="append", default=[], metavar="k=v")
    a.add_argument("--J", default="standard", help="'standard' or a file of m rows of m reals")
    a.add_argument("--points", choices=("random", "grid"), default="random")
    a.add_argument("--n", type=int, default=100)
    a.add_argument("--seed", type=int, default=42)
    a.add_argument("--tol-rank", type=float)
    a.add_argument("--tol-cluster", type=float)
    a.add_argument("--tol-angle", type=float)
    a.add_argument("--check", action="append", choices=ALL_CHECKS + ("all",),
                   help="repeatable; default all")
    a.add_argument("--check-points", type=int, default=5,
                   help="sampled points used by the derivative-based checks")
    a.add_argument("--report", help="write the report here instead of stdout")
    a.add_argument("--format", choices=("json", "text"), default="json")
    a.set_defaults(func=run_analyze)

    v = sub.add_parser("verify", help="check the builtin corpus against its expected values")
    v.add_argument("--example")
    v.add_argument("--sweep", action="extend", nargs="+", default=[], metavar="k=a:b:step")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--n", type=int, default=100)
    v.add_argument("--check-points", type=int, default=2)
    v.add_argument("--tol-cluster", type=float)
    v.add_argument("--fast-sweep", action="store_true",
                   help="in sweeps, skip the derivative-based checks")
    v.set_defaults(func=run_verify)

    c = sub.add_parser("corpus", help="list fixtures with expected values")
    c.set_defaults(func=run_corpus)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sublab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
