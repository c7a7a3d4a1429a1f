"""Command-line front end.

Exit codes: 0 success or pass, 1 counterexample or golden mismatch,
2 usage or validation error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from . import conditions, diagnostics
from .exprmap import ExprEvalError, ExprSyntaxError
from .mappings import (
    Catalog,
    DomainError,
    MappingSpec,
    RegistrationError,
    default_catalog,
    from_expression,
    load_mappings,
    mapping_to_stanza,
    parse_domain,
    parse_points,
    parse_stanzas,
)
from .schemes import ParamSchedule, ScheduleError, StopCriteria, run_scheme, trace_csv
from .space import NormKind, as_point

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Fully resolved settings of one invocation; serializes to a ``[run]`` stanza."""

    command: str
    map: str | None = None
    map_expr: str | None = None
    domain: str | None = None
    fixed_points: str | None = None
    special_points: str | None = None
    scheme: str | None = None
    schemes: str | None = None
    a: str | None = None
    b: str | None = None
    c: str | None = None
    x1: str | None = None
    n: int | None = None
    residual_tol: float | None = None
    error_tol: float | None = None
    reference: str | None = None
    norm: str = "euclidean"
    seed: int = 0
    condition: str | None = None
    budget: int | None = None
    c_set_budget: int | None = None
    alpha_grid: int | None = None
    h: str | None = None
    tol: float | None = None
    strict_schedule: bool = False
    out_dir: str = "results"
    format: str = "text"
    extra: dict[str, str] = field(default_factory=dict, repr=False)

    def to_stanza(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            if f.name == "extra":
                continue
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value: str) -> Any:
    t = str(_TYPES.get(name, "str"))
    if t.startswith("int"):
        return int(value)
    if t.startswith("float"):
        return float(value)
    if t.startswith("bool"):
        return value.lower() in ("1", "true", "yes")
    return value


COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "table1": {
        "map": "paper_example",
        "schemes": "noor,thakur",
        "a": "0.85",
        "b": "0.65",
        "c": "0.45",
        "x1": "0.9",
        "n": 20,
        "reference": "0",
    },
    "run": {"scheme": "thakur", "a": "0.85", "b": "0.65", "c": "0.45", "n": 20},
    "compare": {"schemes": "noor,thakur", "a": "0.85", "b": "0.65", "c": "0.45", "n": 20},
    "check": {"condition": "quasi", "tol": conditions.DEFAULT_TOL},
}


def _mapping_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("mapping")
    g.add_argument("--map", help="catalog id, e.g. paper_example or contraction:0.25")
    g.add_argument("--map-expr", dest="map_expr", help='expression body, e.g. "x == 1 ? 5/8 : x/2"')
    g.add_argument("--domain", help='per-coordinate bounds "lo,hi; lo,hi" (default 0,1)')
    g.add_argument("--fixed-points", dest="fixed_points", help='known fixed points "x0,x1; ..."')
    g.add_argument("--special-points", dest="special_points", help="extra sample points")


def _schedule_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("schedule (constants or expressions in n)")
    g.add_argument("--a", help="a_n")
    g.add_argument("--b", help="b_n")
    g.add_argument("--c", help="c_n")


def _common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file with [mapping] and [run] stanzas")
    p.add_argument("--norm", choices=[k.value for k in NormKind])
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir", help="directory for output files (default: results)")
    p.add_argument("--format", choices=["text", "csv"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonexpansive",
        description="Fixed-point iteration schemes and sampled mapping-condition checkers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table1", help="reproduce the Noor vs Thakur comparison table")
    t.add_argument("--iterations", dest="n", type=int, help="rows to compute (default 20)")
    t.add_argument("--x1")
    _schedule_args(t)
    _common_args(t)

    r = sub.add_parser("run", help="run one scheme and write its trace")
    r.add_argument("--scheme", help="picard, mann, noor or thakur")
    r.add_argument("--x1")
    r.add_argument("--n", type=int, help="index N of the last iterate x_N")
    r.add_argument("--residual-tol", dest="residual_tol", type=float)
    r.add_argument("--error-tol", dest="error_tol", type=float)
    r.add_argument("--reference", help="reference fixed point for the error column")
    r.add_argument("--strict-schedule", dest="strict_schedule", action="store_true", default=None,
                   help="report whether a_n = b_n = c_n in (1/2, 1) holds")
    _mapping_args(r)
    _schedule_args(r)
    _common_args(r)

    c = sub.add_parser("compare", help="compare several schemes on one mapping")
    c.add_argument("--schemes", help="comma-separated scheme ids")
    c.add_argument("--x1")
    c.add_argument("--n", type=int)
    c.add_argument("--reference")
    _mapping_args(c)
    _schedule_args(c)
    _common_args(c)

    k = sub.add_parser("check", help="search for a counterexample to a mapping condition")
    k.add_argument("--condition", choices=["quasi", "C", "Da", "lemma1", "I"])
    k.add_argument("--a", help="D_a parameter in (1/2, 1)")
    k.add_argument("--alpha-grid", dest="alpha_grid", type=int)
    k.add_argument("--budget", type=int)
    k.add_argument("--c-set-budget", dest="c_set_budget", type=int)
    k.add_argument("--h", help="rate function in r for condition I, e.g. 3*r/8")
    k.add_argument("--tol", type=float)
    _mapping_args(k)
    _common_args(k)
    return parser


def resolve(args: argparse.Namespace) -> tuple[RunConfig, Catalog]:
    catalog = default_catalog()
    values: dict[str, Any] = dict(COMMAND_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        text = Path(args.config).read_text(encoding="utf-8")
        registered = load_mappings(text, catalog)
        for name, entries in parse_stanzas(text):
            if name != "run":
                continue
            if entries.get("command", args.command) != args.command:
                raise UsageError(
                    f"config was written by {entries['command']!r}, not {args.command!r}"
                )
            for key, value in entries.items():
                if key in _TYPES and key != "command":
                    values[key] = _coerce(key, value)
        if registered and "map" not in values and "map_expr" not in values:
            values["map"] = registered[0]
        if values.get("map_expr") and values.get("map") in registered:
            values.pop("map_expr")
    for key, value in vars(args).items():
        if key in _TYPES and key != "command" and value is not None:
            values[key] = value
    if "map_expr" in vars(args) and args.map_expr and args.map is None:
        values.pop("map", None)
    return RunConfig(command=args.command, **{k: v for k, v in values.items() if k in _TYPES}), catalog


def resolve_mapping(cfg: RunConfig, catalog: Catalog) -> MappingSpec:
    if cfg.map_expr:
        if cfg.map:
            raise UsageError("give either --map or --map-expr, not both")
        domain = parse_domain(cfg.domain or "0,1")
        fixed = parse_points(cfg.fixed_points) if cfg.fixed_points else None
        special = parse_points(cfg.special_points) if cfg.special_points else ()
        spec = from_expression("expr", cfg.map_expr, domain, fixed, special)
        catalog.register(spec)
        return spec
    if not cfg.map:
        raise UsageError("no mapping given; use --map ID or --map-expr EXPR")
    try:
        return catalog.lookup(cfg.map)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _parse_x1(cfg: RunConfig, T: MappingSpec):
    if cfg.x1 is None:
        raise UsageError("--x1 is required")
    x1 = as_point([float(v) for v in cfg.x1.split(",")])
    problem = T.domain.violation(x1)
    if problem is not None:
        raise UsageError(f"x1 = {cfg.x1} is outside the domain {T.domain}: {problem}")
    return x1


def _reference(cfg: RunConfig, T: MappingSpec):
    if cfg.reference is not None:
        return as_point([float(v) for v in cfg.reference.split(",")])
    if T.known_fixed_points:
        return T.known_fixed_points[0]
    return None


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _emit_config(cfg: RunConfig, T: MappingSpec | None, out: Path) -> str:
    text = ""
    if T is not None and T.source is not None:
        text += mapping_to_stanza(T) + "\n"
        cfg = RunConfig(**{**vars(cfg), "map": T.id, "map_expr": None, "domain": None,
                           "fixed_points": None, "special_points": None})
    text += cfg.to_stanza()
    _write(out, f"{cfg.command}.config", text)
    return text


def _schedule(cfg: RunConfig) -> ParamSchedule:
    return ParamSchedule.of(cfg.a, cfg.b, cfg.c)


def cmd_table1(cfg: RunConfig, catalog: Catalog, stdout) -> int:
    start = time.perf_counter()
    T = catalog.lookup("paper_example")
    x1 = _parse_x1(cfg, T)
    schedule = _schedule(cfg)
    table = diagnostics.compare_schemes(
        T, diagnostics.TABLE1_SCHEMES, x1, schedule, cfg.n, (0.0,), cfg.norm
    )
    out = Path(cfg.out_dir)
    _write(out, "table1.csv", table.to_csv())
    for s in table.schemes:
        _write(out, f"table1_{s}.dat", table.plot_data(s))
    _emit_config(cfg, None, out)

    setup = diagnostics.TABLE1_SETUP
    paper_setup = (
        x1 == (setup["x1"],)
        and all(getattr(schedule, p)(1) == setup[p] and getattr(schedule, p).source == repr(setup[p])
                for p in "abc")
    )
    if cfg.format == "csv":
        stdout.write(table.to_csv())
    else:
        stdout.write(table.to_text())
    print(f"# seed = {cfg.seed}; files in {out}/", file=stdout)
    if not paper_setup:
        print("# golden check skipped: setup differs from the published one", file=stdout)
        return EXIT_OK
    bad = diagnostics.golden_mismatches(table)
    elapsed = time.perf_counter() - start
    if bad:
        n, s, want, got = bad[0]
        print(f"# golden mismatch at n={n}, {s}: expected {want}, got {got} "
              f"({len(bad)} differing cells)", file=stdout)
        return EXIT_FAIL
    checked = 2 * min(cfg.n, len(diagnostics.TABLE1_GOLDEN))
    print(f"# golden check passed: {checked} cells match ({elapsed:.3f} s)", file=stdout)
    return EXIT_OK


def cmd_run(cfg: RunConfig, catalog: Catalog, stdout) -> int:
    T = resolve_mapping(cfg, catalog)
    x1 = _parse_x1(cfg, T)
    schedule = _schedule(cfg)
    p = _reference(cfg, T)
    stop = StopCriteria(cfg.n, cfg.residual_tol, cfg.error_tol)
    trace = run_scheme(cfg.scheme, T, x1, schedule, stop, p, cfg.norm)
    out = Path(cfg.out_dir)
    csv_text = trace_csv(trace)
    _write(out, f"trace_{trace.scheme_id}.csv", csv_text)
    _emit_config(cfg, T, out)
    if cfg.format == "csv":
        stdout.write(csv_text)
        return EXIT_OK
    final = ", ".join(f"{v:.17g}" for v in trace.final)
    print(f"scheme = {trace.scheme_id}", file=stdout)
    print(f"mapping = {T.id}", file=stdout)
    print(f"iterations = {len(trace)}", file=stdout)
    print(f"final_x = {final}", file=stdout)
    print(f"final_residual = {trace.residuals[-1]:.17g}", file=stdout)
    if trace.errors is not None:
        print(f"final_error = {trace.errors[-1]:.17g}", file=stdout)
    print(f"stop_reason = {trace.stop_reason.value}", file=stdout)
    print(f"seed = {cfg.seed}", file=stdout)
    if cfg.strict_schedule:
        ok = schedule.satisfies_equal_parameter_constraint(max(cfg.n - 1, 1))
        print(f"equal_parameter_constraint = {'holds' if ok else 'violated'}", file=stdout)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, catalog: Catalog, stdout) -> int:
    T = resolve_mapping(cfg, catalog)
    x1 = _parse_x1(cfg, T)
    p = _reference(cfg, T)
    if p is None:
        raise UsageError("compare needs --reference or a mapping with known fixed points")
    schemes = [s.strip() for s in cfg.schemes.split(",") if s.strip()]
    table = diagnostics.compare_schemes(T, schemes, x1, _schedule(cfg), cfg.n, p, cfg.norm)
    out = Path(cfg.out_dir)
    _write(out, "compare.csv", table.to_csv())
    for s in table.schemes:
        _write(out, f"compare_{s}.dat", table.plot_data(s))
    _emit_config(cfg, T, out)
    stdout.write(table.to_csv() if cfg.format == "csv" else table.to_text())
    if cfg.format == "text":
        for s, tr in table.traces.items():
            summ = diagnostics.summarize(tr)
            rate = "n/a" if summ.empirical_rate is None else f"{summ.empirical_rate:.6g}"
            print(f"# {s}: rate = {rate}, fejer_violations = {summ.fejer_violations}", file=stdout)
    return EXIT_OK


def cmd_check(cfg: RunConfig, catalog: Catalog, stdout) -> int:
    T = resolve_mapping(cfg, catalog)
    k, seed, tol = cfg.norm, cfg.seed, cfg.tol
    cond = cfg.condition
    if cond == "quasi":
        report = conditions.check_quasi_nonexpansive(
            T, k, cfg.budget or conditions.DEFAULT_BUDGET, seed, tol)
    elif cond == "C":
        report = conditions.check_condition_C(
            T, k, cfg.budget or conditions.DEFAULT_PAIR_BUDGET, seed, tol)
    elif cond == "lemma1":
        report = conditions.check_lemma1(
            T, k, cfg.budget or conditions.DEFAULT_PAIR_BUDGET, seed, tol)
    elif cond == "Da":
        if cfg.a is None:
            raise UsageError("--condition Da needs --a")
        report = conditions.check_condition_Da(
            T, float(cfg.a), cfg.alpha_grid or conditions.DEFAULT_ALPHA_GRID, k,
            cfg.budget or conditions.DEFAULT_BUDGET, seed, tol,
            cfg.c_set_budget or conditions.DEFAULT_C_SET_BUDGET)
    elif cond == "I":
        if not cfg.h:
            raise UsageError("--condition I needs --h")
        report = conditions.check_condition_I(
            T, cfg.h, k, cfg.budget or conditions.DEFAULT_BUDGET, seed, tol)
    else:
        raise UsageError(f"unknown condition {cond!r}")
    out = Path(cfg.out_dir)
    text = report.to_text()
    _write(out, f"check_{cond}.txt", text)
    _emit_config(cfg, T, out)
    stdout.write(text)
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"table1": cmd_table1, "run": cmd_run, "compare": cmd_compare, "check": cmd_check}


def main(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg, catalog = resolve(args)
        return COMMANDS[cfg.command](cfg, catalog, stdout)
    except (UsageError, ValueError, KeyError, DomainError, RegistrationError,
            ScheduleError, ExprSyntaxError, ExprEvalError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
