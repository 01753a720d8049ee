"""Command-line frontend.

Three subcommands share one report shape:

* ``patlog check AUT FORMULA`` — compile the formula and decide it.
* ``patlog catalog PROPERTY AUT`` — class membership via forbidden patterns.
* ``patlog oracle AUT FORMULA`` — brute-force evaluation over bounded paths,
  the independent reference the checker is validated against.

Exit codes encode the verdict: 0 = satisfied / in class / witness found,
1 = unsatisfied / out of class / no witness, 2 = unknown.  Errors use
3 (bad input or arguments), 4 (resource limit), 5 (internal failure).
Reports are deterministic for fixed inputs and flags, modulo wall time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import catalog as cat
from .automata import Path, parse_automaton
from .emptiness import SearchConfig
from .errors import (
    ConfigError,
    FragmentError,
    ParseError,
    PatlogError,
    ResourceLimitError,
    ValidationError,
    WitnessSoundnessError,
)
from .logic import PatternFormula, check_fragment, parse_formula
from .pipeline import CheckResult, check_formula
from .semantics import eval_pattern

EXIT_YES = 0
EXIT_NO = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3
EXIT_RESOURCE = 4
EXIT_INTERNAL = 5

DEFAULT_MEMO_CAP = 500_000
MEMO_CAP_ENV = "PATLOG_MEMO_CAP"


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments, which collides with
    # the UNKNOWN verdict; raise instead and let main() map it to 3.
    def error(self, message):
        raise _ArgError(message)


# ---------------------------------------------------------------------------
# report


@dataclass
class RunReport:
    """Everything one invocation decided, in one machine-readable record."""

    command: str
    verdict: str
    exit_code: int
    fragment: Optional[str] = None
    method: Optional[str] = None
    bound_used: Optional[int] = None
    property: Optional[str] = None
    k: Optional[int] = None
    variant: Optional[str] = None
    witness: Optional[dict] = None
    failing: Optional[dict] = None  # universal counterexample: variable -> state
    inputs: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    formulas: Optional[dict] = None  # variant -> pattern text (catalog --explain)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)

    def lines(self, show_witness: bool, explain: bool):
        out = [f"verdict: {self.verdict}"]
        if self.variant is not None:
            out.append(f"pattern: {self.variant}")
        if self.failing is not None:
            pairs = ", ".join(f"{v} = {s}" for v, s in sorted(self.failing.items()))
            out.append(f"failing instance: {pairs}")
        if explain:
            if self.fragment is not None:
                out.append(f"fragment: {self.fragment}")
            if self.method is not None:
                out.append(f"method: {self.method}")
            if self.bound_used is not None:
                out.append(f"bound used: {self.bound_used}")
            if self.formulas:
                for variant, text in sorted(self.formulas.items()):
                    out.append(f"pattern {variant}: {text}")
            stats = ", ".join(f"{k}={v}" for k, v in sorted(self.stats.items()))
            if stats:
                out.append(f"stats: {stats}")
        if show_witness and self.witness is not None:
            out.extend(_witness_lines(self.witness))
        return out


def _value_json(v):
    # word outputs are letter tuples; show them the way inputs are shown
    if isinstance(v, tuple):
        return "".join(v)
    return v


def _path_json(p: Path) -> dict:
    recs = []
    for i in p.steps:
        t = p.aut.transitions[i]
        recs.append([t.src, t.label, _value_json(t.out), t.dst])
    return {"start": p.source, "transitions": recs}


def _witness_json(valuation: Optional[dict], paths: Optional[dict],
                  f: PatternFormula) -> Optional[dict]:
    if valuation is None:
        return None
    state_vars, input_vars, out_vars = set(), set(), set()
    for b in f.bindings:
        state_vars.update((b.src_var, b.dst_var))
        input_vars.add(b.input_var)
        if b.out_var:
            out_vars.add(b.out_var)
    w = {"paths": {}, "states": {}, "inputs": {}, "outputs": {}}
    for pv, p in (paths or {}).items():
        w["paths"][pv] = _path_json(p)
    for var, val in valuation.items():
        if var in state_vars:
            w["states"][var] = val
        elif var in input_vars:
            w["inputs"][var] = "".join(val)
        elif var in out_vars:
            w["outputs"][var] = _value_json(val)
    return w


def _witness_lines(w: dict):
    out = []
    for pv, p in sorted(w.get("paths", {}).items()):
        hops = " ".join(
            f"-[{lab or 'eps'}{'' if o is None else '|' + (str(o) or 'eps')}]->{dst}"
            for _src, lab, o, dst in p["transitions"]
        )
        out.append(f"  path {pv}: {p['start']} {hops}".rstrip())
    for group in ("states", "inputs", "outputs"):
        for var, val in sorted(w.get(group, {}).items()):
            shown = val if val != "" else "eps"
            out.append(f"  {group[:-1]} {var} = {shown}")
    return out


# ---------------------------------------------------------------------------
# shared plumbing


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _located(path: str, e: ParseError) -> ParseError:
    line = getattr(e, "line", None)
    loc = f"{path}:{line}" if line else path
    return ParseError(f"{loc}: {e}")


def _load_automaton(path: str):
    try:
        return parse_automaton(_read(path))
    except ParseError as e:
        raise _located(path, e) from None


def _load_formula(path: str) -> PatternFormula:
    base = os.path.dirname(os.path.abspath(path))
    try:
        return parse_formula(_read(path), base_dir=base)
    except ParseError as e:
        raise _located(path, e) from None


def _memo_cap(args) -> int:
    cap = getattr(args, "memo_cap", None)
    if cap is None:
        env = os.environ.get(MEMO_CAP_ENV)
        if env:
            try:
                cap = int(env)
            except ValueError:
                raise ConfigError(
                    f"{MEMO_CAP_ENV} must be an integer, got {env!r}"
                ) from None
        else:
            cap = DEFAULT_MEMO_CAP
    return cap


def _search_config(args) -> SearchConfig:
    kwargs = {"memo_cap": _memo_cap(args)}
    if getattr(args, "safety_factor", None) is not None:
        kwargs["safety_factor"] = args.safety_factor
    if getattr(args, "bound", None) is not None:
        kwargs["witness_bound"] = args.bound
        kwargs["bound_policy"] = "explicit"
    return SearchConfig(**kwargs)


def _emit(rep: RunReport, args) -> int:
    if args.json:
        print(rep.to_json())
    else:
        show = getattr(args, "witness", False)
        for line in rep.lines(show, getattr(args, "explain", False)):
            print(line)
    return rep.exit_code


_VERDICT_EXIT = {"sat": EXIT_YES, "unsat": EXIT_NO, "unknown": EXIT_UNKNOWN}


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    a = _load_automaton(args.automaton)
    f = _load_formula(args.formula)
    cfg = _search_config(args)
    t0 = time.perf_counter()
    if f.universal:
        tag = check_fragment(f, a.monoid, has_epsilon=a.has_epsilon())
        ures = cat.check_universal(a, f, cfg)
        detail = ures.detail
        rep = RunReport(
            command="check",
            verdict=ures.status,
            exit_code=_VERDICT_EXIT[ures.status],
            fragment=tag,
            method=detail.method if detail else None,
            bound_used=detail.bound_used if detail else None,
            failing=ures.failing,
            inputs={"automaton": args.automaton, "formula": args.formula},
            stats={"tuples_checked": ures.tuples_checked},
        )
    else:
        res = check_formula(a, f, cfg)
        rep = RunReport(
            command="check",
            verdict=res.verdict,
            exit_code=_VERDICT_EXIT[res.verdict],
            fragment=res.fragment,
            method=res.method,
            bound_used=res.bound_used,
            witness=_witness_json(res.witness, res.witness_paths, f),
            inputs={"automaton": args.automaton, "formula": args.formula},
            stats=dict(res.stats),
        )
    rep.stats["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return _emit(rep, args)


_STATUS_VERDICT = {"in": "in-class", "out": "not-in-class", "unknown": "unknown"}
_STATUS_EXIT = {"in": EXIT_YES, "out": EXIT_NO, "unknown": EXIT_UNKNOWN}


def cmd_catalog(args) -> int:
    a = _load_automaton(args.automaton)
    cfg = _search_config(args)
    triples = cat.catalog_formulas(args.property, a, args.k)
    t0 = time.perf_counter()
    pv = cat.check_property(a, args.property, args.k, cfg)
    witness = None
    detail: Optional[CheckResult] = pv.detail
    if pv.status == "out" and detail is not None:
        formula = next(f for v, _t, f in triples if v == pv.variant)
        witness = _witness_json(detail.witness, detail.witness_paths, formula)
    stats = {"variants_run": len(pv.runs)}
    for variant, res in pv.runs:
        for key, val in res.stats.items():
            stats[key] = stats.get(key, 0) + val
    stats["wall_time_s"] = round(time.perf_counter() - t0, 3)
    rep = RunReport(
        command="catalog",
        verdict=_STATUS_VERDICT[pv.status],
        exit_code=_STATUS_EXIT[pv.status],
        fragment=detail.fragment if detail else None,
        method=detail.method if detail else None,
        bound_used=detail.bound_used if detail else None,
        property=pv.prop,
        k=pv.k,
        variant=pv.variant,
        witness=witness,
        inputs={"automaton": args.automaton},
        stats=stats,
        formulas={v: t for v, t, _f in triples} if args.explain else None,
    )
    return _emit(rep, args)


def cmd_oracle(args) -> int:
    a = _load_automaton(args.automaton)
    f = _load_formula(args.formula)
    if args.max_len < 0:
        raise ConfigError("--max-len must be non-negative")
    t0 = time.perf_counter()
    res = eval_pattern(f, a, max_len=args.max_len)
    verdict = "sat" if res.satisfied else f"no witness with paths up to {args.max_len}"
    rep = RunReport(
        command="oracle",
        verdict=verdict,
        exit_code=EXIT_YES if res.satisfied else EXIT_NO,
        witness=(
            _witness_json(res.valuation, res.paths, f) if res.satisfied else None
        ),
        failing=(
            dict(zip(f.universal, res.failing_tuple))
            if res.failing_tuple is not None
            else None
        ),
        inputs={
            "automaton": args.automaton,
            "formula": args.formula,
            "max_len": args.max_len,
        },
        stats={
            "tuples_checked": res.tuples_checked,
            "paths_enumerated": res.paths_enumerated,
            "wall_time_s": round(time.perf_counter() - t0, 3),
        },
    )
    return _emit(rep, args)


# ---------------------------------------------------------------------------
# argument parsing


def _add_output_flags(p, witness=True):
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    if witness:
        p.add_argument(
            "--witness", action="store_true", help="print the witness valuation"
        )
    p.add_argument(
        "--explain",
        action="store_true",
        help="print fragment, method, patterns and search statistics",
    )


def _add_search_flags(p):
    p.add_argument(
        "--bound",
        type=int,
        metavar="N",
        help="explicit witness-length bound for counter search (0 gives up early)",
    )
    p.add_argument(
        "--safety-factor",
        type=float,
        metavar="F",
        help="multiplier on the derived default bound",
    )
    p.add_argument(
        "--memo-cap",
        type=int,
        metavar="N",
        help=f"max stored configurations (default {DEFAULT_MEMO_CAP}, "
        f"or ${MEMO_CAP_ENV})",
    )


def build_parser() -> _Parser:
    p = _Parser(
        prog="patlog",
        description="Model-check structural pattern formulas on automata "
        "with outputs.",
        epilog="exit codes: 0 yes / 1 no / 2 unknown / 3 bad input / "
        "4 resource limit / 5 internal error",
    )
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="decide a pattern formula on an automaton")
    c.add_argument("automaton", help="automaton file")
    c.add_argument("formula", help="pattern formula file")
    _add_search_flags(c)
    _add_output_flags(c)
    c.set_defaults(run=cmd_check)

    g = sub.add_parser("catalog", help="test membership in a classical subclass")
    g.add_argument(
        "property",
        help="one of: " + ", ".join(sorted(cat.PROPERTIES)),
    )
    g.add_argument("automaton", help="automaton file")
    g.add_argument("-k", type=int, default=None, help="order for parametric properties")
    _add_search_flags(g)
    _add_output_flags(g)
    g.set_defaults(run=cmd_catalog)

    o = sub.add_parser(
        "oracle", help="evaluate by brute-force path enumeration (reference semantics)"
    )
    o.add_argument("automaton", help="automaton file")
    o.add_argument("formula", help="pattern formula file")
    o.add_argument(
        "--max-len",
        type=int,
        default=6,
        metavar="L",
        help="maximum transitions per path (default 6)",
    )
    _add_output_flags(o)
    o.set_defaults(run=cmd_oracle)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ArgError as e:
        print(f"patlog: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.run(args)
    except (OSError, ParseError, ValidationError, FragmentError, ConfigError) as e:
        print(f"patlog: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as e:
        print(f"patlog: resource limit: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except WitnessSoundnessError as e:
        print(f"patlog: internal soundness failure: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except PatlogError as e:
        print(f"patlog: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
