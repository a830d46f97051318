"""Command-line front end.

Every command emits one JSON record per checked assertion and a CSV summary
(one row per metric).  With an output directory (``--out`` or the
``CALDERON_OUTPUT_DIR`` environment variable) both go to files named after the
command; otherwise records go to stdout and the summary to stderr.

Exit status: 0 when every assertion passes, 1 on a failed assertion, 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from collections import OrderedDict
from fractions import Fraction
from pathlib import Path

from .counterexamples import GapSpec, embedding_chain_check, gap_report
from .dyadic import Window
from .errors import CalderonError
from .factorization import (
    b_factorize,
    f_factorize,
    holder_product_bound,
    lp_factorize,
    verify_factorization,
)
from .instances import (
    InstanceShape,
    generate_instances,
    instance_rng,
    parse_weight,
    random_cell_function,
)
from .maximal import read_cell_function, vv_maximal_constant
from .oracle import oracle_calderon_norm
from .sequences import SpaceParams, YTable, norm, read_sequence
from .suite import run_suite
from .weights import ap_constant, w_class_ratio

OUTPUT_ENV = "CALDERON_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def exponent(text: str) -> float:
    """``inf``, a decimal, or a fraction such as ``4/3``."""
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    try:
        val = float(Fraction(t))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not an exponent: {text!r}") from exc
    if val <= 0:
        raise argparse.ArgumentTypeError(f"exponent must be positive: {text!r}")
    return val


def real(text: str) -> float:
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# --------------------------------------------------------------------------
# reporting


class Report:
    def __init__(self, command: str, echo: dict):
        self.command = command
        self.echo = echo
        self.records: list[dict] = []

    def add(self, metric: str, value, ok: bool = True, instance=None, **extra):
        self.records.append({"experiment": self.command, "instance": instance, "metric": metric,
                             "value": _plain(value), "pass": bool(ok),
                             "params": {**self.echo, **{k: _plain(v) for k, v in extra.items()}}})

    def extend(self, records):
        for r in records:
            r = dict(r)
            r.setdefault("experiment", self.command)
            self.records.append(r)

    @property
    def ok(self) -> bool:
        return all(r["pass"] for r in self.records)

    def summary_rows(self):
        rows = OrderedDict()
        for r in self.records:
            key = (r["experiment"], r["metric"])
            row = rows.setdefault(key, {"experiment": key[0], "metric": key[1], "count": 0,
                                        "passed": 0, "failed": 0, "min": "", "max": ""})
            row["count"] += 1
            row["passed" if r["pass"] else "failed"] += 1
            v = r["value"]
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                row["min"] = v if row["min"] == "" else min(row["min"], v)
                row["max"] = v if row["max"] == "" else max(row["max"], v)
        return list(rows.values())

    def write(self, out_dir: str | None, stdout, stderr):
        lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)
        buf = io.StringIO()
        fields = ["experiment", "metric", "count", "passed", "failed", "min", "max"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(self.summary_rows())
        if out_dir:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            (path / f"{self.command}.jsonl").write_text(lines, encoding="utf-8")
            (path / f"{self.command}.csv").write_text(buf.getvalue(), encoding="utf-8")
            status = "pass" if self.ok else "FAIL"
            stdout.write(f"{self.command}: {len(self.records)} records, {status}; "
                         f"reports in {path}\n")
        else:
            stdout.write(lines)
            stderr.write(buf.getvalue())


def _plain(v):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, (float, Fraction)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if hasattr(v, "item"):
        return _plain(v.item())
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return str(v)


# --------------------------------------------------------------------------
# argument helpers


def _window(args) -> Window:
    return Window(args.d, args.J, args.K)


def _shape(args) -> InstanceShape:
    if args.shape:
        return InstanceShape.parse(args.shape)
    return InstanceShape(args.d, args.J, args.K, nnz=args.nnz)


def _sequences(args):
    if args.seq:
        with open(args.seq, encoding="utf-8") as fh:
            return [read_sequence(fh)]
    return generate_instances(args.seed, args.count, _shape(args))


def _params(args, i: int, scale: str, window: Window) -> SpaceParams:
    w = parse_weight(getattr(args, f"w{i}"), window)
    return SpaceParams(getattr(args, f"s{i}"), getattr(args, f"p{i}"), getattr(args, f"q{i}"), scale, w)


def _echo(args, *names) -> dict:
    return {n: _plain(getattr(args, n)) for n in names}


# --------------------------------------------------------------------------
# commands


def cmd_norm(args) -> Report:
    rep = Report("norm", _echo(args, "scale", "s", "p", "q", "weight", "seed"))
    for i, lam in enumerate(_sequences(args)):
        P = SpaceParams(args.s, args.p, args.q, args.scale, parse_weight(args.weight, lam.window))
        v = norm(lam, P)
        rep.add("norm", v, math.isfinite(v) and v >= 0, i, nnz=lam.nnz)
    return rep


def cmd_factorize_f(args) -> Report:
    rep = Report("factorize-f", _echo(args, "s0", "p0", "q0", "w0", "s1", "p1", "q1", "w1", "theta", "seed"))
    for i, lam in enumerate(_sequences(args)):
        P0, P1 = _params(args, 0, "F", lam.window), _params(args, 1, "F", lam.window)
        F = f_factorize(lam, P0, P1, args.theta)
        v = verify_factorization(F, args.tol)
        rec = F.to_record()
        rep.add("recon_err", F.recon_err, v.reconstruction_ok, i, status=rec["status"], branch=rec["branch"])
        rep.add("achieved_constant", F.achieved_constant, v.holder_ok, i,
                norm0=rec["norm0"], norm1=rec["norm1"], norm_target=rec["norm_target"])
    return rep


def cmd_factorize_b(args) -> Report:
    rep = Report("factorize-b", _echo(args, "s0", "p0", "q0", "w0", "s1", "p1", "q1", "w1", "theta", "seed"))
    for i, lam in enumerate(_sequences(args)):
        win = lam.window
        y0 = YTable.from_weight(parse_weight(args.w0, win), win)
        y1 = YTable.from_weight(parse_weight(args.w1, win), win)
        F = b_factorize(lam, args.s0, args.p0, args.q0, args.s1, args.p1, args.q1, args.theta, y0, y1)
        rep.add("recon_err", F.recon_err, F.recon_err <= args.tol, i)
        rep.add("achieved_constant", F.achieved_constant, abs(F.achieved_constant - 1) <= args.tol, i)
    return rep


def cmd_factorize_lp(args) -> Report:
    rep = Report("factorize-lp", _echo(args, "p0", "p1", "w0", "w1", "theta", "seed"))
    if args.cells:
        with open(args.cells, encoding="utf-8") as fh:
            funcs = [read_cell_function(fh)]
    else:
        win = _window(args)
        funcs = [random_cell_function(instance_rng(args.seed, i), win) for i in range(args.count)]
    for i, f in enumerate(funcs):
        L = lp_factorize(f, parse_weight(args.w0, f.window), parse_weight(args.w1, f.window),
                         args.theta, args.p0, args.p1)
        rep.add("recon_err", L.recon_err, L.recon_err <= args.tol, i)
        err = abs(L.achieved_constant - 1)
        rep.add("norm_identity_err", err, err <= args.tol, i)
    return rep


def cmd_oracle(args) -> Report:
    rep = Report("oracle", _echo(args, "scale", "s0", "p0", "q0", "w0", "s1", "p1", "q1", "w1", "theta", "seed"))
    for i, lam in enumerate(_sequences(args)):
        P0 = _params(args, 0, args.scale, lam.window)
        P1 = _params(args, 1, args.scale, lam.window)
        O = oracle_calderon_norm(lam, P0, P1, args.theta, tol=args.tol, seed=args.seed + i, cap=args.cap)
        rep.add("oracle_constant", O.constant, O.constant >= 1 - args.tol, i,
                oracle_value=O.value, norm_target=O.norm_target, evaluations=O.evaluations)
    return rep


def cmd_holder(args) -> Report:
    rep = Report("holder", _echo(args, "scale", "s0", "p0", "q0", "w0", "s1", "p1", "q1", "w1", "theta", "seed"))
    shape = _shape(args)
    lams = generate_instances(args.seed, 2 * args.count, shape)
    for i in range(args.count):
        lam0, lam1 = lams[2 * i], lams[2 * i + 1]
        P0 = _params(args, 0, args.scale, lam0.window)
        P1 = _params(args, 1, args.scale, lam0.window)
        hc = holder_product_bound(lam0, lam1, args.theta, P0, P1, tol=args.tol)
        rep.add("lhs_over_rhs", hc.lhs_norm / hc.rhs if hc.rhs else 0.0, hc.ok, i)
    return rep


def cmd_apconst(args) -> Report:
    rep = Report("apconst", _echo(args, "weight", "p", "scope", "d"))
    est = ap_constant(parse_weight(args.weight), args.p, local=args.scope == "local", d=args.d)
    expect_div = args.expect == "diverging"
    ok = est.diverging if expect_div else (not est.diverging) if args.expect == "bounded" else True
    rep.add("ap_constant", est.constant, ok, None, diverging=est.diverging,
            n_balls=est.n_balls, history=list(est.history))
    return rep


def cmd_wclass(args) -> Report:
    rep = Report("wclass", _echo(args, "w0", "w1", "theta", "p0", "p1", "J", "K", "epsilon"))
    if args.epsilon is not None:
        from .suite import epsilon_pair

        w0, w1 = epsilon_pair(args.epsilon)
        win = w0.window
    else:
        win = _window(args)
        w0, w1 = parse_weight(args.w0, win), parse_weight(args.w1, win)
    lo, hi = w_class_ratio(w0, w1, args.theta, args.p0, args.p1, win)
    rep.add("max_ratio", hi, hi <= 1 + 1e-9)
    rep.add("min_ratio", lo, lo > args.floor if args.epsilon is None else True)
    return rep


def cmd_maximal(args) -> Report:
    rep = Report("maximal", _echo(args, "weight", "p", "q", "J", "K", "count", "seed"))
    win = _window(args)
    w = parse_weight(args.weight, win)
    for i in range(args.count):
        rng = instance_rng(args.seed, i)
        fam = [random_cell_function(rng, win) for _ in range(args.family)]
        c = vv_maximal_constant(fam, args.p, args.q, w)
        rep.add("vv_constant", c, c >= 1 - 1e-12, i)
    return rep


def cmd_gap(args) -> Report:
    rep = Report("gap", _echo(args, "d", "s0", "s1", "p0", "p1", "theta", "J", "K"))
    spec = GapSpec(args.d, args.s0, args.s1, args.p0, args.p1, args.theta)
    for r in gap_report(spec, Window(args.d, args.J, args.K)):
        rep.add(r["claim"], r["value"], r["pass"], r.get("M"))
    return rep


def cmd_embed(args) -> Report:
    rep = Report("embed", _echo(args, "s0", "p0", "s1", "p1", "theta", "weight", "seed"))
    for i, lam in enumerate(_sequences(args)):
        chk = embedding_chain_check(lam, args.s0, args.p0, args.s1, args.p1, args.theta,
                                    parse_weight(args.weight, lam.window))
        if chk is None:
            rep.add("skipped_zero", 0.0, True, i)
            continue
        rep.add("c01", chk.c01, math.isfinite(chk.c01), i)
        rep.add("c12", chk.c12, math.isfinite(chk.c12), i)
    return rep


def cmd_suite(args) -> Report:
    rep = Report("suite", _echo(args, "seed", "quick"))
    only = [int(x) for x in args.only.split(",")] if args.only else None
    for res in run_suite(args.seed, args.quick, only):
        rep.extend(res.records)
        rep.add(f"criterion{res.number}", res.passed, res.passed, None, name=res.name,
                seconds=round(res.seconds, 3))
        args._stderr.write(res.line() + "\n")
    return rep


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None, help="output directory for the reports")
    p.add_argument("--config", default=None, help="key=value file; flags override")
    p.add_argument("--tol", type=real, default=1e-9)


def _window_args(p, J=6, K=2):
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--J", type=int, default=J)
    p.add_argument("--K", type=int, default=K)


def _instance_args(p, count=10, nnz=20):
    _window_args(p)
    p.add_argument("--seq", default=None, help="sequence file instead of random instances")
    p.add_argument("--count", type=int, default=count)
    p.add_argument("--nnz", type=int, default=nnz)
    p.add_argument("--shape", default=None, help='e.g. "dense,levels=0..3,d=1,K=2"')


def _pair_args(p, scale=True):
    if scale:
        p.add_argument("--scale", choices=["F", "B", "f", "b"], default="F", type=str.upper)
    for i, (s, pp, q, w) in enumerate((("0", "1", "4", "const:1"), ("1", "2", "2", "const:1"))):
        p.add_argument(f"--s{i}", type=real, default=float(s))
        p.add_argument(f"--p{i}", type=exponent, default=float(pp))
        p.add_argument(f"--q{i}", type=exponent, default=float(q))
        p.add_argument(f"--w{i}", default=w)
    p.add_argument("--theta", type=real, default=0.5)


COMMANDS = {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calderon", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=func)
        COMMANDS[name] = p
        return p

    p = add("norm", cmd_norm, "quasi-norm of sequences")
    _instance_args(p)
    p.add_argument("--scale", choices=["F", "B"], default="F", type=str.upper)
    p.add_argument("--s", type=real, default=0.0)
    p.add_argument("--p", type=exponent, default=2.0)
    p.add_argument("--q", type=exponent, default=2.0)
    p.add_argument("--weight", default="const:1")

    p = add("factorize-f", cmd_factorize_f, "level-set factorization in the f scale")
    _instance_args(p)
    _pair_args(p, scale=False)

    p = add("factorize-b", cmd_factorize_b, "exact factorization in the b scale")
    _instance_args(p)
    _pair_args(p, scale=False)

    p = add("factorize-lp", cmd_factorize_lp, "weighted L_p factorization of cell functions")
    _window_args(p)
    p.add_argument("--cells", default=None, help="cell-function file")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--p0", type=exponent, default=1.0)
    p.add_argument("--p1", type=exponent, default=2.0)
    p.add_argument("--w0", default="const:1")
    p.add_argument("--w1", default="const:1")
    p.add_argument("--theta", type=real, default=0.5)

    p = add("oracle", cmd_oracle, "brute-force product quasi-norm")
    _instance_args(p, count=3, nnz=4)
    _pair_args(p)
    p.add_argument("--cap", type=int, default=8)

    p = add("holder", cmd_holder, "Hölder-direction check on random pairs")
    _instance_args(p)
    _pair_args(p)

    p = add("apconst", cmd_apconst, "sampled Muckenhoupt constant")
    p.add_argument("--weight", default="power:0.5")
    p.add_argument("--p", type=exponent, default=2.0)
    p.add_argument("--scope", choices=["local", "global"], default="local")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--expect", choices=["bounded", "diverging", "any"], default="any")

    p = add("wclass", cmd_wclass, "per-cube comparability of a weight pair")
    _window_args(p)
    p.add_argument("--w0", default="power:0.5")
    p.add_argument("--w1", default="const:1")
    p.add_argument("--p0", type=exponent, default=2.0)
    p.add_argument("--p1", type=exponent, default=4.0)
    p.add_argument("--theta", type=real, default=0.5)
    p.add_argument("--floor", type=real, default=1e-3)
    p.add_argument("--epsilon", type=real, default=None, help="run the two-cell counterexample")

    p = add("maximal", cmd_maximal, "vector-valued maximal ratio on random families")
    _window_args(p, J=5)
    p.add_argument("--weight", default="const:1")
    p.add_argument("--p", type=exponent, default=2.0)
    p.add_argument("--q", type=exponent, default=2.0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--family", type=int, default=4)

    p = add("gap", cmd_gap, "gap-sequence report")
    _window_args(p, J=8, K=1)
    p.add_argument("--s0", type=real, default=0.0)
    p.add_argument("--s1", type=real, default=0.0)
    p.add_argument("--p0", type=exponent, default=1.0)
    p.add_argument("--p1", type=exponent, default=2.0)
    p.add_argument("--theta", type=real, default=0.5)

    p = add("embed", cmd_embed, "embedding-chain ratios")
    _instance_args(p)
    p.add_argument("--s0", type=real, default=1.0)
    p.add_argument("--p0", type=exponent, default=1.0)
    p.add_argument("--s1", type=real, default=0.0)
    p.add_argument("--p1", type=exponent, default=2.0)
    p.add_argument("--theta", type=real, default=0.5)
    p.add_argument("--weight", default="const:1")

    p = add("suite", cmd_suite, "acceptance suite")
    p.add_argument("--quick", type=boolean, nargs="?", const=True, default=False)
    p.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return parser


def read_config(path: str) -> dict:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise ConfigError(f"{path}:{n}: expected key=value")
                cfg[key.strip().lstrip("-").replace("-", "_")] = val.strip()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _apply_config(parser, argv):
    """Parse twice: config values become defaults, explicit flags override."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_config(args.config)
    sp = COMMANDS[args.command]
    known = {a.dest: a for a in sp._actions}
    for key, val in cfg.items():
        if key in ("config", "command", "func") or key not in known:
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        try:
            cfg[key] = action.type(val) if action.type else val
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {val!r}") from exc
        if action.choices and cfg[key] not in action.choices:
            raise ConfigError(f"bad value for {key}: {val!r}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        stderr.write(f"calderon: config error: {exc}\n")
        return EXIT_CONFIG
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    args._stderr = stderr
    try:
        report = args.func(args)
    except (CalderonError, ValueError, OSError) as exc:
        stderr.write(f"calderon: {exc}\n")
        return EXIT_CONFIG
    out = args.out or os.environ.get(OUTPUT_ENV)
    report.write(out, stdout, stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
