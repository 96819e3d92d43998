"""Command-line front end: ``fracgraph {check-sa,solve,ml,frac}``.

Config files are INI-style.  Example for a star::

    [graph]
    topology = star
    alpha = 0.5
    lengths = 1, 2, 4
    weights = 1, 1, 1

    [grid]
    n = 2048
    grading = 2.0

    [run]
    seed = 0
    tol = 1e-3
    trials = 50
    ladder = 256, 512, 1024

    [solve]
    k1 = 1
    b1 = 1
    c1 = 1
    mode = permissive
    sweeps = 2

Tree lengths are listed in the order of :data:`graphmodel.TREE_EDGES` and
tree weights in the order of :data:`graphmodel.TREE_WEIGHTS`; loop weights
follow :data:`graphmodel.LOOP_WEIGHTS`.  Missing lengths and weights default
to 1.  Command-line flags override config values.

Exit codes: 0 pass, 1 internal error, 2 config error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .eigensolver import ConstraintError, verify_theorem2
from .fraccalc import (GridFunction, frac_deriv_left, frac_deriv_right, frac_integral_left,
                       frac_integral_right, graded_grid)
from .graphmodel import (LOOP_WEIGHTS, TREE_EDGES, TREE_WEIGHTS, MetricGraph, build_loop,
                         build_star, build_tree)
from .mittag import mittag_leffler
from .operator import verify_self_adjoint

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2, 3


class ConfigError(Exception):
    """Bad config file or argument value."""


def fmt(v: float) -> str:
    return f"{v:.11e}"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------------- config
@dataclass(frozen=True)
class RunConfig:
    graph: MetricGraph
    n: int
    grading: float
    seed: int
    tol: float
    trials: int
    ladder: tuple[int, ...]
    out: Path
    k1: float = 1.0
    b1: float = 1.0
    c1: float = 1.0
    strict: bool = False
    sweeps: int = 2


def _floats(text: str, where: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{where}: values must be finite")
    return vals


def _get(cp, section, key, conv, default, where_fmt="[{s}] {k}"):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{where_fmt.format(s=section, k=key)} = {raw!r}: {exc}") from None


def _keyed(values: list[float] | None, keys, where: str) -> dict[str, float] | None:
    if values is None:
        return None
    if len(values) != len(keys):
        raise ConfigError(f"{where}: expected {len(keys)} values ({', '.join(keys)}), got {len(values)}")
    return dict(zip(keys, values))


def build_graph(cp: configparser.ConfigParser, alpha_override: float | None = None) -> MetricGraph:
    if not cp.has_section("graph"):
        raise ConfigError("missing [graph] section")
    topology = cp.get("graph", "topology", fallback="star").strip().lower()
    alpha = alpha_override if alpha_override is not None else _get(cp, "graph", "alpha", float, 0.5)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"[graph] alpha = {alpha}: must lie in (0, 1)")
    lengths = _floats(cp.get("graph", "lengths"), "[graph] lengths") if cp.has_option("graph", "lengths") else None
    weights = _floats(cp.get("graph", "weights"), "[graph] weights") if cp.has_option("graph", "weights") else None
    if weights is not None and any(w == 0.0 for w in weights):
        raise ConfigError(f"[graph] weights = {cp.get('graph', 'weights')!r}: weights must be nonzero")
    try:
        if topology == "star":
            if lengths is None:
                raise ConfigError("[graph] lengths: required for a star")
            w = weights if weights is not None else [1.0] * len(lengths)
            if len(w) != len(lengths):
                raise ConfigError("[graph] weights: need one weight per length")
            return build_star(len(lengths), lengths, w, alpha)
        if topology == "tree":
            ls = _keyed(lengths, TREE_EDGES, "[graph] lengths") or dict.fromkeys(TREE_EDGES, 1.0)
            return build_tree(ls, _keyed(weights, TREE_WEIGHTS, "[graph] weights"), alpha)
        if topology == "loop":
            ls = lengths if lengths is not None else [1.0] * 4
            return build_loop(ls, _keyed(weights, LOOP_WEIGHTS, "[graph] weights"), alpha)
    except ValueError as exc:
        raise ConfigError(f"[graph]: {exc}") from None
    raise ConfigError(f"[graph] topology = {topology!r}: expected star, tree or loop")


def load_config(args) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        with open(args.config) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    graph = build_graph(cp, args.alpha)
    n = args.n if args.n is not None else _get(cp, "grid", "n", int, 2048)
    grading = args.grading if args.grading is not None else _get(cp, "grid", "grading", float, 2.0)
    seed = args.seed if args.seed is not None else _get(cp, "run", "seed", int, 0)
    default_tol = 1e-3 if args.command == "check-sa" else 1e-2
    tol = args.tol if args.tol is not None else _get(cp, "run", "tol", float, default_tol)
    trials = _get(cp, "run", "trials", int, 50)
    ladder = tuple(int(v) for v in _floats(cp.get("run", "ladder"), "[run] ladder")) \
        if cp.has_option("run", "ladder") else (max(n // 8, 16), max(n // 4, 32), max(n // 2, 64))
    if n < 8:
        raise ConfigError(f"[grid] n = {n}: need at least 8 cells")
    if not grading >= 1.0:
        raise ConfigError(f"[grid] grading = {grading}: must be >= 1")
    if not tol > 0:
        raise ConfigError(f"[run] tol = {tol}: must be positive")
    if trials < 1 or any(m < 8 for m in ladder):
        raise ConfigError("[run] trials must be >= 1 and ladder sizes >= 8")
    mode = cp.get("solve", "mode", fallback="permissive").strip().lower()
    if mode not in ("strict", "permissive"):
        raise ConfigError(f"[solve] mode = {mode!r}: expected strict or permissive")
    strict = args.strict if args.strict is not None else mode == "strict"
    k1 = _get(cp, "solve", "k1", float, 1.0)
    if k1 == 0 and args.command == "solve":
        raise ConfigError("[solve] k1 = 0: k1 must be nonzero")
    sweeps = _get(cp, "solve", "sweeps", int, 2)
    if sweeps < 0:
        raise ConfigError(f"[solve] sweeps = {sweeps}: must be >= 0")
    return RunConfig(graph, n, grading, seed, tol, trials, ladder, Path(args.out),
                     k1, _get(cp, "solve", "b1", float, 1.0), _get(cp, "solve", "c1", float, 1.0),
                     strict, sweeps)


# ----------------------------------------------------------------- commands
def cmd_check_sa(cfg: RunConfig) -> int:
    g = cfg.graph
    report = verify_self_adjoint(g, cfg.trials, cfg.tol, cfg.seed, cfg.n, cfg.grading)
    lines = [f"# self-adjointness check, topology = {g.topology}, alpha = {g.alpha}",
             f"n = {cfg.n}", f"grading = {cfg.grading}", f"seed = {cfg.seed}", f"tol = {fmt(cfg.tol)}",
             "trial,family,abs_omega,abs_boundary_form,abs_pairing_form,passed"]
    for t in report.trials:
        lines.append(f"{t.trial},{t.family},{fmt(t.omega)},{fmt(t.boundary_form)},"
                     f"{fmt(t.pairing_form)},{t.passed}")
    if report.violation is not None:
        v = report.violation
        lines.append(f"violation,{v.family},{fmt(v.omega)},{fmt(v.boundary_form)},"
                     f"{fmt(v.pairing_form)},{v.passed}")
    lines.append(f"max_abs_omega = {fmt(report.max_omega)}")
    lines.append(f"passed = {report.passed}")
    write_atomic(cfg.out / "check_sa_report.txt", "\n".join(lines) + "\n")

    rows = ["# max |Omega| over trials per grid size; n = cells per edge, omega dimensionless",
            "n,max_abs_omega_family_a,max_abs_omega_family_b"]
    ladder_trials = min(cfg.trials, 5)
    for m in sorted(set(cfg.ladder) | {cfg.n}):
        if m == cfg.n:
            r = report
        else:
            r = verify_self_adjoint(g, ladder_trials, cfg.tol, cfg.seed, m, cfg.grading, violation=False)
        fa = max((t.omega for t in r.trials if t.family == "a"), default=0.0)
        fb = max((t.omega for t in r.trials if t.family == "b"), default=0.0)
        rows.append(f"{m},{fmt(fa)},{fmt(fb)}")
    write_atomic(cfg.out / "convergence.csv", "\n".join(rows) + "\n")
    print(f"check-sa {g.topology}: max |Omega| = {report.max_omega:.3e}, "
          f"violation |Omega| = {report.violation.omega if report.violation else float('nan'):.3e}, "
          f"{'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_solve(cfg: RunConfig) -> int:
    g = cfg.graph
    if g.topology != "star":
        raise ConfigError(f"[graph] topology = {g.topology!r}: solve needs a star")
    try:
        rep = verify_theorem2(g, cfg.k1, cfg.b1, cfg.c1, cfg.tol, cfg.n, cfg.grading,
                              strict=cfg.strict, volterra_sweeps=cfg.sweeps)
    except ConstraintError as exc:
        print("constraint residuals: " + ", ".join(f"{k} = {v:.3e}" for k, v in sorted(exc.residuals.items())))
        print(f"strict mode: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_atomic(cfg.out / "theorem2_report.txt", rep.to_text())
    rows = ["# sampled edge solutions; s = distance from the centre vertex (length units), "
            "phi dimensionless; nan marks a singular node",
            "edge,s,re_phi,im_phi"]
    for eid, phi in rep.solution.items():
        vals = phi.values
        for s, v in zip(phi.grid.nodes, vals):
            rows.append(f"{eid},{fmt(s)},{fmt(float(np.real(v)))},{fmt(float(np.imag(v)))}")
    write_atomic(cfg.out / "solution.csv", "\n".join(rows) + "\n")
    worst = max(r.eq2_residual for r in rep.rows)
    flag = "" if rep.consistent else " (constraints inconsistent, see report)"
    print(f"solve: max right-sided equation residual = {worst:.3e}{flag}")
    if cfg.strict and not rep.eq2_ok:
        return EXIT_FAIL
    return EXIT_OK


def cmd_ml(alpha: float, beta: float, zs: list[float]) -> int:
    vals = mittag_leffler(np.asarray(zs, dtype=float), alpha, beta)
    for z, v in zip(zs, np.atleast_1d(vals)):
        print(f"{z:.10g} {float(v):.10g}")
    return EXIT_OK


_TERM = re.compile(r"""^\s*(?P<coef>[0-9.]+(?:[eE][-+]?\d+)?)?\s*\*?\s*
                       (?:(?P<t>t)\s*(?:(?:\^|\*\*)\s*(?P<p>\(?\s*-?[0-9.]+(?:[eE][-+]?\d+)?\s*\)?))?)?\s*$""",
                   re.VERBOSE)


def parse_expression(text: str) -> list[tuple[float, float]]:
    """``"2*t^0.5 - 3 + t"`` becomes ``[(2, 0.5), (-3, 0), (1, 1)]``.

    Terms are sums of ``c``, ``c*t`` and ``c*t^p`` with ``p > -1``.
    """
    s = text.replace(" ", "")
    if not s:
        raise ConfigError("empty expression")
    # split on + and - that are not part of an exponent or a number's e-notation
    parts, cur, sign = [], "", 1.0
    i = 0
    while i < len(s):
        ch = s[i]
        prev = s[i - 1] if i else ""
        if ch in "+-" and i > 0 and prev not in "^eE(*":
            parts.append((sign, cur))
            sign, cur = (1.0 if ch == "+" else -1.0), ""
        elif ch in "+-" and i == 0:
            sign = 1.0 if ch == "+" else -1.0
        else:
            cur += ch
        i += 1
    parts.append((sign, cur))
    terms = []
    for sg, body in parts:
        m = _TERM.match(body)
        if not body or m is None or (m.group("coef") is None and m.group("t") is None):
            raise ConfigError(f"unsupported expression term {body!r} in {text!r}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        p = 0.0
        if m.group("t"):
            p = float(m.group("p").strip("()")) if m.group("p") else 1.0
        if p <= -1.0:
            raise ConfigError(f"exponent {p} in {text!r}: need p > -1")
        terms.append((sg * coef, p))
    return terms


def cmd_frac(expr: str, alpha: float, side: str, kind: str, length: float, n: int,
             grading: float, out: Path | None) -> int:
    grid = graded_grid(length, n, grading)
    f = GridFunction.zeros(grid)
    for coef, p in parse_expression(expr):
        if coef != 0.0:
            f = f + GridFunction.power(grid, coef, p)
    ops = {("left", "integral"): frac_integral_left, ("left", "derivative"): frac_deriv_left,
           ("right", "integral"): frac_integral_right, ("right", "derivative"): frac_deriv_right}
    r = ops[side, kind](f, alpha)
    vals = np.real(r.values)
    rows = [f"# {side} {kind} of order {alpha} applied to {expr}; x in length units",
            "x,value"]
    rows += [f"{fmt(x)},{fmt(float(v))}" for x, v in zip(grid.nodes, vals)]
    text = "\n".join(rows) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
    return EXIT_OK


# --------------------------------------------------------------------- main
def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracgraph", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--n", type=int, help="cells per edge")
        sp.add_argument("--grading", type=float, help="grid grading exponent (>= 1)")
        sp.add_argument("--alpha", type=float, help="fractional order in (0, 1)")
        sp.add_argument("--tol", type=float, help="pass/fail tolerance")
        sp.add_argument("--seed", type=int, help="random seed")
        mode = sp.add_mutually_exclusive_group()
        mode.add_argument("--strict", dest="strict", action="store_true", default=None)
        mode.add_argument("--permissive", dest="strict", action="store_false")

    common(sub.add_parser("check-sa", help="verify the symmetry of the graph operator"))
    common(sub.add_parser("solve", help="build and check the star eigenfunction construction"))

    ml = sub.add_parser("ml", help="evaluate the Mittag-Leffler function")
    ml.add_argument("--alpha", type=float, required=True)
    ml.add_argument("--beta", type=float, default=1.0)
    ml.add_argument("z", type=float, nargs="+")

    fr = sub.add_parser("frac", help="apply a fractional integral or derivative to an expression")
    fr.add_argument("expr", help='e.g. "1", "t", "2*t^0.5 - t^2"')
    fr.add_argument("--alpha", type=float, required=True)
    fr.add_argument("--side", choices=("left", "right"), default="left")
    fr.add_argument("--kind", choices=("integral", "derivative"), default="integral")
    fr.add_argument("--length", type=float, default=1.0)
    fr.add_argument("--n", type=int, default=64)
    fr.add_argument("--grading", type=float, default=1.0)
    fr.add_argument("--out", type=Path, default=None, help="CSV file (default: stdout)")
    return p


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "ml":
            if not (0 < args.alpha <= 2 and args.beta > 0):
                raise ConfigError("need 0 < alpha <= 2 and beta > 0")
            return cmd_ml(args.alpha, args.beta, args.z)
        if args.command == "frac":
            if not 0 < args.alpha < 1:
                raise ConfigError("--alpha must lie in (0, 1)")
            if not (args.length > 0 and args.n >= 8 and args.grading >= 1):
                raise ConfigError("need --length > 0, --n >= 8, --grading >= 1")
            return cmd_frac(args.expr, args.alpha, args.side, args.kind, args.length,
                            args.n, args.grading, args.out)
        cfg = load_config(args)
        return cmd_check_sa(cfg) if args.command == "check-sa" else cmd_solve(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - contract: anything else is an internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
