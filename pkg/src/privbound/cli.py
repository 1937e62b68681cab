"""Command-line front end.

Exit codes: 0 success, 1 check failure, 2 parse error, 3 domain error.
Numbers are printed with 6 decimals as ``key,value`` rows.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as B
from .distribution import (
    DistributionError,
    DomainError,
    JointDistribution,
    Mechanism,
    Scenario,
    conditional_entropy,
    dump_mechanism,
    entropy,
    family_bsc,
    family_erasure,
    load_distribution,
    mixing_weight,
    mutual_information,
    parse_mechanism_array,
    report,
    row_entropies,
)
from .oracle import sandwich_check, search_g, search_h
from .perfect_privacy import g0 as solve_g0
from .representation import SearchConfig, efrl, esfrl, frl, sfrl_search

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3

SWEEP_HEADER = "theta,h_y_given_x,u1,u2,l1,l2,l3,upper_h,g0,oracle_h"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    text = f"{float(value):.6f}"
    return "0.000000" if text == "-0.000000" else text


def emit(rows, out=None) -> None:
    out = out or sys.stdout
    for key, value in rows:
        out.write(f"{key},{fmt(value)}\n")


def default_seed() -> int:
    return int(os.environ.get("PRIVBOUND_SEED", "0"))


def _load(path: str) -> JointDistribution:
    return load_distribution(Path(path).read_text(encoding="utf-8"))


def _config(args) -> SearchConfig:
    seed = args.seed if getattr(args, "seed", None) is not None else default_seed()
    return SearchConfig(
        restarts=getattr(args, "restarts", None) or SearchConfig.restarts,
        max_iters=getattr(args, "max_iters", None) or SearchConfig.max_iters,
        seed=seed,
    )


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def cmd_bounds(args) -> int:
    j = _load(args.dist)
    rep = B.bound_report(j, args.eps, variant="sharp" if args.sharp else "standard",
                         with_g0=args.with_g0)
    if not args.csv:
        print(f"# bounds for {args.dist} at eps={fmt(args.eps)}, I(X;Y)={fmt(mutual_information(j))}")
    else:
        print("key,value")
    emit(rep.as_rows())
    return EXIT_OK


# --------------------------------------------------------------------------
# construct
# --------------------------------------------------------------------------

def cmd_construct(args) -> int:
    j = _load(args.dist)
    cfg = _config(args)
    footer = []
    if args.method == "frl":
        if args.eps:
            print("warning: --eps is ignored by the frl method", file=sys.stderr)
        mech = frl(j)
    elif args.method == "efrl":
        mech = efrl(j, args.eps)
    else:
        mech = esfrl(j, args.eps, cfg)
        alpha = mixing_weight(j, args.eps)
        limit = (alpha * conditional_entropy(j, "x|y")
                 + (1 - alpha) * B.sfrl_constant(mutual_information(j)))
        cond = report(j, mech).cond_leakage
        footer = [("cond_leakage_limit", limit), ("cond_leakage_within_limit", cond <= limit + 1e-9)]
    if args.out:
        Path(args.out).write_text(dump_mechanism(mech), encoding="utf-8")
    budget = "" if args.method == "frl" else f", eps={fmt(args.eps)}"
    print(f"# {args.method} mechanism{budget}, nu={mech.nu}")
    emit(report(j, mech).as_rows())
    emit(footer)
    return EXIT_OK


# --------------------------------------------------------------------------
# oracle
# --------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    j = _load(args.dist)
    cfg = _config(args)
    if args.scenario == "hidden":
        res = search_g(j, args.eps, args.card, cfg)
    else:
        res = search_h(j, args.eps, args.card, cfg)
    print(f"# oracle, scenario={args.scenario}, eps={fmt(args.eps)}, seed={cfg.seed}")
    emit(res.as_rows())
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SweepRow:
    theta: float
    h_y_given_x: float
    u1: float
    u2: float
    l1: Optional[float]
    l2: Optional[float]
    l3: Optional[float]
    upper_h: float
    g0: float
    oracle_h: Optional[float] = None

    def csv(self) -> str:
        return ",".join(fmt(getattr(self, f.name)) for f in dataclasses.fields(self))


FAMILIES = {"bsc": family_bsc, "erasure": family_erasure}


def sweep_rows(family: str, steps: int, eps: float = 0.0, with_oracle: bool = False,
               cfg: SearchConfig = SearchConfig(restarts=1, max_iters=60)) -> list[SweepRow]:
    if steps < 2:
        raise DomainError("--steps must be at least 2")
    build = FAMILIES[family]
    rows = []
    for theta in np.linspace(0.01, 0.49, steps):
        theta = float(theta)
        j = build(theta)
        info = mutual_information(j)
        g0_value = solve_g0(j).value
        valid = eps == 0 or eps < info
        l1 = l2 = l3 = oracle = None
        if valid:
            l1 = B.lower_L1(j, eps)
            l2 = B.lower_L2(j, eps)
            l3 = B.lower_L3(j, eps, g0_value) if eps < info else None
            if with_oracle and eps < info:
                oracle = search_h(j, eps, cfg=cfg).value
        rows.append(SweepRow(
            theta=theta,
            h_y_given_x=conditional_entropy(j, "y|x"),
            u1=B.upper_U1(j),
            u2=B.upper_U2(j),
            l1=l1, l2=l2, l3=l3,
            upper_h=B.upper_h(j, eps),
            g0=g0_value,
            oracle_h=oracle,
        ))
    return rows


def sweep_csv(rows) -> str:
    return SWEEP_HEADER + "\n" + "".join(r.csv() + "\n" for r in rows)


def cmd_sweep(args) -> int:
    rows = sweep_rows(args.family, args.steps, args.eps, args.with_oracle,
                      SearchConfig(restarts=1, max_iters=60, seed=_config(args).seed))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sweep_csv(rows))
    print(f"# wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# check
# --------------------------------------------------------------------------

class _Suite:
    def __init__(self):
        self.results = []

    def add(self, name: str, gap: float, limit: float = 0.0):
        ok = bool(gap <= limit) and not math.isnan(gap)
        self.results.append((name, ok, gap))

    @property
    def failed(self):
        return [r for r in self.results if not r[1]]


def _check_mechanism_array(suite: _Suite, j: JointDistribution, k: np.ndarray) -> None:
    if k.shape[:2] != (j.nx, j.ny):
        suite.add("mechanism-shape", 1.0)
        return
    rows_gap = float(np.max(np.abs(k.sum(axis=2) - 1.0)))
    suite.add("mechanism-rows-stochastic", rows_gap, 1e-6)
    if rows_gap > 1e-6:
        return
    m = Mechanism(k / k.sum(axis=2, keepdims=True), Scenario.OBSERVED)
    rep = report(j, m)
    h_yx = conditional_entropy(j, "y|x")
    suite.add("mechanism-utility-identity", abs(rep.identity_gap(h_yx)), 1e-9)
    suite.add("mechanism-utility-upper", rep.utility - (h_yx + rep.leakage), 1e-9)


def run_checks(j: JointDistribution, eps: Optional[float], cfg: SearchConfig,
               debug_mechanism: Optional[np.ndarray] = None):
    suite = _Suite()
    info = mutual_information(j)
    hx, hy = entropy(j.px), entropy(j.py)
    h_yx = conditional_entropy(j, "y|x")

    suite.add("mi-bounded-by-entropies", info - min(hx, hy), 1e-9)
    suite.add("entropy-range-x", hx - math.log2(j.nx), 1e-9)
    suite.add("entropy-range-y", hy - math.log2(j.ny), 1e-9)

    m = frl(j)
    r = report(j, m)
    suite.add("frl-independence", r.leakage, 1e-9)
    suite.add("frl-functional", r.residual, 1e-9)
    suite.add("frl-cardinality", r.cardinality - (j.nx * (j.ny - 1) + 1), 0)
    suite.add("frl-entropy", r.entropy_u - float(row_entropies(j)[j.px > 0].sum()), 1e-9)
    suite.add("frl-utility-identity", abs(r.identity_gap(h_yx)), 1e-9)

    suite.add("layered-integral-nonpositive", B.layered_integral(j), 0.0)
    sf = sfrl_search(j, cfg)
    suite.add("sfrl-above-psi-lower", B.psi_lower(j) - sf.psi_estimate, 1e-6)
    suite.add("sfrl-below-constant", sf.psi_estimate - B.sfrl_constant(info), 1e-9)

    g0r = solve_g0(j)
    g0_rep = report(j, g0r.mechanism)
    suite.add("g0-independence", g0_rep.leakage, 1e-6)
    suite.add("g0-utility", abs(g0_rep.utility - g0r.value), 1e-6)
    suite.add("g0-below-U1", g0r.value - h_yx, 1e-9)

    triggered = None
    if info > 1e-12:
        eps = 0.5 * info if eps is None else eps
        for label, mech in (("efrl", efrl(j, eps)), ("esfrl", esfrl(j, eps, cfg))):
            rep = report(j, mech)
            suite.add(f"{label}-leakage", abs(rep.leakage - eps), 1e-9)
            suite.add(f"{label}-functional", rep.residual, 1e-9)
            suite.add(f"{label}-utility-identity", abs(rep.identity_gap(h_yx)), 1e-9)
            suite.add(f"{label}-below-upper", rep.utility - B.upper_h(j, rep.leakage), 1e-9)
        bounds = B.bound_report(j, eps, g0_value=g0r.value)
        suite.add("bounds-consistent", bounds.best_lower - bounds.upper_h, 1e-9)
        sandwich = sandwich_check(j, eps, cfg)
        for c in sandwich.checks:
            suite.results.append((f"sandwich-{c.name}", c.passed, c.gap))
        triggered = sandwich.saturation_triggered

    if debug_mechanism is not None:
        _check_mechanism_array(suite, j, debug_mechanism)
    return suite, eps, triggered


def cmd_check(args) -> int:
    j = _load(args.dist)
    cfg = _config(args)
    debug = None
    if args.debug_mechanism:
        debug = parse_mechanism_array(Path(args.debug_mechanism).read_text(encoding="utf-8"))
    suite, eps, triggered = run_checks(j, args.eps, cfg, debug)
    for name, ok, gap in suite.results:
        print(f"{'PASS' if ok else 'FAIL'} {name} gap={fmt(gap)}")
    if eps is not None:
        print(f"eps,{fmt(eps)}")
    if triggered is not None:
        print(f"saturation chain triggered: {'yes' if triggered else 'no'}")
    failed = suite.failed
    print(f"{len(suite.results) - len(failed)} passed, {len(failed)} failed")
    return EXIT_CHECK if failed else EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="closed-form bounds at a leakage budget")
    p.add_argument("--dist", required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--sharp", action="store_true", help="use the sharper SFRL constant in L2")
    p.add_argument("--with-g0", action="store_true", help="solve the perfect-privacy LP and report L3")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("construct", help="build a representation mechanism")
    p.add_argument("--dist", required=True)
    p.add_argument("--method", choices=["frl", "efrl", "esfrl"], required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--out")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("oracle", help="numerical search for h_eps / g_eps")
    p.add_argument("--dist", required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--scenario", choices=["hidden", "observed"], default="observed")
    p.add_argument("--card", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="bound curves over a channel family, as CSV")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--steps", type=int, default=49)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--with-oracle", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the invariant suite on one distribution")
    p.add_argument("--dist", required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--debug-mechanism", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DistributionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
