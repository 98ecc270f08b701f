"""Command line entry point: ``arak <subcommand> [options]``.

Every run writes a provenance bundle (config, seed, version, reports) to
``--out``.  The exit code is 1 when an acceptance-tagged report fails and 2
when the perfect sampler reports a cap failure.
"""

import argparse
import inspect
import json
import sys
from pathlib import Path

from . import rng as rngs
from .arak_dynamics import configuration_stats, sample_arak
from .contour_bd import run_contour_bd
from .contour_measure import tail_bound, contour_mass_walk, walk_mass_estimate
from .geometry import ConvexDomain
from .gibbs import ModelParams
from .graphical import ClanCapExceeded, perfect_sample, window_stats
from .harness import (RunConfig, StatReport, export_svg, parse_domain, read_record, sample_record,
                      write_bundle)
from .metropolis import run_chain

SUBCOMMANDS = ("sample", "metropolis", "contour-mass", "contour-bd", "perfect", "stats", "render")


def _parser():
    p = argparse.ArgumentParser(prog="arak", description="Arak process and contour-model simulations.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--domain", help="square:H, box:x0,y0,x1,y1, disk:R, disk:cx,cy,R or polygon:x,y;...")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for the run bundle")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--aux-a", "--a", dest="a", type=float, help="auxiliary area rate")
    p.add_argument("--aux-b", "--b", dest="b", type=float, help="auxiliary length rate")
    p.add_argument("--bd", choices=("none", "empty", "black", "white"))
    p.add_argument("--horizon", type=float, help="s-time horizon")
    p.add_argument("--thin", dest="thinning", type=float, help="s-time between snapshots")
    p.add_argument("--burn-in", dest="burn_in", type=float)
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--walks", type=int, help="walk budget")
    p.add_argument("--window", help="window domain for perfect sampling (default disk:1)")
    p.add_argument("--rmax-tail", dest="rmax_tail", type=float, help="tail mass tolerance for the truncation radius")
    p.add_argument("--clan-cap", dest="clan_cap", type=int)
    p.add_argument("--suite", action="append", help="acceptance suite name (repeatable; 'all' for every suite)")
    p.add_argument("--input", help="sample stream for render")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra option")
    return p


def build_config(argv=None, environ=None):
    args = _parser().parse_args(argv)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg = cfg.with_env(environ)
    flags = {k: getattr(args, k) for k in ("domain", "seed", "out", "alpha", "beta", "a", "b")}
    flags["subcommand"] = args.subcommand
    for k in ("window", "rmax_tail", "clan_cap", "input", "bd", "horizon", "thinning", "burn_in", "n", "walks"):
        flags[k] = getattr(args, k)
    if args.suite:
        flags["suite"] = ",".join(args.suite)
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = RunConfig.from_text(f"x = {v}").options["x"]
    return cfg.updated(flags)


def cmd_sample(cfg):
    dom = cfg.domain_obj
    n = int(cfg.get("n", 1))
    lines, stats, first = [], [], None
    for k in range(n):
        _, c = sample_arak(dom, rngs.child_seed(rngs.stream(cfg.seed, rngs.STATS, "sample", k)))
        first = c if first is None else first
        lines.append(sample_record(c, dom, index=k))
        stats.append(configuration_stats(c, dom))
    mean_len = sum(s["total_length"] for s in stats) / n
    reports = [StatReport("mean_total_length", mean_len, float("nan"), "summary", float("nan"), 0.0, True)]
    return reports, {"samples.jsonl": "\n".join(lines) + "\n", "first.svg": export_svg(first, dom)}


def cmd_metropolis(cfg):
    dom = cfg.domain_obj
    params = ModelParams(cfg.alpha, cfg.beta, cfg.a, cfg.b)
    horizon = float(cfg.get("horizon", 50.0))
    lines, last = [], None
    for s, c in run_chain(dom, params, cfg.get("bd", "none"), horizon, cfg.seed,
                          float(cfg.get("thinning", 1.0)), cfg.get("burn_in")):
        lines.append(sample_record(c, dom, s=s))
        last = c
    arts = {"snapshots.jsonl": "\n".join(lines) + "\n"}
    if last is not None:
        arts["last.svg"] = export_svg(last, dom)
    rep = StatReport("snapshots", float(len(lines)), 0.0, "count", float("nan"), 0.0, True)
    return [rep], arts


def cmd_contour_mass(cfg):
    dom = cfg.domain_obj
    beta = cfg.beta
    n = int(cfg.get("walks", 20000))
    g = rngs.stream(cfg.seed, rngs.WALK, "mass")
    m, se = contour_mass_walk(dom, beta, n, g)
    reports = [StatReport("contour_mass", m, se, "walk estimate", float("nan"), 0.0, True,
                          details={"walks": n})]
    R = cfg.get("min_length")
    if R is not None:
        unit = ConvexDomain.box(0, 0, 1, 1)
        t, tse = walk_mass_estimate(None, beta, n, g, predicate=lambda c: c.length > float(R),
                                    canonical=False, start_region=unit)
        bound = tail_bound(beta, float(R))
        reports.append(StatReport(f"tail_mass_R{R}", t, tse, "estimate <= bound + 3 SE", float("nan"), bound,
                                  bool(t <= bound + 3 * tse), True))
    return reports, {}


def cmd_contour_bd(cfg):
    dom = cfg.domain_obj
    lines = []
    for s, e in run_contour_bd(dom, cfg.beta, float(cfg.get("horizon", 50.0)), cfg.seed,
                               float(cfg.get("thinning", 1.0)), cfg.get("burn_in")):
        lines.append(sample_record(e, dom, s=s))
    rep = StatReport("snapshots", float(len(lines)), 0.0, "count", float("nan"), 0.0, True)
    return [rep], {"snapshots.jsonl": "\n".join(lines) + "\n"}


def cmd_perfect(cfg):
    window = parse_domain(cfg.get("window", "disk:1"))
    if window.kind != "disk":
        raise SystemExit("the perfect sampler needs a disk window")
    tol = float(cfg.get("rmax_tail", 1e-6))
    cap = int(cfg.get("clan_cap", 10000))
    try:
        ps = perfect_sample(window, cfg.beta, cfg.seed, clan_cap=cap, tail_tol=tol)
    except ClanCapExceeded as exc:
        return None, {"failure.json": json.dumps({"error": str(exc), **exc.diagnostics}, indent=2) + "\n"}
    n, L = window_stats(ps.ensemble.contours, window)
    reports = [StatReport("window_contours", float(n), 0.0, "count", float("nan"), 0.0, True,
                          details={"window_length": L, **ps.report})]
    return reports, {"sample.jsonl": sample_record(ps.ensemble, window, report=ps.report) + "\n",
                     "sample.svg": export_svg(ps.ensemble, window)}


def cmd_stats(cfg):
    from .suites import SUITES

    names = str(cfg.get("suite", "all")).split(",")
    if "all" in names:
        names = list(SUITES)
    budgets = json.loads(cfg.get("budgets", "{}")) if isinstance(cfg.get("budgets"), str) else cfg.get("budgets", {})
    reports = []
    for name in names:
        if name not in SUITES:
            raise SystemExit(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
        kw = dict(budgets.get(name, {}))
        params = inspect.signature(SUITES[name]).parameters
        if "seed" in params:
            kw.setdefault("seed", cfg.seed)
        if "thresholds" in params:
            kw.setdefault("thresholds", cfg.thresholds)
        reports += SUITES[name](**kw)
    return reports, {}


def cmd_render(cfg):
    path = cfg.get("input")
    if not path:
        raise SystemExit("render needs --input")
    k = int(cfg.get("line", 0))
    with open(path) as fh:
        line = fh.read().splitlines()[k]
    obj, dom, _ = read_record(line)
    return [], {"render.svg": export_svg(obj, dom)}


COMMANDS = {"sample": cmd_sample, "metropolis": cmd_metropolis, "contour-mass": cmd_contour_mass,
            "contour-bd": cmd_contour_bd, "perfect": cmd_perfect, "stats": cmd_stats, "render": cmd_render}


def main(argv=None, environ=None):
    cfg = build_config(argv, environ)
    reports, arts = COMMANDS[cfg.subcommand](cfg)
    out = Path(cfg.out)
    if reports is None:
        write_bundle(out, cfg, [], arts)
        print(arts["failure.json"], end="")
        return 2
    write_bundle(out, cfg, reports, arts)
    for r in reports:
        print(r.line())
    failed = [r for r in reports if r.acceptance and not r.passed]
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
