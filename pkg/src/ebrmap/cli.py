"""Command-line entry point.

Exit status: 0 success, 2 invalid input, 3 numerical failure (including
non-convergence under ``--strict``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .analysis import (
    CALIBRATION_COLUMNS,
    DecisionRule,
    analysis_report,
    analyze,
    analyze_pwe,
    calibration_curve,
    eb_weight,
)
from .conjmix import (
    ConjugateMixture,
    DomainError,
    Family,
    ess_moment,
    fit_mixture_em,
    parse_component,
    robustify,
    select_mixture,
)
from .datasets import (
    APPENDIX_STUDY_IDS,
    PWE_SCHEMA,
    collapse_intervals,
    embedded_appendix_data,
    interval_records,
    parse_pwe,
    parse_trials,
)
from .manifest import RunManifest, config_digest, dumps, file_digest, now
from .mapmcmc import (
    HierarchicalSpec,
    McmcConfig,
    check_convergence,
    derive_map,
    diagnostics,
    read_draws_csv,
    write_draws_csv,
)
from .ocsim import OC_COLUMNS, SimulationError, load_scenario, run_scenario
from .records import Design, Endpoint

log = logging.getLogger("ebrmap")


class UsageError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# argument helpers

_PAYLOAD_KEYS = {
    Endpoint.BINOMIAL: ("responders", "n"),
    Endpoint.NORMAL: ("mean", "n", "sd"),
    Endpoint.TTE: ("events", "exposure"),
}


def _kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        k, sep, v = part.partition("=")
        if not sep:
            raise UsageError(f"expected key=value pairs, got {text!r}")
        out[k.strip()] = v.strip()
    return out


def parse_current(text: str, endpoint: Endpoint):
    """``events=32,exposure=117.6`` / ``responders=5,n=10`` / ``mean=-45,n=50,sd=40``."""
    kv = _kv(text)
    keys = _PAYLOAD_KEYS[endpoint]
    if set(kv) != set(keys):
        raise UsageError(f"{endpoint.value} current data needs {','.join(keys)}, got {','.join(kv)}")
    stat = {"responders": "responders", "mean": "mean", "events": "events"}
    stat_key = next(k for k in keys if k in stat)
    d = Design(endpoint, n=_num(kv.get("n"), int), sd=_num(kv.get("sd")), exposure=_num(kv.get("exposure")))
    value = float(kv[stat_key])
    if stat_key != "mean" and not value.is_integer():
        raise UsageError(f"{stat_key} must be an integer")
    return d.observe(value)


def parse_design(text: str, endpoint: Endpoint) -> Design:
    kv = _kv(text)
    allowed = {k for k in _PAYLOAD_KEYS[endpoint] if k in ("n", "sd", "exposure")}
    if set(kv) != allowed:
        raise UsageError(f"{endpoint.value} design needs {','.join(sorted(allowed))}")
    return Design(endpoint, n=_num(kv.get("n"), int), sd=_num(kv.get("sd")), exposure=_num(kv.get("exposure")))


def _num(v, kind=float):
    if v is None:
        return None
    x = float(v)
    if kind is int:
        if not x.is_integer():
            raise UsageError(f"{v!r} is not an integer")
        return int(x)
    return x


def _floats(text: str) -> list[float]:
    """``0.8,0.85,0.9`` or ``lo:hi:step`` (inclusive)."""
    if text.count(":") == 2:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise UsageError("grid step must be positive")
        n = int(round((hi - lo) / step))
        return [lo + i * step for i in range(n + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _range(text: str) -> tuple[int, int]:
    a, _, b = text.partition("-")
    return int(a), int(b or a)


def _load_mixture(path) -> ConjugateMixture:
    d = json.loads(Path(path).read_text())
    if "mixture" in d:  # fit-mixture output
        d = d["mixture"]
    return ConjugateMixture.from_dict(d)


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} is randomized; pass --seed")


def _endpoint_for(family: Family) -> Endpoint:
    return {Family.BETA: Endpoint.BINOMIAL, Family.GAMMA: Endpoint.TTE, Family.NORMAL: Endpoint.NORMAL}[family]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _rule(args):
    return DecisionRule.parse(args.rule) if getattr(args, "rule", None) else None


# ---------------------------------------------------------------------------
# commands; each returns (output text, failure or None)


def _historical(args):
    if args.data:
        return parse_trials(args.data, args.endpoint)
    if args.endpoint is not Endpoint.TTE:
        raise UsageError("the embedded appendix data are time-to-event; pass --data")
    table = parse_pwe(args.pwe) if args.pwe else embedded_appendix_data()
    lo, hi = _range(args.collapse)
    studies = [s for s in table.study_ids if s not in args.exclude]
    return collapse_intervals(table, lo, hi, studies)


def cmd_derive_map(args):
    _require_seed(args)
    records = _historical(args)
    spec = HierarchicalSpec(args.endpoint, args.mu_mean, args.mu_sd, args.tau_scale)
    cfg = McmcConfig(args.chains, args.iterations, args.burn_in_fraction, args.seed)
    draws = derive_map(records, spec, cfg)
    diag = diagnostics(draws, args.rhat_limit)
    if args.draws_out:
        write_draws_csv(draws, args.draws_out)
    if args.format == "csv":
        kept = draws.mu.shape[1]
        nat = draws.theta_new
        rows = [
            (j % kept, int(draws.chain[j]), float(nat[j]), float(draws.transformed[j]))
            for j in range(draws.transformed.size)
        ]
        text = _csv_text(("iteration", "chain", "theta_natural", "theta_transformed"), rows)
    else:
        text = dumps(diag)
    rep = check_convergence(draws, args.rhat_limit)
    if args.strict and not rep.passed:
        return text, NumericFailure(f"MCMC convergence {rep.status}: {rep.message}")
    if not rep.passed:
        log.warning("convergence %s: %s", rep.status, rep.message)
    return text, None


def cmd_fit_mixture(args):
    _require_seed(args)
    draws = read_draws_csv(args.draws)
    if args.k is not None:
        mix, rep = fit_mixture_em(draws, args.family, args.k, restarts=args.restarts, seed=args.seed)
    else:
        mix, rep = select_mixture(
            draws, args.family, args.k_max, criterion=args.criterion, restarts=args.restarts, seed=args.seed
        )
    param = "mean_n" if args.mean_n else "shape_rate"
    if args.format == "csv":
        rows = [(float(w), float(c.p1), float(c.p2)) for w, c in zip(mix.weights, mix.components)]
        return _csv_text(("weight", "p1", "p2"), rows), None
    report = {k: v for k, v in asdict(rep).items() if k != "trace"}
    out = {"mixture": mix.to_dict(param), "fit": report}
    if args.strict and not rep.converged:
        return dumps(out), NumericFailure("EM did not converge")
    return dumps(out), None


def cmd_robustify(args):
    mix = robustify(_load_mixture(args.map), parse_component(args.vague), args.w_v)
    return dumps(mix.to_dict("mean_n" if args.mean_n else "shape_rate")), None


def _priors(args):
    mix = _load_mixture(args.map)
    return mix, parse_component(args.vague), _endpoint_for(mix.family)


def cmd_ebweight(args):
    mix, vague, ep = _priors(args)
    data = parse_current(args.current, ep)
    res = eb_weight(mix, vague, data, args.gamma, args.grid_step)
    if args.format == "csv":
        return _csv_text(("w_v", "ppp"), res.curve), None
    return dumps(res.to_dict()), None


def cmd_analyze(args):
    mix, vague, ep = _priors(args)
    if args.endpoint is not None and args.endpoint is not ep:
        raise UsageError(f"--endpoint {args.endpoint.value} does not match the {mix.family.value} map prior")
    data = parse_current(args.current, ep)
    if (args.gamma is None) == (args.w_v is None):
        raise UsageError("give exactly one of --gamma or --w-v")
    rule = _rule(args)
    res = analyze(mix, vague, data, gamma=args.gamma, w_v=args.w_v, grid_step=args.grid_step,
                  rule=rule, ci_level=args.ci_level)
    report = analysis_report(res, mix, vague, data, rule)
    if args.format == "csv":
        s = res.summary
        row = (res.w_v, s.median, s.ci[0], s.ci[1], s.rule_probability, report["verdict"])
        return _csv_text(("w_v", "median", "ci_lo", "ci_hi", "rule_probability", "verdict"), [row]), None
    return dumps(report), None


def cmd_analyze_pwe(args):
    table = parse_pwe(args.pwe) if args.pwe else embedded_appendix_data()
    current = args.current_study or table.study_ids[-1]
    hist_ids = [s for s in table.study_ids if s != current and s not in args.exclude]
    n = len(table.intervals)
    data = [interval_records(table, i + 1, [current])[0].payload for i in range(n)]
    if args.maps:
        maps = [ConjugateMixture.from_dict(d) for d in json.loads(Path(args.maps).read_text())]
    else:
        _require_seed(args)
        spec = HierarchicalSpec("tte", args.mu_mean, args.mu_sd, args.tau_scale)
        cfg = McmcConfig(args.chains, args.iterations, args.burn_in_fraction, args.seed)
        maps = []
        for i in range(n):
            d = derive_map(interval_records(table, i + 1, hist_ids), spec, cfg)
            maps.append(select_mixture(d.theta_new, "gamma", args.k_max, seed=args.seed)[0])
    gammas = _floats(args.gamma)
    gam = gammas[0] if len(gammas) == 1 else gammas
    vague = parse_component(args.vague) if args.vague else None
    results = analyze_pwe(maps, data, gam, vague, grid_step=args.grid_step, rule=_rule(args),
                          ci_level=args.ci_level)
    rows = []
    for (lo, hi), d, r in zip(table.intervals, data, results):
        s = r.summary
        rows.append({
            "interval_lo": lo, "interval_hi": hi, "events": d.events, "exposure": d.exposure,
            "gamma": r.eb.gamma, "w_eb": r.w_v, "median": s.median, "ci_lo": s.ci[0], "ci_hi": s.ci[1],
            "rule_probability": s.rule_probability,
            "map": r.prior.to_dict(),
        })
    if args.format == "csv":
        cols = ("interval_lo", "interval_hi", "events", "exposure", "gamma", "w_eb", "median", "ci_lo", "ci_hi")
        return _csv_text(cols, [tuple(r[c] for c in cols) for r in rows]), None
    return dumps({"current_study": current, "historical": hist_ids, "intervals": rows}), None


def cmd_calibrate(args):
    mix, vague, ep = _priors(args)
    design = parse_design(args.design, ep)
    observed = _floats(args.observed) if args.observed else None
    rows = calibration_curve(mix, vague, design, _floats(args.gammas), observed, args.grid_step)
    if args.format == "json":
        return dumps([asdict(r) for r in rows]), None
    return _csv_text(CALIBRATION_COLUMNS, [tuple(getattr(r, c) for c in CALIBRATION_COLUMNS) for r in rows]), None


def cmd_simulate(args):
    _require_seed(args)
    s = load_scenario(args.scenario)
    # the command-line seed always wins over the scenario file's
    s = replace(s, seed=args.seed)
    if args.replications is not None:
        s = replace(s, replications=args.replications)
    try:
        rows = run_scenario(s, threads=args.threads)
    except SimulationError as exc:
        return "", NumericFailure(str(exc))
    if args.format == "json":
        return dumps({"scenario": s.to_dict(), "rows": [asdict(r) for r in rows]}), None
    return _csv_text(OC_COLUMNS, [tuple(getattr(r, c) for c in OC_COLUMNS) for r in rows]), None


def cmd_appendix_data(args):
    t = embedded_appendix_data()
    if args.format == "json":
        return dumps({
            "intervals": t.intervals,
            "studies": [{"study": s.study_id, "cells": s.cells} for s in t.studies],
        }), None
    rows = [
        (s.study_id, float(lo), float(hi), ev, float(ex))
        for s in t.studies for (lo, hi), (ev, ex) in zip(t.intervals, s.cells)
    ]
    return _csv_text(PWE_SCHEMA, rows), None


def cmd_ess(args):
    mix = _load_mixture(args.map)
    out = {
        "family": mix.family.value,
        "ess": ess_moment(mix, args.sigma_ref),
        "method": "moment",
        "note": "moment-matching surrogate; not expected to equal ESS values from other definitions",
    }
    if args.format == "csv":
        return _csv_text(("family", "ess", "method"), [(out["family"], out["ess"], out["method"])]), None
    return dumps(out), None


# ---------------------------------------------------------------------------
# parser


RANDOMIZED = {"derive-map", "fit-mixture", "simulate", "analyze-pwe"}
# paths whose content, not name, enters the config digest
FILE_ARGS = ("data", "pwe", "draws", "map", "maps", "scenario")
# flags that change where or how output goes, not what is computed
NON_SEMANTIC = ("out", "threads", "format", "verbose", "draws_out", "func", "strict")


def _mcmc_flags(p, mu_mean=0.0, mu_sd=10.0, tau_scale=0.5):
    p.add_argument("--mu-mean", type=float, default=mu_mean)
    p.add_argument("--mu-sd", type=float, default=mu_sd)
    p.add_argument("--tau-scale", type=float, default=tau_scale)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--burn-in-fraction", type=float, default=0.5)


def _common_flags() -> argparse.ArgumentParser:
    # a fresh parent per subcommand: parents share action objects, so one
    # subcommand's set_defaults would otherwise leak into the others
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="required for randomized commands")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", help="output file (default stdout); a manifest is written next to it")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--strict", action="store_true", help="exit 3 on non-convergence")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebrmap", description="Empirical Bayes robust MAP priors")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[_common_flags()], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("derive-map", cmd_derive_map, "MCMC draws from the MAP predictive")
    sp.add_argument("--endpoint", type=Endpoint, required=True)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--data", help="historical trials CSV")
    src.add_argument("--pwe", help="piecewise-exponential CSV (default: embedded appendix data)")
    sp.add_argument("--collapse", default="1-6", help="1-based inclusive interval range to pool")
    sp.add_argument("--exclude", nargs="*", default=[APPENDIX_STUDY_IDS[-1]],
                    help="PWE studies left out of the historical set")
    _mcmc_flags(sp)
    sp.add_argument("--rhat-limit", type=float, default=1.05)
    sp.add_argument("--draws-out", help="also write draws CSV here")

    sp = add("fit-mixture", cmd_fit_mixture, "EM fit of a conjugate mixture to draws")
    sp.add_argument("--draws", required=True)
    sp.add_argument("--family", type=Family, required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--k-max", type=int, default=5)
    sp.add_argument("--criterion", choices=("adequate", "aic"), default="adequate")
    sp.add_argument("--restarts", type=int, default=10)
    sp.add_argument("--mean-n", action="store_true", help="write gamma components as mean,n")

    sp = add("robustify", cmd_robustify, "add a vague component with a fixed weight")
    sp.add_argument("--map", required=True)
    sp.add_argument("--vague", required=True, help="beta:a,b | gamma:mean,n | normal:mean,sd")
    sp.add_argument("--w-v", type=float, required=True)
    sp.add_argument("--mean-n", action="store_true")

    for name, func, help_ in (
        ("ebweight", cmd_ebweight, "empirical Bayes weight and p-value curve"),
        ("analyze", cmd_analyze, "robustify, update and summarise"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--endpoint", type=Endpoint)
        sp.add_argument("--map", required=True)
        sp.add_argument("--vague", required=True)
        sp.add_argument("--current", required=True, help="e.g. events=32,exposure=117.6")
        sp.add_argument("--gamma", type=float, required=(name == "ebweight"))
        sp.add_argument("--grid-step", type=float, default=0.01)
        if name == "analyze":
            sp.add_argument("--w-v", type=float)
            sp.add_argument("--rule", help="less|greater,theta_star,prob_cutoff")
            sp.add_argument("--ci-level", type=float, default=0.95)

    sp = add("analyze-pwe", cmd_analyze_pwe, "per-interval analysis of piecewise-exponential data")
    sp.add_argument("--pwe", help="PWE CSV (default: embedded appendix data)")
    sp.add_argument("--current-study", help="default: last study in the table")
    sp.add_argument("--exclude", nargs="*", default=[])
    sp.add_argument("--maps", help="JSON list of per-interval MAP mixtures (else derived by MCMC)")
    sp.add_argument("--gamma", required=True, help="one threshold or one per interval")
    sp.add_argument("--vague", help="default: gamma with one event centred on each MAP median")
    sp.add_argument("--grid-step", type=float, default=0.01)
    sp.add_argument("--rule")
    sp.add_argument("--ci-level", type=float, default=0.95)
    sp.add_argument("--k-max", type=int, default=5)
    _mcmc_flags(sp)

    sp = add("calibrate", cmd_calibrate, "EB weights over gammas and observed outcomes")
    sp.add_argument("--map", required=True)
    sp.add_argument("--vague", required=True)
    sp.add_argument("--design", required=True, help="n=50 | n=50,sd=40 | exposure=117.6")
    sp.add_argument("--gammas", required=True, help="list or lo:hi:step")
    sp.add_argument("--observed", help="list or lo:hi:step (default 0..n for binomial)")
    sp.add_argument("--grid-step", type=float, default=0.01)
    sp.set_defaults(format="csv")

    sp = add("simulate", cmd_simulate, "operating characteristics of a scenario")
    sp.add_argument("--scenario", required=True, help="TOML or JSON scenario")
    sp.add_argument("--replications", type=int)
    sp.set_defaults(format="csv")

    sp = add("appendix-data", cmd_appendix_data, "write the embedded oncology PWE table")
    sp.set_defaults(format="csv")

    sp = add("ess", cmd_ess, "moment-based effective sample size of a mixture")
    sp.add_argument("--map", required=True)
    sp.add_argument("--sigma-ref", type=float)
    return p


def run_config(args) -> dict:
    """Semantically meaningful arguments, input files replaced by content digests."""
    cfg = {}
    for k, v in vars(args).items():
        if k in NON_SEMANTIC or v is None:
            continue
        if k in FILE_ARGS:
            v = {"sha256": file_digest(v)}
        cfg[k] = v
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = now()
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        text, failure = args.func(args)
    except (ValueError, DomainError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, NumericFailure, SimulationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    if text is not None:
        if args.out:
            Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
        else:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if args.out:
        cfg = run_config(args)
        RunManifest(args.command, config_digest(cfg), args.seed, __version__, started, now(), cfg).write(
            str(args.out) + ".manifest.json"
        )
    if failure is not None:
        print(f"numeric failure: {failure}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
