"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys

from .bayes import PriorMode, fit_prior, load_prior, posterior_pooled, save_prior
from .core import Method, lognormal_mean_var, tau_bar
from .cv import (count_quantiles, count_skipped, loso_eval, summarize,
                 validation_count_histogram, write_records)
from .data import parse_registry, write_registry, write_truth
from .errors import AucMetaError, InvalidArgument, NumericFailure
from .forest import forest_rows, render_svg
from .freq import pool
from .intervals import pi_observed_next, pi_true_next, z_quantile
from .sim import generate_registry, load_config

log = logging.getLogger("aucmeta")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

METHODS = {
    "fe": Method.FE, "reml": Method.RE_REML, "dl": Method.RE_DL, "sj": Method.RE_SJ,
    "fixed-tau": Method.RE_FIXED_TAU, "bayes-flat": Method.BAYES_FLAT, "bayes-full": Method.BAYES_FULL,
}
CV_DEFAULT_METHODS = "fe,reml,fixed-tau,bayes-flat,bayes-full"


class UsageError(Exception):
    pass


def g6(x):
    return "NA" if x is None else f"{x:.6g}"


def _columns(text):
    if not text:
        return None
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--columns entries must look like canonical=actual, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _load(args):
    registry, report = parse_registry(args.input, _columns(args.columns))
    log.info("ingested %d validations of %d CPMs (%d rows dropped)",
             report.rows_kept, report.cpms_kept, report.rows_dropped)
    return registry, report


def _find(registry, label):
    for s in registry:
        if s.cpm_label == label:
            return s
    raise UsageError(f"no CPM {label!r} in input")


def _parse_ns(text):
    if ".." in text:
        a, b = text.split("..", 1)
        ns = list(range(int(a), int(b) + 1))
    else:
        ns = [int(t) for t in text.split(",")]
    if not ns or min(ns) < 1:
        raise UsageError(f"bad --n {text!r}")
    return ns


def _parse_methods(text):
    out = []
    for name in text.split(","):
        name = name.strip()
        expanded = ["bayes-flat", "bayes-full"] if name == "bayes" else [name]
        for e in expanded:
            if e not in METHODS:
                raise UsageError(f"unknown method {name!r}")
            if METHODS[e] not in out:
                out.append(METHODS[e])
    return out


def _priors(paths):
    priors = {}
    for path in paths or []:
        hp, mode = load_prior(path)
        priors[mode] = hp
    return priors


def _write_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _print_prior(mode, hp, loglik=None):
    mean, var = lognormal_mean_var(hp.mu_tau, hp.sigma_tau)
    print(f"{'mode':<6} {'mu_tau':>10} {'sigma_tau':>10} {'mu_auc':>10} {'sigma_auc':>10} "
          f"{'E(tau)':>10} {'SD(tau)':>10}")
    print(f"{mode.value:<6} {g6(hp.mu_tau):>10} {g6(hp.sigma_tau):>10} {g6(hp.mu_auc):>10} "
          f"{g6(hp.sigma_auc):>10} {g6(mean):>10} {g6(var ** 0.5):>10}")
    if loglik is not None:
        print(f"loglik {g6(loglik)}")


def cmd_fit_prior(args):
    registry, _ = _load(args)
    fit = fit_prior(registry, PriorMode(args.mode))
    _print_prior(fit.mode, fit.hp, fit.loglik)
    if args.out:
        save_prior(fit, args.out)


def _meta_fit(series, method, args, priors):
    if method is Method.BAYES_FLAT or method is Method.BAYES_FULL:
        return posterior_pooled(series, priors[_mode_for(method)])
    tau = args.tau
    if method is Method.RE_FIXED_TAU and tau is None:
        tau = tau_bar(priors[PriorMode.FLAT_AUC] if PriorMode.FLAT_AUC in priors else next(iter(priors.values())))
    return pool(series, method, tau)


def _mode_for(method):
    return PriorMode.FULL if method is Method.BAYES_FULL else PriorMode.FLAT_AUC


def _single_method(args):
    name = args.method
    priors = _priors([args.prior] if args.prior else [])
    if name == "bayes":
        if not priors:
            raise UsageError("--method bayes requires --prior")
        mode = next(iter(priors))
        method = Method.BAYES_FULL if mode is PriorMode.FULL else Method.BAYES_FLAT
        priors = {_mode_for(method): priors[mode]}
    elif name in METHODS and not name.startswith("bayes"):
        method = METHODS[name]
    else:
        raise UsageError(f"unknown method {name!r}")
    if args.tau is not None and method is not Method.RE_FIXED_TAU:
        raise UsageError("--tau is only valid with --method fixed-tau")
    if method is Method.RE_FIXED_TAU and args.tau is None and not priors:
        raise UsageError("--method fixed-tau needs --tau or --prior")
    if args.literal and not method.is_bayes:
        raise UsageError("--literal only applies to --method bayes")
    return method, priors


def _fit_json(fit):
    if hasattr(fit, "auc_post"):
        return {"auc_post": fit.auc_post, "sd_post": fit.sd_post, "tau_post_mean": fit.tau_post_mean,
                "tau2_post_mean": fit.tau2_post_mean, "predictive_sd": fit.predictive_sd, "k": fit.k}
    return {"pooled": fit.pooled, "pooled_se": fit.pooled_se, "tau": fit.tau,
            "method": fit.method.value, "k": fit.k, "flags": list(fit.flags)}


def _pi_json(pi):
    return {"center": pi.center, "lower": pi.lower, "upper": pi.upper, "level": pi.level,
            "target": pi.target.value, "outside_unit_interval": pi.outside_unit}


def cmd_meta(args):
    method, priors = _single_method(args)
    registry, _ = _load(args)
    series = _find(registry, args.cpm)
    fit = _meta_fit(series, method, args, priors)
    s_next = args.s_next if args.s_next is not None else statistics.median(series.se.tolist())
    pi_true = pi_true_next(fit, args.level, args.literal)
    pi_obs = pi_observed_next(fit, s_next, args.level, args.literal)
    rows = forest_rows(series, fit, args.level, args.literal)

    center = fit.auc_post if hasattr(fit, "auc_post") else fit.pooled
    se = fit.sd_post if hasattr(fit, "auc_post") else fit.pooled_se
    z = z_quantile(args.level)
    print(f"CPM {series.cpm_label}  method {method.value}  k={len(series)}")
    print(f"pooled {g6(center)}  se {g6(se)}  CI [{g6(center - z * se)}, {g6(center + z * se)}]")
    if not method.is_bayes:
        print(f"tau {g6(fit.tau)}" + (f"  flags {','.join(fit.flags)}" if fit.flags else ""))
    else:
        print(f"E(tau|y) {g6(fit.tau_post_mean)}  predictive sd {g6(fit.predictive_sd)}")
    for name, pi in (("PI true AUC", pi_true), (f"PI observed AUC (s_next={g6(s_next)})", pi_obs)):
        note = "  [outside (0,1)]" if pi.outside_unit else ""
        print(f"{name}: [{g6(pi.lower)}, {g6(pi.upper)}]{note}")

    if args.out:
        _write_json({"cpm": series.cpm_label, "method": method.value, "fit": _fit_json(fit),
                     "s_next": s_next, "pi_true": _pi_json(pi_true), "pi_observed": _pi_json(pi_obs),
                     "forest": rows}, args.out)
    if args.forest_csv:
        with open(args.forest_csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: "" if v is None else v for k, v in r.items()})
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(render_svg(rows, f"{series.cpm_label} ({method.value})"))


def cmd_cumulative(args):
    method, priors = _single_method(args)
    registry, _ = _load(args)
    series = _find(registry, args.cpm)
    z = z_quantile(args.level)
    header = ["m", "pooled", "se", "tau", "ci_lower", "ci_upper", "pi_lower", "pi_upper", "flags"]
    table = []
    for m in range(1, len(series) + 1):
        fit = _meta_fit(series.head(m), method, args, priors)
        pi = pi_true_next(fit, args.level, args.literal)
        if method.is_bayes:
            c, se, tau, flags = fit.auc_post, fit.sd_post, fit.tau_post_mean, ""
        else:
            c, se, tau, flags = fit.pooled, fit.pooled_se, fit.tau, ";".join(fit.flags)
        table.append([m, c, se, tau, c - z * se, c + z * se, pi.lower, pi.upper, flags])
    print(" ".join(f"{h:>10}" for h in header))
    for row in table:
        print(" ".join(f"{(g6(v) if isinstance(v, float) else v):>10}" for v in row))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in table])


def cmd_cv(args):
    ns = _parse_ns(args.n)
    methods = _parse_methods(args.methods)
    if args.tau is not None and Method.RE_FIXED_TAU not in methods:
        raise UsageError("--tau requires fixed-tau among --methods")
    registry, report = _load(args)
    priors = _priors(args.prior)
    needed = set()
    for m in methods:
        if m.is_bayes:
            needed.add(_mode_for(m))
        elif m is Method.RE_FIXED_TAU and args.tau is None:
            needed.add(PriorMode.FLAT_AUC)
    fitted = {}
    for mode in sorted(needed - set(priors), key=lambda m: m.value):
        log.info("no %s prior supplied; fitting on input", mode.value)
        fitted[mode] = fit_prior(registry, mode).hp
    priors = {**fitted, **priors}

    cells, all_records = {}, []
    for n in ns:
        for m in methods:
            hp = priors.get(_mode_for(m)) if (m.is_bayes or m is Method.RE_FIXED_TAU) else None
            recs = loso_eval(registry, n, m, hp, tau=args.tau, level=args.level, literal=args.literal,
                             strict=args.strict_loo, at_least=args.at_least and n == max(ns))
            cells[(n, m)] = recs
            all_records.extend(recs)
    rows = summarize(cells)

    print(f"{'n':>3} {'method':<14} {'records':>8} {'coverage':>10} {'se':>10} {'rmse':>10}")
    for r in rows:
        print(f"{r['n']:>3} {r['method']:<14} {r['records']:>8} {g6(r['coverage']):>10} "
              f"{g6(r['coverage_se']):>10} {g6(r['rmse']):>10}")
    hist = validation_count_histogram(registry)
    print("validations per CPM: " + " ".join(f"{k}:{v}" for k, v in hist.items()))

    doc = {
        "summary": rows,
        "histogram": {str(k): v for k, v in hist.items()},
        "count_quantiles": count_quantiles(registry),
        "skipped": {str(n): count_skipped(registry, n) for n in ns},
        "priors": {mode.value: vars(hp) for mode, hp in sorted(priors.items(), key=lambda kv: kv[0].value)},
        "filter_report": report.to_json(),
        "level": args.level,
        "strict_loo": args.strict_loo,
    }
    if args.out:
        _write_json(doc, args.out)
    if args.records:
        write_records(all_records, args.records)


def cmd_simulate(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = type(config)(config.hp, config.n_cpms, config.k_distribution,
                              config.se_distribution, args.seed)
    registry, truth = generate_registry(config)
    write_registry(registry, args.out)
    if args.truth:
        write_truth(truth, args.truth)
    print(f"wrote {sum(len(s) for s in registry)} validations of {len(registry)} CPMs to {args.out}")


def cmd_report(args):
    registry, report = _load(args)
    priors = _priors(args.prior)
    fits = {}
    for mode in (PriorMode.FLAT_AUC, PriorMode.FULL):
        if mode not in priors:
            fit = fit_prior(registry, mode)
            priors[mode], fits[mode] = fit.hp, fit.loglik
    hist = validation_count_histogram(registry)
    quant = count_quantiles(registry)
    tbar = tau_bar(priors[PriorMode.FLAT_AUC])

    print(f"{report.rows_kept} validations of {report.cpms_kept} CPMs "
          f"(from {report.rows_in} rows / {report.cpms_in} CPMs)")
    print("validations per CPM: " + " ".join(f"{k}:{v}" for k, v in hist.items()))
    print(f"median {g6(quant['median'])}  IQR [{g6(quant['q1'])}, {g6(quant['q3'])}]")
    for mode in (PriorMode.FLAT_AUC, PriorMode.FULL):
        _print_prior(mode, priors[mode], fits.get(mode))
    print(f"tau_bar {g6(tbar)}")

    ns = _parse_ns(args.n)
    cells = {}
    for n in ns:
        for m in (Method.FE, Method.RE_REML, Method.RE_FIXED_TAU, Method.BAYES_FLAT, Method.BAYES_FULL):
            hp = priors[_mode_for(m)] if (m.is_bayes or m is Method.RE_FIXED_TAU) else None
            cells[(n, m)] = loso_eval(registry, n, m, hp)
    rows = summarize(cells)
    print(f"{'n':>3} {'method':<14} {'records':>8} {'coverage':>10} {'rmse':>10}")
    for r in rows:
        print(f"{r['n']:>3} {r['method']:<14} {r['records']:>8} {g6(r['coverage']):>10} {g6(r['rmse']):>10}")
    if args.out:
        _write_json({"filter_report": report.to_json(), "histogram": {str(k): v for k, v in hist.items()},
                     "count_quantiles": quant, "tau_bar": tbar,
                     "priors": {m.value: vars(hp) for m, hp in sorted(priors.items(), key=lambda kv: kv[0].value)},
                     "cv": rows}, args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="aucmeta", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--input", required=True, help="registry CSV")
        sp.add_argument("--columns", help="column mapping, e.g. cpm_id=Model,auc=cstat")

    sp = sub.add_parser("fit-prior", help="fit the empirical-Bayes hyperparameters")
    data_args(sp)
    sp.add_argument("--mode", choices=["flat", "full"], required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit_prior)

    for name, func, helptext in (("meta", cmd_meta, "pool one CPM and report prediction intervals"),
                                 ("cumulative", cmd_cumulative, "cumulative meta-analysis of one CPM")):
        sp = sub.add_parser(name, help=helptext)
        data_args(sp)
        sp.add_argument("--cpm", required=True)
        sp.add_argument("--method", required=True, choices=["fe", "reml", "dl", "sj", "fixed-tau", "bayes"])
        sp.add_argument("--tau", type=float)
        sp.add_argument("--prior")
        sp.add_argument("--level", type=float, default=0.95)
        sp.add_argument("--literal", action="store_true",
                        help="Bayes: use the posterior SD of the pooled AUC alone as interval spread")
        sp.add_argument("--out")
        if name == "meta":
            sp.add_argument("--s-next", type=float, help="standard error of the next study (default: median se)")
            sp.add_argument("--forest-csv")
            sp.add_argument("--svg")
        sp.set_defaults(func=func)

    sp = sub.add_parser("cv", help="leave-one-study-out cross-validation")
    data_args(sp)
    sp.add_argument("--n", default="1..5", help="e.g. 1..5 or 1,3")
    sp.add_argument("--methods", default=CV_DEFAULT_METHODS)
    sp.add_argument("--prior", action="append", help="prior JSON; repeat for flat and full")
    sp.add_argument("--tau", type=float, help="fixed tau for fixed-tau instead of the prior mean")
    sp.add_argument("--strict-loo", action="store_true", help="refit priors without the evaluated CPM")
    sp.add_argument("--at-least", action="store_true",
                    help="for the largest n, use all but the last study of every eligible CPM")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--literal", action="store_true")
    sp.add_argument("--out")
    sp.add_argument("--records")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("simulate", help="generate a synthetic registry")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--truth")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("report", help="one-shot summary of a registry")
    data_args(sp)
    sp.add_argument("--prior", action="append")
    sp.add_argument("--n", default="1..5")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "level", 0.95) is not None and not 0 < getattr(args, "level", 0.95) < 1:
        parser.error("--level must lie in (0, 1)")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AucMetaError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
