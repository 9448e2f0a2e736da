"""Command-line front end.

Subcommands ``bounds``, ``figure1``, ``dimension``, ``simulate`` and
``eigen``. Exit codes: 0 success, 2 validation error, 3 exponent or
dimension undetectable at the requested scale (partial results are still
written), 4 I/O error.
"""
from __future__ import annotations

import argparse
import math
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, bounds, config, io
from .channel import SystemConfig, eigen_tail_probability
from .dimension import DimensionEstimate, dyadic_sigmas, census_rows, fit_dimension, synthetic_cloud
from .errors import ConfigurationError, DivfidError, DomainError, EstimationError
from .lab import fidelity_sweep
from .mapping import DecoderSpec, MappingDescriptor, sample_cloud

log = logging.getLogger("divfid")

EXIT_OK, EXIT_VALIDATION, EXIT_UNDETECTABLE, EXIT_IO = 0, 2, 3, 4

RECORD_COLUMNS = ["snr", "f", "p_hat", "ci_low", "ci_high", "n_channels"]
CURVE_COLUMNS = ["label", "f", "d", "interpolated_flag"]
CENSUS_COLUMNS = ["sigma_box", "n_boxes", "n_effective", "c"]
TAIL_COLUMNS = ["snr", "p_hat", "ci_low", "ci_high", "count", "n_draws"]


class Undetectable(Exception):
    """Raised after partial outputs are written."""


def manifest(rc: config.RunConfig, outputs) -> dict:
    return {
        "tool": "divfid",
        "version": __version__,
        "subcommand": rc.subcommand,
        "seed": rc["seed"],
        "config": rc.canonical(),
        "outputs": sorted(outputs),
    }


# -- runners: each returns {file name: writer thunk} --------------------------


def _bounds_cfg(rc):
    cfg = SystemConfig(rc["nt"], rc["nr"], rc["m"], rc["n"])
    cfg.require_bound_shape()
    betas = rc["beta_list"]
    primes = rc["beta_prime_list"] or betas
    if len(primes) != len(betas):
        raise ConfigurationError("beta_prime_list must match beta_list in length")
    hyps = [bounds.DimensionHypothesis(b, bp) for b, bp in zip(betas, primes)]
    for h in hyps:
        h.check(cfg)
    if rc["f_step"] <= 0:
        raise ConfigurationError("f_step must be positive")
    return cfg, hyps


def plan_bounds(rc, stem):
    cfg, hyps = _bounds_cfg(rc)

    def build():
        step = rc["f_step"]
        if (rc.subcommand == "figure1" or rc["preset"] == "figure1") and not rc["beta_prime_list"]:
            curves = bounds.figure1_curves(cfg, rc["beta_list"], step)
        else:
            curves = [bounds.optimal_curve(cfg, step)] + [bounds.thm1_curve(cfg, h, step) for h in hyps]
        rows = [
            (c.label, f, d, flag)
            for c in curves
            for (f, d), flag in zip(c.points, c.interpolated)
        ]
        gaps = []
        for h in hyps:
            grid = bounds.interior_grid(cfg, h, step)
            if grid:
                g = bounds.corollary_gap(cfg, h, grid)
                gaps.append({"beta": h.beta, "beta_prime": h.beta_prime, "min_gap": g.gap, "argmin_f": g.f})
        doc = {
            "system": {"nt": cfg.nt, "nr": cfg.nr, "m": cfg.m, "n": cfg.n, "eta": float(cfg.eta)},
            "curves": [c.to_dict() for c in curves],
            "corollary": gaps,
        }
        return {f"{stem}.csv": ("csv", CURVE_COLUMNS, rows), f"{stem}.json": ("json", doc)}

    return [f"{stem}.csv", f"{stem}.json"], build


def _mapping(rc) -> MappingDescriptor:
    kind = rc["kind"]
    params = {}
    if kind == "spiral":
        params["stretch"] = rc["stretch"]
    elif kind == "hybrid_digital_analog":
        params["bits"] = rc["bits"]
    return MappingDescriptor(kind, rc["m"], rc["n"], rc["nt"], params)


def plan_dimension(rc, threads):
    sigmas = dyadic_sigmas(rc["sigma_min_exp"], rc["sigma_max_exp"])
    if len(sigmas) < 3 or sigmas[0] >= 1:
        raise ConfigurationError("need at least 3 box sizes below 1 (0 < sigma_min_exp < sigma_max_exp - 1)")
    if any(not 0 < c <= 1 for c in rc["c_list"]) or not rc["c_list"]:
        raise ConfigurationError("c_list values must lie in (0, 1]")
    if rc["n_samples"] < 1000:
        raise ConfigurationError("n_samples must be at least 1000")
    mp = _mapping(rc) if rc["source_set"] == "mapping" else None

    def build():
        if mp is not None:
            cloud, n = sample_cloud(mp, rc["n_samples"], rc["seed"]), mp.n
        else:
            cloud, n = synthetic_cloud(rc["source_set"], rc["n_samples"], rc["seed"], rc["dim"]), 1
        rows = census_rows(cloud, sigmas, rc["c_list"], threads)
        estimates, failures = [], []
        for c in rc["c_list"]:
            pairs = [(r[0], r[2]) for r in rows if r[3] == c]
            try:
                est = fit_dimension(pairs, n_samples=len(cloud))
            except EstimationError as exc:
                failures.append(f"c={c}: {exc}")
                continue
            used_max = max(int(round(math.exp(y))) for _, y in est.points_used)
            estimates.append({
                "c": c,
                "slope": est.slope,
                "intercept": est.intercept,
                "stderr": est.stderr,
                "beta_hat": est.slope / (2 * n),
                "points_used": [list(p) for p in est.points_used],
                "excluded": [list(p) for p in est.excluded],
                "undersampled": len(cloud) < 100 * used_max,
            })
        doc = {"estimates": estimates, "failures": failures, "n_samples": len(cloud), "ambient_dim": cloud.dim}
        out = {"census.csv": ("csv", CENSUS_COLUMNS, rows), "dimension.json": ("json", doc)}
        if failures:
            out["__undetectable__"] = "; ".join(failures)
        return out

    return ["census.csv", "dimension.json"], build


def plan_simulate(rc, threads):
    mp = _mapping(rc)
    dec = DecoderSpec(rc["decoder"], rc["grid_step"])
    if dec.kind == "linear_mmse" and mp.kind != "linear":
        raise ConfigurationError("linear_mmse decoding requires a linear mapping")
    cfg = SystemConfig(rc["nt"], rc["nr"], rc["m"], rc["n"], rc["snr_grid"], rc["seed"])
    if not rc["f_grid"] or any(f < 0 for f in rc["f_grid"]):
        raise ConfigurationError("f_grid must be a non-empty list of non-negative values")
    if any(b <= a for a, b in zip(rc["f_grid"], rc["f_grid"][1:])):
        raise ConfigurationError("f_grid must be strictly ascending")
    if rc["n_channels"] < 1000:
        raise ConfigurationError("n_channels must be at least 1000")
    if rc["n_src"] * rc["n_noise"] < 100 or rc["n_src"] < 1 or rc["n_noise"] < 1:
        raise ConfigurationError("need n_src * n_noise >= 100")
    if not rc["threshold_scale"] > 0:
        raise ConfigurationError("threshold_scale must be positive")

    def build():
        sweep = fidelity_sweep(
            mp, dec, cfg, rc["f_grid"], n_channels=rc["n_channels"], n_src=rc["n_src"],
            n_noise=rc["n_noise"], threshold_scale=rc["threshold_scale"], threads=threads,
        )
        recs = sweep.records()
        rows = [(r.snr, r.f, r.p_hat, r.ci_low, r.ci_high, r.n_channels) for r in recs]
        exps, failures = [], []
        for e in sweep.entries:
            item = {
                "f": e.f,
                "slope": e.slope,
                "stderr": e.stderr,
                "status": "ok" if e.estimate is not None else "undetectable",
                "events": [r.events for r in e.records],
                "straddle_fraction": [r.straddle_fraction for r in e.records],
            }
            if e.estimate is not None:
                item["intercept"] = e.estimate.intercept
                item["excluded_snr"] = list(e.estimate.excluded)
                item["beyond_desk_scale"] = e.beyond_desk_scale
            else:
                failures.append(f"f={e.f}: {e.error}")
            exps.append(item)
        doc = {"exponents": exps, "frontier_f": sweep.frontier, "mapping": mp.to_dict(), "decoder": dec.kind}
        out = {"records.csv": ("csv", RECORD_COLUMNS, rows), "exponents.json": ("json", doc)}
        if failures:
            out["__undetectable__"] = "; ".join(failures)
        return out

    return ["records.csv", "exponents.json"], build


def plan_eigen(rc, threads):
    nt, nr, beta = rc["nt"], rc["nr"], rc["beta"]
    k = nt - beta + 1
    if k.denominator != 1 or not 1 <= k <= min(nt, nr):
        raise DomainError(f"nt - beta + 1 = {k} must be an integer in [1, {min(nt, nr)}]")
    cfg = SystemConfig(nt, nr, snr_grid=rc["snr_grid"], master_seed=rc["seed"])
    if not cfg.snr_grid:
        raise ConfigurationError("snr_grid must not be empty")
    if rc["n_draws"] < 1000:
        raise ConfigurationError("n_draws must be at least 1000")
    if rc["sigma_ref"] is not None and not 0 < rc["sigma_ref"] < 1:
        raise DomainError("sigma_ref must lie in (0, 1)")
    if rc["sigma_ref"] is None and nt / cfg.snr_grid[0] >= 1:
        raise DomainError(f"default sigma_ref = nt/snr needs snr > nt = {nt}")

    def build():
        tail = eigen_tail_probability(cfg, int(k), n_draws=rc["n_draws"], sigma_ref=rc["sigma_ref"], threads=threads)
        rows = [(p.snr, p.p_hat, p.ci_low, p.ci_high, p.count, p.n_draws) for p in tail.points]
        expected = bounds.eigen_outage_exponent(cfg, beta) if nr >= nt else None
        doc = {"k": int(k), "beta": beta, "expected_exponent": expected,
               "degenerate_draws": tail.degenerate_draws}
        failure = None
        if expected is not None and expected > 2:
            doc["note"] = "exponents above 2 are not reproducible at desk scale (rare events)"
        try:
            est = tail.fit()
            doc.update(slope=est.slope, stderr=est.stderr, intercept=est.intercept,
                       excluded_snr=list(est.excluded))
        except EstimationError as exc:
            failure = str(exc) if not tail.undetectable else "undetectable at this scale: no events at any SNR"
            doc["status"] = failure
        out = {"eigen_tail.csv": ("csv", TAIL_COLUMNS, rows), "eigen.json": ("json", doc)}
        if failure:
            out["__undetectable__"] = failure
        return out

    return ["eigen_tail.csv", "eigen.json"], build


# -- argument handling ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="key = value file or a JSON run manifest")
    shared.add_argument("--seed", metavar="U64", help="master seed")
    shared.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    shared.add_argument("--threads", metavar="N", type=int, default=1, help="worker threads")
    shared.add_argument("--dry-run", action="store_true", help="print the validated plan and write nothing")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="divfid", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"divfid {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "bounds": "closed-form optimal tradeoff and single-mapping bounds",
        "figure1": "the 4x4, expansion 3/2 bound family",
        "dimension": "box-counting census and effective dimension",
        "simulate": "Monte-Carlo fidelity events and diversity exponents",
        "eigen": "eigenvalue-exponent tail probabilities",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[shared], help=text, description=text)
        for key in config.schema(name).values():
            if key.name == "seed":
                continue
            opts = [f"--{key.name}"]
            if "_" in key.name:
                opts.append(f"--{key.name.replace('_', '-')}")
            p.add_argument(*opts, dest=f"key_{key.name}", metavar="VALUE",
                           help=f"{key.help} (default: {key.default or 'empty'})")
    return parser


def _resolve(args) -> config.RunConfig:
    sub = args.subcommand
    file_values = {}
    if args.config:
        try:
            msub, file_values = config.load(args.config)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if msub is not None and msub != sub:
            raise ConfigurationError(f"manifest is for '{msub}', not '{sub}'")
    flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("key_")}
    flags["seed"] = args.seed
    return config.resolve(sub, file_values, flags)


def _plan(rc, args):
    threads = max(1, args.threads)
    if rc.subcommand == "bounds":
        return plan_bounds(rc, "curves")
    if rc.subcommand == "figure1":
        return plan_bounds(rc, "figure1")
    if rc.subcommand == "dimension":
        return plan_dimension(rc, threads)
    if rc.subcommand == "simulate":
        return plan_simulate(rc, threads)
    return plan_eigen(rc, threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        rc = _resolve(args)
        if rc.subcommand == "simulate" and rc["preset"] == "eigen_tail":
            # the eigenvalue tail preset lives with the eigen subcommand
            rc = config.resolve("eigen", {}, {"preset": "eigen_tail", "seed": str(rc["seed"])})
        files, build = _plan(rc, args)
        files = files + ["manifest.json"]
        out = Path(args.out)
        if args.dry_run:
            plan = {"subcommand": rc.subcommand, "config": rc.canonical(), "threads": args.threads,
                    "out": str(out), "would_write": files}
            sys.stdout.write(io.dumps(plan))
            return EXIT_OK
        log.info("running %s", rc.subcommand)
        products = build()
    except (ConfigurationError, DomainError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EstimationError as exc:
        print(f"error: undetectable: {exc}", file=sys.stderr)
        return EXIT_UNDETECTABLE
    except DivfidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    undetectable = products.pop("__undetectable__", None)
    try:
        for name, spec in products.items():
            if spec[0] == "csv":
                io.write_csv(out / name, spec[1], spec[2])
            else:
                io.write_json(out / name, spec[1])
        io.write_json(out / "manifest.json", manifest(rc, products))
    except OSError as exc:
        print(f"error: i/o: {exc}", file=sys.stderr)
        return EXIT_IO
    for name in sorted(list(products) + ["manifest.json"]):
        print(out / name)
    if undetectable:
        print(f"error: undetectable: {undetectable}", file=sys.stderr)
        return EXIT_UNDETECTABLE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
