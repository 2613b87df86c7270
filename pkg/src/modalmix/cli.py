"""mixctl: command-line interface for mixture fitting and model selection.

Subcommands
-----------
simulate   draw a synthetic mixture dataset and write it as CSV
fit        fit one model (fixed number of components), write report + densities
select     fit a range of component counts and compare their evidence
diagnose   sampler-coverage diagnostic for one model
oracle     exact-enumeration cross-check on a small dataset

Input CSVs carry one numeric column named ``y``.  Reports are written as
``report.json`` plus one ``marginal_K{k}_comp{j}_{param}.csv`` per averaged
marginal (columns ``support,density``, 512 evenly spaced points).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .core import FamilySpec, GridDensity, PriorSpec, QuadratureError
from .datasets import (
    list_builtins,
    load_builtin,
    read_csv,
    simulate_mixture,
    write_csv,
)
from .posterior import (
    bma_marginal,
    empirical_allocation_posterior,
    renormalized_allocation_posterior,
)
from .samplers import SamplerConfig, enumerate_exact, run_modal_gibbs
from .selection import ModelComparisonReport, log_evidence_I, select_k
from .validation import check_k_range, check_observations

__all__ = ["main", "build_parser"]

DENSITY_POINTS = 512


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_data_arguments(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="CSV file with a single numeric column 'y'")
    src.add_argument("--builtin", choices=list_builtins(), help="bundled dataset name")


def _add_model_arguments(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=["gaussian", "poisson"], default=None,
                   help="component family (inferred for builtin datasets)")
    p.add_argument("--shared-precision", action="store_true",
                   help="tie all gaussian components to one precision")
    p.add_argument("--poisson-prior", choices=["gamma", "lognormal"], default="lognormal",
                   help="prior on the poisson mean")
    p.add_argument("--alpha", type=float, default=2.0,
                   help="Dirichlet concentration, applied to every component")
    p.add_argument("--mean-loc", type=float, default=0.0, help="gaussian mean prior location")
    p.add_argument("--mean-prec", type=float, default=0.001, help="gaussian mean prior precision")
    p.add_argument("--prec-shape", type=float, default=0.5, help="gaussian precision prior shape")
    p.add_argument("--prec-rate", type=float, default=0.5, help="gaussian precision prior rate")
    p.add_argument("--gamma-shape", type=float, default=1.0, help="poisson gamma prior shape")
    p.add_argument("--gamma-rate", type=float, default=0.1, help="poisson gamma prior rate")
    p.add_argument("--logmean-loc", type=float, default=0.0, help="poisson log-mean prior location")
    p.add_argument("--logmean-prec", type=float, default=0.001, help="poisson log-mean prior precision")


def _add_sampler_arguments(p: argparse.ArgumentParser):
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["quantile", "random"], default="quantile")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixctl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a synthetic mixture dataset as CSV")
    p_sim.add_argument("--family", choices=["gaussian", "poisson"], required=True)
    p_sim.add_argument("--means", required=True, help="comma-separated component means")
    p_sim.add_argument("--precisions", default=None,
                       help="comma-separated gaussian precisions (default all 1)")
    p_sim.add_argument("--sizes", required=True, help="comma-separated component sizes")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", type=Path, required=True, help="output CSV path")

    p_fit = sub.add_parser("fit", help="fit one model and write report + densities")
    _add_data_arguments(p_fit)
    _add_model_arguments(p_fit)
    _add_sampler_arguments(p_fit)
    p_fit.add_argument("--k", type=int, required=True, help="number of components")
    p_fit.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p_sel = sub.add_parser("select", help="compare component counts by evidence")
    _add_data_arguments(p_sel)
    _add_model_arguments(p_sel)
    _add_sampler_arguments(p_sel)
    p_sel.add_argument("--k-min", type=int, default=1)
    p_sel.add_argument("--k-max", type=int, default=5)
    p_sel.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p_diag = sub.add_parser("diagnose", help="coverage diagnostic for one model")
    _add_data_arguments(p_diag)
    _add_model_arguments(p_diag)
    _add_sampler_arguments(p_diag)
    p_diag.add_argument("--k", type=int, required=True)
    p_diag.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p_oracle = sub.add_parser("oracle", help="exact-enumeration cross-check (small n)")
    _add_data_arguments(p_oracle)
    _add_model_arguments(p_oracle)
    _add_sampler_arguments(p_oracle)
    p_oracle.add_argument("--k", type=int, required=True)
    p_oracle.add_argument("--n-limit", type=int, default=12)
    p_oracle.add_argument("--out", type=Path, default=Path("."), help="output directory")

    return parser


# ---------------------------------------------------------------------------
# shared assembly
# ---------------------------------------------------------------------------


def _load_data(args) -> tuple[np.ndarray, str, str]:
    if args.builtin is not None:
        values = load_builtin(args.builtin)
        family = args.family or ("poisson" if args.builtin == "earthquakes" else "gaussian")
        label = args.builtin
    else:
        values = read_csv(args.data)
        if args.family is None:
            raise ValueError("--family is required with --data")
        family = args.family
        label = str(args.data)
    return check_observations(values, family), family, label


def _specs(args, family: str) -> tuple[FamilySpec, PriorSpec, SamplerConfig]:
    fam = FamilySpec(
        family=family,
        shared_precision=bool(args.shared_precision) if family == "gaussian" else False,
        poisson_prior_kind=args.poisson_prior,
    )
    priors = PriorSpec(
        alpha=args.alpha,
        gaussian_mean_prior=(args.mean_loc, args.mean_prec),
        gaussian_precision_prior=(args.prec_shape, args.prec_rate),
        poisson_gamma_prior=(args.gamma_shape, args.gamma_rate),
        poisson_lognormal_prior=(args.logmean_loc, args.logmean_prec),
    )
    config = SamplerConfig(burn_in=args.burn_in, iterations=args.iters, thin=args.thin,
                           seed=args.seed, init_strategy=args.init)
    return fam, priors, config


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _component_record(summary) -> dict:
    return {
        "component": summary.index,
        "weight_mean": _finite(summary.weight_mean),
        "weight_sd": _finite(summary.weight_sd),
        "location_mean": _finite(summary.location_mean),
        "location_sd": _finite(summary.location_sd),
        "location_mode": _finite(summary.location_mode),
        "precision_mean": _finite(summary.precision_mean),
        "precision_sd": _finite(summary.precision_sd),
        "precision_mode": _finite(summary.precision_mode),
    }


def _row_record(row, seed: int) -> dict:
    return {
        "model": row.n_components,
        "log_evidence_I": _finite(row.log_evidence_I),
        "log_evidence_chib_G": _finite(row.log_evidence_chib_G),
        "log_evidence_chib_M": _finite(row.log_evidence_chib_M),
        "prob_I": _finite(row.prob_I),
        "prob_G": _finite(row.prob_G),
        "prob_M": _finite(row.prob_M),
        "components": [_component_record(c) for c in row.components],
        "diagnostic_tv": _finite(row.diagnostic.tv_distance),
        "seed": seed,
        "runtime_ms": row.runtime_ms,
    }


def _write_report(out_dir: Path, payload: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _resample_density(density: GridDensity, points: int = DENSITY_POINTS):
    support = np.linspace(density.support[0], density.support[-1], points)
    return support, np.exp(density.log_pdf(support))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    means = [float(v) for v in args.means.split(",") if v.strip() != ""]
    sizes = [int(v) for v in args.sizes.split(",") if v.strip() != ""]
    precisions = None
    if args.precisions is not None:
        precisions = [float(v) for v in args.precisions.split(",") if v.strip() != ""]
    values = simulate_mixture(args.family, means, sizes, precisions=precisions, seed=args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, values)
    print(f"wrote {len(values)} observations to {args.out}")
    return 0


def _run_selection(args, k_values) -> tuple[dict, ModelComparisonReport, FamilySpec]:
    data, family_name, label = _load_data(args)
    family, priors, config = _specs(args, family_name)
    start = time.perf_counter()
    report = select_k(data, family, priors, k_values, config)
    total_ms = (time.perf_counter() - start) * 1000.0
    payload = {
        "command": args.command,
        "dataset": label,
        "family": family.family,
        "shared_precision": family.shared_precision,
        "poisson_prior": family.poisson_prior_kind if family.family == "poisson" else None,
        "alpha": args.alpha,
        "seed": args.seed,
        "runtime_ms": total_ms,
        "models": [_row_record(row, args.seed) for row in report.rows],
    }
    return payload, report, family


def _print_model_table(report: ModelComparisonReport):
    print("model  log_ev_I    log_ev_G    log_ev_M    prob_I  prob_G  prob_M  diag_tv")
    for row in report.rows:
        print(f"K={row.n_components:<4d} {row.log_evidence_I:>10.2f}  {row.log_evidence_chib_G:>10.2f}  "
              f"{row.log_evidence_chib_M:>10.2f}  {row.prob_I:>6.3f}  {row.prob_G:>6.3f}  "
              f"{row.prob_M:>6.3f}  {row.diagnostic.tv_distance:>7.3f}"
              + ("  [flagged]" if row.diagnostic.flagged else ""))


def _cmd_fit(args) -> int:
    payload, report, family = _run_selection(args, [args.k])
    out = Path(args.out)
    _write_report(out, payload)
    _write_densities_for_report(out, report, family, args)
    _print_model_table(report)
    return 0


def _cmd_select(args) -> int:
    check_k_range(args.k_min, args.k_max)
    payload, report, family = _run_selection(args, range(args.k_min, args.k_max + 1))
    out = Path(args.out)
    _write_report(out, payload)
    _write_densities_for_report(out, report, family, args)
    _print_model_table(report)
    best = report.best_row("I")
    print(f"selected K={best.n_components} (posterior probability {best.prob_I:.4f})")
    return 0


def _write_densities_for_report(out_dir: Path, report: ModelComparisonReport,
                                family: FamilySpec, args):
    out_dir.mkdir(parents=True, exist_ok=True)
    for row in report.rows:
        alpha = np.full(row.n_components, args.alpha)
        post = renormalized_allocation_posterior(row.trace, alpha)
        params = ["location"] + (["precision"] if family.family == "gaussian" else [])
        for j in range(1, row.n_components + 1):
            for param in params:
                density = bma_marginal(row.trace, post, j, param)
                support, dens = _resample_density(density)
                path = out_dir / f"marginal_K{row.n_components}_comp{j}_{param}.csv"
                with open(path, "w", newline="", encoding="utf-8") as fh:
                    fh.write("support,density\n")
                    for s, d in zip(support, dens):
                        fh.write(f"{s!r},{d!r}\n")


def _cmd_diagnose(args) -> int:
    payload, report, family = _run_selection(args, [args.k])
    row = report.rows[0]
    out = Path(args.out)
    diag = row.diagnostic
    payload["diagnostic"] = {
        "tv_distance": _finite(diag.tv_distance),
        "flagged": diag.flagged,
        "evidence_gap_G_minus_I": _finite(row.log_evidence_chib_G - row.log_evidence_I),
        "entries": len(diag.per_entry),
    }
    _write_report(out, payload)
    entries_path = out / f"diagnostic_K{args.k}.csv"
    with open(entries_path, "w", newline="", encoding="utf-8") as fh:
        fh.write("allocation_key,prob_sampler,prob_renormalized,log_ratio\n")
        for key, (pg, pr, ratio) in diag.per_entry.items():
            fh.write(f"{key.hex()},{pg!r},{pr!r},{ratio!r}\n")
    _print_model_table(report)
    gap = row.log_evidence_chib_G - row.log_evidence_I
    print(f"diagnostic tv={diag.tv_distance:.4f} flagged={diag.flagged} "
          f"evidence gap (G - I) = {gap:.3f}")
    return 0


def _cmd_oracle(args) -> int:
    data, family_name, label = _load_data(args)
    family, priors, config = _specs(args, family_name)
    alpha = priors.alpha_vector(args.k)
    exact = enumerate_exact(data, args.k, family, priors, n_limit=args.n_limit)
    trace = run_modal_gibbs(data, args.k, family, priors, config)
    p_gibbs = empirical_allocation_posterior(trace)
    p_renorm = renormalized_allocation_posterior(trace, alpha)

    keys = set(exact.posterior.entries) | set(p_renorm.entries) | set(p_gibbs.entries)
    tv_renorm = 0.5 * sum(abs(exact.posterior.prob(k) - p_renorm.prob(k)) for k in keys)
    tv_gibbs = 0.5 * sum(abs(exact.posterior.prob(k) - p_gibbs.prob(k)) for k in keys)
    coverage = sum(exact.posterior.prob(k) for k in p_renorm.entries)

    from .selection import log_evidence_I

    payload = {
        "command": "oracle",
        "dataset": label,
        "model": args.k,
        "seed": args.seed,
        "exact_log_evidence": exact.log_evidence,
        "log_evidence_I": log_evidence_I(trace, alpha),
        "tv_renormalized_vs_exact": tv_renorm,
        "tv_sampler_vs_exact": tv_gibbs,
        "visited_mass": coverage,
    }
    _write_report(Path(args.out), payload)
    print(f"exact log evidence  {exact.log_evidence:.6f}")
    print(f"visited-set log evidence {payload['log_evidence_I']:.6f}")
    print(f"visited posterior mass  {coverage:.6f}")
    print(f"max TV vs exact: {max(tv_renorm, tv_gibbs):.6f} "
          f"(renormalized {tv_renorm:.6f}, sampler {tv_gibbs:.6f})")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "diagnose": _cmd_diagnose,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
