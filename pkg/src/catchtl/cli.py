"""Command-line interface.

Subcommands::

    simulate      write synthetic CR/CPUE/truth CSVs for a scenario
    fit-cr        fit the capture-recapture model to a CR CSV
    fit-cpue      fit the naive CPUE model to a CPUE CSV
    fit-transfer  fit the transfer CPUE model (needs --cr-chains)
    sim-study     run a full scenario and write replicate + summary CSVs
    summarize     recompute the summary CSV from a stored chain file
    plot          abundance-trajectory and trend-posterior SVGs

Settings come from flags or a JSON config file (``--config``); flags win.
Unknown config keys are rejected. Exit codes: 0 success, 2 validation
error, 3 fit failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .chains import McmcConfig
from .cpue import CpuePriors, fit_cpue_naive
from .crmodel import CRPriors, fit_cr
from .errors import CatchtlError, FitError, ValidationError
from .io import (
    export_cpue_csv,
    export_cr_csv,
    ingest_cpue_csv,
    ingest_cr_csv,
    read_chains,
    write_chains,
    write_csv_atomic,
    write_summary_csv,
    write_text_atomic,
)
from .rng import RngStream
from .simstudy import (
    derive_cpue,
    generate_cr_data,
    generate_population,
    run_scenario,
    scenario,
)
from .transfer import TransferSpec, default_coefficient_map, fit_cpue_transfer

_CONFIG_KEYS = {
    "seed", "out", "data", "scenario", "replicates", "preset", "cr_chains",
    "coefficient_map", "mcmc", "priors", "replicate_id",
}
_MCMC_KEYS = {"iterations", "burn_in", "thin", "seed"}
_PRIOR_KEYS = {
    "detect_coeff_sd", "year_coeff_sd", "effect_var_shape", "effect_var_rate",
    "year_cov_dof", "rate_cov_dof",
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"config {path} has unknown keys: {sorted(unknown)}")
    for sub, allowed in (("mcmc", _MCMC_KEYS), ("priors", _PRIOR_KEYS)):
        if sub in cfg:
            if not isinstance(cfg[sub], dict):
                raise ValidationError(f"config key {sub!r} must be an object")
            bad = set(cfg[sub]) - allowed
            if bad:
                raise ValidationError(f"config {sub!r} has unknown keys: {sorted(bad)}")
    return cfg


def _setting(args, cfg: dict, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return cfg.get(key, default)


def _require_seed(args, cfg) -> int:
    seed = _setting(args, cfg, "seed")
    if seed is None:
        raise ValidationError("a --seed is required (flag or config)")
    return int(seed)


def _require_out(args, cfg) -> Path:
    out = _setting(args, cfg, "out")
    if out is None:
        raise ValidationError("an --out directory is required (flag or config)")
    return Path(out)


def _mcmc_config(args, cfg: dict) -> McmcConfig:
    preset = _setting(args, cfg, "preset", "paper")
    if preset not in ("paper", "desk"):
        raise ValidationError("preset must be 'paper' or 'desk'")
    base = McmcConfig.desk() if preset == "desk" else McmcConfig.paper()
    overrides = dict(cfg.get("mcmc", {}))
    for key in ("iterations", "burn_in", "thin"):
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    merged = base.to_dict()
    merged.update(overrides)
    try:
        return McmcConfig.from_dict(merged)
    except ValueError as exc:
        raise ValidationError(str(exc))


def _cr_priors(cfg: dict) -> CRPriors:
    p = cfg.get("priors", {})
    return CRPriors(
        detect_coeff_sd=float(p.get("detect_coeff_sd", 10.0)),
        year_coeff_sd=float(p.get("year_coeff_sd", 10.0)),
        effect_var_shape=float(p.get("effect_var_shape", 0.1)),
        effect_var_rate=float(p.get("effect_var_rate", 0.1)),
        year_cov_dof=p.get("year_cov_dof"),
    )


def _cpue_priors(cfg: dict) -> CpuePriors:
    p = cfg.get("priors", {})
    return CpuePriors(
        year_coeff_sd=float(p.get("year_coeff_sd", 10.0)),
        rate_cov_dof=p.get("rate_cov_dof"),
    )


def _parse_coefficient_map(text: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    try:
        for part in text.split(","):
            a, b = part.strip().split(":")
            pairs.append((int(a), int(b)))
    except ValueError:
        raise ValidationError(
            f"cannot parse coefficient map {text!r}; expected 'cr_idx:cpue_col,...'"
        )
    return tuple(pairs)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_simulate(args, cfg) -> int:
    seed = _require_seed(args, cfg)
    out = _require_out(args, cfg)
    sid = _setting(args, cfg, "scenario", "I")
    replicate_id = int(_setting(args, cfg, "replicate_id", 0))
    spec = scenario(sid, base_seed=seed, preset=_setting(args, cfg, "preset", "desk"))
    root = RngStream(seed).split("replicate", replicate_id)
    truth = generate_population(spec, root.split("population"))
    cr = generate_cr_data(truth, spec.beta_cr, spec.sigma2, spec, root.split("cr_data"))
    cpue = derive_cpue(cr)
    out.mkdir(parents=True, exist_ok=True)
    write_text_atomic(out / "cr_data.csv", export_cr_csv(cr))
    write_text_atomic(out / "cpue_data.csv", export_cpue_csv(cpue))
    truth_rows = [
        [str(int(truth.years[t])), str(int(sc)), str(int(truth.abundance[t, j]))]
        for t in range(truth.years.size)
        for j, sc in enumerate(cr.size_classes)
    ]
    write_csv_atomic(out / "truth.csv", ["year", "size_class", "abundance"], truth_rows)
    print(f"wrote cr_data.csv, cpue_data.csv, truth.csv to {out}")
    return 0


def _fit_command(args, cfg, kind: str) -> int:
    seed = _require_seed(args, cfg)
    out = _require_out(args, cfg)
    data_path = _setting(args, cfg, "data")
    if data_path is None:
        raise ValidationError("a --data CSV is required")
    cr_chains_path = _setting(args, cfg, "cr_chains")
    if kind == "transfer" and cr_chains_path is None:
        raise ValidationError("fit-transfer requires --cr-chains")
    mcmc = _mcmc_config(args, cfg)
    rng = RngStream(seed)
    if kind == "cr":
        data = ingest_cr_csv(data_path)
        chains = fit_cr(data, priors=_cr_priors(cfg), config=mcmc, rng=rng)
    elif kind == "cpue":
        data = ingest_cpue_csv(data_path)
        chains = fit_cpue_naive(data, priors=_cpue_priors(cfg), config=mcmc, rng=rng)
    else:
        data = ingest_cpue_csv(data_path)
        source = read_chains(cr_chains_path)
        map_text = _setting(args, cfg, "coefficient_map")
        if map_text:
            cmap = _parse_coefficient_map(map_text)
        else:
            cmap = default_coefficient_map(source.info.get("x_names", []), data.x_names)
        spec = TransferSpec(source, cmap)
        chains = fit_cpue_transfer(data, spec, priors=_cpue_priors(cfg), config=mcmc, rng=rng)
    out.mkdir(parents=True, exist_ok=True)
    write_chains(out / "chains.csv", chains)
    write_summary_csv(out / "summary.csv", chains)
    print(f"wrote chains.csv and summary.csv to {out}")
    return 0


def _cmd_sim_study(args, cfg) -> int:
    seed = _require_seed(args, cfg)
    out = _require_out(args, cfg)
    sid = _setting(args, cfg, "scenario")
    if sid is None:
        raise ValidationError("sim-study requires a --scenario")
    preset = _setting(args, cfg, "preset", "desk")
    replicates = _setting(args, cfg, "replicates")
    mcmc = _mcmc_config(args, cfg)
    spec = scenario(
        sid,
        replicates=int(replicates) if replicates is not None else None,
        base_seed=seed,
        preset=preset,
        mcmc=mcmc,
    )
    out.mkdir(parents=True, exist_ok=True)

    header = [
        "replicate", "size_class", "failed", "error",
        "naive_mad", "transfer_mad", "naive_n_coverage", "transfer_n_coverage",
        "naive_u_covered", "transfer_u_covered",
    ]

    def persist(res):
        rows = []
        if res.failed:
            rows.append([str(res.replicate_id), "", "1", res.error or "", "", "", "", "", "", ""])
        else:
            for j in range(len(res.naive_mad)):
                rows.append([
                    str(res.replicate_id), str(j + 1), "0", "",
                    repr(res.naive_mad[j]), repr(res.transfer_mad[j]),
                    repr(res.naive_n_coverage[j]), repr(res.transfer_n_coverage[j]),
                    str(int(res.naive_u_covered[j])), str(int(res.transfer_u_covered[j])),
                ])
        write_csv_atomic(out / f"scenario_{spec.id}_replicate_{res.replicate_id:03d}.csv", header, rows)

    summary, results = run_scenario(spec, on_result=persist)

    summary_rows = []
    for j in range(len(summary.naive_mad)):
        summary_rows.append([
            spec.id, repr(spec.sigma2[0]), repr(spec.sigma2[1]), str(j + 1),
            repr(summary.naive_mad[j]), repr(summary.transfer_mad[j]),
            repr(summary.naive_n_coverage[j]), repr(summary.transfer_n_coverage[j]),
            repr(summary.naive_u_coverage[j]), repr(summary.transfer_u_coverage[j]),
            str(summary.replicates), str(summary.failed),
        ])
    write_csv_atomic(
        out / f"scenario_{spec.id}_summary.csv",
        ["scenario", "sigma2_1", "sigma2_2", "size_class", "naive_mad", "transfer_mad",
         "naive_n_coverage", "transfer_n_coverage", "naive_u_coverage",
         "transfer_u_coverage", "replicates", "failed"],
        summary_rows,
    )
    print(
        f"scenario {spec.id}: {summary.replicates - summary.failed}/{summary.replicates} "
        f"replicates completed; summaries written to {out}"
    )
    return 0


def _cmd_summarize(args, cfg) -> int:
    out = _require_out(args, cfg)
    chains = read_chains(args.chains)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", chains)
    print(f"wrote summary.csv to {out}")
    return 0


def _cmd_plot(args, cfg) -> int:
    from .plots import plot_abundance_trajectories, plot_trend_posteriors

    out = _require_out(args, cfg)
    naive = read_chains(args.naive_chains)
    transfer = read_chains(args.transfer_chains)
    cr = read_chains(args.cr_chains)
    phat = cr.info.get("mean_detection")
    if not phat:
        raise ValidationError("capture-recapture chains carry no mean_detection info")
    truth = None
    if args.truth:
        truth = _read_truth_csv(args.truth, naive.info["years"], len(naive.info["size_classes"]))
    out.mkdir(parents=True, exist_ok=True)
    p1 = plot_abundance_trajectories(naive, transfer, phat, out / "abundance_trajectories.svg", truth)
    p2 = plot_trend_posteriors(naive, transfer, phat, out / "trend_posteriors.svg", truth)
    print(f"wrote {p1.name} and {p2.name} to {out}")
    return 0


def _read_truth_csv(path, years, n_classes: int) -> np.ndarray:
    import csv as _csv

    try:
        rows = list(_csv.reader(Path(path).read_text().splitlines()))
    except OSError as exc:
        raise ValidationError(f"cannot read truth CSV {path}: {exc}")
    if not rows or rows[0] != ["year", "size_class", "abundance"]:
        raise ValidationError(f"{path}: expected header year,size_class,abundance")
    year_index = {int(y): i for i, y in enumerate(years)}
    truth = np.full((len(years), n_classes), np.nan)
    for raw in rows[1:]:
        if not raw:
            continue
        year, sc, val = int(raw[0]), int(raw[1]), float(raw[2])
        if year in year_index and 1 <= sc <= n_classes:
            truth[year_index[year], sc - 1] = val
    if np.any(np.isnan(truth)):
        raise ValidationError(f"{path}: truth does not cover every (year, size class)")
    return truth


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catchtl",
        description="Bayesian abundance models for catch data with detection transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="64-bit unsigned base seed")

    p = sub.add_parser("simulate", help="write synthetic datasets for a scenario")
    common(p)
    p.add_argument("--scenario", choices=["I", "II", "III", "IV", "V", "VI", "VII"], default="I")
    p.add_argument("--replicate-id", type=int, default=0, help="which replicate's data to emit")
    p.add_argument("--preset", choices=["paper", "desk"])

    for name, kind in (("fit-cr", "cr"), ("fit-cpue", "cpue"), ("fit-transfer", "transfer")):
        p = sub.add_parser(name, help=f"fit the {kind} model")
        common(p)
        p.add_argument("--data", help="input dataset CSV")
        p.add_argument("--preset", choices=["paper", "desk"])
        p.add_argument("--iterations", type=int)
        p.add_argument("--burn-in", dest="burn_in", type=int)
        p.add_argument("--thin", type=int)
        if kind == "transfer":
            p.add_argument("--cr-chains", dest="cr_chains", help="chain file of the source CR fit")
            p.add_argument(
                "--coefficient-map", dest="coefficient_map",
                help="'cr_idx:cpue_col,...' source-coefficient mapping "
                     "(default: match by name, excluding effort)",
            )

    p = sub.add_parser("sim-study", help="run a simulation scenario")
    common(p)
    p.add_argument("--scenario", choices=["I", "II", "III", "IV", "V", "VI", "VII"])
    p.add_argument("--replicates", type=int)
    p.add_argument("--preset", choices=["paper", "desk"], default="desk")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)

    p = sub.add_parser("summarize", help="recompute the summary CSV from stored chains")
    common(p, seed=False)
    p.add_argument("--chains", required=True, help="chain file to summarize")

    p = sub.add_parser("plot", help="emit comparison SVG figures")
    common(p, seed=False)
    p.add_argument("--naive-chains", dest="naive_chains", required=True)
    p.add_argument("--transfer-chains", dest="transfer_chains", required=True)
    p.add_argument("--cr-chains", dest="cr_chains", required=True)
    p.add_argument("--truth", help="optional truth CSV (year,size_class,abundance)")
    return parser


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit-cr": lambda a, c: _fit_command(a, c, "cr"),
    "fit-cpue": lambda a, c: _fit_command(a, c, "cpue"),
    "fit-transfer": lambda a, c: _fit_command(a, c, "transfer"),
    "sim-study": _cmd_sim_study,
    "summarize": _cmd_summarize,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(getattr(args, "config", None))
        return _HANDLERS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 3
    except CatchtlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
