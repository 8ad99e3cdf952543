"""Command-line entry point: ``mhrt {simulate,fit,compare,recover}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, load_config
from .io import (
    load_data,
    load_qmatrix,
    save_data,
    save_qmatrix,
    write_draws_csv,
    write_json,
    write_rows_csv,
)
from .kernels import NumericalError, make_rng
from .recovery import run_replications
from .simulate import simulate_dataset
from .workflow import compare_structures, fit_model

logger = logging.getLogger("mhrt")

# stream reserved for dataset simulation; chains use streams 0..n_chains
SIMULATE_STREAM = 1_000_003

COMPARE_COLUMNS = ["structure", "AIC", "BIC", "DIC", "ppp_RA", "ppp_RT"]
RECOVERY_COLUMNS = ["parameter", "bias", "mean_abs_bias", "rmse", "cor", "n"]


def _truth_dict(persons, items, design):
    return {
        "design": design.to_dict(),
        "theta": persons.theta,
        "tau": persons.tau,
        "sigma_person": persons.sigma_person,
        "d": items.d,
        "xi": items.xi,
        "omega": items.omega,
        "mu_d": items.mu_d,
        "mu_xi": items.mu_xi,
        "sigma_item": items.sigma_item,
    }


def _simulate(cfg, out):
    seed = cfg.sampler.seed
    data, persons, items = simulate_dataset(cfg.design,
                                            make_rng(seed, SIMULATE_STREAM))
    prov = cfg.provenance(seed)
    q = cfg.design.q
    save_data(data, q.item_ids, out / "responses.csv", out / "rts.csv", prov)
    save_qmatrix(q, out / "qmatrix.csv", prov)
    write_json(_truth_dict(persons, items, cfg.design), out / "truth.json", prov)
    logger.info("simulated %d persons x %d items into %s", *data.shape, out)


def _load_inputs(cfg):
    data, item_ids = load_data(cfg.responses, cfg.rts)
    q = load_qmatrix(cfg.qmatrix)
    if q.n_items != data.n_items:
        raise ValueError(
            f"Q-matrix has {q.n_items} items but data have {data.n_items}")
    if list(q.item_ids) != list(item_ids):
        logger.warning("Q-matrix item ids differ from data headers; "
                       "matching by position")
    return data, q


def _fit(cfg, out):
    data, q = _load_inputs(cfg)
    draws, summary = fit_model(data, q, cfg.structure, cfg.sampler, cfg.priors,
                               ppmc_every=cfg.ppmc_every, n_jobs=cfg.n_jobs)
    prov = cfg.provenance()
    for c in range(draws.n_chains):
        write_draws_csv(draws, c, out / f"draws_chain{c + 1}.csv", prov)
    payload = {"structure": cfg.structure.value, **summary.to_dict()}
    write_json(payload, out / "summary.json", prov)
    rows = [{"parameter": k, "psrf": v["psrf"], "mean": v["mean"], "sd": v["sd"]}
            for k, v in summary.parameters.items()]
    write_rows_csv(rows, ["parameter", "psrf", "mean", "sd"],
                   out / "convergence.csv", prov)
    logger.info("fit %s: DIC %.1f, max PSRF %.3f", cfg.structure.value,
                summary.DIC, summary.max_psrf)


def _compare(cfg, out):
    data, q = _load_inputs(cfg)
    rows = compare_structures(data, q, cfg.sampler, cfg.priors,
                              ppmc_every=cfg.ppmc_every, n_jobs=cfg.n_jobs)
    prov = cfg.provenance()
    write_rows_csv(rows, COMPARE_COLUMNS, out / "comparison.csv", prov)
    write_json({"models": rows}, out / "comparison.json", prov)


def _recover(cfg, out):
    report = run_replications(cfg.design, cfg.sampler, cfg.n_replications,
                              cfg.base_seed, cfg.priors, cfg.ppmc_every,
                              cfg.psrf_threshold, n_jobs=cfg.n_jobs)
    prov = cfg.provenance(cfg.base_seed)
    write_rows_csv(report.rows, RECOVERY_COLUMNS, out / "recovery.csv", prov)
    write_json(report.to_dict(), out / "recovery.json", prov)


HANDLERS = {"simulate": _simulate, "fit": _fit, "compare": _compare,
            "recover": _recover}


def run_command(cfg):
    """Execute a validated :class:`~mhrt.config.RunConfig`; returns an exit code."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    HANDLERS[cfg.command](cfg, out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mhrt",
        description="Simulate, fit and compare joint models of response "
                    "accuracy and response times.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key, e.g. sampler.n_iterations=2000")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int, help="sampler / simulation seed")
        p.add_argument("--structure", choices=["UA_US", "MA_US", "MA_MS"])
        if name in ("fit", "compare"):
            p.add_argument("--responses", type=Path)
            p.add_argument("--rts", type=Path)
            p.add_argument("--qmatrix", type=Path)
    return parser


def _flag_overrides(args):
    out = []
    if args.out is not None:
        out.append(f"output_dir={args.out.resolve()}")
    if args.seed is not None:
        out.append(f"sampler.seed={args.seed}")
    if args.structure is not None:
        out.append(f"structure={args.structure}")
    for key in ("responses", "rts", "qmatrix"):
        val = getattr(args, key, None)
        if val is not None:
            out.append(f"data.{key}={val.resolve()}")
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config,
                          list(args.overrides) + _flag_overrides(args))
        return run_command(cfg)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"mhrt: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        print(f"mhrt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
