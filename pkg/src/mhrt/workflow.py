"""Fit-and-summarize pipelines shared by the estimator, the CLI and recovery."""

from __future__ import annotations

from .diagnostics import fit_summary
from .kernels import make_rng
from .model import ModelStructure
from .sampler import run_chains

STRUCTURES = (ModelStructure.UA_US, ModelStructure.MA_US, ModelStructure.MA_MS)


def fit_model(data, q, structure, config, priors=None, ppmc_every=10, n_jobs=1):
    """Sample one structure and summarize it.

    Posterior predictive replicates use stream ``config.n_chains`` of
    ``config.seed``, i.e. the first stream not used by a chain.

    Returns
    -------
    draws : PosteriorDraws
    summary : FitSummary
    """
    draws = run_chains(data, q, structure, config, priors, n_jobs=n_jobs)
    rng = make_rng(config.seed, config.n_chains)
    return draws, fit_summary(draws, data, rng, ppmc_every=ppmc_every)


def compare_structures(data, q, config, priors=None, ppmc_every=10,
                       structures=STRUCTURES, n_jobs=1):
    """Fit each structure to the same data.

    Returns a list of rows with ``structure``, ``AIC``, ``BIC``, ``DIC``,
    ``ppp_RA`` and ``ppp_RT``, in the order of ``structures``.
    """
    rows = []
    for structure in structures:
        structure = ModelStructure.parse(structure)
        _, s = fit_model(data, q, structure, config, priors, ppmc_every, n_jobs)
        rows.append({
            "structure": structure.value,
            "AIC": s.AIC,
            "BIC": s.BIC,
            "DIC": s.DIC,
            "ppp_RA": s.ppp_ra,
            "ppp_RT": s.ppp_rt,
            "max_psrf": s.max_psrf,
        })
    return rows
