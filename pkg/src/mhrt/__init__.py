"""Joint hierarchical models of response accuracy and response times."""

from .diagnostics import (
    FitSummary,
    PosteriorDraws,
    information_criteria,
    ppmc_ra,
    ppmc_rt,
    psrf,
)
from .estimator import JointRTModel
from .io import load_data, load_qmatrix, pisa_qmatrix
from .model import (
    ItemParams,
    ModelStructure,
    ObservedData,
    PersonParams,
    QMatrix,
    deviance,
    effective_q,
    joint_log_likelihood,
)
from .recovery import run_replications
from .sampler import PriorSpec, SamplerConfig, run_chain, run_chains
from .simulate import SimDesign, default_design, simulate_dataset
from .workflow import compare_structures, fit_model

__version__ = "0.1.0"

__all__ = [
    "FitSummary", "ItemParams", "JointRTModel", "ModelStructure", "ObservedData",
    "PersonParams", "PosteriorDraws", "PriorSpec", "QMatrix", "SamplerConfig",
    "SimDesign", "compare_structures", "default_design", "deviance",
    "effective_q", "fit_model", "information_criteria", "joint_log_likelihood",
    "load_data", "load_qmatrix", "pisa_qmatrix", "ppmc_ra", "ppmc_rt", "psrf",
    "run_chain", "run_chains", "run_replications", "simulate_dataset",
]
