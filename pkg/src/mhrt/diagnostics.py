"""Posterior draw storage, convergence, model checking and information criteria."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ItemParams, PersonParams

SCALAR_FAMILIES = ("theta", "tau", "d", "xi", "omega", "mu_d", "mu_xi",
                   "sigma_person", "sigma_item")


class PosteriorDraws:
    """Retained draws for one or more chains.

    Each chain is a mapping from field name to an array whose first axis is
    the retained iteration: ``theta`` ``(S, N, K_theta)``, ``tau``
    ``(S, N, K_tau)``, ``d``/``xi``/``omega`` ``(S, I)``, ``mu_d``/``mu_xi``
    ``(S,)``, ``sigma_person`` ``(S, K*, K*)``, ``sigma_item`` ``(S, 2, 2)``
    and ``deviance`` ``(S,)``.
    """

    def __init__(self, chains, structure, q_ability, q_speed, acceptance=None):
        self.chains = list(chains)
        self.structure = structure
        self.q_ability = np.asarray(q_ability)
        self.q_speed = np.asarray(q_speed)
        self.acceptance = list(acceptance or [])
        lengths = {len(c["deviance"]) for c in self.chains}
        if len(lengths) > 1:
            raise ValueError(f"chains have unequal lengths {sorted(lengths)}")

    @classmethod
    def merge(cls, parts):
        first = parts[0]
        return cls(
            chains=[c for p in parts for c in p.chains],
            structure=first.structure,
            q_ability=first.q_ability,
            q_speed=first.q_speed,
            acceptance=[a for p in parts for a in p.acceptance],
        )

    @property
    def n_chains(self):
        return len(self.chains)

    @property
    def n_draws(self):
        return len(self.chains[0]["deviance"]) if self.chains else 0

    def stacked(self, name):
        """Array of shape ``(n_chains, n_draws, ...)``."""
        return np.stack([c[name] for c in self.chains])

    def pooled(self, name):
        return np.concatenate([c[name] for c in self.chains])

    def posterior_mean(self, name):
        return self.pooled(name).mean(axis=0)

    def params_at(self, chain, index):
        """Person and item parameters of one retained draw."""
        c = self.chains[chain]
        persons = PersonParams(c["theta"][index], c["tau"][index],
                               c["sigma_person"][index])
        items = ItemParams(c["d"][index], c["xi"][index], c["omega"][index],
                           float(c["mu_d"][index]), float(c["mu_xi"][index]),
                           c["sigma_item"][index])
        return persons, items

    def mean_params(self):
        """Posterior-mean person and item parameters."""
        m = self.posterior_mean
        persons = PersonParams(m("theta"), m("tau"), m("sigma_person"))
        items = ItemParams(m("d"), m("xi"), m("omega"), float(m("mu_d")),
                           float(m("mu_xi")), m("sigma_item"))
        return persons, items

    def scalar_draws(self, include_persons=True, include_deviance=False):
        """Every scalar parameter as ``label -> (n_chains, n_draws)``.

        Labels are ``name[i,j]`` with 1-based indices; covariance matrices
        contribute their lower triangle only.
        """
        out = {}
        for name in SCALAR_FAMILIES:
            if not include_persons and name in ("theta", "tau"):
                continue
            arr = self.stacked(name)
            if arr.ndim == 2:
                out[name] = arr
            elif name.startswith("sigma"):
                rows, cols = np.tril_indices(arr.shape[2])
                for r, c in zip(rows, cols):
                    out[f"{name}[{r + 1},{c + 1}]"] = arr[:, :, r, c]
            elif arr.ndim == 3:
                for i in range(arr.shape[2]):
                    out[f"{name}[{i + 1}]"] = arr[:, :, i]
            else:
                for n in range(arr.shape[2]):
                    for k in range(arr.shape[3]):
                        out[f"{name}[{n + 1},{k + 1}]"] = arr[:, :, n, k]
        if include_deviance:
            out["deviance"] = self.stacked("deviance")
        return out


def psrf(chains):
    """Potential scale reduction factor of one scalar parameter.

    ``W`` is the mean within-chain variance and ``B/L`` the variance of the
    chain means; the result is ``sqrt(((L-1)/L * W + B/L) / W)``.

    Parameters
    ----------
    chains : array_like, shape (n_chains, L)

    Returns
    -------
    float
        ``inf`` when ``W = 0 < B``; ``1`` when both are zero.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("psrf needs at least 2 chains of length at least 2")
    return float(psrf_many(x[:, :, None])[0])


def psrf_many(draws):
    """Vectorized :func:`psrf` over the trailing axis of ``(C, L, P)`` draws."""
    x = np.asarray(draws, dtype=float)
    length = x.shape[1]
    w = x.var(axis=1, ddof=1).mean(axis=0)
    b_over_l = x.mean(axis=1).var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(((length - 1) / length * w + b_over_l) / w)
    r = np.where(w == 0, np.where(b_over_l > 0, np.inf, 1.0), r)
    return r


def psrf_table(draws, include_persons=True):
    """PSRF for every scalar parameter of a :class:`PosteriorDraws`."""
    scalars = draws.scalar_draws(include_persons=include_persons)
    labels = list(scalars)
    values = psrf_many(np.stack([scalars[k] for k in labels], axis=-1))
    return dict(zip(labels, values.tolist()))


def pearson_discrepancy(responses, logits):
    """Sum of squared Pearson residuals over observed responses.

    Uses ``(y - P)^2 / (P(1-P)) = exp(-eta)`` for ``y = 1`` and ``exp(eta)``
    for ``y = 0``, which never divides by an underflowed variance.
    """
    obs = ~np.isnan(responses)
    terms = np.where(responses == 1, np.exp(-logits), np.exp(logits))
    return float(np.where(obs, terms, 0.0).sum())


def rt_discrepancy(log_rts, means, omega):
    """Sum of squared standardized log-RT residuals over observed cells."""
    obs = ~np.isnan(log_rts)
    z = np.where(obs, log_rts - means, 0.0) * omega
    return float((z ** 2).sum())


def posterior_predictive_pvalue(observed, replicated):
    """Fraction of draws with replicated discrepancy ``>=`` the observed one."""
    observed = np.asarray(observed, dtype=float)
    replicated = np.asarray(replicated, dtype=float)
    if observed.size == 0:
        raise ValueError("no draws")
    return float(np.mean(replicated >= observed))


def _selected_draws(draws, every):
    for c in range(draws.n_chains):
        for s in range(0, draws.n_draws, every):
            yield c, s


def ppmc_ra(draws, data, q_ability, rng, every=10, return_discrepancies=False):
    """Posterior predictive p-value for responses (Pearson discrepancy).

    Uses every ``every``-th retained draw of each chain, chain by chain; each
    consumes an ``(N, I)`` block of uniforms for the replicated responses.
    """
    if draws.n_draws == 0:
        raise ValueError("no retained draws")
    obs_mask = data.response_mask
    realized, replicated = [], []
    for c, s in _selected_draws(draws, every):
        ch = draws.chains[c]
        eta = ch["theta"][s] @ np.asarray(q_ability).T + ch["d"][s]
        p = np.exp(-np.logaddexp(0.0, -eta))
        y_rep = np.where(obs_mask, (rng.random(p.shape) < p).astype(float), np.nan)
        realized.append(pearson_discrepancy(data.responses, eta))
        replicated.append(pearson_discrepancy(y_rep, eta))
    ppp = posterior_predictive_pvalue(realized, replicated)
    if return_discrepancies:
        return ppp, np.array(realized), np.array(replicated)
    return ppp


def ppmc_rt(draws, data, q_speed, rng, every=10, return_discrepancies=False):
    """Posterior predictive p-value for log RTs (standardized residuals).

    Same draw selection as :func:`ppmc_ra`; each selected draw consumes an
    ``(N, I)`` block of normals for the replicated log RTs.
    """
    if draws.n_draws == 0:
        raise ValueError("no retained draws")
    obs_mask = data.rt_mask
    realized, replicated = [], []
    for c, s in _selected_draws(draws, every):
        ch = draws.chains[c]
        means = ch["xi"][s] - ch["tau"][s] @ np.asarray(q_speed).T
        omega = ch["omega"][s]
        z = rng.standard_normal(means.shape)
        log_rep = np.where(obs_mask, means + z / omega, np.nan)
        realized.append(rt_discrepancy(data.log_rts, means, omega))
        replicated.append(rt_discrepancy(log_rep, means, omega))
    ppp = posterior_predictive_pvalue(realized, replicated)
    if return_discrepancies:
        return ppp, np.array(realized), np.array(replicated)
    return ppp


def n_parameters(n_items, k_star):
    """Count of structural parameters used by AIC and BIC.

    Intercept, time intensity and precision per item, two item means, three
    unique item-covariance entries and the unique person-covariance entries.
    Person latents are not counted.
    """
    return 3 * n_items + 2 + 3 + k_star * (k_star + 1) // 2


def information_criteria(draws, p, n_persons):
    """AIC, BIC and DIC from retained deviances.

    Parameters
    ----------
    draws : PosteriorDraws or array_like
        Either a draw container or the pooled deviance values themselves.
    p : int
        Parameter count, see :func:`n_parameters`.
    n_persons : int

    Returns
    -------
    dict with keys ``AIC``, ``BIC``, ``DIC``, ``Dbar``, ``p_e``
    """
    dev = draws.pooled("deviance") if isinstance(draws, PosteriorDraws) \
        else np.asarray(draws, dtype=float).ravel()
    if dev.size < 2:
        raise ValueError("need at least 2 retained deviances")
    dbar = float(dev.mean())
    p_e = float(dev.var(ddof=1) / 2.0)
    return {
        "AIC": dbar + p,
        "BIC": dbar + (math.log(n_persons) - 1.0) * p,
        "DIC": dbar + p_e,
        "Dbar": dbar,
        "p_e": p_e,
    }


def summarize_array(values):
    """Pooled posterior mean and sample sd of one scalar's draws."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no draws")
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return float(x.mean()), sd


def summarize(draws, include_persons=True):
    """``label -> (mean, sd)`` pooled over chains."""
    if isinstance(draws, PosteriorDraws):
        scalars = draws.scalar_draws(include_persons=include_persons)
    else:
        scalars = dict(draws)
    return {k: summarize_array(v) for k, v in scalars.items()}


def batch_means_se(x, n_batches=50):
    """Monte Carlo standard error of a chain mean by non-overlapping batch means."""
    x = np.asarray(x, dtype=float).ravel()
    size = x.size // n_batches
    if size < 1:
        raise ValueError("chain too short for the requested batches")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class FitSummary:
    parameters: dict = field(default_factory=dict)
    ppp_ra: float = float("nan")
    ppp_rt: float = float("nan")
    AIC: float = float("nan")
    BIC: float = float("nan")
    DIC: float = float("nan")
    Dbar: float = float("nan")
    p_e: float = float("nan")
    p: int = 0
    max_psrf: float = float("nan")
    acceptance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "criteria": {
                "AIC": self.AIC, "BIC": self.BIC, "DIC": self.DIC,
                "Dbar": self.Dbar, "p_e": self.p_e, "p": self.p,
            },
            "ppp_RA": self.ppp_ra,
            "ppp_RT": self.ppp_rt,
            "max_psrf": self.max_psrf,
            "acceptance": self.acceptance,
            "parameters": {
                k: {"mean": v["mean"], "sd": v["sd"], "psrf": v["psrf"]}
                for k, v in self.parameters.items()
            },
        }


def fit_summary(draws, data, rng, ppmc_every=10, n_params=None):
    """Summaries, PSRF, PPMC p-values and information criteria for one fit.

    PSRF entries are ``nan`` for single-chain fits.
    """
    scalars = draws.scalar_draws()
    labels = list(scalars)
    stacked = np.stack([scalars[k] for k in labels], axis=-1)
    if draws.n_chains >= 2 and draws.n_draws >= 2:
        r = psrf_many(stacked)
    else:
        r = np.full(len(labels), np.nan)
    pooled = stacked.reshape(-1, len(labels))
    means = pooled.mean(axis=0)
    sds = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 \
        else np.zeros(len(labels))
    params = {
        k: {"mean": float(m), "sd": float(s), "psrf": float(v)}
        for k, m, s, v in zip(labels, means, sds, r)
    }
    k_star = draws.q_ability.shape[1] + draws.q_speed.shape[1]
    p = n_params if n_params is not None else n_parameters(data.n_items, k_star)
    ic = information_criteria(draws, p, data.n_persons)
    ppp_ra = ppmc_ra(draws, data, draws.q_ability, rng, every=ppmc_every)
    ppp_rt = ppmc_rt(draws, data, draws.q_speed, rng, every=ppmc_every)
    acc = {}
    if draws.acceptance:
        acc = {
            "theta": float(np.mean([a["theta"].mean() for a in draws.acceptance])),
            "d": float(np.mean([a["d"].mean() for a in draws.acceptance])),
        }
    return FitSummary(parameters=params, ppp_ra=ppp_ra, ppp_rt=ppp_rt,
                      AIC=ic["AIC"], BIC=ic["BIC"], DIC=ic["DIC"],
                      Dbar=ic["Dbar"], p_e=ic["p_e"], p=p,
                      max_psrf=_nanmax(r), acceptance=acc)


def _nanmax(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0 or np.all(np.isnan(values)):
        return float("nan")
    return float(np.nanmax(values))
