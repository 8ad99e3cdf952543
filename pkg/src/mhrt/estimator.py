"""scikit-learn style front end to the joint accuracy/RT sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .model import ItemParams, ModelStructure, _inv_logit, effective_q, response_logits
from .sampler import SamplerConfig, score_persons
from .validation import check_data, check_qmatrix
from .workflow import fit_model


class JointRTModel(TransformerMixin, BaseEstimator):
    """Hierarchical Rasch / log-normal RT model fitted by MCMC.

    Parameters
    ----------
    q_matrix : array-like of shape (n_items, n_dims) or QMatrix, optional
        Binary loadings. ``None`` means a single column of ones.
    structure : {"UA_US", "MA_US", "MA_MS"}
        Which sides use the Q-matrix; a unidimensional side loads every
        item on one latent.
    n_chains, n_iterations, n_burnin, thin : int
        Sampler schedule.
    random_state : int
        Seed; chain ``c`` uses stream ``c``.
    initial_proposal_sd, adapt_target, adapt_window
        Random-walk settings for the ability and intercept updates.
    priors : PriorSpec, optional
    ppmc_every : int
        Thinning of draws used for posterior predictive checks.
    n_jobs : int
        Chains run in parallel processes when greater than 1.
    score_iterations, score_burnin : int
        Schedule used by :meth:`transform` to score new persons.

    Attributes
    ----------
    q_ : QMatrix
    draws_ : PosteriorDraws
    summary_ : FitSummary
    theta_, tau_ : ndarray
        Posterior-mean person latents of the training data.
    d_, xi_, omega_ : ndarray of shape (n_items,)
    sigma_person_, sigma_item_ : ndarray
    mu_d_, mu_xi_ : float
    psrf_ : dict
        Potential scale reduction factor per scalar parameter.
    n_features_in_ : int
        Number of items.

    Examples
    --------
    >>> model = JointRTModel(q, structure="MA_MS", n_iterations=2000,
    ...                      n_burnin=1000)                      # doctest: +SKIP
    >>> latents = model.fit_transform(responses, rts)           # doctest: +SKIP
    """

    def __init__(self, q_matrix=None, structure="MA_MS", n_chains=2,
                 n_iterations=10000, n_burnin=5000, thin=1, random_state=0,
                 initial_proposal_sd=0.5, adapt_target=0.44, adapt_window=50,
                 priors=None, ppmc_every=10, n_jobs=1, score_iterations=1000,
                 score_burnin=500):
        self.q_matrix = q_matrix
        self.structure = structure
        self.n_chains = n_chains
        self.n_iterations = n_iterations
        self.n_burnin = n_burnin
        self.thin = thin
        self.random_state = random_state
        self.initial_proposal_sd = initial_proposal_sd
        self.adapt_target = adapt_target
        self.adapt_window = adapt_window
        self.priors = priors
        self.ppmc_every = ppmc_every
        self.n_jobs = n_jobs
        self.score_iterations = score_iterations
        self.score_burnin = score_burnin

    def _config(self, n_chains, n_iterations, n_burnin, thin):
        seed = 0 if self.random_state is None else int(self.random_state)
        return SamplerConfig(
            n_chains=n_chains, n_iterations=n_iterations, n_burnin=n_burnin,
            thin=thin, seed=seed, initial_proposal_sd=self.initial_proposal_sd,
            adapt_target=self.adapt_target, adapt_window=self.adapt_window)

    def fit(self, X, rts):
        """Sample the posterior given responses ``X`` and response times ``rts``.

        Both are ``(n_persons, n_items)``; missing cells are ``nan`` and an
        RT of 0 counts as missing.
        """
        data = check_data(X, rts)
        n_items = data.n_items
        q = self.q_matrix if self.q_matrix is not None else np.ones((n_items, 1))
        self.q_ = check_qmatrix(q, n_items)
        self.structure_ = ModelStructure.parse(self.structure)
        config = self._config(self.n_chains, self.n_iterations, self.n_burnin,
                              self.thin)
        draws, summary = fit_model(data, self.q_, self.structure_, config,
                                   self.priors, ppmc_every=self.ppmc_every,
                                   n_jobs=self.n_jobs)
        persons, items = draws.mean_params()
        self.draws_ = draws
        self.summary_ = summary
        self.theta_, self.tau_ = persons.theta, persons.tau
        self.sigma_person_ = persons.sigma_person
        self.d_, self.xi_, self.omega_ = items.d, items.xi, items.omega
        self.mu_d_, self.mu_xi_ = items.mu_d, items.mu_xi
        self.sigma_item_ = items.sigma_item
        self.psrf_ = {k: v["psrf"] for k, v in summary.parameters.items()}
        self.n_features_in_ = n_items
        return self

    def _items(self):
        return ItemParams(self.d_, self.xi_, self.omega_, self.mu_d_, self.mu_xi_,
                          self.sigma_item_)

    def transform(self, X, rts):
        """Posterior-mean ``[theta, tau]`` per person, item parameters fixed.

        Returns
        -------
        ndarray of shape (n_persons, K_theta + K_tau)
        """
        check_is_fitted(self, "draws_")
        data = check_data(X, rts, n_items=self.n_features_in_)
        q_a, q_s = effective_q(self.structure_, self.q_)
        config = self._config(1, self.score_iterations, self.score_burnin, 1)
        return score_persons(data, self._items(), self.sigma_person_, q_a, q_s,
                             config, stream=self.n_chains + 1)

    def fit_transform(self, X, rts):
        """Fit, then return the posterior-mean latents of the training persons."""
        return self.fit(X, rts).person_latents_

    @property
    def person_latents_(self):
        check_is_fitted(self, "draws_")
        return np.hstack([self.theta_, self.tau_])

    def predict_proba(self, X, rts):
        """Probability of a correct response per cell at the scored latents."""
        latents = self.transform(X, rts)
        q_a, _ = effective_q(self.structure_, self.q_)
        theta = latents[:, :q_a.shape[1]]
        return _inv_logit(response_logits(theta, q_a, self.d_))

    def predict_log_rt(self, X, rts):
        """Expected log response time per cell at the scored latents."""
        latents = self.transform(X, rts)
        q_a, q_s = effective_q(self.structure_, self.q_)
        tau = latents[:, q_a.shape[1]:]
        return self.xi_ - tau @ q_s.T
