"""Metropolis-within-Gibbs sampler for the joint accuracy / response-time model.

One iteration updates, in this order:

1. all speed vectors ``tau_n``      (exact multivariate normal draw)
2. all ability vectors ``theta_n``  (componentwise random-walk Metropolis)
3. all time intensities ``xi_i``    (exact normal draw)
4. all intercepts ``d_i``           (random-walk Metropolis)
5. all residual precisions          (exact gamma draw, stored as ``omega``)
6. the person covariance            (exact inverse-Wishart draw)
7. the item means and covariance    (exact normal, then inverse-Wishart)
8. a common shift of all ``tau`` with matching ``xi``   (exact normal draw)
9. a common shift of all ``theta`` with matching ``d``  (exact normal draw)

Persons are conditionally independent given item and hyper parameters, and
items are conditionally independent given person and hyper parameters, so each
of steps 1-5 is carried out as a single vectorized block over persons or items.
Steps 8 and 9 leave the likelihood untouched and move the sampler along the
directions that single-site updates explore slowly (latent means against item
locations). Proposal scales adapt during burn-in only.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    conditional_regression,
    gamma_sample,
    invwishart_sample,
    make_rng,
    mvn_sample,
    spd_inverse,
)
from .model import (
    LOG_2PI,
    ItemParams,
    ModelStructure,
    PersonParams,
    effective_q,
)

logger = logging.getLogger(__name__)


@dataclass
class SamplerConfig:
    n_chains: int = 2
    n_iterations: int = 10_000
    n_burnin: int = 5_000
    thin: int = 1
    seed: int = 0
    initial_proposal_sd: float = 0.5
    adapt_target: float = 0.44
    adapt_window: int = 50

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        if not 0 <= self.n_burnin < self.n_iterations:
            raise ValueError(
                f"n_burnin ({self.n_burnin}) must be below n_iterations "
                f"({self.n_iterations})"
            )
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not self.initial_proposal_sd > 0:
            raise ValueError("initial_proposal_sd must be positive")
        if not 0 < self.adapt_target < 1:
            raise ValueError("adapt_target must be in (0, 1)")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be at least 1")

    @property
    def n_retained(self):
        return (self.n_iterations - self.n_burnin) // self.thin


@dataclass
class PriorSpec:
    """Prior constants. ``None`` person-scale entries default to ``I_{K*}`` and ``K*``.

    ``mu_d_var`` and ``mu_xi_var`` are variances.
    """

    r_person: np.ndarray = None
    df_person: float = None
    r_item: np.ndarray = field(default_factory=lambda: np.eye(2))
    df_item: float = 2.0
    omega_shape: float = 1.0
    omega_rate: float = 1.0
    mu_d_mean: float = 0.0
    mu_d_var: float = 2.0
    mu_xi_mean: float = 4.3
    mu_xi_var: float = 2.0

    def person_scale(self, k_star):
        if self.r_person is None:
            return np.eye(k_star)
        r = np.asarray(self.r_person, dtype=float)
        if r.shape != (k_star, k_star):
            raise ValueError(f"r_person must be {k_star}x{k_star}")
        return r

    def person_df(self, k_star):
        return float(k_star if self.df_person is None else self.df_person)

    def to_dict(self):
        out = {}
        for key, value in self.__dict__.items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


class Workspace:
    """Read-only views of the data and loadings used by every update."""

    def __init__(self, data, q_ability, q_speed):
        self.data = data
        self.q_ability = np.asarray(q_ability, dtype=float)
        self.q_speed = np.asarray(q_speed, dtype=float)
        self.y_mask = data.response_mask
        self.y = np.where(self.y_mask, data.responses, 0.0)
        self.t_mask = data.rt_mask
        self.log_t = np.where(self.t_mask, data.log_rts, 0.0)
        self.n_obs_t = self.t_mask.sum(axis=0)
        k_s = self.q_speed.shape[1]
        # per-item outer products q_i q_i^T, flattened to (I, K_tau^2)
        self.q_speed_outer = np.einsum(
            "ik,il->ikl", self.q_speed, self.q_speed).reshape(-1, k_s * k_s)
        # items loading on each ability dimension
        self.ability_items = [np.flatnonzero(self.q_ability[:, k])
                              for k in range(self.q_ability.shape[1])]

    @property
    def n_persons(self):
        return self.y.shape[0]

    @property
    def n_items(self):
        return self.y.shape[1]


@dataclass
class ChainState:
    persons: PersonParams
    items: ItemParams
    theta_sd: np.ndarray
    d_sd: np.ndarray
    iteration: int = 0
    theta_accepted: np.ndarray = None
    d_accepted: np.ndarray = None
    n_proposed: int = 0

    def __post_init__(self):
        if self.theta_accepted is None:
            self.theta_accepted = np.zeros_like(self.theta_sd)
        if self.d_accepted is None:
            self.d_accepted = np.zeros_like(self.d_sd)

    def reset_counters(self):
        self.theta_accepted[:] = 0
        self.d_accepted[:] = 0
        self.n_proposed = 0

    def acceptance(self):
        n = max(self.n_proposed, 1)
        return {"theta": self.theta_accepted / n, "d": self.d_accepted / n}


def _softplus(x):
    # log(1 + e^x) without overflow; cheaper than logaddexp
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _logit_clamped(p, bound=4.0):
    with np.errstate(divide="ignore"):
        val = np.log(p) - np.log1p(-p)
    return np.clip(val, -bound, bound)


def initialize_state(data, q, structure, rng, priors=None,
                     initial_proposal_sd=0.5):
    """Starting point for one chain.

    ``theta`` then ``tau`` are drawn from ``N(0, 0.5^2)`` (an ``(N, K_theta)``
    then an ``(N, K_tau)`` block of normals). Item parameters start from
    moment estimates: ``d`` at the clamped logit of the proportion correct,
    ``xi`` at the mean log RT, ``omega`` at the clamped reciprocal sd of log
    RT. Items without observations fall back to prior means.
    """
    priors = priors or PriorSpec()
    q_a, q_s = effective_q(structure, q)
    n, n_items = data.shape
    k_a, k_s = q_a.shape[1], q_s.shape[1]
    theta = 0.5 * rng.standard_normal((n, k_a))
    tau = 0.5 * rng.standard_normal((n, k_s))

    y_mask = data.response_mask
    t_mask = data.rt_mask
    n_y = y_mask.sum(axis=0)
    n_t = t_mask.sum(axis=0)
    y_sum = np.where(y_mask, data.responses, 0.0).sum(axis=0)
    logt = np.where(t_mask, data.log_rts, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_hat = y_sum / n_y
        xi = logt.sum(axis=0) / n_t
        resid = np.where(t_mask, logt - xi, 0.0)
        sd = np.sqrt((resid ** 2).sum(axis=0) / (n_t - 1))
        omega = np.clip(1.0 / sd, 0.2, 10.0)
    d = np.where(n_y > 0, _logit_clamped(p_hat), priors.mu_d_mean)
    xi = np.where(n_t > 0, xi, priors.mu_xi_mean)
    omega = np.where((n_t > 1) & np.isfinite(omega), omega, 1.0)

    persons = PersonParams(theta, tau, np.eye(k_a + k_s))
    items = ItemParams(d=d.astype(float), xi=xi.astype(float), omega=omega,
                       mu_d=priors.mu_d_mean, mu_xi=priors.mu_xi_mean,
                       sigma_item=np.eye(2))
    return ChainState(persons=persons, items=items,
                      theta_sd=np.full((n, k_a), float(initial_proposal_sd)),
                      d_sd=np.full(n_items, float(initial_proposal_sd)))


def tau_full_conditional(state, ws):
    """Mean and precision of every ``tau_n`` given everything else.

    Returns arrays of shape ``(N, K_tau)`` and ``(N, K_tau, K_tau)``.
    """
    p, it = state.persons, state.items
    _, coef, cond_cov = conditional_regression(p.sigma_person,
                                               np.arange(p.n_ability))
    prior_prec = spd_inverse(cond_cov)
    prior_mean = p.theta @ coef.T
    w = ws.t_mask * it.omega ** 2
    k_s = ws.q_speed.shape[1]
    lik_prec = (w @ ws.q_speed_outer).reshape(-1, k_s, k_s)
    info = (w * (it.xi - ws.log_t)) @ ws.q_speed
    post_prec = prior_prec + lik_prec
    rhs = prior_mean @ prior_prec + info
    post_mean = np.linalg.solve(post_prec, rhs[..., None])[..., 0]
    return post_mean, post_prec


def update_tau(state, ws, rng):
    """Exact Gibbs draw of all speed vectors; consumes ``(N, K_tau)`` normals."""
    mean, prec = tau_full_conditional(state, ws)
    chol = np.linalg.cholesky(prec)
    z = rng.standard_normal(mean.shape)
    # L^T x = z gives x ~ N(0, prec^-1)
    noise = np.linalg.solve(np.swapaxes(chol, -1, -2), z[..., None])[..., 0]
    state.persons.tau = mean + noise
    return state.persons.tau


def update_theta(state, ws, rng):
    """Componentwise random-walk Metropolis for all ability vectors.

    The target for person ``n`` is the Bernoulli likelihood over its observed
    responses times the normal prior of ``theta_n`` given ``tau_n``. For each
    ability dimension in turn the step consumes ``N`` normals (increments) and
    then ``N`` uniforms (accept tests).
    """
    p, it = state.persons, state.items
    if np.any(state.theta_sd <= 0):
        raise ValueError("proposal sd must be positive")
    k_a = p.n_ability
    prec = spd_inverse(p.sigma_person)
    omega_n = np.hstack([p.theta, p.tau])
    prec_omega = omega_n @ prec
    for k in range(k_a):
        step = state.theta_sd[:, k] * rng.standard_normal(ws.n_persons)
        log_u = np.log(rng.random(ws.n_persons))
        cols = ws.ability_items[k]
        eta = p.theta @ ws.q_ability[cols].T + it.d[cols]
        eta_new = eta + step[:, None]
        mask = ws.y_mask[:, cols]
        dll = np.where(
            mask,
            ws.y[:, cols] * step[:, None] - _softplus(eta_new) + _softplus(eta),
            0.0,
        ).sum(axis=1)
        dprior = -(step * prec_omega[:, k] + 0.5 * step ** 2 * prec[k, k])
        accept = log_u < dll + dprior
        p.theta[accept, k] += step[accept]
        # keep prec_omega consistent with the updated theta
        prec_omega += np.where(accept, step, 0.0)[:, None] * prec[k][None, :]
        state.theta_accepted[:, k] += accept
    return p.theta


def item_conditional_prior(items, which):
    """Normal prior of ``d`` (``which='d'``) or ``xi`` given the other.

    Returns per-item means and the common variance.
    """
    s = items.sigma_item
    if which == "d":
        coef = s[0, 1] / s[1, 1]
        mean = items.mu_d + coef * (items.xi - items.mu_xi)
        var = s[0, 0] - coef * s[0, 1]
    else:
        coef = s[0, 1] / s[0, 0]
        mean = items.mu_xi + coef * (items.d - items.mu_d)
        var = s[1, 1] - coef * s[0, 1]
    return mean, var


def xi_full_conditional(state, ws):
    p, it = state.persons, state.items
    m, v = item_conditional_prior(it, "xi")
    z = np.where(ws.t_mask, ws.log_t + p.tau @ ws.q_speed.T, 0.0)
    lam = it.omega ** 2
    post_prec = 1.0 / v + ws.n_obs_t * lam
    post_mean = (m / v + lam * z.sum(axis=0)) / post_prec
    return post_mean, post_prec


def update_xi(state, ws, rng):
    """Exact Gibbs draw of all time intensities; consumes ``I`` normals."""
    mean, prec = xi_full_conditional(state, ws)
    state.items.xi = mean + rng.standard_normal(mean.shape) / np.sqrt(prec)
    return state.items.xi


def update_d(state, ws, rng):
    """Random-walk Metropolis for all intercepts.

    Consumes ``I`` normals then ``I`` uniforms.
    """
    p, it = state.persons, state.items
    if np.any(state.d_sd <= 0):
        raise ValueError("proposal sd must be positive")
    step = state.d_sd * rng.standard_normal(ws.n_items)
    log_u = np.log(rng.random(ws.n_items))
    eta = p.theta @ ws.q_ability.T + it.d
    dll = np.where(
        ws.y_mask,
        ws.y * step - _softplus(eta + step) + _softplus(eta),
        0.0,
    ).sum(axis=0)
    m, v = item_conditional_prior(it, "d")
    d_new = it.d + step
    dprior = -0.5 * ((d_new - m) ** 2 - (it.d - m) ** 2) / v
    accept = log_u < dll + dprior
    it.d = np.where(accept, d_new, it.d)
    state.d_accepted += accept
    return it.d


def omega_full_conditional(state, ws, priors):
    """Gamma shape and rate of each residual precision ``omega_i**2``."""
    p, it = state.persons, state.items
    means = it.xi - p.tau @ ws.q_speed.T
    sse = (np.where(ws.t_mask, ws.log_t - means, 0.0) ** 2).sum(axis=0)
    return priors.omega_shape + 0.5 * ws.n_obs_t, priors.omega_rate + 0.5 * sse


def update_omega(state, ws, rng, priors):
    """Exact Gibbs draw of the residual precisions; consumes ``I`` gammas."""
    shape, rate = omega_full_conditional(state, ws, priors)
    lam = gamma_sample(shape, rate, rng, size=shape.shape)
    state.items.omega = np.sqrt(lam)
    return state.items.omega


def sigma_person_full_conditional(persons, priors):
    """Inverse-Wishart scale and degrees of freedom of ``Sigma_person``."""
    omega_n = persons.omega_matrix
    n, k_star = omega_n.shape
    scale = priors.person_scale(k_star) + omega_n.T @ omega_n
    return scale, priors.person_df(k_star) + n


def update_sigma_person(state, rng, priors):
    """Inverse-Wishart draw given the stacked person latents."""
    scale, df = sigma_person_full_conditional(state.persons, priors)
    state.persons.sigma_person = invwishart_sample(scale, df, rng)
    return state.persons.sigma_person


def mu_item_full_conditional(items, priors):
    """Mean vector and precision of ``(mu_d, mu_xi)`` given item parameters."""
    prior_prec = np.diag([1.0 / priors.mu_d_var, 1.0 / priors.mu_xi_var])
    prior_mean = np.array([priors.mu_d_mean, priors.mu_xi_mean])
    psi = items.psi
    sig_inv = spd_inverse(items.sigma_item)
    post_prec = prior_prec + psi.shape[0] * sig_inv
    rhs = prior_prec @ prior_mean + sig_inv @ psi.sum(axis=0)
    return np.linalg.solve(post_prec, rhs), post_prec


def update_item_hyper(state, rng, priors):
    """Draw ``(mu_d, mu_xi)`` then ``Sigma_item``.

    Consumes two normals, then the variates of one 2x2 inverse-Wishart draw.
    """
    it = state.items
    mean, prec = mu_item_full_conditional(it, priors)
    mu = mvn_sample(mean, spd_inverse(prec), rng)
    it.mu_d, it.mu_xi = float(mu[0]), float(mu[1])
    resid = it.psi - mu
    it.sigma_item = invwishart_sample(priors.r_item + resid.T @ resid,
                                      priors.df_item + resid.shape[0], rng)
    return it.mu_d, it.mu_xi, it.sigma_item


def _location_shift(state, block, q, item_col, sign, rng):
    """Exact draw of a common translation of one person block and the items.

    Moving ``block`` latents by ``c`` and item column ``item_col`` by
    ``sign * q @ c`` leaves the likelihood unchanged, so ``c`` has a Gaussian
    conditional built from the two prior layers alone. Consumes ``len(c)``
    normals.
    """
    p, it = state.persons, state.items
    k_a = p.n_ability
    idx = np.arange(k_a) if block == "theta" else np.arange(k_a, k_a + p.n_speed)
    prec_p = spd_inverse(p.sigma_person)
    omega_sum = p.omega_matrix.sum(axis=0)
    n = p.theta.shape[0]
    prec_i = spd_inverse(it.sigma_item)
    resid = it.psi - np.array([it.mu_d, it.mu_xi])
    a = n * prec_p[np.ix_(idx, idx)] + prec_i[item_col, item_col] * (q.T @ q)
    b = -(prec_p[idx] @ omega_sum) - sign * q.T @ (resid @ prec_i[item_col])
    c = mvn_sample(np.linalg.solve(a, b), spd_inverse(a), rng)
    if block == "theta":
        p.theta += c
        it.d = it.d + sign * (q @ c)
    else:
        p.tau += c
        it.xi = it.xi + sign * (q @ c)
    return c


def shift_speed_location(state, ws, rng):
    """Joint translation ``tau += c``, ``xi += Q_speed @ c``."""
    return _location_shift(state, "tau", ws.q_speed, 1, 1.0, rng)


def shift_ability_location(state, ws, rng):
    """Joint translation ``theta += c``, ``d -= Q_ability @ c``."""
    return _location_shift(state, "theta", ws.q_ability, 0, -1.0, rng)


def adapt_proposals(state, target, window_index):
    """Robbins-Monro step on log proposal sd toward the target acceptance."""
    acc = state.acceptance()
    gain = 1.0 / np.sqrt(window_index)
    state.theta_sd *= np.exp(gain * (acc["theta"] - target))
    state.d_sd *= np.exp(gain * (acc["d"] - target))
    state.reset_counters()


def chain_deviance(state, ws):
    """``-2`` log-likelihood of the data at the current state."""
    p, it = state.persons, state.items
    eta = p.theta @ ws.q_ability.T + it.d
    ll_y = np.where(ws.y_mask, ws.y * eta - _softplus(eta), 0.0)
    means = it.xi - p.tau @ ws.q_speed.T
    resid = np.where(ws.t_mask, ws.log_t - means, 0.0) * it.omega
    ll_t = np.where(ws.t_mask,
                    np.log(it.omega) - 0.5 * LOG_2PI - 0.5 * resid ** 2, 0.0)
    total = ll_y.sum() + ll_t.sum()
    if not np.isfinite(total):
        bad_y = np.argwhere(~np.isfinite(ll_y))
        bad_t = np.argwhere(~np.isfinite(ll_t))
        cell = tuple(int(v) for v in (bad_y if len(bad_y) else bad_t)[0])
        raise FloatingPointError(
            f"non-finite log-likelihood at cell (person, item) = {cell}")
    return -2.0 * float(total)


def gibbs_iteration(state, ws, rng, priors):
    """One full sweep in the documented order."""
    update_tau(state, ws, rng)
    update_theta(state, ws, rng)
    update_xi(state, ws, rng)
    update_d(state, ws, rng)
    update_omega(state, ws, rng, priors)
    update_sigma_person(state, rng, priors)
    update_item_hyper(state, rng, priors)
    shift_speed_location(state, ws, rng)
    shift_ability_location(state, ws, rng)
    state.n_proposed += 1
    state.iteration += 1


DRAW_FIELDS = ("theta", "tau", "d", "xi", "omega", "mu_d", "mu_xi",
               "sigma_person", "sigma_item", "deviance")


def _record(buf, j, state, dev):
    p, it = state.persons, state.items
    buf["theta"][j] = p.theta
    buf["tau"][j] = p.tau
    buf["d"][j] = it.d
    buf["xi"][j] = it.xi
    buf["omega"][j] = it.omega
    buf["mu_d"][j] = it.mu_d
    buf["mu_xi"][j] = it.mu_xi
    buf["sigma_person"][j] = p.sigma_person
    buf["sigma_item"][j] = it.sigma_item
    buf["deviance"][j] = dev


def run_chain(data, q, structure, config, priors=None, chain_index=0,
              callback=None):
    """Run one chain and return its retained draws.

    The chain's generator is ``make_rng(config.seed, chain_index)``; the same
    inputs always reproduce the same draws.

    Parameters
    ----------
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    PosteriorDraws
        A single-chain container.
    """
    from .diagnostics import PosteriorDraws

    priors = priors or PriorSpec()
    structure = ModelStructure.parse(structure)
    q_a, q_s = effective_q(structure, q)
    ws = Workspace(data, q_a, q_s)
    rng = make_rng(config.seed, chain_index)
    state = initialize_state(data, q, structure, rng, priors,
                             config.initial_proposal_sd)

    n_keep = config.n_retained
    n, n_items = data.shape
    k_a, k_s = q_a.shape[1], q_s.shape[1]
    buf = {
        "theta": np.empty((n_keep, n, k_a)),
        "tau": np.empty((n_keep, n, k_s)),
        "d": np.empty((n_keep, n_items)),
        "xi": np.empty((n_keep, n_items)),
        "omega": np.empty((n_keep, n_items)),
        "mu_d": np.empty(n_keep),
        "mu_xi": np.empty(n_keep),
        "sigma_person": np.empty((n_keep, k_a + k_s, k_a + k_s)),
        "sigma_item": np.empty((n_keep, 2, 2)),
        "deviance": np.empty(n_keep),
    }
    j = 0
    window = 0
    for t in range(config.n_iterations):
        gibbs_iteration(state, ws, rng, priors)
        if t < config.n_burnin:
            if (t + 1) % config.adapt_window == 0:
                window += 1
                adapt_proposals(state, config.adapt_target, window)
            if t + 1 == config.n_burnin:
                state.reset_counters()
        elif (t - config.n_burnin + 1) % config.thin == 0 and j < n_keep:
            _record(buf, j, state, chain_deviance(state, ws))
            j += 1
        if callback is not None:
            callback(state)
    acc = state.acceptance()
    logger.debug("chain %d done: mean acceptance theta=%.3f d=%.3f",
                 chain_index, acc["theta"].mean(), acc["d"].mean())
    return PosteriorDraws(
        chains=[buf], structure=structure, q_ability=q_a, q_speed=q_s,
        acceptance=[{k: v.copy() for k, v in acc.items()}],
    )


def _run_chain_star(args):
    return run_chain(*args)


def run_chains(data, q, structure, config, priors=None, n_jobs=1):
    """Run ``config.n_chains`` chains and merge them.

    With ``n_jobs > 1`` chains run in separate processes; results do not
    depend on ``n_jobs``.
    """
    from .diagnostics import PosteriorDraws

    jobs = [(data, q, structure, config, priors, c)
            for c in range(config.n_chains)]
    if n_jobs > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_run_chain_star, jobs))
    else:
        parts = [_run_chain_star(job) for job in jobs]
    return PosteriorDraws.merge(parts)


def score_persons(data, items, sigma_person, q_ability, q_speed, config,
                  stream=0):
    """Posterior means of person latents with item parameters held fixed.

    Alternates :func:`update_tau` and :func:`update_theta` only, using
    ``make_rng(config.seed, stream)``; proposal scales adapt during burn-in.

    Returns
    -------
    ndarray, shape (N, K_theta + K_tau)
    """
    ws = Workspace(data, q_ability, q_speed)
    rng = make_rng(config.seed, stream)
    n = data.n_persons
    k_a, k_s = ws.q_ability.shape[1], ws.q_speed.shape[1]
    persons = PersonParams(0.5 * rng.standard_normal((n, k_a)),
                           0.5 * rng.standard_normal((n, k_s)),
                           np.asarray(sigma_person, dtype=float).copy())
    state = ChainState(persons=persons, items=items.copy(),
                       theta_sd=np.full((n, k_a), config.initial_proposal_sd),
                       d_sd=np.zeros(0))
    total = np.zeros((n, k_a + k_s))
    kept = 0
    window = 0
    for t in range(config.n_iterations):
        update_tau(state, ws, rng)
        update_theta(state, ws, rng)
        state.n_proposed += 1
        if t < config.n_burnin:
            if (t + 1) % config.adapt_window == 0:
                window += 1
                adapt_proposals(state, config.adapt_target, window)
        elif (t - config.n_burnin + 1) % config.thin == 0:
            total += persons.omega_matrix
            kept += 1
    return total / kept
