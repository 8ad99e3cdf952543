"""Measurement models for joint response accuracy and response times.

Accuracy follows a compensatory multidimensional Rasch kernel and log
response times follow a compensatory multidimensional log-normal kernel.
Both share a binary Q-matrix that maps items to latent dimensions.

Missing cells are encoded as ``nan`` and contribute nothing to any
likelihood.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class ModelStructure(str, enum.Enum):
    """Pairing of ability and speed dimensionality."""

    UA_US = "UA_US"
    MA_US = "MA_US"
    MA_MS = "MA_MS"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown structure {value!r}; expected one of "
                f"{[s.value for s in cls]}"
            ) from None


@dataclass(frozen=True)
class QMatrix:
    """Binary item-by-dimension loading structure."""

    entries: np.ndarray
    item_ids: list = field(default=None)
    dim_labels: list = field(default=None)

    def __post_init__(self):
        q = np.asarray(self.entries)
        if q.ndim != 2:
            raise ValueError(f"Q-matrix must be 2-D, got shape {q.shape}")
        n_items, n_dims = q.shape
        if n_items < 1 or n_dims < 1:
            raise ValueError("Q-matrix needs at least one item and one dimension")
        item_ids = list(self.item_ids) if self.item_ids is not None else [
            f"item{i + 1}" for i in range(n_items)
        ]
        dim_labels = list(self.dim_labels) if self.dim_labels is not None else [
            f"dim{k + 1}" for k in range(n_dims)
        ]
        if len(item_ids) != n_items or len(dim_labels) != n_dims:
            raise ValueError("label lengths do not match Q-matrix shape")
        if not np.all((q == 0) | (q == 1)):
            bad = np.argwhere(~((q == 0) | (q == 1)))[0]
            raise ValueError(
                f"non-binary Q entry {q[tuple(bad)]!r} for item {item_ids[bad[0]]}"
            )
        empty = np.flatnonzero(q.sum(axis=1) == 0)
        if empty.size:
            raise ValueError(
                f"item {item_ids[empty[0]]} loads on no dimension (all-zero row)"
            )
        q = q.astype(float)
        q.setflags(write=False)
        object.__setattr__(self, "entries", q)
        object.__setattr__(self, "item_ids", item_ids)
        object.__setattr__(self, "dim_labels", dim_labels)

    @property
    def n_items(self):
        return self.entries.shape[0]

    @property
    def n_dims(self):
        return self.entries.shape[1]


@dataclass
class ObservedData:
    """Responses and response times, ``nan`` where missing.

    ``rts`` are in seconds; :attr:`log_rts` is computed once on construction.
    """

    responses: np.ndarray
    rts: np.ndarray

    def __post_init__(self):
        y = np.array(self.responses, dtype=float)
        t = np.array(self.rts, dtype=float)
        if y.ndim != 2 or t.ndim != 2:
            raise ValueError("responses and rts must be 2-D (persons x items)")
        if y.shape != t.shape:
            raise ValueError(
                f"responses {y.shape} and rts {t.shape} have different shapes"
            )
        obs_y = ~np.isnan(y)
        if not np.all((y[obs_y] == 0) | (y[obs_y] == 1)):
            raise ValueError("responses must be 0, 1 or missing")
        obs_t = ~np.isnan(t)
        if np.any(t[obs_t] <= 0):
            raise ValueError("observed response times must be strictly positive")
        self.responses = y
        self.rts = t

    @property
    def shape(self):
        return self.responses.shape

    @property
    def n_persons(self):
        return self.responses.shape[0]

    @property
    def n_items(self):
        return self.responses.shape[1]

    @property
    def response_mask(self):
        return ~np.isnan(self.responses)

    @property
    def rt_mask(self):
        return ~np.isnan(self.rts)

    @property
    def log_rts(self):
        if not hasattr(self, "_log_rts"):
            with np.errstate(invalid="ignore"):
                self._log_rts = np.log(self.rts)
        return self._log_rts


@dataclass
class PersonParams:
    """Person latents; the population mean is fixed at zero."""

    theta: np.ndarray
    tau: np.ndarray
    sigma_person: np.ndarray

    @property
    def n_ability(self):
        return self.theta.shape[1]

    @property
    def n_speed(self):
        return self.tau.shape[1]

    @property
    def omega_matrix(self):
        """Stacked ``(theta, tau)`` per person, shape ``(N, K*)``."""
        return np.hstack([self.theta, self.tau])

    def copy(self):
        return PersonParams(self.theta.copy(), self.tau.copy(),
                            self.sigma_person.copy())


@dataclass
class ItemParams:
    d: np.ndarray
    xi: np.ndarray
    omega: np.ndarray
    mu_d: float
    mu_xi: float
    sigma_item: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.omega) <= 0):
            raise ValueError("omega must be strictly positive")

    @property
    def n_items(self):
        return len(self.d)

    @property
    def psi(self):
        """Stacked ``(d, xi)`` per item, shape ``(I, 2)``."""
        return np.column_stack([self.d, self.xi])

    def copy(self):
        return ItemParams(self.d.copy(), self.xi.copy(), self.omega.copy(),
                          float(self.mu_d), float(self.mu_xi),
                          self.sigma_item.copy())


def _inv_logit(x):
    # exp(-logaddexp(0, -x)) is exact to rounding and never overflows
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=float)))


def ra_success_prob(theta_row, q_row, d):
    """Probability of a correct response, ``logistic(q . theta + d)``."""
    theta_row = np.asarray(theta_row, dtype=float)
    q_row = np.asarray(q_row, dtype=float)
    if theta_row.shape != q_row.shape:
        raise ValueError(
            f"theta has {theta_row.shape} entries but q_row has {q_row.shape}"
        )
    return float(_inv_logit(q_row @ theta_row + d))


def rt_mean(xi, q_row, tau_row):
    """Expected log response time, ``xi - q . tau``."""
    q_row = np.asarray(q_row, dtype=float)
    tau_row = np.asarray(tau_row, dtype=float)
    if tau_row.shape != q_row.shape:
        raise ValueError(
            f"tau has {tau_row.shape} entries but q_row has {q_row.shape}"
        )
    return float(xi - q_row @ tau_row)


def rt_log_density(log_t, xi, q_row, tau_row, omega):
    """Normal log-density of ``log_t`` with sd ``1/omega`` around :func:`rt_mean`."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    resid = omega * (np.asarray(log_t, dtype=float) - rt_mean(xi, q_row, tau_row))
    return math.log(omega) - 0.5 * LOG_2PI - 0.5 * resid ** 2


def response_logits(theta, q_ability, d):
    """Matrix of logits ``theta @ Q.T + d`` with shape ``(N, I)``."""
    return np.asarray(theta, dtype=float) @ np.asarray(q_ability, dtype=float).T + d


def rt_means(tau, q_speed, xi):
    """Matrix of expected log RTs ``xi - tau @ Q.T`` with shape ``(N, I)``."""
    return xi - np.asarray(tau, dtype=float) @ np.asarray(q_speed, dtype=float).T


def response_loglik_cells(responses, logits):
    """Bernoulli log-mass per cell; ``0`` where the response is missing."""
    obs = ~np.isnan(responses)
    y = np.where(obs, responses, 0.0)
    # y*eta - log(1 + e^eta), stable for large |eta|
    ll = y * logits - np.logaddexp(0.0, logits)
    return np.where(obs, ll, 0.0)


def rt_loglik_cells(log_rts, means, omega):
    """Normal log-density of log RT per cell; ``0`` where the RT is missing."""
    obs = ~np.isnan(log_rts)
    resid = np.where(obs, log_rts - means, 0.0) * omega
    ll = np.log(omega) - 0.5 * LOG_2PI - 0.5 * resid ** 2
    return np.where(obs, ll, 0.0)


def _check_dims(data, persons, items, q_ability, q_speed):
    n, i = data.shape
    if persons.theta.shape[0] != n or persons.tau.shape[0] != n:
        raise ValueError("person parameters do not match the number of persons")
    if items.n_items != i:
        raise ValueError("item parameters do not match the number of items")
    if np.shape(q_ability) != (i, persons.theta.shape[1]):
        raise ValueError(
            f"ability loadings {np.shape(q_ability)} incompatible with "
            f"{i} items and {persons.theta.shape[1]} ability dimensions"
        )
    if np.shape(q_speed) != (i, persons.tau.shape[1]):
        raise ValueError(
            f"speed loadings {np.shape(q_speed)} incompatible with "
            f"{i} items and {persons.tau.shape[1]} speed dimensions"
        )


def joint_log_likelihood(data, persons, items, q_ability, q_speed):
    """Observed-data log-likelihood of responses and log RTs.

    Parameters
    ----------
    data : ObservedData
    persons : PersonParams
    items : ItemParams
    q_ability, q_speed : ndarray
        Effective loading matrices, see :func:`effective_q`.

    Returns
    -------
    float
        Sum over observed cells of the Bernoulli log-mass plus the normal
        log-density of log RT. Missing cells contribute zero.
    """
    _check_dims(data, persons, items, q_ability, q_speed)
    if data.n_persons == 0:
        return 0.0
    logits = response_logits(persons.theta, q_ability, items.d)
    means = rt_means(persons.tau, q_speed, items.xi)
    ll_y = response_loglik_cells(data.responses, logits)
    ll_t = rt_loglik_cells(data.log_rts, means, items.omega)
    return float(ll_y.sum() + ll_t.sum())


def deviance(data, persons, items, q_ability, q_speed):
    """``-2`` times :func:`joint_log_likelihood`."""
    return -2.0 * joint_log_likelihood(data, persons, items, q_ability, q_speed)


def effective_q(structure, q):
    """Loading matrices ``(q_ability, q_speed)`` implied by ``structure``.

    A unidimensional side is the ``I x 1`` column of ones.
    """
    structure = ModelStructure.parse(structure)
    entries = q.entries if isinstance(q, QMatrix) else np.asarray(q, dtype=float)
    ones = np.ones((entries.shape[0], 1))
    if structure is ModelStructure.MA_MS:
        return entries.copy(), entries.copy()
    if structure is ModelStructure.MA_US:
        return entries.copy(), ones
    return ones, ones.copy()
