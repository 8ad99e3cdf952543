"""Synthetic persons, items, responses and response times from the joint model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import cholesky, mvn_sample_many
from .model import (
    ItemParams,
    ModelStructure,
    ObservedData,
    PersonParams,
    QMatrix,
    _inv_logit,
    effective_q,
    response_logits,
    rt_means,
)


def default_qmatrix(n_items=20, n_dims=2):
    """Loading pattern used by the default design.

    Items cycle through the dimensions one at a time, except every fifth item
    which loads on all of them.
    """
    q = np.zeros((n_items, n_dims))
    for i in range(n_items):
        if n_dims > 1 and i % 5 == 4:
            q[i] = 1.0
        else:
            q[i, i % n_dims] = 1.0
    return QMatrix(q)


def person_covariance(n_ability, n_speed, var_ability=1.0, var_speed=0.3,
                      r_ability=0.7, r_speed=0.7, r_cross=-0.3):
    """Block-structured ``(theta, tau)`` covariance.

    Variances may be scalars or per-dimension sequences; the three correlation
    arguments fill the within-ability, within-speed and cross blocks.
    """
    var = np.concatenate([
        np.broadcast_to(np.asarray(var_ability, dtype=float), (n_ability,)),
        np.broadcast_to(np.asarray(var_speed, dtype=float), (n_speed,)),
    ])
    k = n_ability + n_speed
    corr = np.full((k, k), float(r_cross))
    corr[:n_ability, :n_ability] = r_ability
    corr[n_ability:, n_ability:] = r_speed
    np.fill_diagonal(corr, 1.0)
    sd = np.sqrt(var)
    return corr * np.outer(sd, sd)


@dataclass
class SimDesign:
    """Generating design for one synthetic dataset.

    ``omega_mode`` is ``("constant", value)`` or ``("lognormal", mean, sd)``
    where the lognormal arguments describe ``log(omega)``.
    """

    n_persons: int
    q: QMatrix
    structure: ModelStructure
    sigma_person: np.ndarray
    mu_d: float = 0.0
    mu_xi: float = 4.3
    sigma_item: np.ndarray = field(
        default_factory=lambda: np.array([[1.0, -0.2], [-0.2, 0.25]]))
    omega_mode: tuple = ("constant", 2.0)
    missing_rate: float = 0.0

    def __post_init__(self):
        self.structure = ModelStructure.parse(self.structure)
        if not isinstance(self.q, QMatrix):
            self.q = QMatrix(np.asarray(self.q))
        self.sigma_person = np.asarray(self.sigma_person, dtype=float)
        self.sigma_item = np.asarray(self.sigma_item, dtype=float)
        k_a, k_s = self.n_ability, self.n_speed
        if self.sigma_person.shape != (k_a + k_s, k_a + k_s):
            raise ValueError(
                f"sigma_person has shape {self.sigma_person.shape}, structure "
                f"{self.structure.value} needs {k_a + k_s}x{k_a + k_s}"
            )
        if self.sigma_item.shape != (2, 2):
            raise ValueError("sigma_item must be 2x2")
        cholesky(self.sigma_person)
        cholesky(self.sigma_item)
        self.omega_mode = tuple(self.omega_mode)
        kind = self.omega_mode[0]
        if kind == "constant":
            if not self.omega_mode[1] > 0:
                raise ValueError("constant omega must be positive")
        elif kind != "lognormal":
            raise ValueError(f"unknown omega_mode {kind!r}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must be in [0, 1)")
        if self.n_persons < 0:
            raise ValueError("n_persons must be nonnegative")

    @property
    def q_ability(self):
        return effective_q(self.structure, self.q)[0]

    @property
    def q_speed(self):
        return effective_q(self.structure, self.q)[1]

    @property
    def n_ability(self):
        return self.q_ability.shape[1]

    @property
    def n_speed(self):
        return self.q_speed.shape[1]

    @property
    def n_items(self):
        return self.q.n_items

    def to_dict(self):
        return {
            "n_persons": int(self.n_persons),
            "q": self.q.entries.astype(int).tolist(),
            "item_ids": list(self.q.item_ids),
            "dim_labels": list(self.q.dim_labels),
            "structure": self.structure.value,
            "sigma_person": self.sigma_person.tolist(),
            "mu_d": float(self.mu_d),
            "mu_xi": float(self.mu_xi),
            "sigma_item": self.sigma_item.tolist(),
            "omega_mode": list(self.omega_mode),
            "missing_rate": float(self.missing_rate),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        q = QMatrix(np.asarray(d.pop("q"), dtype=float),
                    d.pop("item_ids", None), d.pop("dim_labels", None))
        return cls(q=q, **d)


def default_design(n_persons=500, n_items=20, n_dims=2, structure="MA_MS",
                   var_ability=1.0, var_speed=0.3, r_ability=0.7, r_speed=0.7,
                   r_cross=-0.3, omega=2.0, missing_rate=0.0, q=None):
    """Desk-scale design: N=500, I=20, K=2, constant omega of 2."""
    q = default_qmatrix(n_items, n_dims) if q is None else q
    structure = ModelStructure.parse(structure)
    q_a, q_s = effective_q(structure, q)
    sigma = person_covariance(q_a.shape[1], q_s.shape[1], var_ability,
                              var_speed, r_ability, r_speed, r_cross)
    return SimDesign(n_persons=n_persons, q=q, structure=structure,
                     sigma_person=sigma, omega_mode=("constant", float(omega)),
                     missing_rate=missing_rate)


def simulate_persons(design, rng):
    """Zero-mean multivariate normal person latents, split into theta and tau.

    Consumes an ``(N, K*)`` block of standard normals.
    """
    k_a = design.n_ability
    draws = mvn_sample_many(np.zeros(design.sigma_person.shape[0]),
                            design.sigma_person, design.n_persons, rng)
    return PersonParams(theta=draws[:, :k_a], tau=draws[:, k_a:],
                        sigma_person=design.sigma_person.copy())


def simulate_items(design, rng):
    """Bivariate normal ``(d, xi)`` per item, then omega per ``omega_mode``.

    Consumes an ``(I, 2)`` block of normals, then ``I`` normals when omega is
    lognormal.
    """
    psi = mvn_sample_many(np.array([design.mu_d, design.mu_xi]),
                          design.sigma_item, design.n_items, rng)
    kind = design.omega_mode[0]
    if kind == "constant":
        omega = np.full(design.n_items, float(design.omega_mode[1]))
    else:
        mean, sd = design.omega_mode[1], design.omega_mode[2]
        omega = np.exp(mean + sd * rng.standard_normal(design.n_items))
    return ItemParams(d=psi[:, 0].copy(), xi=psi[:, 1].copy(), omega=omega,
                      mu_d=float(design.mu_d), mu_xi=float(design.mu_xi),
                      sigma_item=design.sigma_item.copy())


def response_probabilities(persons, items, q_ability):
    return _inv_logit(response_logits(persons.theta, q_ability, items.d))


def simulate_responses(persons, items, q_ability, rng):
    """Bernoulli responses; consumes an ``(N, I)`` block of uniforms."""
    p = response_probabilities(persons, items, q_ability)
    u = rng.random(p.shape)
    return (u < p).astype(float)


def simulate_rts(persons, items, q_speed, rng):
    """Log-normal response times in seconds; consumes ``(N, I)`` normals."""
    means = rt_means(persons.tau, q_speed, items.xi)
    noise = rng.standard_normal(means.shape) / items.omega
    return np.exp(means + noise)


def inject_missing(data, missing_rate, rng):
    """Blank each RT cell independently with probability ``missing_rate``.

    Responses are untouched. Consumes an ``(N, I)`` block of uniforms.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise ValueError("missing_rate must be in [0, 1)")
    rts = data.rts.copy()
    u = rng.random(rts.shape)
    rts[u < missing_rate] = np.nan
    return ObservedData(data.responses.copy(), rts)


def simulate_dataset(design, rng):
    """Persons, items, responses, RTs and missingness in that order.

    Returns
    -------
    data : ObservedData
    persons : PersonParams
    items : ItemParams
    """
    persons = simulate_persons(design, rng)
    items = simulate_items(design, rng)
    q_a, q_s = effective_q(design.structure, design.q)
    y = simulate_responses(persons, items, q_a, rng)
    t = simulate_rts(persons, items, q_s, rng)
    data = ObservedData(y, t)
    if design.missing_rate > 0:
        data = inject_missing(data, design.missing_rate, rng)
    return data, persons, items
