"""Run configuration: JSON file plus ``key.path=value`` overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .io import config_hash, load_qmatrix
from .model import ModelStructure
from .sampler import PriorSpec, SamplerConfig
from .simulate import SimDesign, default_design

COMMANDS = ("simulate", "fit", "compare", "recover")

_DESIGN_KWARGS = ("n_persons", "n_items", "n_dims", "structure", "var_ability",
                  "var_speed", "r_ability", "r_speed", "r_cross", "omega",
                  "missing_rate")
_DESIGN_EXTRAS = ("mu_d", "mu_xi", "sigma_item", "omega_mode")


def parse_override(text):
    """``a.b.c=value`` into a key path and a value (JSON if it parses)."""
    if "=" not in text:
        raise ValueError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(raw, overrides):
    out = copy.deepcopy(raw)
    for text in overrides:
        path, value = parse_override(text)
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValueError(f"override {text!r} descends into a non-mapping")
        node[path[-1]] = value
    return out


def _resolve(path, base):
    if path is None:
        return None
    p = Path(path)
    return p if p.is_absolute() or base is None else base / p


def design_from_dict(d, base=None):
    """Build a :class:`SimDesign` from a config mapping.

    With ``sigma_person`` present the mapping is a full explicit design;
    otherwise it holds keyword arguments of :func:`default_design`. A
    ``qmatrix`` entry is a path to a Q-matrix CSV.
    """
    d = dict(d)
    q = None
    if d.get("qmatrix"):
        q = load_qmatrix(_resolve(d.pop("qmatrix"), base))
    else:
        d.pop("qmatrix", None)
    if "sigma_person" in d:
        if q is not None:
            d["q"] = q.entries.tolist()
            d["item_ids"], d["dim_labels"] = q.item_ids, q.dim_labels
        return SimDesign.from_dict(d)
    unknown = set(d) - set(_DESIGN_KWARGS) - set(_DESIGN_EXTRAS)
    if unknown:
        raise ValueError(f"unknown design keys: {sorted(unknown)}")
    kwargs = {k: d[k] for k in _DESIGN_KWARGS if k in d}
    if q is not None:
        kwargs["q"] = q
        kwargs.pop("n_items", None)
        kwargs.pop("n_dims", None)
    design = default_design(**kwargs)
    extras = {k: d[k] for k in _DESIGN_EXTRAS if k in d}
    if "sigma_item" in extras:
        extras["sigma_item"] = np.asarray(extras["sigma_item"], dtype=float)
    if "omega_mode" in extras:
        extras["omega_mode"] = tuple(extras["omega_mode"])
    return replace(design, **extras) if extras else design


def _dataclass_from(cls, d, what):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass
class RunConfig:
    command: str
    structure: ModelStructure = ModelStructure.MA_MS
    responses: Path = None
    rts: Path = None
    qmatrix: Path = None
    output_dir: Path = Path("mhrt-out")
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    priors: PriorSpec = field(default_factory=PriorSpec)
    design: SimDesign = None
    n_replications: int = 10
    base_seed: int = 0
    psrf_threshold: float = 1.2
    ppmc_every: int = 10
    n_jobs: int = 1
    raw: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.command in ("fit", "compare"):
            missing = [k for k in ("responses", "rts", "qmatrix")
                       if getattr(self, k) is None]
            if missing:
                raise ValueError(f"{self.command} requires data paths: {missing}")
        if self.command in ("simulate", "recover") and self.design is None:
            raise ValueError(f"{self.command} requires a design")
        if self.ppmc_every < 1:
            raise ValueError("ppmc_every must be at least 1")
        if self.n_replications < 1:
            raise ValueError("n_replications must be at least 1")
        return self

    @property
    def hash(self):
        # the destination does not change results, so it is left out
        return config_hash({k: v for k, v in self.raw.items() if k != "output_dir"})

    def provenance(self, seed=None):
        return {"config_hash": self.hash,
                "seed": self.sampler.seed if seed is None else seed}

    @classmethod
    def from_dict(cls, command, raw, base=None):
        raw = copy.deepcopy(raw)
        data = raw.get("data", {})
        sampler = _dataclass_from(SamplerConfig, raw.get("sampler", {}), "sampler")
        priors_d = dict(raw.get("priors", {}))
        for key in ("r_person", "r_item"):
            if priors_d.get(key) is not None:
                priors_d[key] = np.asarray(priors_d[key], dtype=float)
        priors = _dataclass_from(PriorSpec, priors_d, "priors")
        design = design_from_dict(raw["design"], base) if raw.get("design") else None
        if design is None and command in ("simulate", "recover"):
            design = default_design()
        rec = raw.get("recover", {})
        cfg = cls(
            command=command,
            structure=ModelStructure.parse(raw.get("structure", "MA_MS")),
            responses=_resolve(data.get("responses"), base),
            rts=_resolve(data.get("rts"), base),
            qmatrix=_resolve(data.get("qmatrix"), base),
            output_dir=_resolve(raw.get("output_dir", "mhrt-out"), base),
            sampler=sampler,
            priors=priors,
            design=design,
            n_replications=int(rec.get("n_replications", 10)),
            base_seed=int(rec.get("base_seed", 0)),
            psrf_threshold=float(rec.get("psrf_threshold", 1.2)),
            ppmc_every=int(raw.get("ppmc_every", 10)),
            n_jobs=int(raw.get("n_jobs", 1)),
            raw={"command": command, **raw},
        )
        return cfg.validate()


def load_config(command, path=None, overrides=()):
    """Read an optional JSON config, apply overrides, validate."""
    raw, base = {}, None
    if path is not None:
        path = Path(path)
        raw = json.loads(path.read_text())
        base = path.parent
    raw = apply_overrides(raw, overrides)
    return RunConfig.from_dict(command, raw, base)
