"""Experiment configuration: a single versioned JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cocycle import CocycleSystem, fiber_grid
from .errors import ConfigurationError
from .shift import MAX_ALPHABET, ShiftSpec, word_array
from .transfer import Potential
from .variational import OptimizerConfig

FORMAT_VERSION = 1
REQUIRED = ("format", "alphabet_size", "adjacency", "psi", "matrices", "beta_grid", "n_max", "fiber_grid_log2", "bins", "mc_samples")


@dataclass
class ExperimentConfig:
    """Everything a run needs besides the seed, thread count and output directory."""

    name: str
    spec: ShiftSpec
    psi: Potential
    cocycle: CocycleSystem
    beta_grid: list[float]
    n_max: int
    fiber_grid_log2: int
    bins: int
    mc_samples: int
    poe_coefficient: float = -1.0
    markov_memory: int = 2
    mc_extrapolation_n: int = 40
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @property
    def fiber_points(self) -> np.ndarray:
        return fiber_grid(self.fiber_grid_log2)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigurationError(msg)


def _int(doc: dict, key: str, lo: int, hi: int | None = None) -> int:
    v = doc[key]
    _require(isinstance(v, int) and not isinstance(v, bool), f"{key} must be an integer")
    _require(v >= lo and (hi is None or v <= hi), f"{key}={v} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def parse_config(doc: dict, name: str = "system") -> ExperimentConfig:
    """Validate a config document. Raises :class:`ConfigurationError` on any problem."""
    _require(isinstance(doc, dict), "config must be a JSON object")
    missing = [k for k in REQUIRED if k not in doc]
    _require(not missing, f"missing keys: {missing}")
    _require(doc["format"] == FORMAT_VERSION, f"unsupported format {doc['format']!r}; expected {FORMAT_VERSION}")
    S = _int(doc, "alphabet_size", 1, MAX_ALPHABET)

    adj = np.asarray(doc["adjacency"])
    if adj.ndim == 1 and adj.size == S * S:
        adj = adj.reshape(S, S)
    _require(adj.shape == (S, S), f"adjacency must be {S}x{S}")
    _require(np.isin(adj, (0, 1)).all(), "adjacency entries must be 0 or 1")
    spec = ShiftSpec(adj.astype(bool))
    spec.require_irreducible()

    psi_doc = doc["psi"]
    _require(isinstance(psi_doc, dict) and {"memory", "values"} <= psi_doc.keys(), "psi needs memory and values")
    k = _int(psi_doc, "memory", 1, 8)
    vals = np.asarray(psi_doc["values"], dtype=float)
    _require(vals.size == S**k, f"psi.values must have {S**k} entries, got {vals.size}")
    psi = Potential(vals.reshape((S,) * k))

    mat_doc = doc["matrices"]
    _require(isinstance(mat_doc, dict) and {"window", "entries"} <= mat_doc.keys(), "matrices needs window and entries")
    window = mat_doc["window"]
    _require(len(window) == 2 and all(isinstance(w, int) and w >= 0 for w in window), "matrices.window must be [past, future]")
    L = window[0] + window[1] + 1
    entries = mat_doc["entries"]
    _require(len(entries) == S**L, f"matrices.entries must list {S**L} 4-tuples")
    mats = np.full((S**L, 2, 2), np.nan)
    for i, e in enumerate(entries):
        if e is None:
            continue
        _require(len(e) == 4, f"matrices.entries[{i}] must have 4 numbers")
        mats[i] = np.asarray(e, dtype=float).reshape(2, 2)
    mats = mats.reshape((S,) * L + (2, 2))
    admissible = word_array(spec, L).astype(np.intp)
    _require(np.isfinite(mats[tuple(admissible.T)]).all(), "matrices missing at an admissible window word")
    cocycle = CocycleSystem(spec, (window[0], window[1]), mats)

    betas = doc["beta_grid"]
    _require(isinstance(betas, list) and len(betas) > 0, "beta_grid must be a non-empty list")
    _require(all(0 < float(b) <= 1 for b in betas), "beta values must lie in (0, 1]")

    opt = OptimizerConfig(**doc.get("optimizer", {}))
    return ExperimentConfig(
        name=str(doc.get("name", name)),
        spec=spec,
        psi=psi,
        cocycle=cocycle,
        beta_grid=[float(b) for b in betas],
        n_max=_int(doc, "n_max", 1, 24),
        fiber_grid_log2=_int(doc, "fiber_grid_log2", 1, 16),
        bins=_int(doc, "bins", 1, 1 << 16),
        mc_samples=_int(doc, "mc_samples", 1000),
        poe_coefficient=float(doc.get("poe_coefficient", -1.0)),
        markov_memory=int(doc.get("markov_memory", 2)),
        mc_extrapolation_n=int(doc.get("mc_extrapolation_n", 40)),
        optimizer=opt,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p} is not valid JSON: {exc}") from exc
    try:
        return parse_config(doc, name=p.stem)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{p}: {exc}") from exc


def system_document(name, spec: ShiftSpec, psi: Potential, cocycle: CocycleSystem, **settings) -> dict:
    """Config document for a system, the inverse of :func:`parse_config`."""
    S = spec.alphabet_size
    L = cocycle.window_length
    mats = cocycle.matrices.reshape(S**L, 4)
    doc = {
        "format": FORMAT_VERSION,
        "name": name,
        "alphabet_size": S,
        "adjacency": spec.adjacency.astype(int).tolist(),
        "psi": {"memory": psi.memory, "values": psi.values.ravel().tolist()},
        "matrices": {
            "window": list(cocycle.window),
            "entries": [None if not np.isfinite(m).all() else m.tolist() for m in mats],
        },
        "beta_grid": [0.5, 1.0],
        "n_max": 12,
        "fiber_grid_log2": 8,
        "bins": 256,
        "mc_samples": 10000,
    }
    doc.update(settings)
    return doc
