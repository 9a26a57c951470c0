"""Generalized linear model layer and shared perturbation sampling.

The statistical model is linear: theta_i = <w, phi_i> for every decision
dimension i of an instance, where phi_i is a fixed-length feature vector.
The weight dimension therefore never depends on instance size, which is
what lets one w generalize across instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureMatrix",
    "WeightVector",
    "PerturbationConfig",
    "predict_theta",
    "sample_gaussians",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature rows for one instance: one row per decision dimension.

    kappa_phi is an upper bound on the 2-norm of every row, recorded at
    feature time (it enters the theory constants).
    """

    values: np.ndarray
    kappa_phi: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "values", values)
        row_norms = np.sqrt((values * values).sum(axis=1))
        if row_norms.size and row_norms.max() > self.kappa_phi + 1e-9:
            raise ValueError("kappa_phi does not bound the feature row norms")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WeightVector:
    """Model weights w constrained to the box ||w||_inf <= box_radius."""

    w: np.ndarray
    box_radius: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise ValueError("w must be a vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("w must be finite")
        if self.box_radius <= 0:
            raise ValueError("box radius must be positive")
        if np.abs(w).max(initial=0.0) > self.box_radius + 1e-12:
            raise ValueError("w leaves the box")
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PerturbationConfig:
    """Gaussian perturbation of the weights: w + sigma * Z, Z ~ N(0, I)."""

    sigma: float
    nsamples: int
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.nsamples < 1:
            raise ValueError("nsamples must be >= 1")


def _as_weight_array(w) -> np.ndarray:
    if isinstance(w, WeightVector):
        return w.w
    return np.asarray(w, dtype=float)


def predict_theta(w, phi: FeatureMatrix) -> np.ndarray:
    """theta = Phi w, one entry per feature row."""
    wa = _as_weight_array(w)
    if wa.shape[0] != phi.values.shape[1]:
        raise ValueError(
            f"weight dimension {wa.shape[0]} != feature dimension {phi.values.shape[1]}"
        )
    return phi.values @ wa


def sample_gaussians(cfg: PerturbationConfig, dim: int) -> np.ndarray:
    """(nsamples, dim) standard normal draws, deterministic per seed.

    Row k of the matrix is sample k; requesting more samples with the
    same seed extends the matrix without changing earlier rows.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal((cfg.nsamples, dim))


def save_weights(path, wv: WeightVector) -> None:
    payload = {"d": wv.dim, "M": wv.box_radius, "w": [float(v) for v in wv.w]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> WeightVector:
    with open(path) as fh:
        payload = json.load(fh)
    w = np.asarray(payload["w"], dtype=float)
    if w.shape[0] != int(payload["d"]):
        raise ValueError("weight file dimension mismatch")
    return WeightVector(w=w, box_radius=float(payload["M"]))
