"""Percept-based ownership prediction: one RBF kernel logistic regression
per agent, trained on that agent's explicit claims (fractional targets).

Features per object: 3D position (standardized), one-hot color, and the
log-recency of the agent's last interaction with the object. Recency is
log(1 + seconds-since-interaction) capped at RECENCY_CAP, which separates
owners interacting every ~10 s from non-owners at ~1000 s by about two
decades before standardization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import ObjectState, WorldState

RECENCY_CAP = 1e4
GAMMA = 0.3
LAMBDA = 0.01
MAX_ITER = 500
GRAD_TOL = 1e-6
# color is a distractor for ownership; half-weighting its one-hot block keeps
# position and interaction recency dominant in kernel distances
COLOR_WEIGHT = 0.5


@dataclass
class FeatureStats:
    """Standardization parameters fitted on a training set."""

    mean: np.ndarray  # position dims 0-2 and recency dim 7
    std: np.ndarray
    colors: tuple[str, ...]


def raw_features(obj: ObjectState, agent_id: str, clock: float,
                 colors: tuple[str, ...]) -> np.ndarray:
    x, y, z = obj.position
    onehot = [COLOR_WEIGHT if obj.color == c else 0.0 for c in colors]
    last = obj.last_interaction.get(agent_id)
    if last is None:
        gap = RECENCY_CAP
    else:
        gap = min(max(clock - last, 0.0), RECENCY_CAP)
    return np.array([x, y, z, *onehot, np.log1p(gap)])


def fit_stats(raw: np.ndarray, colors: tuple[str, ...]) -> FeatureStats:
    scaled_dims = [0, 1, 2, 3 + len(colors)]
    mean = np.zeros(raw.shape[1])
    std = np.ones(raw.shape[1])
    mean[scaled_dims] = raw[:, scaled_dims].mean(axis=0)
    spread = raw[:, scaled_dims].std(axis=0)
    spread[spread < 1e-9] = 1.0  # zero-variance guard
    std[scaled_dims] = spread
    return FeatureStats(mean, std, colors)


def featurize(obj: ObjectState, agent_id: str, clock: float,
              stats: FeatureStats) -> np.ndarray:
    raw = raw_features(obj, agent_id, clock, stats.colors)
    return (raw - stats.mean) / stats.std


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(a ** 2, axis=1)[:, None] + np.sum(b ** 2, axis=1)[None, :] \
        - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def klr_loss(weights: np.ndarray, kernel: np.ndarray, targets: np.ndarray,
             lam: float) -> float:
    p = _sigmoid(kernel @ weights)
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    ce = -np.sum(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))
    return float(ce + 0.5 * lam * weights @ kernel @ weights)


def klr_gradient(weights: np.ndarray, kernel: np.ndarray, targets: np.ndarray,
                 lam: float) -> np.ndarray:
    p = _sigmoid(kernel @ weights)
    return kernel @ (p - targets + lam * weights)


def train_klr(kernel: np.ndarray, targets: np.ndarray, lam: float = LAMBDA,
              max_iter: int = MAX_ITER, tol: float = GRAD_TOL
              ) -> tuple[np.ndarray, list[float]]:
    """Full-batch gradient descent on the regularized cross-entropy.

    The step is fixed for the whole run at 1/L, where L bounds the loss
    Hessian (||K||^2/4 + lam*||K||), so the loss is non-increasing.
    """
    top = float(np.linalg.eigvalsh(kernel)[-1])
    top = max(top, 1e-9)
    step = 1.0 / (top * (top / 4.0 + lam))
    weights = np.zeros(len(targets))
    losses = [klr_loss(weights, kernel, targets, lam)]
    for _ in range(max_iter):
        grad = klr_gradient(weights, kernel, targets, lam)
        if np.linalg.norm(grad) <= tol:
            break
        weights = weights - step * grad
        losses.append(klr_loss(weights, kernel, targets, lam))
    return weights, losses


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class KLRModel:
    agent_id: str
    train_features: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    stats: FeatureStats
    gamma: float
    lam: float
    loss_history: list[float]
    # (object_id, target) pairs the model was fitted on; targets must come
    # from explicit claims only, never from rule-based inference
    provenance: tuple[tuple[str, float], ...]

    def predict_features(self, features: np.ndarray) -> float:
        k = rbf_kernel(features[None, :], self.train_features, self.gamma)[0]
        return float(_sigmoid(np.array([k @ self.weights]))[0])


def train_agent_model(world: WorldState, agent_id: str, gamma: float = GAMMA,
                      lam: float = LAMBDA) -> KLRModel | None:
    """Fit one agent's ownership classifier from that agent's claims."""
    pairs = [(obj_id, p) for (obj_id, claimant), p in world.claims.items()
             if claimant == agent_id and obj_id in world.objects]
    if not pairs:
        return None
    colors = tuple(world.vocab.constants("color"))
    raw = np.array([raw_features(world.objects[obj_id], agent_id, world.clock, colors)
                    for obj_id, _ in pairs])
    stats = fit_stats(raw, colors)
    features = (raw - stats.mean) / stats.std
    targets = np.array([p for _, p in pairs])
    kernel = rbf_kernel(features, features, gamma)
    weights, losses = train_klr(kernel, targets, lam)
    return KLRModel(agent_id, features, targets, weights, stats, gamma, lam,
                    losses, tuple(pairs))


class OwnershipPredictor:
    """Holds the per-agent models and retrains them as claims arrive."""

    def __init__(self, gamma: float = GAMMA, lam: float = LAMBDA):
        self.gamma = gamma
        self.lam = lam
        self.models: dict[str, KLRModel | None] = {}

    def refresh(self, world: WorldState, agents) -> None:
        for agent_id in agents:
            self.models[agent_id] = train_agent_model(world, agent_id,
                                                      self.gamma, self.lam)

    def predict(self, world: WorldState, object_id: str, agent_id: str) -> float | None:
        model = self.models.get(agent_id)
        if model is None:
            return None
        obj = world.objects[object_id]
        features = featurize(obj, agent_id, world.clock, model.stats)
        return model.predict_features(features)
