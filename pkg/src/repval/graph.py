"""Neighbor sets and learned representation weights.

Each agent j has a neighbor set N(j): every living agent (either team)
within Chebyshev distance ``radius`` of j.  A single-head attention layer
with shared parameters turns per-agent feature vectors into a convex
weight vector over N(j):

    e_k = leaky_relu(a . [W h_j, W h_k])
    w_k = softmax_k(e_k)

so the weights are nonnegative and sum to one by construction.  The
uniform variant (every weight 1 / |N(j)|) recovers plain neighbor-mean
aggregation and is what the MF* baselines use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import GridWorld


@dataclass
class NeighborSet:
    owner: int
    members: list[int]

    @property
    def size(self) -> int:
        return len(self.members)


def neighbors(world: GridWorld, agent_id: int, radius: int) -> NeighborSet:
    """Living agents within Chebyshev distance ``radius``, excluding the owner."""
    me = world.agents.get(agent_id)
    if me is None or not me.alive:
        raise ValueError(f"agent {agent_id} is dead or unknown")
    x, y = me.pos
    members = [
        a.id
        for a in world.living_agents()
        if a.id != agent_id
        and max(abs(a.pos[0] - x), abs(a.pos[1] - y)) <= radius
    ]
    return NeighborSet(agent_id, sorted(members))


@dataclass
class AttentionParams:
    """Shared single-head attention: projection w (F x E) and scorer a (2E)."""

    w: np.ndarray
    a: np.ndarray
    leaky_slope: float = 0.2
    _folded: tuple[np.ndarray, np.ndarray] | None = None

    def folded(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached (w @ a1, w @ a2) so scoring needs no embedding matmul."""
        if self._folded is None:
            e = self.embed_dim
            self._folded = (self.w @ self.a[:e], self.w @ self.a[e:])
        return self._folded

    def mark_updated(self) -> None:
        self._folded = None

    @classmethod
    def init(cls, feature_dim: int, embed_dim: int = 16,
             rng: np.random.Generator | int = 0,
             leaky_slope: float = 0.2) -> "AttentionParams":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        bw = 1.0 / np.sqrt(feature_dim)
        ba = 1.0 / np.sqrt(2 * embed_dim)
        return cls(
            w=rng.uniform(-bw, bw, size=(feature_dim, embed_dim)),
            a=rng.uniform(-ba, ba, size=2 * embed_dim),
            leaky_slope=leaky_slope,
        )

    @property
    def embed_dim(self) -> int:
        return self.w.shape[1]


@dataclass
class WeightVector:
    owner: int
    weights: dict[int, float]

    def as_array(self, order: list[int]) -> np.ndarray:
        return np.array([self.weights[k] for k in order])


def _leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def attention_forward(params: AttentionParams, h_owner: np.ndarray,
                      h_members: np.ndarray,
                      need_cache: bool = True) -> tuple[np.ndarray, dict | None]:
    """Raw attention pass returning weights and the cache backward needs.

    h_members is (n, F).  Softmax is computed with max subtraction.  With
    ``need_cache=False`` the scorer is applied in folded form (identical
    weights, no per-member embeddings kept).
    """
    if need_cache:
        e = params.embed_dim
        u_owner = h_owner @ params.w
        u_members = h_members @ params.w
        pre = params.a[:e] @ u_owner + u_members @ params.a[e:]
    else:
        wa1, wa2 = params.folded()
        pre = h_owner @ wa1 + h_members @ wa2
    logits = _leaky_relu(pre, params.leaky_slope)
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    weights = expd / expd.sum()
    if not need_cache:
        return weights, None
    cache = {
        "h_owner": h_owner,
        "h_members": h_members,
        "u_owner": u_owner,
        "u_members": u_members,
        "pre": pre,
        "weights": weights,
    }
    return weights, cache


def attention_backward(params: AttentionParams, cache: dict,
                       d_weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. (w, a) given d loss / d weights."""
    e = params.embed_dim
    wts = cache["weights"]
    d_logits = wts * (d_weights - np.dot(d_weights, wts))
    d_pre = d_logits * np.where(cache["pre"] > 0, 1.0, params.leaky_slope)
    d_a = np.concatenate([d_pre.sum() * cache["u_owner"], d_pre @ cache["u_members"]])
    d_u_owner = d_pre.sum() * params.a[:e]
    d_u_members = np.outer(d_pre, params.a[e:])
    d_w = np.outer(cache["h_owner"], d_u_owner) + cache["h_members"].T @ d_u_members
    return d_w, d_a


def attention_weights(features: dict[int, np.ndarray], nbrs: NeighborSet,
                      params: AttentionParams) -> WeightVector:
    """Convex weights over nbrs.members from shared attention parameters."""
    if nbrs.size == 0:
        raise ValueError("attention weights need a nonempty neighbor set")
    if nbrs.owner not in features:
        raise ValueError(f"missing feature vector for owner {nbrs.owner}")
    for k in nbrs.members:
        if k not in features:
            raise ValueError(f"missing feature vector for neighbor {k}")
    h_members = np.stack([features[k] for k in nbrs.members])
    wts, _ = attention_forward(params, features[nbrs.owner], h_members)
    return WeightVector(nbrs.owner, dict(zip(nbrs.members, wts.tolist())))


def uniform_weights(nbrs: NeighborSet) -> WeightVector:
    """Every neighbor weighted 1/N; the neighbor-mean baseline."""
    if nbrs.size == 0:
        raise ValueError("uniform weights need a nonempty neighbor set")
    share = 1.0 / nbrs.size
    return WeightVector(nbrs.owner, {k: share for k in nbrs.members})
