"""State-action aggregation and the Taylor-approximation oracle.

An agent's state-action descriptor is z = (s_part, a_part).  A weighted
neighborhood aggregate z_chi = sum_k w_k z_k serves as the expansion point
for approximating the weighted pairwise value

    sum_k w_k Q(z_j, z_k)
      = Q(z_j, z_chi) + grad Q(z_j, z_chi) . sum_k w_k (z_k - z_chi) + R
      = Q(z_j, z_chi) + 0 + R

where the first-order term vanishes identically because the deltas are
centered.  With every s_part and a_part normalized to unit length the
remainder R is bounded by a symmetric interval [-4M, 4M] for any Q whose
Hessian in z_k has spectral norm at most M.  ``SmoothQOracle`` is a
synthetic quadratic Q with a constant Hessian, so M is exact and the
decomposition can be verified numerically term by term.

The Q-network consumes four independently unit-normalized blocks: own
state, own action, aggregated neighbor state, aggregated neighbor action
(``build_q_input``).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .graph import WeightVector

ZERO_NORM_EPS = 1e-12


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / |v|, or the zero vector when |v| is negligible."""
    n = np.linalg.norm(v)
    if n > ZERO_NORM_EPS:
        return v / n
    return np.zeros_like(v)


@dataclass
class ZVector:
    """One agent's (state features, action one-hot) pair."""

    s_part: np.ndarray
    a_part: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.s_part, self.a_part])


@dataclass
class NormalizedInputs:
    """The four unit blocks fed to a Q or policy network.

    When the neighborhood is empty, both nbr blocks are zero vectors and
    ``empty_neighborhood`` is set; the flag is appended to the flattened
    network input so the network can tell the two cases apart.
    """

    own_s: np.ndarray
    own_a: np.ndarray
    nbr_s: np.ndarray
    nbr_a: np.ndarray
    empty_neighborhood: bool

    def concat(self) -> np.ndarray:
        flag = 1.0 if self.empty_neighborhood else 0.0
        return np.concatenate([self.own_s, self.own_a, self.nbr_s, self.nbr_a, [flag]])


def weighted_aggregate(w: WeightVector, zs: dict[int, ZVector]) -> ZVector:
    """Componentwise weighted sum of neighbor z-vectors."""
    missing = [k for k in w.weights if k not in zs]
    if missing:
        raise ValueError(f"missing z-vectors for neighbors {missing}")
    items = sorted(w.weights.items())
    s = sum(wk * zs[k].s_part for k, wk in items)
    a = sum(wk * zs[k].a_part for k, wk in items)
    return ZVector(np.asarray(s), np.asarray(a))


def build_q_input(own: ZVector, w: WeightVector | None,
                  neighbor_zs: dict[int, ZVector] | None = None) -> NormalizedInputs:
    """Normalize own and aggregated-neighbor blocks to unit length."""
    own_s = l2_normalize(own.s_part)
    own_a = l2_normalize(own.a_part)
    if w is None or not w.weights:
        return NormalizedInputs(
            own_s, own_a,
            np.zeros_like(own.s_part), np.zeros_like(own.a_part),
            empty_neighborhood=True,
        )
    agg = weighted_aggregate(w, neighbor_zs or {})
    return NormalizedInputs(
        own_s, own_a, l2_normalize(agg.s_part), l2_normalize(agg.a_part),
        empty_neighborhood=False,
    )


class SmoothQOracle:
    """Quadratic pairwise value Q(z_j, z_k) = c.z_j + z_j A z_k + 0.5 z_k H z_k.

    The Hessian in z_k is the constant symmetric matrix H, so the
    smoothness constant M is exactly the spectral norm of H and the
    Lagrange form of the remainder holds at every interior point.
    """

    def __init__(self, c: np.ndarray, a: np.ndarray, h: np.ndarray):
        if not np.allclose(h, h.T):
            raise ValueError("H must be symmetric")
        self.c = c
        self.a = a
        self.h = h
        self.m = float(np.max(np.abs(np.linalg.eigvalsh(h)))) if h.size else 0.0

    @classmethod
    def random(cls, dim: int, m: float, seed: int = 0) -> "SmoothQOracle":
        """Dense random oracle whose Hessian has spectral norm exactly m."""
        rng = np.random.default_rng(seed)
        c = rng.normal(size=dim)
        a = rng.normal(size=(dim, dim))
        h = rng.normal(size=(dim, dim))
        h = (h + h.T) / 2
        if m == 0.0:
            h = np.zeros((dim, dim))
        else:
            h *= m / np.max(np.abs(np.linalg.eigvalsh(h)))
        return cls(c, a, h)

    @classmethod
    def rank_one(cls, direction: np.ndarray, m: float) -> "SmoothQOracle":
        """Oracle with H = m * u u^T along a chosen unit direction."""
        u = direction / np.linalg.norm(direction)
        dim = u.size
        return cls(np.zeros(dim), np.zeros((dim, dim)), m * np.outer(u, u))

    def value(self, z_j: np.ndarray, z_k: np.ndarray) -> float:
        return float(self.c @ z_j + z_j @ self.a @ z_k + 0.5 * z_k @ self.h @ z_k)

    def grad_zk(self, z_j: np.ndarray, z_k: np.ndarray) -> np.ndarray:
        return self.a.T @ z_j + self.h @ z_k


@dataclass
class RemainderReport:
    """Term-by-term decomposition; exact == zeroth + first_order + remainder."""

    exact: float
    zeroth: float
    first_order: float
    remainder: float
    z_chi: np.ndarray
    deltas: list[np.ndarray]
    lagrange_points: list[tuple[np.ndarray, float]]


def taylor_decompose(oracle: SmoothQOracle, z_j: ZVector, w: WeightVector,
                     neighbor_zs: dict[int, ZVector]) -> RemainderReport:
    """Split the weighted pairwise sum into zeroth/first/remainder terms.

    The oracle's Hessian is constant, so the Lagrange point of each
    neighbor's remainder term is valid at any epsilon in [0, 1]; the
    midpoint is reported.
    """
    if not w.weights:
        raise ValueError("decomposition needs a nonempty neighborhood")
    order = sorted(w.weights)
    wts = w.as_array(order)
    zj = z_j.concat()
    zks = np.stack([neighbor_zs[k].concat() for k in order])
    z_chi = wts @ zks
    exact = float(sum(wk * oracle.value(zj, zk) for wk, zk in zip(wts, zks)))
    zeroth = oracle.value(zj, z_chi)
    deltas = [zk - z_chi for zk in zks]
    first_order = float(oracle.grad_zk(zj, z_chi) @ (wts @ np.stack(deltas)))
    remainder = exact - zeroth - first_order
    lagrange = [(z_chi + 0.5 * d, 0.5) for d in deltas]
    return RemainderReport(exact, zeroth, first_order, remainder, z_chi, deltas, lagrange)


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _sample_config(rng: np.random.Generator, dim_s: int, dim_a: int,
                   n_neighbors: int) -> tuple[ZVector, WeightVector, dict[int, ZVector]]:
    zj = ZVector(_random_unit(rng, dim_s), _random_unit(rng, dim_a))
    zs = {
        k: ZVector(_random_unit(rng, dim_s), _random_unit(rng, dim_a))
        for k in range(n_neighbors)
    }
    logits = rng.normal(size=n_neighbors)
    expd = np.exp(logits - logits.max())
    wts = expd / expd.sum()
    w = WeightVector(-1, dict(enumerate(wts.tolist())))
    return zj, w, zs


def _adversarial_configs(oracle: SmoothQOracle, dim_s: int, dim_a: int,
                         n_weights: int = 33) -> list[tuple[ZVector, WeightVector, dict[int, ZVector]]]:
    """Antipodal neighbor pairs aligned with the Hessian's top eigenvector.

    These drive the remainder to its supremum over admissible inputs:
    weights (1/2, 1/2) with z_2 = -z_1 center the aggregate at the origin
    and maximize the weighted spread of the deltas.
    """
    eigvals, eigvecs = np.linalg.eigh(oracle.h)
    top = eigvecs[:, np.argmax(np.abs(eigvals))]
    s_dir, a_dir = top[:dim_s], top[dim_s:]
    # Align each block with the eigenvector as far as unit-norm parts allow.
    s0 = s_dir / np.linalg.norm(s_dir) if np.linalg.norm(s_dir) > ZERO_NORM_EPS else _fallback(dim_s)
    a0 = a_dir / np.linalg.norm(a_dir) if np.linalg.norm(a_dir) > ZERO_NORM_EPS else _fallback(dim_a)
    z1 = ZVector(s0, a0)
    z2 = ZVector(-s0, -a0)
    zj = ZVector(_fallback(dim_s), _fallback(dim_a))
    configs = []
    for t in np.linspace(0.01, 0.99, n_weights):
        w = WeightVector(-1, {0: float(t), 1: float(1 - t)})
        configs.append((zj, w, {0: z1, 1: z2}))
    return configs


def _fallback(dim: int) -> np.ndarray:
    v = np.zeros(dim)
    v[0] = 1.0
    return v


def remainder_bound_check(oracle: SmoothQOracle, dim_s: int, dim_a: int,
                          n_samples: int, seed: int = 0, bound_factor: float = 4.0,
                          include_adversarial: bool = True) -> dict:
    """Sample valid configurations and count violations of |R| <= factor * M.

    Draws z_j and neighbor z's with independently unit-normalized s/a
    parts and random-softmax weights, plus (by default) the antipodal
    worst-case constructions, which reach |R| = M.
    """
    rng = np.random.default_rng(seed)
    bound = bound_factor * oracle.m
    max_abs = 0.0
    violations = 0
    configs: list[tuple[ZVector, WeightVector, dict[int, ZVector]]] = []
    if include_adversarial and n_samples > 0:
        configs.extend(_adversarial_configs(oracle, dim_s, dim_a))
    for _ in range(n_samples):
        configs.append(_sample_config(rng, dim_s, dim_a, int(rng.integers(1, 9))))
    for zj, w, zs in configs:
        r = abs(taylor_decompose(oracle, zj, w, zs).remainder)
        max_abs = max(max_abs, r)
        if r > bound + 1e-12:
            violations += 1
    return {
        "M": oracle.m,
        "samples": len(configs),
        "max_abs_remainder": max_abs,
        "bound": bound,
        "violations": violations,
    }


def bound_report_csv(reports: list[dict]) -> str:
    """CSV rendering of one or more bound-check reports."""
    out = io.StringIO()
    out.write("M,samples,max_abs_remainder,bound,violations\n")
    for r in reports:
        out.write(
            f"{r['M']:.6g},{r['samples']},{r['max_abs_remainder']:.12g},"
            f"{r['bound']:.6g},{r['violations']}\n"
        )
    return out.getvalue()


def adversarial_remainder_search(dim_s: int, dim_a: int, m: float,
                                 n_random: int = 2000, seed: int = 0) -> dict:
    """Brute-force search for the largest |remainder| over valid inputs.

    Searches random configurations, random delta directions around
    antipodal pairs, and the aligned antipodal constructions themselves,
    against the most adversarial constant-Hessian oracle (rank-one along a
    block-balanced direction).  Also reports the largest single-neighbor
    second-order term 0.5 |d H d|, the per-delta quantity the 4M interval
    is derived from; that term approaches 4M while the weighted sum -- the
    actual remainder -- never exceeds M.
    """
    rng = np.random.default_rng(seed)
    s0, a0 = _random_unit(rng, dim_s), _random_unit(rng, dim_a)
    direction = np.concatenate([s0 / np.sqrt(2), a0 / np.sqrt(2)])
    oracle = SmoothQOracle.rank_one(direction, m)

    best = 0.0
    best_term = 0.0
    configs = _adversarial_configs(oracle, dim_s, dim_a, n_weights=201)
    for _ in range(n_random):
        configs.append(_sample_config(rng, dim_s, dim_a, int(rng.integers(2, 9))))
    for zj, w, zs in configs:
        rep = taylor_decompose(oracle, zj, w, zs)
        best = max(best, abs(rep.remainder))
        for d in rep.deltas:
            best_term = max(best_term, abs(0.5 * d @ oracle.h @ d))
    return {
        "M": oracle.m,
        "max_abs_remainder": best,
        "max_single_term": best_term,
        "bound": 4.0 * oracle.m,
    }
