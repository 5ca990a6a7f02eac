"""The six learners and the self-play training loop.

Off-policy Q-learning family (replay buffer, target network, Boltzmann
exploration):

  * IL  -- independent learning, neighbor input blocks always zero,
  * MFQ -- neighbors aggregated with uniform weights (neighbor mean),
  * RFQ -- neighbors aggregated with learned attention weights.

On-policy actor-critic family (episodic updates, critic first then actor):

  * AC / MFAC / RFAC with the same three neighbor modes.

All variants share one network body: the input is the concatenation of
the four unit-normalized blocks (own state, own action, neighbor state,
neighbor action) plus an empty-neighborhood flag, and the output is one
value (or logit) per action.  Action one-hots always carry the *previous*
step's action -- fresh joint actions do not exist at decision time -- so
the own-action block holds the agent's own last action and the neighbor
block aggregates the neighbors' last actions.

Attention parameters are trained end to end through the TD loss: the
input gradient of the value network is pushed back through the block
normalization, the weighted aggregation and the softmax into the shared
attention projection.  They are initialized from a dedicated seed stream
so that variants with and without attention consume identical randomness
everywhere else (RFQ with neighbor radius 0 reproduces IL bit for bit).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import ZVector, build_q_input, l2_normalize
from .env import N_ACTIONS, GridConfig, GridWorld
from .graph import AttentionParams, attention_backward, attention_forward, neighbors
from .nn import Mlp, save_mlp, load_mlp, sgd_step, soft_update

Q_VARIANTS = ("IL", "MFQ", "RFQ")
AC_VARIANTS = ("AC", "MFAC", "RFAC")
ALL_VARIANTS = Q_VARIANTS + AC_VARIANTS

CHECKPOINT_FORMAT = "repval-checkpoint-v1"


def neighbor_mode(variant: str) -> str:
    if variant in ("IL", "AC"):
        return "none"
    if variant in ("MFQ", "MFAC"):
        return "uniform"
    if variant in ("RFQ", "RFAC"):
        return "attention"
    raise ValueError(f"unknown variant {variant!r}")


def one_hot(index: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[index] = 1.0
    return v


def boltzmann_policy(q_values: np.ndarray, beta: float,
                     paper_sign: bool = False) -> np.ndarray:
    """softmax(beta * Q), computed with max subtraction.

    ``paper_sign`` flips to softmax(-beta * Q), which prefers *low*-value
    actions; it exists only to reproduce the literal published formula for
    comparison and is off by default.
    """
    q = np.asarray(q_values, dtype=float)
    if not np.isfinite(q).all():
        raise ValueError("non-finite action values")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    logits = (-beta if paper_sign else beta) * q
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


def td_target(reward: float, gamma: float, done: bool,
              next_q_values: np.ndarray, beta: float,
              use_max: bool = False, paper_sign: bool = False) -> float:
    """y = r + gamma * v(s') * (1 - done).

    v(s') is the Boltzmann-policy expectation of the next action values
    (or their max when ``use_max``); the values should come from the
    target network.
    """
    if done:
        return float(reward)
    nq = np.asarray(next_q_values, dtype=float)
    if use_max:
        v = float(nq.max())
    else:
        v = float(boltzmann_policy(nq, beta, paper_sign) @ nq)
    return float(reward + gamma * v)


def _batched_boltzmann(q: np.ndarray, beta: float, paper_sign: bool) -> np.ndarray:
    """Row-wise boltzmann_policy for a (batch, actions) matrix."""
    logits = (-beta if paper_sign else beta) * q
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class NeighborSnapshot:
    """Raw neighbor payload captured at decision time.

    feats rows are the neighbors' observation vectors (shared references,
    not copies); last_actions are the actions they took on the previous
    step.  Inputs are rebuilt from this payload at update time so that
    attention weights are always computed with the current parameters.
    """

    ids: tuple[int, ...]
    feats: np.ndarray
    last_actions: np.ndarray


@dataclass
class StepSnapshot:
    obs: np.ndarray
    own_last_action: int
    nbr: NeighborSnapshot | None


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    own_last_action: int
    nbr: NeighborSnapshot | None
    next_nbr: NeighborSnapshot | None


class ReplayBuffer:
    """Fixed-capacity ring with uniform without-replacement batch sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = capacity
        self._items: list[Transition] = []
        self._pos = 0
        self._rng = rng

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._pos] = item
        self._pos = (self._pos + 1) % self.capacity

    def sample(self, batch_size: int) -> list[Transition]:
        if batch_size > len(self._items):
            raise ValueError("not enough transitions to sample")
        idx = self._rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


def _norm_into(out: np.ndarray, v: np.ndarray) -> None:
    """out <- v / |v| (or zeros), avoiding np.linalg.norm overhead."""
    n = np.sqrt(v @ v)
    if n > 1e-12:
        np.divide(v, n, out=out)
    else:
        out[:] = 0.0


def _l2norm_backward(raw: np.ndarray, d_normed: np.ndarray) -> np.ndarray:
    """Gradient through y = v / |v| (zero where the zero-vector rule fired)."""
    n = np.sqrt(raw @ raw)
    if n <= 1e-12:
        return np.zeros_like(raw)
    y = raw / n
    return (d_normed - y * (y @ d_normed)) / n


class _Learner:
    """Machinery shared by the Q-learning and actor-critic families."""

    def __init__(self, variant: str, obs_dim: int, n_actions: int, gamma: float,
                 hidden: tuple[int, ...], embed_dim: int, leaky_slope: float,
                 seed: int):
        self.variant = variant
        self.mode = neighbor_mode(variant)
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        self.gamma = gamma
        self.hidden = tuple(hidden)
        self.seed = seed
        self.input_dim = 2 * (obs_dim + n_actions) + 1
        ss = np.random.SeedSequence(seed)
        net_ss, attn_ss, act_ss, buf_ss = ss.spawn(4)
        self._net_rng = np.random.default_rng(net_ss)
        self._buffer_rng = np.random.default_rng(buf_ss)
        self.rng = np.random.default_rng(act_ss)
        self.attention = (
            AttentionParams.init(obs_dim, embed_dim, np.random.default_rng(attn_ss),
                                 leaky_slope)
            if self.mode == "attention" else None
        )

    # -- acting -----------------------------------------------------------

    def reseed(self, seed: int) -> None:
        """Reset only the action-sampling stream (used per evaluation match)."""
        self.rng = np.random.default_rng(seed)

    def snapshot(self, world: GridWorld, agent_id: int) -> StepSnapshot:
        obs = world.observe(agent_id).vector
        last = world.agents[agent_id].last_action
        if self.mode == "none":
            return StepSnapshot(obs, last, None)
        nbrs = neighbors(world, agent_id, world.config.neighbor_radius)
        if nbrs.size == 0:
            return StepSnapshot(obs, last, None)
        feats = np.stack([world.observe(k).vector for k in nbrs.members])
        acts = np.array([world.agents[k].last_action for k in nbrs.members])
        return StepSnapshot(obs, last, NeighborSnapshot(tuple(nbrs.members), feats, acts))

    def input_vector(self, obs: np.ndarray, own_last: int,
                     nbr: NeighborSnapshot | None,
                     need_grad: bool = False) -> tuple[np.ndarray, dict | None]:
        """Assemble the normalized network input; optionally keep the
        attention cache needed to push gradients back into (w, a)."""
        x = np.empty(self.input_dim)
        record = self._fill_input(x, obs, own_last, nbr, need_grad)
        return x, record

    def _fill_input(self, out: np.ndarray, obs: np.ndarray, own_last: int,
                    nbr: NeighborSnapshot | None, need_grad: bool) -> dict | None:
        """Write the four unit blocks plus the empty flag into ``out``.

        The own-action one-hot is unit length already; everything else is
        normalized in place.
        """
        od, na = self.obs_dim, self.n_actions
        _norm_into(out[:od], obs)
        out[od:od + na] = 0.0
        out[od + own_last] = 1.0
        if nbr is None or self.mode == "none":
            out[od + na:] = 0.0
            out[-1] = 1.0
            return None
        record = None
        if self.mode == "uniform":
            wts = np.full(len(nbr.ids), 1.0 / len(nbr.ids))
        else:
            wts, cache = attention_forward(self.attention, obs, nbr.feats,
                                           need_cache=need_grad)
            if need_grad:
                record = {"cache": cache, "nbr": nbr}
        s_agg = wts @ nbr.feats
        a_agg = np.bincount(nbr.last_actions, weights=wts, minlength=na)
        if record is not None:
            record["s_agg"] = s_agg
            record["a_agg"] = a_agg
        _norm_into(out[od + na:2 * od + na], s_agg)
        _norm_into(out[2 * od + na:2 * (od + na)], a_agg)
        out[-1] = 0.0
        return record

    def decision_input(self, world: GridWorld, agent_id: int) -> np.ndarray:
        snap = self.snapshot(world, agent_id)
        x, _ = self.input_vector(snap.obs, snap.own_last_action, snap.nbr)
        return x

    def act(self, obs, world: GridWorld, agent_id: int, explore: bool) -> int:
        """Pick one action.  ``obs`` may be None (recomputed from the world)."""
        agent = world.agents.get(agent_id)
        if agent is None or not agent.alive:
            raise ValueError(f"cannot act for dead or unknown agent {agent_id}")
        return self._select(self.decision_input(world, agent_id), explore)

    def act_all(self, world: GridWorld, explore: bool) -> dict[int, int]:
        return {aid: self.act(None, world, aid, explore) for aid in world.living_ids()}

    def select_batch(self, xs: np.ndarray, explore: bool) -> list[int]:
        raise NotImplementedError

    def _select(self, x: np.ndarray, explore: bool) -> int:
        return self.select_batch(x[None, :], explore)[0]

    def _sample_rows(self, probs: np.ndarray) -> list[int]:
        # inverse-CDF sampling; one uniform draw per row, in row order
        out = []
        for row in probs:
            c = np.cumsum(row)
            out.append(int(np.searchsorted(c, self.rng.random() * c[-1], side="right")))
        return out

    # -- update-side input building ----------------------------------------

    def _update_inputs(self, batch: list[Transition], need_grad: bool
                       ) -> tuple[np.ndarray, np.ndarray, list[tuple[int, dict]]]:
        xs = np.empty((len(batch), self.input_dim))
        xns = np.empty_like(xs)
        records: list[tuple[int, dict]] = []
        for i, t in enumerate(batch):
            rec = self._fill_input(xs[i], t.obs, t.own_last_action, t.nbr, need_grad)
            self._fill_input(xns[i], t.next_obs, t.action, t.next_nbr, False)
            if rec is not None:
                records.append((i, rec))
        return xs, xns, records

    def _attention_step(self, records: list[tuple[int, dict]],
                        d_input: np.ndarray, lr: float) -> None:
        """Push value-network input gradients into the attention parameters."""
        if not records or self.attention is None:
            return
        od, na = self.obs_dim, self.n_actions
        dw = np.zeros_like(self.attention.w)
        da = np.zeros_like(self.attention.a)
        for i, rec in records:
            g_s = _l2norm_backward(rec["s_agg"], d_input[i, od + na: 2 * od + na])
            g_a = _l2norm_backward(rec["a_agg"], d_input[i, 2 * od + na: 2 * (od + na)])
            nbr: NeighborSnapshot = rec["nbr"]
            d_wts = nbr.feats @ g_s + g_a[nbr.last_actions]
            gw, ga = attention_backward(self.attention, rec["cache"], d_wts)
            dw += gw
            da += ga
        if not (np.isfinite(dw).all() and np.isfinite(da).all()):
            raise ValueError("non-finite attention gradient")
        self.attention.w -= lr * dw
        self.attention.a -= lr * da
        self.attention.mark_updated()


class QLearner(_Learner):
    """Off-policy Q-learning with replay, target network and Boltzmann policy."""

    eval_explore = False  # tournaments use greedy action selection

    def __init__(self, variant: str, obs_dim: int, n_actions: int = N_ACTIONS, *,
                 gamma: float = 0.95, beta: float = 1.0, lr: float = 1e-3,
                 tau: float = 0.01, buffer_capacity: int = 2 ** 16,
                 batch_size: int = 64, update_every: int = 4,
                 hidden: tuple[int, ...] = (64, 64), embed_dim: int = 16,
                 leaky_slope: float = 0.2, seed: int = 0,
                 paper_sign: bool = False, backup: str = "boltzmann"):
        if variant not in Q_VARIANTS:
            raise ValueError(f"{variant!r} is not a Q-learning variant")
        super().__init__(variant, obs_dim, n_actions, gamma, hidden, embed_dim,
                         leaky_slope, seed)
        if beta < 0:
            raise ValueError("beta must be >= 0")
        if backup not in ("boltzmann", "max"):
            raise ValueError("backup must be 'boltzmann' or 'max'")
        self.beta = beta
        self.lr = lr
        self.tau = tau
        self.batch_size = batch_size
        self.update_every = update_every
        self.paper_sign = paper_sign
        self.backup = backup
        dims = [self.input_dim, *self.hidden, n_actions]
        self.q_net = Mlp.init(dims, self._net_rng)
        self.target_net = self.q_net.copy()
        self.buffer = ReplayBuffer(buffer_capacity, self._buffer_rng)

    def select_batch(self, xs: np.ndarray, explore: bool) -> list[int]:
        q = self.q_net.forward(xs)
        if explore:
            return self._sample_rows(_batched_boltzmann(q, self.beta, self.paper_sign))
        # greedy = the Boltzmann mode: argmax normally, argmin under the
        # literal published sign
        best = q.argmin(axis=1) if self.paper_sign else q.argmax(axis=1)
        return [int(i) for i in best]

    def q_update(self, batch: list[Transition]) -> float:
        """One TD step on the batch: squared-error loss, gradient descent on
        the value net (and the attention parameters when present), then a
        soft target update."""
        if not batch:
            raise ValueError("empty batch")
        b = len(batch)
        xs, xns, records = self._update_inputs(batch, need_grad=self.attention is not None)
        q_all = self.q_net.forward(xs)
        actions = np.array([t.action for t in batch])
        q_taken = q_all[np.arange(b), actions]
        next_q = self.target_net.forward(xns)
        rewards = np.array([t.reward for t in batch])
        live = np.array([0.0 if t.done else 1.0 for t in batch])
        if self.backup == "max":
            v = next_q.max(axis=1)
        else:
            p = _batched_boltzmann(next_q, self.beta, self.paper_sign)
            v = np.einsum("ij,ij->i", p, next_q)
        ys = rewards + self.gamma * v * live
        errs = ys - q_taken
        loss = float(np.mean(errs ** 2))
        if not np.isfinite(loss):
            raise ValueError(f"non-finite TD loss {loss}")
        upstream = np.zeros((b, self.n_actions))
        upstream[np.arange(b), actions] = -2.0 * errs / b
        grads, d_input = self.q_net.backward(xs, upstream)
        sgd_step(self.q_net, grads, self.lr)
        self._attention_step(records, d_input, self.lr)
        soft_update(self.target_net, self.q_net, self.tau)
        return loss


class ACLearner(_Learner):
    """On-policy actor-critic: critic trained by TD, actor by the sampled
    policy gradient grad log pi(a) * Q(a), updated critic-then-actor once
    per trajectory."""

    eval_explore = True  # tournaments sample from the learned policy

    def __init__(self, variant: str, obs_dim: int, n_actions: int = N_ACTIONS, *,
                 gamma: float = 0.95, actor_lr: float = 0.01,
                 critic_lr: float = 0.005, hidden: tuple[int, ...] = (64, 64),
                 embed_dim: int = 16, leaky_slope: float = 0.2, seed: int = 0,
                 advantage_baseline: bool = False):
        if variant not in AC_VARIANTS:
            raise ValueError(f"{variant!r} is not an actor-critic variant")
        super().__init__(variant, obs_dim, n_actions, gamma, hidden, embed_dim,
                         leaky_slope, seed)
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.advantage_baseline = advantage_baseline
        dims = [self.input_dim, *self.hidden, n_actions]
        self.actor = Mlp.init(dims, self._net_rng)
        self.critic = Mlp.init(dims, self._net_rng)

    def policy(self, x: np.ndarray) -> np.ndarray:
        logits = self.actor.forward(x)
        logits = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=-1, keepdims=True)

    def select_batch(self, xs: np.ndarray, explore: bool) -> list[int]:
        p = self.policy(xs)
        if explore:
            return self._sample_rows(p)
        return [int(i) for i in p.argmax(axis=1)]

    def ac_update(self, trajectory: list[Transition]) -> tuple[float, float]:
        if not trajectory:
            raise ValueError("empty trajectory")
        b = len(trajectory)
        xs, xns, records = self._update_inputs(trajectory, need_grad=self.attention is not None)
        actions = np.array([t.action for t in trajectory])
        rewards = np.array([t.reward for t in trajectory])
        live = np.array([0.0 if t.done else 1.0 for t in trajectory])
        rows = np.arange(b)

        # Critic: TD toward r + gamma * E_pi[Q(s', .)].
        q_all = self.critic.forward(xs)
        q_taken = q_all[rows, actions]
        pi_next = self.policy(xns)
        next_q = self.critic.forward(xns)
        ys = rewards + self.gamma * (pi_next * next_q).sum(axis=1) * live
        errs = ys - q_taken
        critic_loss = float(np.mean(errs ** 2))
        if not np.isfinite(critic_loss):
            raise ValueError(f"non-finite critic loss {critic_loss}")
        upstream = np.zeros((b, self.n_actions))
        upstream[rows, actions] = -2.0 * errs / b
        grads, d_input = self.critic.backward(xs, upstream)
        sgd_step(self.critic, grads, self.critic_lr)
        self._attention_step(records, d_input, self.critic_lr)

        # Actor: ascend mean(log pi(a) * Q(a)) with the freshly updated critic.
        q_eval = self.critic.forward(xs)
        pi = self.policy(xs)
        weight = q_eval[rows, actions]
        if self.advantage_baseline:
            weight = weight - (pi * q_eval).sum(axis=1)
        onehot = np.zeros((b, self.n_actions))
        onehot[rows, actions] = 1.0
        d_logits = -(onehot - pi) * weight[:, None] / b
        agrads, _ = self.actor.backward(xs, d_logits)
        sgd_step(self.actor, agrads, self.actor_lr)
        logp = np.log(np.clip(pi[rows, actions], 1e-300, None))
        actor_loss = float(-np.mean(logp * weight))
        return actor_loss, critic_loss


class RandomPolicy:
    """Uniform-random action source with the learner acting interface."""

    eval_explore = True
    variant = "RANDOM"

    def __init__(self, n_actions: int = N_ACTIONS, seed: int = 0):
        self.n_actions = n_actions
        self.rng = np.random.default_rng(seed)

    def reseed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def act(self, obs, world, agent_id, explore: bool = True) -> int:
        return int(self.rng.integers(self.n_actions))


# -- training ----------------------------------------------------------------


@dataclass
class TrainingLog:
    rows: list[dict]

    def to_csv(self) -> str:
        lines = ["episode,mean_return,loss,kills,deaths"]
        for r in self.rows:
            lines.append(
                f"{r['episode']},{r['mean_return']:.6f},{r['loss']:.6f},"
                f"{r['kills']},{r['deaths']}"
            )
        return "\n".join(lines) + "\n"


def episode_seed(seed: int, episode: int) -> int:
    """Stable per-episode seed derived from the run seed."""
    return int(np.random.SeedSequence(entropy=(seed, episode)).generate_state(1)[0])


def train(learner, config: GridConfig, scenario: str, episodes: int, seed: int,
          checkpoint_dir: str | Path | None = None, checkpoint_interval: int = 0,
          name: str | None = None, verbose: bool = False) -> TrainingLog:
    """Self-play training: both armies controlled by the same learner.

    Logs one row per episode; writes checkpoints every
    ``checkpoint_interval`` episodes (plus a final one) when a directory
    is given.
    """
    is_q = isinstance(learner, QLearner)
    name = name or learner.variant
    rows: list[dict] = []
    gstep = 0
    for ep in range(episodes):
        world = GridWorld.new_scenario(config, scenario, episode_seed(seed, ep))
        returns: dict[int, float] = {aid: 0.0 for aid in world.living_ids()}
        losses: list[float] = []
        trajectory: list[Transition] = []
        kills = 0
        snaps = {aid: learner.snapshot(world, aid) for aid in world.living_ids()}
        while True:
            ids = list(snaps)
            xs = np.empty((len(ids), learner.input_dim))
            for i, aid in enumerate(ids):
                snap = snaps[aid]
                learner._fill_input(xs[i], snap.obs, snap.own_last_action, snap.nbr, False)
            actions = dict(zip(ids, learner.select_batch(xs, explore=True)))
            outcome = world.step(actions)
            gstep += 1
            kills += len({victim for _, victim in outcome.kills})
            next_snaps = (
                {} if outcome.terminal
                else {aid: learner.snapshot(world, aid) for aid in world.living_ids()}
            )
            for aid in actions:
                returns[aid] += outcome.rewards[aid]
                ns = next_snaps.get(aid)
                tr = Transition(
                    obs=snaps[aid].obs,
                    action=actions[aid],
                    reward=outcome.rewards[aid],
                    next_obs=ns.obs if ns else np.zeros(learner.obs_dim),
                    done=ns is None,
                    own_last_action=snaps[aid].own_last_action,
                    nbr=snaps[aid].nbr,
                    next_nbr=ns.nbr if ns else None,
                )
                if is_q:
                    learner.buffer.push(tr)
                else:
                    trajectory.append(tr)
            if is_q and len(learner.buffer) >= learner.batch_size \
                    and gstep % learner.update_every == 0:
                losses.append(learner.q_update(learner.buffer.sample(learner.batch_size)))
            if outcome.terminal:
                break
            snaps = next_snaps
        if not is_q and trajectory:
            _, critic_loss = learner.ac_update(trajectory)
            losses.append(critic_loss)
        rows.append({
            "episode": ep,
            "mean_return": float(np.mean(list(returns.values()))) if returns else 0.0,
            "loss": float(np.mean(losses)) if losses else 0.0,
            "kills": kills,
            "deaths": kills,
        })
        last = ep == episodes - 1
        if checkpoint_dir and checkpoint_interval and ((ep + 1) % checkpoint_interval == 0 or last):
            save_checkpoint(learner, Path(checkpoint_dir) / f"{name}_ep{ep + 1:05d}", episode=ep + 1)
            if verbose:
                r = rows[-1]
                print(f"[{name}] episode {ep + 1}/{episodes} "
                      f"mean_return={r['mean_return']:.3f} loss={r['loss']:.4f} "
                      f"kills={r['kills']}")
    if checkpoint_dir:
        save_checkpoint(learner, Path(checkpoint_dir) / f"{name}_final", episode=episodes)
    return TrainingLog(rows)


# -- checkpoint persistence ----------------------------------------------------


def save_checkpoint(learner, stem: str | Path, episode: int = 0) -> Path:
    """Write <stem>.mlpckpt (the acting network) plus a JSON sidecar.

    The sidecar carries everything needed to rebuild an acting policy:
    variant, dimensions, hyperparameters, and the attention parameters
    for the RF* variants.  Both files are required to load a player.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    net = learner.q_net if isinstance(learner, QLearner) else learner.actor
    save_mlp(net, stem.with_suffix(".mlpckpt"))
    side = {
        "format": CHECKPOINT_FORMAT,
        "variant": learner.variant,
        "obs_dim": learner.obs_dim,
        "n_actions": learner.n_actions,
        "gamma": learner.gamma,
        "seed": learner.seed,
        "episode": episode,
        "mlpckpt": stem.with_suffix(".mlpckpt").name,
        "attention": None,
    }
    if isinstance(learner, QLearner):
        side.update(beta=learner.beta, paper_sign=learner.paper_sign)
    if learner.attention is not None:
        side["attention"] = {
            "w": learner.attention.w.tolist(),
            "a": learner.attention.a.tolist(),
            "leaky_slope": learner.attention.leaky_slope,
        }
    path = stem.with_suffix(".json")
    path.write_text(json.dumps(side, sort_keys=True, indent=1) + "\n")
    return path


def load_checkpoint(path: str | Path):
    """Rebuild an acting learner from a sidecar written by save_checkpoint."""
    path = Path(path)
    side = json.loads(path.read_text())
    if side.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} sidecar")
    net = load_mlp(path.parent / side["mlpckpt"])
    hidden = tuple(net.layer_dims[1:-1])
    variant = side["variant"]
    common = dict(obs_dim=side["obs_dim"], n_actions=side["n_actions"],
                  gamma=side["gamma"], hidden=hidden, seed=side["seed"])
    if variant in Q_VARIANTS:
        learner = QLearner(variant, beta=side.get("beta", 1.0),
                           paper_sign=side.get("paper_sign", False), **common)
        learner.q_net = net
        learner.target_net = net.copy()
    else:
        learner = ACLearner(variant, **common)
        learner.actor = net
    if side.get("attention") is not None:
        att = side["attention"]
        learner.attention = AttentionParams(
            w=np.asarray(att["w"], dtype=float),
            a=np.asarray(att["a"], dtype=float),
            leaky_slope=att["leaky_slope"],
        )
    return learner
