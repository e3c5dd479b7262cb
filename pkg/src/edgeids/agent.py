"""DQN learner shared by both detection agents, plus a tabular twin.

The network path drives the gateway simulator; the tabular path runs on
small synthetic MDPs with a known transition kernel, where the Bellman
operator can be applied exactly.  That twin is what makes the convergence
diagnostics honest: contraction ratios and the Lyapunov distance are
measured against value iteration rather than against the learner itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import neural
from .neural import DenseParams, stack_backward, stack_forward


class InsufficientData(Exception):
    """Raised when the replay buffer cannot fill a minibatch yet."""


class ActionId(IntEnum):
    """The four mitigation actions, in fixed tie-break order."""

    RATE_LIMIT = 0      # cap total packets/s
    SYN_THROTTLE = 1    # cap SYN packets/s
    BLOCK_ANOMALOUS = 2  # drop flows flagged anomalous
    SOURCE_FILTER = 3   # blacklist persistent offenders


N_ACTIONS = len(ActionId)


@dataclass
class Transition:
    """One (s, a, r, s') sample with its full reward breakdown."""

    s: object
    a: ActionId
    r: float
    s_next: object
    step_index: int
    r_breakdown: object = None
    terminal: bool = False

    def __post_init__(self):
        if not np.isfinite(self.r):
            raise ValueError("transition reward must be finite")


class ReplayBuffer:
    """Bounded ring of transitions with strictly oldest-first eviction."""

    def __init__(self, capacity=50_000, batch_size=64):
        if capacity < 1 or batch_size < 1:
            raise ValueError("capacity and batch_size must be positive")
        self.capacity = capacity
        self.batch_size = batch_size
        self._items = []
        self._pos = 0

    def __len__(self):
        return len(self._items)

    def store(self, transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._pos] = transition
            self._pos = (self._pos + 1) % self.capacity

    def snapshot(self):
        """Contents oldest to newest (for inspection and tests)."""
        return self._items[self._pos:] + self._items[:self._pos]

    def sample_minibatch(self, rng):
        """Uniform sampling with replacement; needs at least batch_size items."""
        if len(self._items) < self.batch_size:
            raise InsufficientData(
                f"buffer holds {len(self._items)} < batch size {self.batch_size}"
            )
        idx = rng.integers(0, len(self._items), size=self.batch_size)
        return [self._items[i] for i in idx]


@dataclass
class EpsilonSchedule:
    """Exploration coefficient with temperature normalization and decay.

    Sweep values above 1 are treated as exploration temperatures and mapped
    to a probability with min(1, value * unit), so "more exploration" stays
    meaningful without ever exceeding probability 1.
    """

    initial: float = 1.0
    unit: float = 0.5
    decay: float = 0.995
    floor: float = 0.05

    def __post_init__(self):
        if self.initial < 0 or self.unit <= 0:
            raise ValueError("epsilon temperature and unit must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if not 0.0 <= self.floor <= 1.0:
            raise ValueError("floor must lie in [0, 1]")

    def start_probability(self):
        return min(1.0, self.initial * self.unit)


def decay_epsilon(eps, decay, floor):
    """Multiplicative decay with a floor: max(floor, eps * decay)."""
    return max(floor, eps * decay)


def robbins_monro_eta(k, p):
    """Step size k^(-p); the exponent must lie in (0.5, 1) so that the
    step-size series diverges while its squares stay summable."""
    if not 0.5 < p < 1.0:
        raise ValueError(f"exponent p={p} outside (0.5, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(k) ** (-p)


@dataclass
class AgentHyperparams:
    gamma: float = 0.9
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    lr: float = 0.5
    target_sync_every: int = 500
    buffer_capacity: int = 50_000
    batch_size: int = 64
    carbon_weight: float = 0.0  # scalar penalty applied inside the TD target

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.target_sync_every < 1:
            raise ValueError("target_sync_every must be >= 1")
        if self.carbon_weight < 0:
            raise ValueError("carbon_weight must be >= 0")


# ---------------------------------------------------------------------------
# Q-network
# ---------------------------------------------------------------------------

@dataclass
class QNetwork:
    """Dense stack mapping a state vector to one Q-value per action."""

    layers: list

    def __post_init__(self):
        if self.layers[-1].n_out != N_ACTIONS:
            raise ValueError(f"Q-network must output {N_ACTIONS} values")

    @property
    def input_dim(self):
        return self.layers[0].n_in

    def q_values(self, s):
        q, _ = stack_forward(self.layers, np.asarray(s, dtype=float))
        return q

    def copy(self):
        return QNetwork([
            DenseParams(l.w.copy(), l.b.copy(), l.activation) for l in self.layers
        ])

    def sync_from(self, other):
        for mine, theirs in zip(self.layers, other.layers):
            mine.w[...] = theirs.w
            mine.b[...] = theirs.b


def qnetwork_init(state_dim, rng, hidden=(32, 32)):
    dims = [state_dim, *hidden]
    layers = [neural.dense_init(dims[i], dims[i + 1], "relu", rng)
              for i in range(len(dims) - 1)]
    layers.append(neural.dense_init(dims[-1], N_ACTIONS, "identity", rng))
    return QNetwork(layers)


def select_action(q, s, epsilon, rng):
    """Epsilon-greedy over Q(s, .); greedy ties break to the lowest action id."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return ActionId(int(rng.integers(N_ACTIONS)))
    values = q.q_values(s) if hasattr(q, "q_values") else np.asarray(q, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite Q values")
    return ActionId(int(np.argmax(values)))


def td_target(transition, q_target, gamma, carbon_weight=0.0):
    """r + gamma * max_a Q_target(s', a), with r alone at episode boundaries.

    carbon_weight > 0 subtracts a scalar penalty proportional to the step's
    raw carbon emission (taken from the stored reward breakdown), realizing
    the carbon-weighted update as a target-side penalty.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    target = transition.r
    if carbon_weight > 0.0 and transition.r_breakdown is not None:
        target -= carbon_weight * transition.r_breakdown.components.carbon_g
    if not transition.terminal:
        target += gamma * float(np.max(q_target.q_values(transition.s_next)))
    return target


def q_update_network(q, batch, q_target, gamma, lr, carbon_weight=0.0):
    """One SGD step on the mean squared TD error of a minibatch.

    Only the taken action's output contributes per sample.  Returns
    (loss_before_step, td_errors).
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    states = np.stack([np.asarray(t.s, dtype=float) for t in batch])
    targets = np.array([td_target(t, q_target, gamma, carbon_weight) for t in batch])
    actions = np.array([int(t.a) for t in batch])

    out, caches = stack_forward(q.layers, states)
    taken = out[np.arange(len(batch)), actions]
    td_errors = taken - targets
    loss = float(np.mean(td_errors ** 2))
    if not np.isfinite(loss):
        raise ValueError("non-finite TD loss")

    d_out = np.zeros_like(out)
    d_out[np.arange(len(batch)), actions] = 2.0 * td_errors / len(batch)
    grads, _ = stack_backward(q.layers, caches, d_out)
    for layer, (dw, db) in zip(q.layers, grads):
        layer.w -= lr * dw
        layer.b -= lr * db
    return loss, td_errors


def q_update_tabular(q_table, s, a, target, eta):
    """Convex-combination update on one entry; all others untouched."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    q_table[s, a] = (1.0 - eta) * q_table[s, a] + eta * target
    return q_table


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceDiagnostics:
    steps: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    td_error_mean: list = field(default_factory=list)
    lyapunov: list = field(default_factory=list)
    contraction_ratio: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["step", "epsilon", "eta", "td_error_mean", "lyapunov",
                 "contraction_ratio"]
            )
            for row in zip(self.steps, self.epsilon, self.eta,
                           self.td_error_mean, self.lyapunov,
                           self.contraction_ratio):
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                                 else v for v in row])


def lyapunov_distance(q, q_ref, probe_states=None):
    """Half the summed squared Q-difference, against a fixed reference.

    Tabular tables compare entry-wise; networks compare over the probe
    states.  The reference stands in for the (unobservable) fixed point.
    """
    if isinstance(q, np.ndarray) and isinstance(q_ref, np.ndarray):
        if q.shape != q_ref.shape:
            raise ValueError("table shapes differ")
        d = q - q_ref
        return 0.5 * float((d * d).sum())
    if probe_states is None or len(probe_states) == 0:
        raise ValueError("network comparison needs probe states")
    total = 0.0
    for s in probe_states:
        d = q.q_values(s) - q_ref.q_values(s)
        total += float(d @ d)
    return 0.5 * total


# ---------------------------------------------------------------------------
# tabular MDPs: exact Bellman operator, value iteration, Q-learning
# ---------------------------------------------------------------------------

@dataclass
class TabularMDP:
    """Finite MDP with known kernel P[s, a, s'] and rewards R[s, a]."""

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float

    def __post_init__(self):
        p = self.transitions
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ValueError("transitions must be [S, A, S]")
        if not np.allclose(p.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    @property
    def n_states(self):
        return self.transitions.shape[0]

    @property
    def n_actions(self):
        return self.transitions.shape[1]

    @property
    def r_max(self):
        return float(np.max(np.abs(self.rewards)))

    def bellman(self, q):
        """Exact optimality operator: R + gamma * P (max_a' Q)."""
        v = q.max(axis=1)
        return self.rewards + self.gamma * self.transitions @ v

    def value_iteration(self, tol=1e-13, max_iter=100_000):
        q = np.zeros_like(self.rewards)
        for _ in range(max_iter):
            q_next = self.bellman(q)
            if np.max(np.abs(q_next - q)) < tol:
                return q_next
            q = q_next
        return q

    def step(self, s, a, rng):
        s_next = int(rng.choice(self.n_states, p=self.transitions[s, a]))
        return s_next, float(self.rewards[s, a])


def random_mdp(n_states, n_actions, gamma, rng, reward_scale=1.0):
    raw = rng.uniform(0.05, 1.0, size=(n_states, n_actions, n_states))
    p = raw / raw.sum(axis=2, keepdims=True)
    r = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions))
    return TabularMDP(p, r, gamma)


def toy_mdp(gamma=0.9):
    """The lab's fixed 4-state / 4-action benchmark MDP.

    Transitions are deterministic (action a moves state s to (s + a) mod 4,
    a strongly connected graph), rewards are fixed values in [-1, 1].  The
    deterministic kernel keeps the stochastic-approximation noise floor at
    zero, so decaying-step Q-learning can actually reach the value-iteration
    fixed point to tight precision; dense random kernels (random_mdp) are
    used where kernel noise is part of the point, e.g. contraction checks.
    """
    n = 4
    p = np.zeros((n, n, n))
    for s in range(n):
        for a in range(n):
            p[s, a, (s + a) % n] = 1.0
    r = np.random.default_rng(2024).uniform(-1.0, 1.0, size=(n, n))
    return TabularMDP(p, r, gamma)


def empirical_contraction_ratio(mdp, q1, q2):
    """||T Q1 - T Q2||_inf / ||Q1 - Q2||_inf under the exact operator."""
    denom = float(np.max(np.abs(q1 - q2)))
    if denom == 0.0:
        raise ValueError("Q tables must differ")
    num = float(np.max(np.abs(mdp.bellman(q1) - mdp.bellman(q2))))
    return num / denom


def q_learning_run(mdp, n_updates, p=0.6, seed=0, probe_every=500,
                   epsilon=1.0, q_star=None):
    """Tabular Q-learning with per-pair step sizes k^(-p), behavior
    epsilon-greedy (epsilon=1 gives the uniform exploration used by the
    convergence suite).  Returns (Q, ConvergenceDiagnostics)."""
    rng = np.random.default_rng(seed)
    q = np.zeros((mdp.n_states, mdp.n_actions))
    counts = np.zeros((mdp.n_states, mdp.n_actions), dtype=int)
    if q_star is None:
        q_star = mdp.value_iteration()
    diag = ConvergenceDiagnostics()
    s = 0
    td_acc = []
    for k in range(1, n_updates + 1):
        if rng.random() < epsilon:
            a = int(rng.integers(mdp.n_actions))
        else:
            a = int(np.argmax(q[s]))
        s_next, r = mdp.step(s, a, rng)
        counts[s, a] += 1
        eta = robbins_monro_eta(counts[s, a], p)
        target = r + mdp.gamma * float(q[s_next].max())
        td_acc.append(abs(target - q[s, a]))
        q_update_tabular(q, s, a, target, eta)
        if k % probe_every == 0:
            diag.steps.append(k)
            diag.epsilon.append(epsilon)
            diag.eta.append(eta)
            diag.td_error_mean.append(float(np.mean(td_acc)))
            diag.lyapunov.append(lyapunov_distance(q, q_star))
            # once Q sits on the fixed point the ratio denominator is pure
            # rounding noise; hold the last meaningful value instead
            denom = float(np.max(np.abs(q - q_star)))
            if denom > 1e-4:
                ratio = empirical_contraction_ratio(mdp, q, q_star)
            elif diag.contraction_ratio:
                ratio = diag.contraction_ratio[-1]
            else:
                ratio = 0.0
            diag.contraction_ratio.append(ratio)
            td_acc = []
        s = s_next
    return q, diag
