"""Closed-loop training and evaluation pipelines.

Two learners share one loop shape: observe a step of gateway traffic,
score it for anomaly, and when the score crosses the alarm threshold ask
the DQN for a mitigation, paying a multi-objective reward that mixes
attack suppression, benign collateral, latency, and the sustainability
ledger.  The unsupervised agent scores traffic with an autoencoder
trained on a benign warm-up window; the supervised agent adds an LSTM
step classifier pre-trained on labeled simulator traces and keeps
refining it on a slower timescale than the DQN while both run.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import agent as ag
from . import features as ft
from . import neural
from .agent import ReplayBuffer, Transition
from .config import ExperimentConfig
from .evaluation import ConfusionCounts, roc_auc
from .gateway_env import EdgeGatewayEnv, TrafficConfig
from .sustain import KappaProvider, RewardComponents, compute_reward

RATE_SCALE = 5000.0     # state scaling so Q-net inputs sit near [0, 1]
SCORE_SCALE = 10.0      # anomaly score enters as min(a_s / tau, SCORE_SCALE)
BASE_LATENCY_S = 0.2
LATENCY_PER_CPU = 0.002  # seconds of inference latency per CPU percent


def _unsupported(kind):
    raise ValueError(f"unsupported agent kind {kind!r}")


# ---------------------------------------------------------------------------
# reward bookkeeping
# ---------------------------------------------------------------------------

class RewardTracker:
    """Sliding-window reward components for the closed mitigation loop.

    detection_rate is the windowed attack-suppression rate (attack packets
    dropped over attack packets offered); the false rate is benign
    collateral (deepedge) or the step classifier's miss rate (autodrl).
    The alert-based detection metrics reported by evaluation runs are
    computed separately and are not fed back into rewards.
    """

    def __init__(self, window, variant):
        self.window = deque(maxlen=window)
        self.variant = variant
        self.pending_delay = 0.0

    def push(self, result, classified_attack=None):
        self.window.append(dict(
            attack_offered=result.offered_pkts["attack"],
            attack_dropped=result.dropped_pkts["attack"],
            benign_offered=result.offered_pkts["benign"],
            benign_dropped=result.dropped_pkts["benign"],
            attack_step=result.attack_active,
            classified_attack=classified_attack,
        ))
        if result.attack_active and not result.mitigation.any_active():
            self.pending_delay += 1.0
        else:
            self.pending_delay = 0.0

    def detection_rate(self):
        offered = sum(w["attack_offered"] for w in self.window)
        if offered == 0:
            return 0.0
        return sum(w["attack_dropped"] for w in self.window) / offered

    def false_rate(self):
        if self.variant == "autodrl":
            attacks = [w for w in self.window
                       if w["attack_step"] and w["classified_attack"] is not None]
            if not attacks:
                return 0.0
            return sum(1 for w in attacks if not w["classified_attack"]) / len(attacks)
        offered = sum(w["benign_offered"] for w in self.window)
        if offered == 0:
            return 0.0
        return sum(w["benign_dropped"] for w in self.window) / offered

    def latency_s(self, cpu_pct, dt):
        return BASE_LATENCY_S + LATENCY_PER_CPU * cpu_pct + self.pending_delay * dt

    def components(self, result):
        entry = result.ledger_entry
        return RewardComponents(
            detection_rate=self.detection_rate(),
            false_rate=min(self.false_rate(), 1.0),
            latency_s=self.latency_s(result.resource.cpu_pct, entry.dt_s),
            energy_j=entry.energy_j,
            memory_util=entry.m_util,
            carbon_g=entry.carbon_g,
        )


# ---------------------------------------------------------------------------
# per-step trace rows
# ---------------------------------------------------------------------------

TRACE_COLUMNS = [
    "episode", "step", "attack_active", "anomaly_score", "alert", "action",
    "offered_benign", "offered_attack", "passed_benign", "passed_attack",
    "dropped_benign", "dropped_attack", "rate_cap", "syn_cap", "drop_filter",
    "blacklist_size", "cpu_pct", "power_w", "mem_util", "energy_j",
    "carbon_g", "reward",
]


def trace_row(episode, result, anomaly_score, alert, reward_total):
    m = result.mitigation
    e = result.ledger_entry
    return [
        episode, result.step, int(result.attack_active), repr(float(anomaly_score)),
        int(alert), "" if result.action is None else int(result.action),
        result.offered_pkts["benign"], result.offered_pkts["attack"],
        result.passed_pkts["benign"], result.passed_pkts["attack"],
        result.dropped_pkts["benign"], result.dropped_pkts["attack"],
        "" if m.rate_cap is None else repr(float(m.rate_cap)),
        "" if m.syn_cap is None else repr(float(m.syn_cap)),
        int(m.drop_filter_active), len(m.blacklist),
        repr(float(result.resource.cpu_pct)), repr(float(result.resource.power_w)),
        repr(float(e.m_util)), repr(float(e.energy_j)), repr(float(e.carbon_g)),
        repr(float(reward_total)),
    ]


def write_trace_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# detectors
# ---------------------------------------------------------------------------

@dataclass
class AnomalyDetector:
    """Benign-calibrated autoencoder scoring plus its two alarm thresholds.

    Detection taps the traffic arriving at the gateway (pre-filter), so an
    ongoing attack keeps the alarm raised even while mitigation is
    suppressing it; mitigation effects show up in rewards and metrics, not
    in the detector's input.
    """

    normalizer: ft.Normalizer
    autoencoder: neural.AutoencoderModel
    tau_flow: float   # per-flow flag threshold (p99 of benign flow errors)
    tau_step: float   # step-score alarm threshold (p99 of benign step scores)

    def flow_error(self, flow):
        z = self.normalizer.transform(ft.extract_features(flow))
        return self.autoencoder.anomaly_score(z)

    def flow_flag(self, flow):
        return self.flow_error(flow) > self.tau_flow

    def step_profile(self, flows):
        """(normalized mean feature vector, anomaly score) for one step."""
        if not flows:
            zeros = np.zeros(len(ft.FEATURE_NAMES))
            return zeros, 0.0
        feats = np.stack([self.normalizer.transform(ft.extract_features(f))
                          for f in flows])
        x = feats.mean(axis=0)
        return x, self.autoencoder.anomaly_score(x)


def detector_to_dict(detector):
    """JSON-able thresholds and normalizer statistics (the autoencoder
    itself travels in the model checkpoint)."""
    return {
        "kind": detector.normalizer.kind,
        "low": [float(v) for v in detector.normalizer.low],
        "scale": [float(v) for v in detector.normalizer.scale],
        "tau_flow": detector.tau_flow,
        "tau_step": detector.tau_step,
    }


def detector_from_dict(data, autoencoder):
    normalizer = ft.Normalizer(data["kind"])
    normalizer.low = np.asarray(data["low"], dtype=float)
    normalizer.scale = np.asarray(data["scale"], dtype=float)
    normalizer.fitted = True
    return AnomalyDetector(normalizer, autoencoder,
                           float(data["tau_flow"]), float(data["tau_step"]))


def train_detector(cfg, rng_seed):
    """Benign warm-up: fit the normalizer, train the autoencoder, and set
    both alarm thresholds at the configured benign percentile."""
    rng = np.random.default_rng(rng_seed)
    benign_traffic = TrafficConfig(
        benign_rate=cfg.env.benign_rate,
        benign_sources=cfg.env.benign_sources,
        dt=cfg.env.dt,
        episode_len=cfg.warmup.steps,
        attacks=[],
    )
    env = EdgeGatewayEnv(benign_traffic, seed=rng_seed,
                         params=cfg.env.env_params(),
                         resources=cfg.resources)
    step_flows = []
    for _ in range(cfg.warmup.steps):
        step_flows.append(env.step(None).passed)
    all_flows = [f for flows in step_flows for f in flows]
    raw = ft.features_matrix(all_flows)
    normalizer = ft.Normalizer("minmax").fit(raw)
    data = np.stack([normalizer.transform(row) for row in raw])

    model = neural.autoencoder_init(
        rng, input_dim=len(ft.FEATURE_NAMES),
        hidden_dim=cfg.neural.ae_hidden, latent_dim=cfg.neural.latent_dim)
    for _ in range(cfg.neural.ae_epochs):
        neural.autoencoder_train_step(model, data, cfg.neural.ae_lr)

    _, recon = model.reconstruct(data)
    flow_errors = ((data - recon) ** 2).sum(axis=1)
    tau_flow = float(np.percentile(flow_errors, cfg.warmup.tau_percentile))

    step_scores = []
    for flows in step_flows:
        if not flows:
            continue
        x = np.stack([normalizer.transform(ft.extract_features(f))
                      for f in flows]).mean(axis=0)
        step_scores.append(model.anomaly_score(x))
    if not step_scores:
        raise ValueError("warm-up produced no traffic; raise benign_rate")
    tau_step = float(np.percentile(step_scores, cfg.warmup.tau_percentile))
    return AnomalyDetector(normalizer, model, tau_flow, tau_step)


def pretrain_step_classifier(cfg, detector, seed):
    """Supervised phase: label simulator steps and fit the LSTM classifier.

    Windows of consecutive per-step aggregate features are labeled by the
    last step's ground truth.  The step-size schedule decays slowly
    (k^-0.55), leaving room for the faster-decaying DQN updates during the
    joint phase."""
    clf_rng = np.random.default_rng(seed)
    clf = neural.lstm_classifier_init(
        len(ft.FEATURE_NAMES), cfg.neural.lstm_hidden,
        cfg.neural.lstm_window, clf_rng)

    windows = []
    labels = []
    for episode in range(max(cfg.pretrain_episodes, 1)):
        env = EdgeGatewayEnv(cfg.env.traffic_config(), seed=seed + 101 + episode,
                             params=cfg.env.env_params(), resources=cfg.resources,
                             flow_flagger=detector.flow_flag)
        history = deque(maxlen=cfg.neural.lstm_window)
        for _ in range(cfg.env.episode_len):
            result = env.step(None)
            x, _ = detector.step_profile(result.offered)
            history.append(x)
            if len(history) == cfg.neural.lstm_window:
                windows.append(np.stack(history))
                labels.append(1 if result.attack_active else 0)

    order = clf_rng.permutation(len(windows))
    k = 0
    losses = []
    for epoch in range(2):
        for i in order:
            k += 1
            eta = cfg.neural.lstm_lr * k ** -0.55
            loss, grads = neural.backward(clf, windows[i], labels[i])
            neural.apply_gradients(clf, grads, eta)
            losses.append(loss)
    return clf, k, float(np.mean(losses[-len(order):])) if losses else 0.0


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class EpisodeStats:
    episode: int
    reward_total: float
    detection_rate: float
    false_rate: float
    attack_offered: int
    attack_passed: int
    benign_offered: int
    benign_passed: int
    energy_j: float
    carbon_g: float
    cpu_mean: float
    epsilon_end: float
    updates: int


EPISODE_COLUMNS = ["episode", "reward_total", "detection_rate", "false_rate",
                   "attack_offered", "attack_passed", "benign_offered",
                   "benign_passed", "energy_j", "carbon_g", "cpu_mean",
                   "epsilon_end", "updates"]


def write_episode_csv(path, stats):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(EPISODE_COLUMNS)
        for s in stats:
            writer.writerow([
                s.episode, repr(float(s.reward_total)),
                repr(float(s.detection_rate)), repr(float(s.false_rate)),
                s.attack_offered, s.attack_passed, s.benign_offered,
                s.benign_passed, repr(float(s.energy_j)),
                repr(float(s.carbon_g)), repr(float(s.cpu_mean)),
                repr(float(s.epsilon_end)), s.updates,
            ])


@dataclass
class TrainOutcome:
    models: dict
    episode_stats: list
    detector: AnomalyDetector
    ledgers: list
    trace_rows: list
    q_updates: int


@dataclass
class EvalOutcome:
    confusion: ConfusionCounts        # step-level alert vs ground truth
    detection_prob: float             # None when the scenario had no attacks
    response_times: list
    scores: list                      # per-step anomaly scores
    attack_labels: list               # per-step ground truth
    classifier_correct: int
    classifier_total: int
    attack_offered: int
    attack_passed: int
    benign_offered: int
    benign_passed: int
    reward_total: float
    ledger: object
    trace_rows: list

    @property
    def classifier_accuracy(self):
        if self.classifier_total == 0:
            return None
        return self.classifier_correct / self.classifier_total

    def anomaly_auc(self):
        if len(set(self.attack_labels)) < 2:
            return None
        return roc_auc(self.scores, self.attack_labels)


# ---------------------------------------------------------------------------
# the DRL pipeline (both agents)
# ---------------------------------------------------------------------------

class DrlPipeline:
    """Shared train/evaluate loop for the two detection agents."""

    def __init__(self, cfg: ExperimentConfig):
        if cfg.agent not in ("deepedge", "autodrl"):
            _unsupported(cfg.agent)
        self.cfg = cfg
        self.detector = None
        self.classifier = None
        self.q_net = None
        self._classifier_updates = 0

    # -- model plumbing ----------------------------------------------------

    def state_dim(self):
        latent = (self.cfg.neural.lstm_hidden if self.cfg.agent == "autodrl"
                  else self.cfg.neural.latent_dim)
        return 4 + latent

    def models(self):
        out = {"autoencoder": self.detector.autoencoder,
               "q_network": self.q_net.layers}
        if self.classifier is not None:
            out["classifier"] = self.classifier
        return out

    def load_models(self, models):
        for name in ("autoencoder", "q_network"):
            if name not in models:
                raise ValueError(f"checkpoint lacks model {name!r}")
        self.q_net = ag.QNetwork(list(models["q_network"]))
        if self.q_net.input_dim != self.state_dim():
            raise ValueError(
                f"q_network layer 0 expects input {self.q_net.input_dim}, "
                f"config needs {self.state_dim()}")
        if self.classifier is None and "classifier" in models:
            self.classifier = models["classifier"]
        ae = models["autoencoder"]
        if self.detector is None:
            raise ValueError("detector thresholds missing; run warm-up first")
        self.detector.autoencoder = ae

    # -- state assembly ----------------------------------------------------

    def _latent(self, x_step, history):
        if self.cfg.agent == "autodrl":
            return self.classifier.hidden(np.stack(history))
        return self.detector.autoencoder.encode(x_step)

    def state_vector(self, result, x_step, a_s, history):
        latent = self._latent(x_step, history)
        state = ft.build_state(result.offered, self.cfg.env.dt, a_s, latent)
        return np.concatenate([
            [state.p_rate / RATE_SCALE,
             state.syn_count / RATE_SCALE,
             state.ack_count / RATE_SCALE,
             min(a_s / max(self.detector.tau_step, 1e-9), SCORE_SCALE) / SCORE_SCALE],
            latent,
        ])

    # -- training ----------------------------------------------------------

    def warmup(self, seed_offset=0):
        self.detector = train_detector(self.cfg, self.cfg.seed + 7919 + seed_offset)
        if self.cfg.agent == "autodrl":
            self.classifier, self._classifier_updates, _ = \
                pretrain_step_classifier(self.cfg, self.detector,
                                         self.cfg.seed + 104729)

    def train(self):
        cfg = self.cfg
        if self.detector is None:
            self.warmup()
        init_rng = np.random.default_rng(cfg.seed + 1299709)
        self.q_net = ag.qnetwork_init(self.state_dim(), init_rng,
                                      hidden=tuple(cfg.neural.q_hidden))
        target_net = self.q_net.copy()
        buffer = ReplayBuffer(cfg.hyper.buffer_capacity, cfg.hyper.batch_size)
        action_rng = np.random.default_rng(cfg.seed + 15485863)
        epsilon = cfg.hyper.epsilon.start_probability()

        episode_stats = []
        ledgers = []
        trace_rows = []
        q_updates = 0
        clf_updates = self._classifier_updates

        for episode in range(cfg.episodes):
            env = self._make_env(cfg.seed + 1000 * (episode + 1))
            tracker = RewardTracker(cfg.sustain.reward_window,
                                    cfg.sustain.weights.variant)
            history = deque(maxlen=cfg.neural.lstm_window)

            result = env.step(None)
            x_step, a_s = self.detector.step_profile(result.offered)
            history.extend([x_step] * cfg.neural.lstm_window)
            tracker.push(result, self._classify(history))
            reward_sum = 0.0
            cpu_sum = result.resource.cpu_pct
            episode_updates = 0
            counts = dict(attack_offered=result.offered_pkts["attack"],
                          attack_passed=result.passed_pkts["attack"],
                          benign_offered=result.offered_pkts["benign"],
                          benign_passed=result.passed_pkts["benign"])

            for t in range(1, cfg.env.episode_len):
                alert = a_s > self.detector.tau_step
                if alert:
                    s_vec = self.state_vector(result, x_step, a_s, history)
                    action = ag.select_action(self.q_net, s_vec, epsilon, action_rng)
                else:
                    s_vec = None
                    action = None

                learning = alert and len(buffer) >= cfg.hyper.batch_size
                result2 = env.step(action, learning=learning,
                                   buffer_fill=len(buffer) / buffer.capacity)
                x_step2, a_s2 = self.detector.step_profile(result2.offered)
                history.append(x_step2)
                classified = self._classify(history)
                tracker.push(result2, classified)
                if classified is not None and self.cfg.agent == "autodrl":
                    clf_updates += 1
                    eta_s = cfg.neural.lstm_lr * clf_updates ** -0.55
                    _, grads = neural.backward(
                        self.classifier, np.stack(history),
                        1 if result2.attack_active else 0)
                    neural.apply_gradients(self.classifier, grads, eta_s)

                breakdown = compute_reward(cfg.sustain.weights,
                                           tracker.components(result2))
                reward_sum += breakdown.total
                cpu_sum += result2.resource.cpu_pct

                if action is not None:
                    s_vec2 = self.state_vector(result2, x_step2, a_s2, history)
                    buffer.store(Transition(
                        s=s_vec, a=action, r=breakdown.total, s_next=s_vec2,
                        step_index=t, r_breakdown=breakdown,
                        terminal=t == cfg.env.episode_len - 1))
                    if len(buffer) >= cfg.hyper.batch_size:
                        q_updates += 1
                        episode_updates += 1
                        ag.q_update_network(
                            self.q_net, buffer.sample_minibatch(action_rng),
                            target_net, cfg.hyper.gamma, self._q_lr(q_updates),
                            cfg.hyper.carbon_weight)
                        epsilon = ag.decay_epsilon(epsilon, cfg.hyper.epsilon.decay,
                                                   cfg.hyper.epsilon.floor)
                        if q_updates % cfg.hyper.target_sync_every == 0:
                            target_net.sync_from(self.q_net)

                trace_rows.append(trace_row(episode, result2, a_s2,
                                            a_s2 > self.detector.tau_step,
                                            breakdown.total))
                counts["attack_offered"] += result2.offered_pkts["attack"]
                counts["attack_passed"] += result2.passed_pkts["attack"]
                counts["benign_offered"] += result2.offered_pkts["benign"]
                counts["benign_passed"] += result2.passed_pkts["benign"]
                result, x_step, a_s = result2, x_step2, a_s2

            episode_stats.append(EpisodeStats(
                episode=episode,
                reward_total=reward_sum,
                detection_rate=tracker.detection_rate(),
                false_rate=tracker.false_rate(),
                attack_offered=counts["attack_offered"],
                attack_passed=counts["attack_passed"],
                benign_offered=counts["benign_offered"],
                benign_passed=counts["benign_passed"],
                energy_j=env.ledger.cumulative_energy_j,
                carbon_g=env.ledger.cumulative_carbon_g,
                cpu_mean=cpu_sum / cfg.env.episode_len,
                epsilon_end=epsilon,
                updates=episode_updates,
            ))
            ledgers.append(env.ledger)

        return TrainOutcome(self.models(), episode_stats, self.detector,
                            ledgers, trace_rows, q_updates)

    def _q_lr(self, k):
        # Robbins-Monro style decay; the supervised agent's DQN uses the
        # faster-decaying exponent so eta_fast/eta_slow -> 0 against the
        # classifier's k^-0.55 schedule
        if self.cfg.agent == "autodrl":
            return self.cfg.hyper.lr * k ** -0.8
        return self.cfg.hyper.lr * k ** -0.6

    def _classify(self, history):
        if self.cfg.agent != "autodrl" or self.classifier is None:
            return None
        return self.classifier.classify(np.stack(history)) > 0.5

    def _make_env(self, seed):
        env = EdgeGatewayEnv(self.cfg.env.traffic_config(), seed=seed,
                             params=self.cfg.env.env_params(),
                             resources=self.cfg.resources,
                             limits=self.cfg.sustain.ledger_limits(),
                             kappa=self._kappa())
        env.flow_flagger = self.detector.flow_flag
        return env

    def _kappa(self):
        from .sustain import load_kappa_schedule
        schedule = None
        if self.cfg.sustain.kappa_schedule_file:
            schedule = load_kappa_schedule(self.cfg.sustain.kappa_schedule_file)
        return KappaProvider(self.cfg.sustain.kappa_g_per_j(), schedule)

    # -- evaluation ----------------------------------------------------------

    def policy_action(self, result, x_step, a_s, history):
        """Frozen greedy policy: act only above the alarm threshold."""
        if a_s <= self.detector.tau_step:
            return None
        vec = self.state_vector(result, x_step, a_s, history)
        return ag.select_action(self.q_net, vec, 0.0,
                                np.random.default_rng(0))

    def evaluate(self, seed, traffic=None, policy=None):
        return rollout(self, seed, traffic=traffic, policy=policy)


def rollout(pipeline, seed, traffic=None, policy=None):
    """Frozen-policy episode; returns alert metrics, counts, and the ledger."""
    cfg = pipeline.cfg
    env = EdgeGatewayEnv(traffic or cfg.env.traffic_config(), seed=seed,
                         params=cfg.env.env_params(), resources=cfg.resources,
                         limits=cfg.sustain.ledger_limits(),
                         kappa=pipeline._kappa())
    env.flow_flagger = pipeline.detector.flow_flag
    tracker = RewardTracker(cfg.sustain.reward_window, cfg.sustain.weights.variant)
    history = deque(maxlen=cfg.neural.lstm_window)

    result = env.step(None)
    x_step, a_s = pipeline.detector.step_profile(result.offered)
    history.extend([x_step] * cfg.neural.lstm_window)
    tracker.push(result, pipeline._classify(history))

    confusion = ConfusionCounts()
    scores, labels, trace_rows, responses = [], [], [], []
    counts = dict(attack_offered=0, attack_passed=0,
                  benign_offered=0, benign_passed=0)
    clf_correct = clf_total = 0
    reward_total = 0.0
    onset = None
    responded = True
    episode_len = (traffic or cfg.env.traffic_config()).episode_len

    for t in range(1, episode_len):
        if policy is not None:
            action = policy(result, x_step, a_s, history)
        else:
            action = pipeline.policy_action(result, x_step, a_s, history)
        result = env.step(action)
        x_step, a_s = pipeline.detector.step_profile(result.offered)
        history.append(x_step)
        classified = pipeline._classify(history)
        tracker.push(result, classified)
        breakdown = compute_reward(cfg.sustain.weights, tracker.components(result))
        reward_total += breakdown.total

        alert = a_s > pipeline.detector.tau_step or result.mitigation.any_active()
        scores.append(a_s)
        labels.append(1 if result.attack_active else 0)
        if result.attack_active and alert:
            confusion.tp += 1
        elif result.attack_active:
            confusion.fn += 1
        elif alert:
            confusion.fp += 1
        else:
            confusion.tn += 1
        if classified is not None:
            clf_total += 1
            clf_correct += int(classified == result.attack_active)

        counts["attack_offered"] += result.offered_pkts["attack"]
        counts["attack_passed"] += result.passed_pkts["attack"]
        counts["benign_offered"] += result.offered_pkts["benign"]
        counts["benign_passed"] += result.passed_pkts["benign"]

        if result.attack_active and onset is None:
            onset = t
            responded = False
        if not result.attack_active:
            onset = None
            responded = True
        if not responded and action is not None:
            responses.append((t - onset) * cfg.env.dt)
            responded = True

        trace_rows.append(trace_row(0, result, a_s, alert, breakdown.total))

    attack_steps = confusion.tp + confusion.fn
    detection = (confusion.tp / attack_steps) if attack_steps else None
    return EvalOutcome(
        confusion=confusion, detection_prob=detection,
        response_times=responses, scores=scores, attack_labels=labels,
        classifier_correct=clf_correct, classifier_total=clf_total,
        attack_offered=counts["attack_offered"],
        attack_passed=counts["attack_passed"],
        benign_offered=counts["benign_offered"],
        benign_passed=counts["benign_passed"],
        reward_total=reward_total, ledger=env.ledger, trace_rows=trace_rows)


def noop_policy(result, x_step, a_s, history):
    return None


# ---------------------------------------------------------------------------
# tabular pipeline
# ---------------------------------------------------------------------------

class TabularPipeline:
    """Toy-MDP twin used for convergence diagnostics and epsilon sweeps."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.mdp = ag.toy_mdp(cfg.hyper.gamma)

    def train(self):
        q, diag = ag.q_learning_run(
            self.mdp, self.cfg.tabular.n_updates,
            p=self.cfg.tabular.eta_exponent, seed=self.cfg.seed,
            probe_every=self.cfg.tabular.probe_every)
        return q, diag

    def episode_rewards(self, epsilon_start, seed):
        """Per-episode return of epsilon-greedy Q-learning on the toy MDP."""
        cfg = self.cfg.tabular
        rng = np.random.default_rng(seed)
        q = np.zeros((self.mdp.n_states, self.mdp.n_actions))
        counts = np.zeros_like(q, dtype=int)
        eps = epsilon_start
        rewards = []
        s = 0
        for _ in range(cfg.episodes):
            total = 0.0
            for _ in range(cfg.steps_per_episode):
                if rng.random() < eps:
                    a = int(rng.integers(self.mdp.n_actions))
                else:
                    a = int(np.argmax(q[s]))
                s_next, r = self.mdp.step(s, a, rng)
                counts[s, a] += 1
                eta = ag.robbins_monro_eta(counts[s, a], cfg.eta_exponent)
                ag.q_update_tabular(q, s, a,
                                    r + self.mdp.gamma * float(q[s_next].max()),
                                    eta)
                total += r
                s = s_next
            rewards.append(total)
            eps = ag.decay_epsilon(eps, self.cfg.hyper.epsilon.decay,
                                   self.cfg.hyper.epsilon.floor)
        return rewards


def make_pipeline(cfg):
    if cfg.agent == "tabular":
        return TabularPipeline(cfg)
    return DrlPipeline(cfg)
