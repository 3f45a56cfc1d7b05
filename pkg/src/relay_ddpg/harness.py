"""Training loop, multi-trial statistics, threshold-sweep evaluation and I/O."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import DdpgAgent, DqnAgent, RandomAgent, decode_action, random_raw_action
from .config import ExperimentConfig
from .env import RelayEnv, SystemConfig
from .nn import NonFiniteError, load_networks, save_networks
from .replay import PrioritizedBuffer

log = logging.getLogger(__name__)

METRICS_COLUMNS = ("trial", "episode", "success_rate", "critic_loss", "noise_scale", "wall_ms")
SUMMARY_COLUMNS = ("trial", "seed", "successful", "last40_mean", "last40_std")

# independent RNG streams per trial
ENV_STREAM, INIT_STREAM, EXPLORE_STREAM, REPLAY_STREAM = range(4)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *key])))


@dataclass
class EpisodeMetrics:
    trial: int
    episode: int
    success_rate: float
    critic_loss: float
    noise_scale: float
    wall_ms: float


@dataclass
class TrialSummary:
    trial: int
    seed: int
    successful: bool
    last40_mean: float
    last40_std: float
    aborted: bool = False


@dataclass
class TrainingResult:
    metrics: list[EpisodeMetrics]
    summary: TrialSummary
    agent: object
    train_steps: int = 0
    buffer: PrioritizedBuffer | None = None


@dataclass
class TrialsReport:
    config: ExperimentConfig
    results: list[TrainingResult]
    n_successful: int
    mean: float
    std: float
    std_degenerate: bool = False

    @property
    def summaries(self) -> list[TrialSummary]:
        return [r.summary for r in self.results]


def make_agent(config: ExperimentConfig, rng: np.random.Generator):
    sys = config.system
    if config.agent in ("per_ddpg", "ddpg"):
        return DdpgAgent(
            sys.feature_size, sys.n_relays, sys.max_power, rng,
            hidden=config.hidden, lr_actor=config.lr_actor, lr_critic=config.lr_critic,
            gamma=config.gamma, tau=config.tau, noise_scale=config.noise_initial,
            noise_decay=config.noise_decay, noise_floor=config.noise_floor,
            rms_decay=config.rms_decay, rms_eps=config.rms_eps, grad_clip=config.grad_clip)
    if config.agent == "dqn":
        return DqnAgent(
            sys.feature_size, sys.n_relays, sys.max_power, rng,
            power_levels=config.power_levels, hidden=config.hidden, lr=config.lr_critic,
            gamma=config.gamma, tau=config.tau, eps_start=config.dqn_eps_start,
            eps_end=config.dqn_eps_end, eps_episodes=config.dqn_eps_episodes,
            rms_decay=config.rms_decay, rms_eps=config.rms_eps, grad_clip=config.grad_clip)
    return RandomAgent(sys.n_relays, sys.max_power)


def make_buffer(config: ExperimentConfig, action_dim: int) -> PrioritizedBuffer:
    # plain DDPG and DQN replay uniformly: alpha=0 makes every importance weight 1
    alpha = config.alpha if config.uses_priority else 0.0
    return PrioritizedBuffer(config.buffer_size, config.system.feature_size, action_dim,
                             alpha=alpha, kappa=config.kappa, eps=config.priority_eps)


def _exploration_level(agent) -> float:
    if isinstance(agent, DdpgAgent):
        return agent.noise_scale
    if isinstance(agent, DqnAgent):
        return agent.exploration_rate
    return 0.0


def summarize(metrics: list[EpisodeMetrics], trial: int, seed: int, window: int,
              threshold: float, aborted: bool = False) -> TrialSummary:
    tail = np.array([m.success_rate for m in metrics[-window:]])
    if tail.size == 0:
        return TrialSummary(trial, seed, False, 0.0, 0.0, aborted)
    mean = float(tail.mean())
    std = float(tail.std(ddof=1)) if tail.size > 1 else 0.0
    return TrialSummary(trial, seed, (not aborted) and mean >= threshold, mean, std, aborted)


def run_training(config: ExperimentConfig, trial_seed: int, trial: int = 0) -> TrainingResult:
    """Warmup with random actions, then one replay update per slot."""
    sys = config.system
    env = RelayEnv(sys, stream(trial_seed, ENV_STREAM))
    agent = make_agent(config, stream(trial_seed, INIT_STREAM))
    explore_rng = stream(trial_seed, EXPLORE_STREAM)
    replay_rng = stream(trial_seed, REPLAY_STREAM)
    learner = config.agent != "random"
    buffer = make_buffer(config, agent.action_dim) if learner else None

    metrics: list[EpisodeMetrics] = []
    aborted = False
    steps = 0
    for episode in range(config.episodes):
        t0 = time.perf_counter()
        level = _exploration_level(agent)
        features = env.reset()
        successes = 0
        losses = []
        warm = learner and episode < config.warmup_episodes
        for _ in range(sys.t_max):
            if warm and isinstance(agent, DdpgAgent):
                raw = random_raw_action(sys.n_relays, explore_rng)
                cmd = decode_action(raw, sys.n_relays, sys.max_power)
            elif warm:
                index = int(explore_rng.integers(agent.n_actions))
                raw, cmd = np.array([float(index)]), agent.decode(index)
            else:
                raw, cmd = agent.act(features, explore=True, rng=explore_rng)
            out = env.step(cmd)
            next_features = env.observe()
            successes += out.reward
            if learner:
                buffer.push(features, raw, out.reward, next_features)
                if not warm and len(buffer) >= config.batch_size:
                    batch = buffer.sample(config.batch_size, replay_rng)
                    try:
                        report = agent.train_step(batch)
                    except NonFiniteError as exc:
                        log.warning("trial %d aborted at episode %d: %s", trial, episode, exc)
                        aborted = True
                        break
                    buffer.update_priorities(batch.indices, report.td_errors)
                    losses.append(report.critic_loss)
                    steps += 1
            features = next_features
        if aborted:
            break
        agent.end_episode()
        wall = (time.perf_counter() - t0) * 1000.0 if config.record_wall_time else 0.0
        metrics.append(EpisodeMetrics(trial, episode, successes / sys.t_max,
                                      float(np.mean(losses)) if losses else 0.0, level, wall))
        log.debug("trial %d episode %d success %.3f", trial, episode, metrics[-1].success_rate)

    summary = summarize(metrics, trial, trial_seed, config.summary_window,
                        config.success_threshold, aborted)
    return TrainingResult(metrics, summary, agent, steps, buffer)


def _train_one(args):
    config, i = args
    return run_training(config, config.base_seed + i, i)


def trial_statistics(summaries: list[TrialSummary], successful_only: bool = True):
    """(count, mean, std, degenerate) of per-trial last-window means.

    A single contributing trial reports std 0 with ``degenerate`` set.
    """
    chosen = [s for s in summaries if s.successful or not successful_only]
    values = np.array([s.last40_mean for s in chosen])
    if values.size == 0:
        return 0, math.nan, math.nan, True
    if values.size == 1:
        return 1, float(values[0]), 0.0, True
    return int(values.size), float(values.mean()), float(values.std(ddof=1)), False


def run_trials(config: ExperimentConfig, jobs: int = 1) -> TrialsReport:
    """Trial i trains from seed ``base_seed + i``; results are ordered by trial id."""
    tasks = [(config, i) for i in range(config.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_one, tasks))
    else:
        results = [_train_one(t) for t in tasks]
    results.sort(key=lambda r: r.summary.trial)
    n, mean, std, degenerate = trial_statistics([r.summary for r in results])
    return TrialsReport(config, results, n, mean, std, degenerate)


# ------------------------------------------------------------------- checkpoints

def save_checkpoint(path, agent, config: ExperimentConfig, seed: int, trial: int = 0,
                    successful: bool | None = None) -> None:
    meta = {
        "kind": config.agent,
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "seed": int(seed),
        "trial": int(trial),
        "successful": successful,
        "exploration": _exploration_level(agent),
    }
    if isinstance(agent, DqnAgent):
        meta["episode"] = agent.episode
    save_networks(path, agent.networks(), agent.optimizers(), meta)


def load_checkpoint(path):
    """Rebuild an agent from a checkpoint; returns ``(agent, config, meta)``."""
    nets, opts, meta = load_networks(path)
    config = ExperimentConfig.from_dict(meta["config"])
    if config.digest() != meta.get("config_hash"):
        raise ValueError(f"{path}: config hash mismatch")
    agent = make_agent(config, np.random.default_rng(0))
    if isinstance(agent, DdpgAgent):
        agent.actor, agent.critic = nets["actor"], nets["critic"]
        agent.actor_target, agent.critic_target = nets["actor_target"], nets["critic_target"]
        agent.actor_opt, agent.critic_opt = opts["actor"], opts["critic"]
        agent.noise_scale = meta["exploration"]
    elif isinstance(agent, DqnAgent):
        agent.q_net, agent.q_target = nets["q_net"], nets["q_target"]
        agent.opt = opts["q_net"]
        agent.exploration_rate = meta["exploration"]
        agent.episode = meta.get("episode", 0)
    return agent, config, meta


# -------------------------------------------------------------------- evaluation

@dataclass
class EvaluationReport:
    thresholds: tuple
    table: dict  # method -> list of mean success per threshold
    per_checkpoint: dict = field(default_factory=dict)  # path -> list per threshold
    skipped: dict = field(default_factory=dict)  # path -> reason


def evaluate_policy(agent, system: SystemConfig, thresholds, episodes: int, seed: int = 0) -> np.ndarray:
    """Success rate per threshold for a frozen policy.

    Episode ``e`` always sees the channel stream seeded by ``(seed, e)``, and
    one rollout is scored against every threshold, so all thresholds share
    common random numbers.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    hits = np.zeros(thresholds.size)
    total = 0
    for e in range(episodes):
        env = RelayEnv(system, stream(seed, e))
        policy_rng = stream(seed, e, 1)
        features = env.reset()
        for _ in range(system.t_max):
            _, cmd = agent.act(features, explore=False, rng=policy_rng)
            out = env.step(cmd)
            hits += out.mutual_information >= thresholds
            total += 1
            features = env.observe()
    return hits / total


def run_evaluation(checkpoints, thresholds, episodes: int, seed: int = 0,
                   system: SystemConfig | None = None) -> EvaluationReport:
    """Mean success per method and threshold over the given checkpoints.

    Every checkpoint is evaluated on the same channel trajectories (taken from
    ``system`` if given, else the first readable checkpoint's config).
    """
    thresholds = tuple(float(x) for x in thresholds)
    per_ckpt, kinds, skipped = {}, {}, {}
    for path in checkpoints:
        try:
            agent, config, meta = load_checkpoint(path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            skipped[str(path)] = f"{type(exc).__name__}: {exc}"
            log.warning("skipping checkpoint %s: %s", path, exc)
            continue
        if system is None:
            system = config.system
        per_ckpt[str(path)] = evaluate_policy(agent, system, thresholds, episodes, seed).tolist()
        kinds[str(path)] = meta["kind"]
    table = {}
    for kind in dict.fromkeys(kinds.values()):
        rows = np.array([per_ckpt[p] for p, k in kinds.items() if k == kind])
        table[kind] = rows.mean(axis=0).tolist()
    return EvaluationReport(thresholds, table, per_ckpt, skipped)


# --------------------------------------------------------------------------- csv

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path, header, rows) -> None:
    path = Path(path)
    try:
        if path.parent != Path(""):
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_csv(records: list[EpisodeMetrics], path) -> None:
    _write_rows(path, METRICS_COLUMNS,
                ([getattr(r, c) for c in METRICS_COLUMNS] for r in records))


def emit_summary_csv(summaries: list[TrialSummary], path) -> None:
    _write_rows(path, SUMMARY_COLUMNS,
                ([getattr(s, c) for c in SUMMARY_COLUMNS] for s in summaries))


def emit_evaluation_csv(report: EvaluationReport, path) -> None:
    rows = [(kind, lam, vals[i]) for kind, vals in report.table.items()
            for i, lam in enumerate(report.thresholds)]
    _write_rows(path, ("method", "threshold", "success_rate"), rows)


def read_metrics_csv(path) -> list[EpisodeMetrics]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [EpisodeMetrics(int(r["trial"]), int(r["episode"]), float(r["success_rate"]),
                               float(r["critic_loss"]), float(r["noise_scale"]), float(r["wall_ms"]))
                for r in reader]


def write_trials_outputs(report: TrialsReport, out_dir, checkpoints: bool = True) -> dict:
    """metrics.csv, summary.csv, aggregate.csv and one checkpoint per trial."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = report.config
    emit_csv([m for r in report.results for m in r.metrics], out / "metrics.csv")
    emit_summary_csv(report.summaries, out / "summary.csv")
    _write_rows(out / "aggregate.csv",
                ("method", "trials", "successful", "mean", "std", "std_degenerate"),
                [(config.agent, len(report.results), report.n_successful,
                  report.mean, report.std, report.std_degenerate)])
    paths = {}
    if checkpoints:
        for r in report.results:
            p = out / f"{config.agent}_trial{r.summary.trial:02d}.ckpt.json"
            save_checkpoint(p, r.agent, config, r.summary.seed, r.summary.trial, r.summary.successful)
            paths[r.summary.trial] = str(p)
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        fh.write(config.to_json())
    return paths
