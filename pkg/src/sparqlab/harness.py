"""Training orchestration: the gated learning loop, evaluation, comparisons.

``run_training`` executes one configured run: per step it samples an agent
action, forms the progress signal, lets the gate decide whether the oracle
overrides the action, builds the effective reward, stores the transition,
and periodically trains the learner and evaluates the deterministic policy.
Every step is appended to an events CSV; periodic evaluations feed the curve
and eval CSVs. ``compare_methods`` fans runs out over (method, seed) pairs
and aggregates the comparison table from the saved logs.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .bridge import OracleBridge
from .config import RunConfig, config_hash, save_config, with_method_and_seed
from .env import EnvAction, PlanarReachEnv, distance, potential, state_vector
from .gate import (
    GateState,
    ProgressTracker,
    commit_decision,
    decide,
    effective_reward,
    initial_gate_state,
)
from .oracle import OracleResponse, feedback_value, request_human_action, scripted_oracle
from .replay import ReplayBuffer, Transition
from .sac import NanLossError, SacAgent, params_digest, save_checkpoint

LOG_DIR_ENV_VAR = "SPARQ_LOG_DIR"


class RunAborted(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class CurvePoint:
    timestep: int
    eval_success_rate: float
    queries_this_window: float


@dataclass(frozen=True)
class EvalResult:
    successes: np.ndarray
    final_dists: np.ndarray
    returns: np.ndarray

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.successes))

    @property
    def final_dist_median(self) -> float:
        return metrics.median_mad(self.final_dists)[0]

    @property
    def final_dist_mad(self) -> float:
        return metrics.median_mad(self.final_dists)[1]


@dataclass
class RunResult:
    method: str
    seed: int
    agent: SacAgent | None
    params_hash: str
    total_queries: int
    curve: list[CurvePoint]
    final_eval: EvalResult
    events_path: Path
    curves_path: Path
    evals_path: Path
    checkpoint_path: Path
    config_path: Path


@dataclass
class RunPaths:
    events: Path
    curves: Path
    evals: Path
    checkpoint: Path
    config: Path


def resolve_log_dir(requested: str | Path | None) -> Path:
    env_override = os.environ.get(LOG_DIR_ENV_VAR)
    if env_override:
        return Path(env_override)
    if requested is not None:
        return Path(requested)
    return Path("runs")


def run_paths(out_dir: Path, run_hash: str, method: str, seed: int) -> RunPaths:
    stem = f"{run_hash}_{method}_{seed}"
    return RunPaths(
        events=out_dir / f"run_{stem}.events.csv",
        curves=out_dir / f"curves_{stem}.csv",
        evals=out_dir / f"evals_{stem}.csv",
        checkpoint=out_dir / f"params_{stem}.npz",
        config=out_dir / f"run_{stem}.config.ini",
    )


def evaluate(agent: SacAgent, env_cfg, n_episodes: int, seed: int) -> EvalResult:
    """Deterministic rollouts on a held-out seed stream."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    env = PlanarReachEnv(env_cfg)
    rng = np.random.default_rng(seed)
    h = env_cfg.workspace_half_extent
    successes = np.zeros(n_episodes, dtype=int)
    dists = np.zeros(n_episodes)
    returns = np.zeros(n_episodes)
    for ep in range(n_episodes):
        state = env.reset(int(rng.integers(0, 2**31 - 1)))
        total = 0.0
        done = False
        while not done:
            raw = agent.select_action(state_vector(state), deterministic=True)
            state, reward, done = env.step(state, EnvAction(target_xy=raw * h))
            total += reward.env_total
        successes[ep] = int(distance(state) < env_cfg.grasp_threshold)
        dists[ep] = distance(state)
        returns[ep] = total
    return EvalResult(successes=successes, final_dists=dists, returns=returns)


def cost_adjusted_return(returns, total_queries: int, c: float) -> float:
    return metrics.cost_adjusted_return(returns, total_queries, c)


def _oracle_answer(cfg: RunConfig, bridge: OracleBridge | None, step: int,
                   state, budget_remaining: int) -> OracleResponse:
    if cfg.oracle_backend == "human":
        session = bridge.session_at(step) if bridge is not None else None
        return request_human_action(session, state, budget_remaining,
                                    cfg.oracle_timeout_ms,
                                    cfg.env.workspace_half_extent)
    return OracleResponse(action=scripted_oracle(state), feedback=0.0, source="scripted")


def run_training(cfg: RunConfig, out_dir: str | Path | None = None,
                 bridge: OracleBridge | None = None,
                 keep_agent: bool = True) -> RunResult:
    """Execute one gated training run and write its logs.

    Raises :class:`RunAborted` when the learner reports a non-finite loss.
    """
    out = resolve_log_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_hash = config_hash(cfg)
    method = cfg.gate.kind
    paths = run_paths(out, run_hash, method, cfg.seed)
    save_config(cfg, paths.config)

    seeds = np.random.SeedSequence(cfg.seed).spawn(8)
    net_rng, action_rng, warmup_rng, gate_rng, replay_rng, update_rng = (
        np.random.default_rng(s) for s in seeds[:6])
    env_seed_rng = np.random.default_rng(seeds[6])
    eval_seed_rng = np.random.default_rng(seeds[7])

    env = PlanarReachEnv(cfg.env)
    agent = SacAgent(cfg.learner, net_rng)
    buf = ReplayBuffer(cfg.learner.replay_capacity, dtype=agent.dtype)
    tracker = ProgressTracker(cfg.gate.progress_signal, cfg.gate.progress_window)
    gstate: GateState = initial_gate_state(cfg.gate)
    h = cfg.env.workspace_half_extent
    lcfg = cfg.learner

    state = env.reset(int(env_seed_rng.integers(0, 2**31 - 1)))
    tracker.start_episode()
    episode = 0
    episode_return_env = 0.0
    window_queries = 0
    window_episodes = 0
    curve: list[CurvePoint] = []
    final_eval: EvalResult | None = None

    events_file = open(paths.events, "w", newline="")
    curves_file = open(paths.curves, "w", newline="")
    evals_file = open(paths.evals, "w", newline="")
    events_csv = csv.writer(events_file)
    events_csv.writerow(metrics.EVENT_COLUMNS)
    curves_csv = csv.writer(curves_file)
    curves_csv.writerow(metrics.CURVE_COLUMNS)
    evals_csv = csv.writer(evals_file)
    evals_csv.writerow(metrics.EVAL_COLUMNS)

    try:
        for step in range(1, cfg.total_timesteps + 1):
            s_vec = state_vector(state)
            if step <= lcfg.warmup_steps:
                a_raw = warmup_rng.uniform(-1.0, 1.0, size=2)
            else:
                a_raw = np.asarray(
                    agent.select_action(s_vec, deterministic=False, rng=action_rng),
                    dtype=float)

            if cfg.gate.progress_signal == "step_potential":
                sample = tracker.observe_progress(potential(state))
            else:
                sample = tracker.current_sample()
            decision = decide(gstate, cfg.gate, sample, gate_rng)

            if decision.query:
                response = _oracle_answer(cfg, bridge, step, state,
                                          gstate.budget_remaining)
                exec_action = response.action
                a_stored = np.clip(exec_action.target_xy / h, -0.999, 0.999)
            else:
                exec_action = EnvAction(target_xy=a_raw * h)
                a_stored = a_raw

            next_state, reward, done = env.step(state, exec_action)
            f = feedback_value(cfg.feedback, state, next_state, decision.query)
            r_eff = effective_reward(reward.env_total, f, decision.query, cfg.gate)
            gstate = commit_decision(gstate, decision, cfg.gate, sample)
            buf.push(Transition(s=s_vec, a=a_stored, s_next=state_vector(next_state),
                                r_eff=r_eff, done=done, queried=decision.query))
            events_csv.writerow([step, episode, method, int(decision.query),
                                 decision.reason, gstate.budget_remaining,
                                 gstate.cooldown_remaining, repr(sample.delta_j),
                                 repr(reward.env_total), repr(f), repr(r_eff),
                                 int(done)])
            episode_return_env += reward.env_total
            window_queries += int(decision.query)

            if bridge is not None:
                bridge.broadcast_step(step, next_state, decision.query,
                                      reward.env_total, episode_return_env)

            if (step > lcfg.warmup_steps and buf.size >= lcfg.batch_size
                    and step % lcfg.update_every == 0):
                try:
                    agent.update(buf.sample(lcfg.batch_size, replay_rng), update_rng)
                except NanLossError as exc:
                    raise RunAborted(
                        f"non-finite loss at step {step} "
                        f"(batch indices {exc.batch_indices})", step) from exc

            if done:
                episode += 1
                window_episodes += 1
                tracker.complete_episode(episode_return_env)
                episode_return_env = 0.0
                state = env.reset(int(env_seed_rng.integers(0, 2**31 - 1)))
                tracker.start_episode()
            else:
                state = next_state

            if step % cfg.eval_every == 0:
                result = evaluate(agent, cfg.env, cfg.eval_episodes,
                                  int(eval_seed_rng.integers(0, 2**31 - 1)))
                point = CurvePoint(
                    timestep=step,
                    eval_success_rate=result.success_rate,
                    queries_this_window=window_queries / max(1, window_episodes),
                )
                curve.append(point)
                curves_csv.writerow([point.timestep, repr(point.eval_success_rate),
                                     repr(point.queries_this_window)])
                for ep in range(cfg.eval_episodes):
                    evals_csv.writerow([step, ep, int(result.successes[ep]),
                                        repr(float(result.final_dists[ep])),
                                        repr(float(result.returns[ep]))])
                window_queries = 0
                window_episodes = 0
                final_eval = result
    finally:
        events_file.close()
        curves_file.close()
        evals_file.close()

    if final_eval is None:
        final_eval = evaluate(agent, cfg.env, cfg.eval_episodes,
                              int(eval_seed_rng.integers(0, 2**31 - 1)))
    agent.assert_finite()
    save_checkpoint(paths.checkpoint, agent, run_hash)
    return RunResult(
        method=method,
        seed=cfg.seed,
        agent=agent if keep_agent else None,
        params_hash=params_digest(agent),
        total_queries=gstate.queries_made,
        curve=curve,
        final_eval=final_eval,
        events_path=paths.events,
        curves_path=paths.curves,
        evals_path=paths.evals,
        checkpoint_path=paths.checkpoint,
        config_path=paths.config,
    )


@dataclass
class RunSummary:
    method: str
    seed: int
    ok: bool
    error: str = ""
    params_hash: str = ""
    total_queries: int = 0
    final_success_rate: float = float("nan")


def _run_one(args: tuple[RunConfig, str]) -> RunSummary:
    cfg, out_dir = args
    try:
        result = run_training(cfg, out_dir, keep_agent=False)
    except RunAborted as exc:
        return RunSummary(method=cfg.gate.kind, seed=cfg.seed, ok=False, error=str(exc))
    return RunSummary(
        method=cfg.gate.kind,
        seed=cfg.seed,
        ok=True,
        params_hash=result.params_hash,
        total_queries=result.total_queries,
        final_success_rate=result.final_eval.success_rate,
    )


def compare_methods(base_cfg: RunConfig, methods: list[str], seeds: list[int],
                    out_dir: str | Path | None = None, max_workers: int | None = None
                    ) -> tuple[list[metrics.MetricsRow], Path]:
    """Run every (method, seed) pair and emit the aggregated comparison table."""
    out = resolve_log_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_hash = config_hash(base_cfg)
    jobs = [(with_method_and_seed(base_cfg, method, seed), str(out))
            for method in methods for seed in seeds]

    if max_workers is None:
        max_workers = min(len(jobs), os.cpu_count() or 1)
    summaries: list[RunSummary] = []
    if max_workers <= 1:
        summaries = [_run_one(job) for job in jobs]
    else:
        # Keep BLAS single-threaded in the workers; the matrices are small
        # enough that thread fan-out only adds overhead.
        os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
        os.environ.setdefault("OMP_NUM_THREADS", "1")
        import multiprocessing

        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=max_workers, mp_context=ctx) as pool:
            summaries = list(pool.map(_run_one, jobs))

    for summary in summaries:
        if not summary.ok:
            warnings.warn(f"run ({summary.method}, seed {summary.seed}) aborted "
                          f"and was excluded: {summary.error}")

    completed_seeds = sorted({s.seed for s in summaries if s.ok})
    rows = metrics.build_table(out, run_hash, methods, completed_seeds or seeds,
                               base_cfg.gate.query_cost)
    table_path = out / f"table_{run_hash}.csv"
    metrics.emit_table(rows, table_path)
    return rows, table_path
