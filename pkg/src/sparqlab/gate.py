"""Query gate: decides at every training step whether to ask the oracle.

Four gate kinds share one budget-accounted interface:

* ``no_oracle`` never queries.
* ``random`` queries with fixed probability p while budget remains.
* ``always`` queries at every step until the budget runs out.
* ``sparq`` queries only when the progress signal worsens beyond a threshold
  or has not improved for a patience window, subject to budget and a cooldown
  between consecutive queries.

Decisions are pure functions of (state, config, progress sample, rng draw);
all mutation happens in :func:`commit_decision` so logged runs replay exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

GATE_KINDS = ("no_oracle", "random", "always", "sparq")

# Strict-improvement tolerance so float noise never resets the patience counter.
IMPROVEMENT_TOL = 1e-9


class GateError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GateConfig:
    kind: str = "sparq"
    p: float = 0.13                    # random gate query probability
    budget: int = 6600                 # max queries per run
    epsilon_worsen: float = 0.02       # magnitude of negative progress that triggers
    patience: int = 60                 # steps without improvement that trigger
    cooldown: int = 8                  # minimum step gap enforced after a query
    lam: float = 0.1                   # feedback scale in the effective reward
    query_cost: float = 0.05           # cost per query in the effective reward
    progress_signal: str = "step_potential"
    progress_window: int = 10          # episodes per window in windowed mode

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.epsilon_worsen < 0:
            raise ValueError("epsilon_worsen must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")
        if self.query_cost < 0:
            raise ValueError("query_cost must be >= 0")
        if self.progress_signal not in ("step_potential", "windowed_return"):
            raise ValueError(f"unknown progress signal {self.progress_signal!r}")


@dataclass(frozen=True)
class GateState:
    budget_remaining: int
    cooldown_remaining: int = 0
    steps_since_improvement: int = 0
    best_progress_value: float = -math.inf
    queries_made: int = 0


@dataclass(frozen=True)
class QueryDecision:
    query: bool
    reason: str


@dataclass(frozen=True)
class ProgressSample:
    delta_j: float
    signal: str


def initial_gate_state(cfg: GateConfig) -> GateState:
    return GateState(budget_remaining=cfg.budget)


class ProgressTracker:
    """Produces the per-step progress signal delta_j.

    ``step_potential`` mode differences the state potential within an episode
    (the first step after a reset yields 0). ``windowed_return`` mode compares
    the mean episodic return of the latest window against the previous one and
    holds that value between episode ends.
    """

    def __init__(self, signal: str = "step_potential", window: int = 10) -> None:
        if signal not in ("step_potential", "windowed_return"):
            raise ValueError(f"unknown progress signal {signal!r}")
        self.signal = signal
        self.window = window
        self._prev_potential: float | None = None
        self._episode_returns: list[float] = []
        self._windowed_delta = 0.0

    def start_episode(self) -> None:
        self._prev_potential = None

    def observe_progress(self, new_observation: float) -> ProgressSample:
        """Feed the next observation of the progress signal.

        Call once per step with the state potential in step mode, or once per
        finished episode with the episodic return in windowed mode.
        """
        if self.signal == "step_potential":
            if self._prev_potential is None:
                delta = 0.0
            else:
                delta = new_observation - self._prev_potential
            self._prev_potential = new_observation
            return ProgressSample(delta_j=delta, signal=self.signal)

        self._episode_returns.append(new_observation)
        w = self.window
        if len(self._episode_returns) >= 2 * w:
            latest = self._episode_returns[-w:]
            previous = self._episode_returns[-2 * w : -w]
            self._windowed_delta = float(np.mean(latest) - np.mean(previous))
        return ProgressSample(delta_j=self._windowed_delta, signal=self.signal)

    def complete_episode(self, episode_return: float) -> None:
        if self.signal == "windowed_return":
            self.observe_progress(episode_return)

    def current_sample(self) -> ProgressSample:
        """Held windowed value, for the per-step gate call in windowed mode."""
        return ProgressSample(delta_j=self._windowed_delta, signal=self.signal)


def _patience_view(state: GateState, progress: ProgressSample) -> tuple[bool, int]:
    """Patience counter as it stands once the current sample is folded in."""
    improved = progress.delta_j > state.best_progress_value + IMPROVEMENT_TOL
    steps = 0 if improved else state.steps_since_improvement + 1
    return improved, steps


def sparq_decide(state: GateState, cfg: GateConfig, progress: ProgressSample) -> QueryDecision:
    """Progress-aware rule: query on worsening or stagnation, guarded by budget and cooldown."""
    if cfg.kind != "sparq":
        raise GateError(f"sparq_decide called with kind {cfg.kind!r}")
    if state.budget_remaining <= 0:
        return QueryDecision(query=False, reason="denied_budget")

    worsened = progress.delta_j < -cfg.epsilon_worsen
    _, patience_steps = _patience_view(state, progress)
    stagnated = patience_steps >= cfg.patience
    if not (worsened or stagnated):
        return QueryDecision(query=False, reason="not_triggered")
    if state.cooldown_remaining > 0:
        return QueryDecision(query=False, reason="denied_cooldown")
    return QueryDecision(query=True, reason="worsened" if worsened else "stagnated")


def baseline_decide(state: GateState, cfg: GateConfig, rng: np.random.Generator) -> QueryDecision:
    if cfg.kind == "sparq":
        raise GateError("baseline_decide called with kind 'sparq'")
    if cfg.kind == "no_oracle":
        return QueryDecision(query=False, reason="disabled")
    if state.budget_remaining <= 0:
        return QueryDecision(query=False, reason="denied_budget")
    if cfg.kind == "always":
        return QueryDecision(query=True, reason="forced_always")
    # random: one Bernoulli(p) draw per budget-eligible step
    if rng.random() < cfg.p:
        return QueryDecision(query=True, reason="random_draw")
    return QueryDecision(query=False, reason="not_triggered")


def decide(state: GateState, cfg: GateConfig, progress: ProgressSample,
           rng: np.random.Generator) -> QueryDecision:
    if cfg.kind == "sparq":
        return sparq_decide(state, cfg, progress)
    return baseline_decide(state, cfg, rng)


def commit_decision(state: GateState, decision: QueryDecision, cfg: GateConfig,
                    progress: ProgressSample) -> GateState:
    """Apply a decision: budget/cooldown bookkeeping plus the patience update.

    The patience counter resets on improvement and also when a query is
    committed: a fresh correction gets a full patience window to show an
    effect before stagnation can trigger again.
    """
    improved, patience_steps = _patience_view(state, progress)
    best = max(state.best_progress_value, progress.delta_j)
    if decision.query:
        if state.budget_remaining <= 0:
            raise GateError("budget underflow")
        return GateState(
            budget_remaining=state.budget_remaining - 1,
            cooldown_remaining=cfg.cooldown,
            steps_since_improvement=0,
            best_progress_value=best,
            queries_made=state.queries_made + 1,
        )
    return GateState(
        budget_remaining=state.budget_remaining,
        cooldown_remaining=max(0, state.cooldown_remaining - 1),
        steps_since_improvement=patience_steps,
        best_progress_value=best,
        queries_made=state.queries_made,
    )


def effective_reward(r_env: float, f: float, queried: bool, cfg: GateConfig) -> float:
    """r_env + lam * f - query_cost * q, the reward stored in replay."""
    q = 1.0 if queried else 0.0
    return r_env + cfg.lam * f - cfg.query_cost * q


def calibrate_epsilon_worsen(early_samples: list[float] | np.ndarray) -> float:
    """Worsening threshold from early progress samples.

    Returns the 7.5th percentile (linear interpolation) of the magnitudes of
    the negative samples; small enough to catch genuine regressions, large
    enough to ignore the bulk of ordinary fluctuation.
    """
    magnitudes = np.asarray([abs(x) for x in np.asarray(early_samples, dtype=float) if x < 0])
    if magnitudes.size == 0:
        raise CalibrationError("cannot calibrate: no worsening observed")
    return float(np.percentile(magnitudes, 7.5))


def calibrate_cooldown(observed_query_rate: float, target_budget_fraction: float,
                       current_c: int, max_cooldown: int = 50) -> int:
    """Adjust the cooldown so the observed query rate tracks the target budget.

    Doubles C (capped) when the rate overshoots the target by more than 20%
    relative, halves it (floored at 0) when it undershoots by the same margin.
    """
    if not 0.0 < target_budget_fraction <= 1.0:
        raise ValueError("target_budget_fraction must lie in (0, 1]")
    ratio = observed_query_rate / target_budget_fraction
    if ratio > 1.2:
        return min(current_c * 2, max_cooldown)
    if ratio < 0.8:
        return current_c // 2
    return current_c


def with_kind(cfg: GateConfig, kind: str) -> GateConfig:
    return replace(cfg, kind=kind)
