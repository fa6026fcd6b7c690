"""Planar reach-and-grasp environment.

A point effector moves inside the square workspace [-h, h]^2 toward a cube
placed at a random position. Actions are absolute (x, y) target positions;
the effector travels toward the clamped target in a straight line, capped at
``max_step_size`` per step. A sparse +1 is paid when the effector comes
within ``grasp_threshold`` of the cube, on top of a potential-based shaping
term gamma * Phi(s') - Phi(s) with Phi(s) = -||effector - cube||.

The environment is purely kinematic and fully deterministic: (seed, action
sequence) determines the trajectory bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EpisodeFinished(RuntimeError):
    """Raised when step() is called on a state whose episode already ended."""


@dataclass(frozen=True)
class EnvConfig:
    grasp_threshold: float = 0.02
    max_episode_steps: int = 50
    max_step_size: float = 0.20
    gamma: float = 0.95
    workspace_half_extent: float = 0.5

    def __post_init__(self) -> None:
        if self.grasp_threshold <= 0:
            raise ValueError("grasp_threshold must be positive")
        if self.max_step_size <= 0:
            raise ValueError("max_step_size must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")


@dataclass(frozen=True)
class EnvState:
    cube_xy: np.ndarray
    effector_xy: np.ndarray
    step_index: int
    done: bool


@dataclass(frozen=True)
class EnvAction:
    target_xy: np.ndarray


@dataclass(frozen=True)
class RewardBreakdown:
    sparse: float
    shaping: float
    env_total: float


def potential(state: EnvState) -> float:
    """Phi(s) = -distance(effector, cube); maximal (0) exactly at a grasp."""
    return -float(np.linalg.norm(state.effector_xy - state.cube_xy))


def distance(state: EnvState) -> float:
    return float(np.linalg.norm(state.effector_xy - state.cube_xy))


class PlanarReachEnv:
    """State-passing environment: reset/step return new states, no hidden state."""

    def __init__(self, config: EnvConfig | None = None) -> None:
        self.config = config or EnvConfig()

    def reset(self, seed: int) -> EnvState:
        """Sample a cube position uniformly in the workspace; effector at origin."""
        h = self.config.workspace_half_extent
        rng = np.random.default_rng(seed)
        cube = rng.uniform(-h, h, size=2)
        return EnvState(
            cube_xy=cube,
            effector_xy=np.zeros(2),
            step_index=0,
            done=False,
        )

    def step(self, state: EnvState, action: EnvAction) -> tuple[EnvState, RewardBreakdown, bool]:
        if state.done:
            raise EpisodeFinished("episode finished")
        cfg = self.config
        h = cfg.workspace_half_extent

        target = np.clip(np.asarray(action.target_xy, dtype=float), -h, h)
        delta = target - state.effector_xy
        dist_to_target = float(np.linalg.norm(delta))
        if dist_to_target <= cfg.max_step_size:
            new_effector = target
        else:
            new_effector = state.effector_xy + delta * (cfg.max_step_size / dist_to_target)
        new_effector = np.clip(new_effector, -h, h)

        step_index = state.step_index + 1
        next_state = EnvState(
            cube_xy=state.cube_xy,
            effector_xy=new_effector,
            step_index=step_index,
            done=False,
        )
        grasped = distance(next_state) < cfg.grasp_threshold
        done = grasped or step_index >= cfg.max_episode_steps
        next_state = EnvState(
            cube_xy=next_state.cube_xy,
            effector_xy=next_state.effector_xy,
            step_index=step_index,
            done=done,
        )

        sparse = 1.0 if grasped else 0.0
        shaping = cfg.gamma * potential(next_state) - potential(state)
        reward = RewardBreakdown(sparse=sparse, shaping=shaping, env_total=sparse + shaping)
        return next_state, reward, done


def state_vector(state: EnvState) -> np.ndarray:
    """Observation fed to the learner: cube position followed by effector position."""
    return np.concatenate([state.cube_xy, state.effector_xy])
