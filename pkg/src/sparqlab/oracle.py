"""Oracle backends: where corrective actions and feedback values come from.

The scripted oracle is a greedy expert that always aims straight at the cube.
The human backend forwards the query over the bridge to a live console and
falls back to the scripted expert on timeout or disconnect, so a run never
stalls on a missing operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .env import EnvAction, EnvState, potential

ORACLE_SOURCES = ("scripted", "human", "timeout_fallback")


@dataclass(frozen=True)
class OracleResponse:
    action: EnvAction
    feedback: float
    source: str


@dataclass(frozen=True)
class FeedbackMode:
    mode: str = "constant_bonus"       # or "potential_gain"
    constant: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("constant_bonus", "potential_gain"):
            raise ValueError(f"unknown feedback mode {self.mode!r}")


def scripted_oracle(state: EnvState) -> EnvAction:
    """Greedy expert: target the cube directly."""
    return EnvAction(target_xy=np.array(state.cube_xy, dtype=float, copy=True))


def feedback_value(mode: FeedbackMode, s: EnvState, s_next: EnvState, queried: bool) -> float:
    """Scalar feedback f attached to a step; identically 0 on non-query steps."""
    if not queried:
        return 0.0
    if mode.mode == "constant_bonus":
        return mode.constant
    return potential(s_next) - potential(s)


class OracleSession(Protocol):
    """A live console attachment able to answer one query at a time."""

    def ask(self, state: EnvState, budget_remaining: int, timeout_ms: int) -> np.ndarray | None:
        """Return the [x, y] action the human chose, or None on timeout/disconnect."""
        ...


def request_human_action(session: OracleSession | None, state: EnvState,
                         budget_remaining: int, timeout_ms: int,
                         workspace_half_extent: float = 0.5) -> OracleResponse:
    """Ask the attached console for a corrective action.

    Blocks until a valid response arrives or ``timeout_ms`` elapses; with no
    session attached, or on timeout/disconnect, the scripted expert answers
    and the response is tagged ``timeout_fallback``.
    """
    if timeout_ms <= 0:
        raise ValueError("timeout_ms must be positive")
    answer = None
    if session is not None:
        answer = session.ask(state, budget_remaining, timeout_ms)
    if answer is None:
        return OracleResponse(action=scripted_oracle(state), feedback=0.0,
                              source="timeout_fallback")
    h = workspace_half_extent
    target = np.clip(np.asarray(answer, dtype=float), -h, h)
    return OracleResponse(action=EnvAction(target_xy=target), feedback=0.0, source="human")
