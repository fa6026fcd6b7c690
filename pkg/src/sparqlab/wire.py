"""Wire protocol between the training harness and a live oracle console.

Newline-delimited JSON messages over one websocket:

* server -> client ``query_request``: ask the operator for a corrective action.
* client -> server ``oracle_response``: the chosen [x, y] workspace target.
* server -> client ``step_update``: per-step telemetry for the console charts.
* either direction ``error``: human-readable failure notice.

Field names and types are normative; unknown fields are ignored on receipt.
"""

from __future__ import annotations

import json
from typing import Any

from .env import EnvState


def make_query_request(session: str, run_id: str, step: int, state: EnvState,
                       budget_remaining: int, timeout_ms: int) -> dict[str, Any]:
    return {
        "type": "query_request",
        "session": session,
        "run_id": run_id,
        "step": step,
        "state": {
            "cube": [float(state.cube_xy[0]), float(state.cube_xy[1])],
            "effector": [float(state.effector_xy[0]), float(state.effector_xy[1])],
        },
        "budget_remaining": budget_remaining,
        "timeout_ms": timeout_ms,
    }


def make_step_update(step: int, state: EnvState, queried: bool, reward: float,
                     episode_return: float) -> dict[str, Any]:
    # "done" is an extension field; conforming receivers ignore unknown fields
    return {
        "type": "step_update",
        "step": step,
        "state": {
            "cube": [float(state.cube_xy[0]), float(state.cube_xy[1])],
            "effector": [float(state.effector_xy[0]), float(state.effector_xy[1])],
        },
        "queried": queried,
        "reward": reward,
        "episode_return": episode_return,
        "done": state.done,
    }


def make_error(message: str) -> dict[str, Any]:
    return {"type": "error", "message": message}


def encode(message: dict[str, Any]) -> str:
    return json.dumps(message, separators=(",", ":")) + "\n"


def parse_message(raw: str | bytes) -> dict[str, Any] | None:
    """Decode one message; returns None for anything malformed."""
    try:
        msg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError):
        return None
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        return None
    return msg


def parse_oracle_response(msg: dict[str, Any], session: str | None,
                          step: int) -> list[float] | None:
    """Validate an oracle_response against the outstanding query.

    Returns the raw [x, y] action, or None when the message is not a
    well-formed response for this session and step.
    """
    if msg.get("type") != "oracle_response":
        return None
    if session is not None and msg.get("session") != session:
        return None
    if msg.get("step") != step:
        return None
    action = msg.get("action")
    if (not isinstance(action, (list, tuple)) or len(action) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in action)):
        return None
    return [float(action[0]), float(action[1])]
