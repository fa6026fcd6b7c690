"""Websocket bridge between a training run and one live oracle console.

One console session at a time; a second connection is refused with an error
message. The training loop and the socket listener meet in a single-slot
request/response handoff: at most one outstanding query, answered by a
step-matched ``oracle_response`` or resolved as a timeout. Telemetry
(``step_update``) streams over the same connection and is dropped on any
send failure, never blocking training.
"""

from __future__ import annotations

import threading
import uuid

from websockets.sync.server import serve

from .env import EnvState
from .wire import (
    encode,
    make_error,
    make_query_request,
    make_step_update,
    parse_message,
    parse_oracle_response,
)


class _Pending:
    def __init__(self, step: int):
        self.step = step
        self.answer: list[float] | None = None
        self.event = threading.Event()


class BridgeSession:
    """Adapter binding one training step to the bridge's single query slot."""

    def __init__(self, bridge: "OracleBridge", step: int):
        self._bridge = bridge
        self._step = step

    def ask(self, state: EnvState, budget_remaining: int, timeout_ms: int):
        return self._bridge.ask(self._step, state, budget_remaining, timeout_ms)


class OracleBridge:
    def __init__(self, port: int, session_policy: str | None = None,
                 host: str = "127.0.0.1", run_id: str = ""):
        self.session_id = session_policy or uuid.uuid4().hex[:12]
        self.run_id = run_id
        self._lock = threading.Lock()
        self._conn = None
        self._pending: _Pending | None = None
        self._closed = False
        self._server = serve(self._handler, host, port)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.socket.getsockname()[1]

    @property
    def connected(self) -> bool:
        return self._conn is not None

    # ------------------------------------------------------------ socket side
    def _handler(self, conn) -> None:
        with self._lock:
            if self._conn is not None:
                try:
                    conn.send(encode(make_error("a session is already attached")))
                except Exception:
                    pass
                return
            self._conn = conn
        try:
            for raw in conn:
                msg = parse_message(raw)
                if msg is None:
                    continue
                if msg["type"] == "oracle_response":
                    with self._lock:
                        pending = self._pending
                    if pending is None:
                        continue
                    action = parse_oracle_response(msg, self.session_id, pending.step)
                    if action is None:
                        continue  # rejected; the wait keeps running
                    pending.answer = action
                    pending.event.set()
        except Exception:
            pass
        finally:
            with self._lock:
                if self._conn is conn:
                    self._conn = None
                pending = self._pending
            if pending is not None:
                pending.event.set()  # disconnect mid-wait behaves as a timeout

    # ---------------------------------------------------------- training side
    def session_at(self, step: int) -> BridgeSession:
        return BridgeSession(self, step)

    def ask(self, step: int, state: EnvState, budget_remaining: int,
            timeout_ms: int) -> list[float] | None:
        """Send a query_request and block for its response; None on timeout."""
        with self._lock:
            if self._closed or self._conn is None:
                return None
            if self._pending is not None:
                raise RuntimeError("a query is already outstanding")
            pending = _Pending(step)
            self._pending = pending
            conn = self._conn
        try:
            conn.send(encode(make_query_request(
                self.session_id, self.run_id, step, state, budget_remaining, timeout_ms)))
        except Exception:
            with self._lock:
                self._pending = None
            return None
        pending.event.wait(timeout_ms / 1000.0)
        with self._lock:
            self._pending = None
        return pending.answer

    def broadcast_step(self, step: int, state: EnvState, queried: bool,
                       reward: float, episode_return: float) -> None:
        with self._lock:
            conn = self._conn
        if conn is None:
            return
        try:
            conn.send(encode(make_step_update(step, state, queried, reward,
                                              episode_return)))
        except Exception:
            pass

    def stop(self) -> None:
        with self._lock:
            self._closed = True
            pending = self._pending
        if pending is not None:
            pending.event.set()
        self._server.shutdown()
        self._thread.join(timeout=5.0)


def serve_oracle_bridge(port: int, session_policy: str | None = None,
                        host: str = "127.0.0.1", run_id: str = "") -> OracleBridge:
    """Start the bridge; raises OSError when the port cannot be bound."""
    return OracleBridge(port, session_policy=session_policy, host=host, run_id=run_id)
