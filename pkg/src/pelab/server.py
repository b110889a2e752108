"""Real-time match host: fixed-cadence simulation, websocket state streaming
and manual piloting of the runner.

The :class:`Session` is a plain synchronous object (testable tick by tick);
the FastAPI layer adds the wall-clock loop and client I/O.  All client
commands funnel through the session's single held-command mailbox, read
once per tick with zero-order hold and a decay to zero on pilot silence.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse

from . import arena, evaluation
from .arena import Outcome, RewardWeights, WorldConfig
from .dynamics import ControlCommand, clamp_command
from .errors import ConfigurationError

PILOT_SILENCE_SECONDS = 0.5
EPISODE_PAUSE_SECONDS = 1.0


@dataclass(frozen=True, slots=True)
class SessionConfig:
    runner: str = "manual"              # "manual" or a runner policy ref
    chaser: str = "pid"
    seed: int = 0
    tick_hz: float | None = None        # defaults to 1/dt so screen time = sim time
    practice: bool = False
    world: WorldConfig = field(default_factory=WorldConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)


@dataclass(slots=True)
class Ledger:
    reached: int = 0
    captured: int = 0
    wall: int = 0
    timeout: int = 0
    excluded: int = 0

    @property
    def episodes(self) -> int:
        return self.reached + self.captured + self.wall + self.timeout

    def sr_runner(self) -> float:
        n = self.episodes
        return self.reached / n if n else 0.0

    def to_dict(self) -> dict:
        return {"sr_runner": self.sr_runner(), "episodes": self.episodes,
                "reached": self.reached, "captured": self.captured,
                "wall": self.wall, "timeout": self.timeout,
                "excluded": self.excluded}


class Session:
    """One live match: environment, pilot mailbox, outcome ledger."""

    def __init__(self, config: SessionConfig):
        config.world.validate()
        self.config = config
        self.world = config.world
        self.weights = config.weights
        self.tick_hz = config.tick_hz if config.tick_hz is not None else 1.0 / self.world.dt
        self.manual = config.runner == "manual"
        self.runner_policy = None if self.manual else evaluation.resolve_runner_policy(config.runner)
        self.chaser_policy = evaluation.resolve_chaser_policy(config.chaser)
        self._seed_root = np.random.SeedSequence(config.seed)
        self.ledger = Ledger()
        self.practice_ledger = Ledger()
        self.tick_count = 0
        self.episode_index = -1
        self.pause_ticks = 0
        self._abort_next = False
        self.pilot_name: str | None = None
        self._held = ControlCommand(0.0, 0.0, 0.0, 0.0)
        self._held_seq = -1
        self._held_tick = -10 ** 9
        self._stale_ticks = max(1, math.ceil(PILOT_SILENCE_SECONDS * self.tick_hz))
        self.rng: np.random.Generator | None = None
        self.state: arena.EpisodeState | None = None
        self._begin_episode()

    # -- episode flow ---------------------------------------------------------

    def _begin_episode(self) -> None:
        self.episode_index += 1
        self.rng = np.random.default_rng(self._seed_root.spawn(1)[0])
        self.state = arena.spawn_episode(self.world, self.rng)
        self._abort_next = False

    def _pilot_command(self) -> ControlCommand:
        if self.tick_count - self._held_tick > self._stale_ticks:
            return ControlCommand(0.0, 0.0, 0.0, 0.0)
        return self._held

    def tick(self) -> list[dict]:
        """Advance one step (or sit out the inter-episode pause); returns frames."""
        if self.pause_ticks > 0:
            self.pause_ticks -= 1
            frames = [self.state_frame()]
            if self.pause_ticks == 0:
                self._begin_episode()
            self.tick_count += 1
            return frames

        if self._abort_next:
            # pilot reset: abort without scoring; shown as a timeout, not counted
            self._record(None)
            self._abort_next = False
            self.tick_count += 1
            self.pause_ticks = max(1, int(EPISODE_PAUSE_SECONDS * self.tick_hz))
            return [self.state_frame(), self.outcome_frame(Outcome.TIMEOUT.value)]

        st = self.state
        if self.manual:
            runner_cmd = self._pilot_command()
        else:
            runner_cmd = self.runner_policy(st, self.world, self.rng)
        actions: list[ControlCommand | None] = [runner_cmd]
        for i in range(len(st.chasers)):
            actions.append(self.chaser_policy(st, i, self.world, self.rng)
                           if st.alive[i] else None)
        res = arena.step_env(st, actions, self.world, self.weights, self.rng)
        self.state = res.state
        self.tick_count += 1
        frames = [self.state_frame()]
        if res.done:
            self._record(res.outcome)
            frames.append(self.outcome_frame(res.outcome.value))
            self.pause_ticks = max(1, int(EPISODE_PAUSE_SECONDS * self.tick_hz))
        return frames

    def _record(self, outcome: Outcome | None) -> None:
        ledger = self.practice_ledger if self.config.practice else self.ledger
        if outcome is None:
            ledger.excluded += 1
            return
        field_name = {Outcome.REACHED_TARGET: "reached", Outcome.CAPTURED: "captured",
                      Outcome.RUNNER_WALL_CRASH: "wall", Outcome.TIMEOUT: "timeout"}[outcome]
        setattr(ledger, field_name, getattr(ledger, field_name) + 1)

    # -- frames -----------------------------------------------------------------

    def state_frame(self) -> dict:
        st = self.state
        return {
            "type": "state",
            "tick": self.tick_count,
            "episode": self.episode_index,
            "runner": {"p": [st.runner.x, st.runner.y, st.runner.z], "psi": st.runner.psi},
            "chasers": [{"p": [c.x, c.y, c.z], "psi": c.psi, "alive": st.alive[i]}
                        for i, c in enumerate(st.chasers)],
            "target": [float(v) for v in st.target],
            "bounds": list(self.world.bounds),
        }

    def outcome_frame(self, result: str) -> dict:
        return {
            "type": "outcome",
            "episode": self.episode_index,
            "result": result,
            "ledger": {"sr_runner": self.ledger.sr_runner(),
                       "episodes": self.ledger.episodes},
        }

    @staticmethod
    def error_frame(message: str) -> dict:
        return {"type": "error", "message": message}

    # -- client messages -----------------------------------------------------------

    def handle_client_message(self, client_id: str, role: str | None, msg: dict
                              ) -> tuple[str | None, list[dict]]:
        """Apply one parsed client message; returns (new role, reply frames)."""
        kind = msg.get("type")
        if kind == "hello":
            wanted = msg.get("role")
            if wanted not in ("pilot", "spectator"):
                return role, [self.error_frame(f"unknown role {wanted!r}")]
            if wanted == "pilot":
                if self.pilot_name is not None and self.pilot_name != client_id:
                    return "spectator", [self.error_frame(
                        "pilot role already taken; joining as spectator")]
                self.pilot_name = client_id
                return "pilot", []
            return "spectator", []
        if kind == "control":
            if role != "pilot":
                return role, [self.error_frame("only the pilot may send control messages")]
            try:
                seq = int(msg.get("seq", 0))
                cmd = ControlCommand(float(msg["vx"]), float(msg["vy"]),
                                     float(msg["vz"]), float(msg["wz"]))
                cmd = clamp_command(cmd, self.world.v_max_runner, self.world.w_max)
            except (KeyError, TypeError, ValueError) as e:
                return role, [self.error_frame(f"malformed control message: {e}")]
            if seq >= self._held_seq:
                self._held = cmd
                self._held_seq = seq
                self._held_tick = self.tick_count
            return role, []
        if kind == "reset":
            if role != "pilot":
                return role, [self.error_frame("only the pilot may reset the episode")]
            self._abort_next = True
            return role, []
        return role, [self.error_frame(f"unknown message type {kind!r}")]

    def release_pilot(self, client_id: str) -> None:
        if self.pilot_name == client_id:
            self.pilot_name = None
            self._held = ControlCommand(0.0, 0.0, 0.0, 0.0)

    def summary(self) -> dict:
        return {
            "episode": self.episode_index,
            "tick": self.tick_count,
            "tick_hz": self.tick_hz,
            "runner": self.config.runner,
            "chaser": self.config.chaser,
            "practice": self.config.practice,
            "pilot_connected": self.pilot_name is not None,
            "ledger": self.ledger.to_dict(),
            "practice_ledger": self.practice_ledger.to_dict(),
        }


def create_app(session: Session, ledger_path: str | Path | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    """FastAPI app wrapping a session with a wall-clock tick loop."""
    from contextlib import asynccontextmanager

    clients: dict[object, str | None] = {}
    counter = {"n": 0}

    async def broadcast(frames: list[dict]) -> None:
        if not frames:
            return
        dead = []
        for ws in list(clients):
            try:
                for frame in frames:
                    await ws.send_text(json.dumps(frame))
            except Exception:
                dead.append(ws)
        for ws in dead:
            name = getattr(ws, "_pelab_id", None)
            clients.pop(ws, None)
            if name:
                session.release_pilot(name)

    async def tick_loop() -> None:
        period = 1.0 / session.tick_hz
        next_tick = time.monotonic()
        while True:
            frames = session.tick()
            await broadcast(frames)
            next_tick += period
            delay = next_tick - time.monotonic()
            if delay < -1.0:  # fell far behind (debugger, load spike): resync
                next_tick = time.monotonic()
            await asyncio.sleep(max(0.0, delay))

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(tick_loop())
        yield
        task.cancel()
        if ledger_path is not None:
            Path(ledger_path).write_text(
                json.dumps(session.summary(), indent=2, sort_keys=True) + "\n")

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"status": "ok"})

    @app.get("/session")
    async def session_summary():
        return JSONResponse(session.summary())

    if static_dir is not None:
        static = Path(static_dir)

        @app.get("/")
        async def index():
            return FileResponse(static / "index.html")

        @app.get("/{asset_path:path}")
        async def assets(asset_path: str):
            target = (static / asset_path).resolve()
            if not str(target).startswith(str(static.resolve())) or not target.is_file():
                return JSONResponse({"error": "not found"}, status_code=404)
            return FileResponse(target)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        counter["n"] += 1
        client_id = f"client-{counter['n']}"
        websocket._pelab_id = client_id
        clients[websocket] = None
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    msg = json.loads(text)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as e:
                    await websocket.send_text(json.dumps(
                        Session.error_frame(f"malformed message: {e}")))
                    continue
                role, replies = session.handle_client_message(
                    client_id, clients[websocket], msg)
                clients[websocket] = role
                for frame in replies:
                    await websocket.send_text(json.dumps(frame))
        except WebSocketDisconnect:
            pass
        finally:
            clients.pop(websocket, None)
            session.release_pilot(client_id)

    return app


def serve(config: SessionConfig, port: int, host: str = "127.0.0.1",
          ledger_path: str | Path | None = None,
          static_dir: str | Path | None = None) -> None:
    """Run the live server until interrupted."""
    import uvicorn

    session = Session(config)
    app = create_app(session, ledger_path, static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as e:
        raise ConfigurationError(f"cannot bind port {port}: {e}") from e
