"""Streaming detection daemon.

Ingests a single-channel sample stream as newline-delimited JSON over TCP
(or a WebSocket carrying the identical message schema for browser clients),
runs hop-aligned feature extraction plus consecutive-agreement smoothing,
and broadcasts feature/decision events to all subscribers of a session.

Wire messages are JSON objects with a `type` discriminator:
  client -> server: hello, config, samples, bye
  server -> client: hello, config, feature, decision, error, bye
Unknown types are ignored with a logged warning.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ssvepkit import dataio
from ssvepkit.pipeline import FeatureRecord, LinearClassifier, WindowPolicy
from ssvepkit.sigmodel import EegWindow, t_statistic

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 32


@dataclass
class StreamConfig:
    fs: float = dataio.DEFAULT_FS
    probe_freqs: tuple = dataio.DEFAULT_PROBE_FREQS
    n_harmonics: int = dataio.DEFAULT_N_HARMONICS
    ar_order: int = dataio.DEFAULT_AR_ORDER
    window_s: float = 2.0
    hop_s: float = 0.5
    smoother_depth: int = 3

    @classmethod
    def from_session_config(cls, cfg: dataio.SessionConfig, **kw) -> "StreamConfig":
        return cls(
            fs=cfg.fs,
            probe_freqs=cfg.probe_freqs,
            n_harmonics=cfg.n_harmonics,
            ar_order=cfg.ar_order,
            **kw,
        )


@dataclass
class SessionState:
    """Per-session ring buffer + feature/decision state machine.

    Pure with respect to transport: handle_samples returns the emitted
    events, so the same logic drives TCP, WebSocket and offline replay.
    """

    config: StreamConfig
    classifier: LinearClassifier | None = None
    _buffer: np.ndarray = field(init=False)
    _buffered: int = field(default=0, init=False)
    _next_counter: int = field(default=0, init=False)
    _next_emit_end: int = field(default=0, init=False)
    _window_index: int = field(default=0, init=False)
    _streak_label: object = field(default=None, init=False)
    _streak_len: int = field(default=0, init=False)

    def __post_init__(self):
        WindowPolicy(self.config.window_s, self.config.hop_s)  # validate
        self._win = round(self.config.window_s * self.config.fs)
        self._hop = round(self.config.hop_s * self.config.fs)
        self._buffer = np.zeros(self._win)
        self._next_emit_end = self._win

    def handle_samples(self, start_counter: int, values) -> list[dict]:
        """Append a batch; emit feature events at every hop boundary crossed
        and decision events when the smoother fires. A counter gap yields an
        error event and resynchronizes the session at the batch start."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return [self._error_event("empty sample batch")]
        events = []
        if start_counter != self._next_counter:
            events.append(
                {
                    "type": "error",
                    "reason": "sample counter gap",
                    "expected": self._next_counter,
                    "actual": start_counter,
                    "resync": True,
                }
            )
            log.warning(
                "counter gap: expected %d got %d; resyncing", self._next_counter, start_counter
            )
            self._buffered = 0
            self._next_counter = start_counter
            self._next_emit_end = start_counter + self._win
            # fall through: the batch itself is consumed from the new origin

        pos = 0
        n = values.size
        while pos < n:
            take = min(n - pos, self._next_emit_end - self._next_counter)
            chunk = values[pos : pos + take]
            self._append(chunk)
            self._next_counter += take
            pos += take
            if self._next_counter == self._next_emit_end:
                if self._buffered >= self._win:
                    events.extend(self._emit_window())
                self._next_emit_end += self._hop
        return events

    def _append(self, chunk: np.ndarray) -> None:
        k = chunk.size
        if k >= self._win:
            self._buffer[:] = chunk[-self._win :]
        else:
            self._buffer[: self._win - k] = self._buffer[k:]
            self._buffer[self._win - k :] = chunk
        self._buffered = min(self._buffered + k, self._win)

    def _emit_window(self) -> list[dict]:
        end_counter = self._next_counter
        window = EegWindow(
            samples=self._buffer.copy(),
            fs=self.config.fs,
            t0=(end_counter - self._win) / self.config.fs,
        )
        t_values = {
            float(f): t_statistic(
                window, f, self.config.n_harmonics, self.config.ar_order
            )
            for f in self.config.probe_freqs
        }
        record = FeatureRecord(t_values=t_values, window_index=self._window_index)
        self._window_index += 1
        events = [
            {
                "type": "feature",
                "window_index": record.window_index,
                "end_counter": end_counter,
                "t_values": {f"{f:g}": v for f, v in t_values.items()},
            }
        ]
        winner = (
            self.classifier.predict(record)
            if self.classifier is not None
            else record.argmax_freq()
        )
        if winner == self._streak_label:
            self._streak_len += 1
        else:
            self._streak_label = winner
            self._streak_len = 1
        decided = self._streak_len >= self.config.smoother_depth
        events.append(
            {
                "type": "decision",
                "window_index": record.window_index,
                "end_counter": end_counter,
                "freq": float(winner) if decided else None,
                "undecided": not decided,
            }
        )
        return events

    @staticmethod
    def _error_event(reason: str) -> dict:
        return {"type": "error", "reason": reason}


def replay_source(dataset: dataio.Dataset, batch_size: int = DEFAULT_BATCH_SIZE):
    """Yield (start_counter, values) batches over the dataset's trials,
    concatenated in manifest order."""
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    counter = 0
    for _entry, window in dataset.trials:
        samples = window.samples
        for start in range(0, samples.size, batch_size):
            chunk = samples[start : start + batch_size]
            yield counter, chunk
            counter += chunk.size


def replay_events(
    dataset: dataio.Dataset,
    config: StreamConfig,
    classifier: LinearClassifier | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> list[dict]:
    """Run a full non-realtime replay through a fresh session; deterministic
    for a given dataset and config."""
    state = SessionState(config=config, classifier=classifier)
    events = []
    for start, chunk in replay_source(dataset, batch_size):
        events.extend(state.handle_samples(start, chunk))
    return events


async def paced_batches(dataset: dataio.Dataset, batch_size: int, fs: float):
    """Async batch iterator paced at wall-clock sampling rate."""
    t_start = time.monotonic()
    sent = 0
    for start, chunk in replay_source(dataset, batch_size):
        sent += chunk.size
        # a batch is released once its last sample would have been acquired
        due = t_start + sent / fs
        delay = due - time.monotonic()
        if delay > 0:
            await asyncio.sleep(delay)
        yield start, chunk


class StreamServer:
    """Newline-JSON TCP server with per-connection sessions and fan-out to
    subscribers."""

    def __init__(self, config: StreamConfig, classifier: LinearClassifier | None = None):
        self.config = config
        self.classifier = classifier
        self._subscribers: set[asyncio.Queue] = set()
        self._server = None
        self._ws_server = None

    # -- broadcast ---------------------------------------------------------

    def _broadcast(self, event: dict) -> None:
        for q in self._subscribers:
            q.put_nowait(event)

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self._subscribers.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        self._subscribers.discard(q)

    # -- shared message handling ------------------------------------------

    def _hello_payload(self) -> dict:
        return {
            "type": "hello",
            "server": "ssvepkit-streamd",
            "fs": self.config.fs,
            "probe_freqs": list(self.config.probe_freqs),
            "window_s": self.config.window_s,
            "hop_s": self.config.hop_s,
            "smoother_depth": self.config.smoother_depth,
        }

    def _handle_message(self, msg: dict, ctx: dict) -> list[dict]:
        """Process one parsed message; returns replies for this client.
        Feature/decision events are also broadcast to subscribers."""
        mtype = msg.get("type")
        if mtype == "hello":
            return [self._hello_payload()]
        if mtype == "config":
            if "smoother_depth" in msg:
                depth = int(msg["smoother_depth"])
                if depth >= 1:
                    self.config.smoother_depth = depth
            return [{"type": "config", **self._hello_payload() | {"type": "config"}}]
        if mtype == "samples":
            state = ctx.get("state")
            if state is None:
                state = SessionState(config=self.config, classifier=self.classifier)
                ctx["state"] = state
            try:
                events = state.handle_samples(
                    int(msg.get("counter", 0)), msg.get("values", [])
                )
            except Exception as exc:  # numerical failure must not kill the daemon
                log.exception("feature computation failed")
                events = [{"type": "error", "reason": str(exc)}]
            for ev in events:
                self._broadcast(ev)
            return events
        if mtype == "subscribe":
            ctx["subscribe"] = True
            return [{"type": "config", **self._hello_payload() | {"type": "config"}}]
        if mtype == "bye":
            ctx["closing"] = True
            return [{"type": "bye"}]
        log.warning("ignoring unknown message type %r", mtype)
        return []

    # -- TCP transport -----------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        ctx: dict = {}
        queue = None
        writer.write((json.dumps(self._hello_payload()) + "\n").encode())
        await writer.drain()

        async def pump_subscription():
            while True:
                event = await queue.get()
                writer.write((json.dumps(event) + "\n").encode())
                await writer.drain()

        pump_task = None
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    writer.write(
                        (json.dumps({"type": "error", "reason": "invalid JSON"}) + "\n").encode()
                    )
                    await writer.drain()
                    continue
                replies = self._handle_message(msg, ctx)
                if ctx.pop("subscribe", False) and queue is None:
                    queue = self.subscribe()
                    pump_task = asyncio.ensure_future(pump_subscription())
                for reply in replies:
                    writer.write((json.dumps(reply) + "\n").encode())
                await writer.drain()
                if ctx.get("closing"):
                    break
        finally:
            if pump_task is not None:
                pump_task.cancel()
            if queue is not None:
                self.unsubscribe(queue)
            writer.close()

    # -- WebSocket transport (browser console) -----------------------------

    async def _handle_ws(self, websocket):
        import websockets

        ctx: dict = {}
        queue = None
        await websocket.send(json.dumps(self._hello_payload()))

        async def pump_subscription():
            while True:
                event = await queue.get()
                await websocket.send(json.dumps(event))

        pump_task = None
        try:
            async for raw in websocket:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await websocket.send(
                        json.dumps({"type": "error", "reason": "invalid JSON"})
                    )
                    continue
                replies = self._handle_message(msg, ctx)
                if ctx.pop("subscribe", False) and queue is None:
                    queue = self.subscribe()
                    pump_task = asyncio.ensure_future(pump_subscription())
                for reply in replies:
                    await websocket.send(json.dumps(reply))
                if ctx.get("closing"):
                    break
        except websockets.ConnectionClosed:
            pass
        finally:
            if pump_task is not None:
                pump_task.cancel()
            if queue is not None:
                self.unsubscribe(queue)

    async def start(self, host: str, port: int, ws_port: int | None = None):
        self._server = await asyncio.start_server(self._handle_tcp, host, port)
        if ws_port is not None:
            import websockets

            self._ws_server = await websockets.serve(self._handle_ws, host, ws_port)
        log.info("listening on %s:%d (ws: %s)", host, port, ws_port)

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    @property
    def port(self) -> int:
        return self._server.sockets[0].getsockname()[1]


async def stream_dataset(
    host: str,
    port: int,
    dataset: dataio.Dataset,
    batch_size: int = DEFAULT_BATCH_SIZE,
    realtime: bool = False,
) -> list[dict]:
    """Client-side replay: push a dataset into a running daemon, collecting
    every reply (feature/decision/error events)."""
    reader, writer = await asyncio.open_connection(host, port)
    events: list[dict] = []
    done = asyncio.Event()

    async def reader_task():
        # Reads concurrently so a full socket buffer never deadlocks the
        # writer; the server emits events in window order on this one stream.
        while True:
            line = await reader.readline()
            if not line:
                break
            msg = json.loads(line)
            if msg.get("type") == "bye":
                break
            events.append(msg)
        done.set()

    task = asyncio.ensure_future(reader_task())

    async def send(msg: dict):
        writer.write((json.dumps(msg) + "\n").encode())
        await writer.drain()

    if realtime:
        async for start, chunk in paced_batches(dataset, batch_size, dataset.fs):
            await send({"type": "samples", "counter": start, "values": chunk.tolist()})
    else:
        for start, chunk in replay_source(dataset, batch_size):
            await send({"type": "samples", "counter": start, "values": chunk.tolist()})
    await send({"type": "bye"})
    await done.wait()
    task.cancel()
    writer.close()
    return [e for e in events if e.get("type") in ("feature", "decision", "error")]
