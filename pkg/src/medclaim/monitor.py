"""Background quality watch: pings every registered service, keeps
availability and latency figures, and unbinds/rebinds instances in the
registry when failure or recovery streaks cross the thresholds.

All registry effects go through set_state, so the routing invariant
(resolve never returns an unbound endpoint) holds under monitor
activity by construction.
"""

from __future__ import annotations

import logging
import math
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Optional

from . import envelope as ev
from .bus import Transport, WireStats
from .registry import Registry, ServiceDescriptor, ServiceState

log = logging.getLogger(__name__)

DEFAULT_UNBIND_AFTER = 3
DEFAULT_REBIND_AFTER = 2
DEFAULT_TIMEOUT_MS = 1000
DEFAULT_INTERVAL_MS = 5000
DEFAULT_WINDOW_SECONDS = 300.0

# Bounded probe log per service; at the default 5 s interval this holds
# well over an hour of history.
PROBE_LOG_LIMIT = 1000


@dataclass(frozen=True)
class ProbeResult:
    service_id: str
    at: datetime
    ok: bool
    latency_ms: float = 0.0           # valid when ok
    reason: str = ""                  # valid when not ok


@dataclass(frozen=True)
class RegistryAction:
    kind: str                         # "unbind" | "rebind"
    service_id: str
    name: str
    endpoint: str


@dataclass(frozen=True)
class ServiceMetrics:
    service_id: str
    name: str
    endpoint: str
    state: str
    availability: float               # over the window; 1.0 when vacuous
    p50_ms: Optional[float]
    p95_ms: Optional[float]
    probes_total: int
    failures_total: int


@dataclass(frozen=True)
class MetricsSnapshot:
    generated_at: datetime
    window_seconds: float
    services: tuple[ServiceMetrics, ...]
    schema_violations_total: int


def nearest_rank(sorted_values: list[float], percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    if not sorted_values:
        raise ValueError("no values")
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]


class Monitor:
    """Probe loop core, separated from the daemon thread so tests can
    drive ticks one at a time with a fake clock."""

    def __init__(self, registry: Registry, transport: Transport, stats: WireStats,
                 *,
                 timeout_ms: int = DEFAULT_TIMEOUT_MS,
                 unbind_after: int = DEFAULT_UNBIND_AFTER,
                 rebind_after: int = DEFAULT_REBIND_AFTER,
                 window_seconds: float = DEFAULT_WINDOW_SECONDS,
                 clock: Callable[[], datetime] = ev.utc_second,
                 timer: Callable[[], float] = time.perf_counter):
        if unbind_after < 1 or rebind_after < 1:
            raise ValueError("thresholds must be at least 1")
        self.registry = registry
        self.transport = transport
        self.stats = stats
        self.timeout_ms = timeout_ms
        self.unbind_after = unbind_after
        self.rebind_after = rebind_after
        self.window_seconds = window_seconds
        self.clock = clock
        self.timer = timer
        self._lock = threading.Lock()
        self._logs: dict[str, deque[ProbeResult]] = {}
        self._totals: dict[str, tuple[int, int]] = {}

    # -- probing -------------------------------------------------------------

    def probe(self, descriptor: ServiceDescriptor) -> ProbeResult:
        """One Ping round-trip to one specific endpoint; never raises."""
        at = self.clock()
        request = ev.Envelope(
            message_id=str(uuid.uuid4()),
            correlation_id=str(uuid.uuid4()),
            timestamp=at,
            service=descriptor.name,
            operation="ping",
            body=ev.Ping(),
        )
        started = self.timer()
        try:
            raw = self.transport.send(descriptor.endpoint, ev.serialize(request))
        except Exception as exc:
            # a crashing handler is the in-process version of a dropped
            # connection; probes report it, they never propagate it
            return self._record(ProbeResult(descriptor.service_id, at, False,
                                            reason=f"unreachable: {exc}"))
        elapsed_ms = (self.timer() - started) * 1000.0
        if elapsed_ms > self.timeout_ms:
            return self._record(ProbeResult(descriptor.service_id, at, False,
                                            reason="timeout"))
        try:
            response = ev.parse(raw)
        except ev.EnvelopeError:
            self.stats.count_schema_violation()
            return self._record(ProbeResult(descriptor.service_id, at, False,
                                            reason="schema-violation"))
        if not isinstance(response.body, ev.Pong):
            return self._record(ProbeResult(descriptor.service_id, at, False,
                                            reason="schema-violation"))
        if response.correlation_id != request.correlation_id:
            return self._record(ProbeResult(descriptor.service_id, at, False,
                                            reason="correlation-mismatch"))
        return self._record(ProbeResult(descriptor.service_id, at, True,
                                        latency_ms=elapsed_ms))

    def _record(self, result: ProbeResult) -> ProbeResult:
        with self._lock:
            log_ = self._logs.setdefault(
                result.service_id, deque(maxlen=PROBE_LOG_LIMIT))
            log_.append(result)
            probes, failures = self._totals.get(result.service_id, (0, 0))
            self._totals[result.service_id] = (
                probes + 1, failures + (0 if result.ok else 1))
        return result

    # -- sense and respond ----------------------------------------------------

    def tick(self) -> list[RegistryAction]:
        """Probe every registered service once and apply the streak
        thresholds; returns the state changes made."""
        actions: list[RegistryAction] = []
        for descriptor in self.registry.list():
            result = self.probe(descriptor)
            updated = self.registry.record_probe(
                descriptor.service_id, result.ok, result.at)
            if (updated.state == ServiceState.BOUND
                    and updated.health.consecutive_failures >= self.unbind_after):
                self.registry.set_state(descriptor.service_id, ServiceState.UNBOUND)
                actions.append(RegistryAction("unbind", descriptor.service_id,
                                              descriptor.name, descriptor.endpoint))
                log.warning("unbound %s at %s after %d consecutive failures",
                            descriptor.name, descriptor.endpoint,
                            updated.health.consecutive_failures)
            elif (updated.state == ServiceState.UNBOUND
                    and updated.health.consecutive_successes >= self.rebind_after):
                self.registry.set_state(descriptor.service_id, ServiceState.BOUND)
                actions.append(RegistryAction("rebind", descriptor.service_id,
                                              descriptor.name, descriptor.endpoint))
                log.info("rebound %s at %s after %d consecutive successes",
                         descriptor.name, descriptor.endpoint,
                         updated.health.consecutive_successes)
        return actions

    # -- reporting -------------------------------------------------------------

    def metrics(self) -> MetricsSnapshot:
        now = self.clock()
        cutoff = now - timedelta(seconds=self.window_seconds)
        with self._lock:
            logs = {sid: list(entries) for sid, entries in self._logs.items()}
            totals = dict(self._totals)

        per_service = []
        for descriptor in self.registry.list():
            entries = [r for r in logs.get(descriptor.service_id, [])
                       if r.at >= cutoff]
            probes, failures = totals.get(descriptor.service_id, (0, 0))
            if entries:
                availability = sum(1 for r in entries if r.ok) / len(entries)
            else:
                # vacuous window: nothing observed, report optimistically
                availability = 1.0
            latencies = sorted(r.latency_ms for r in entries if r.ok)
            p50 = nearest_rank(latencies, 50) if latencies else None
            p95 = nearest_rank(latencies, 95) if latencies else None
            per_service.append(ServiceMetrics(
                service_id=descriptor.service_id,
                name=descriptor.name,
                endpoint=descriptor.endpoint,
                state=descriptor.state.value,
                availability=availability,
                p50_ms=p50,
                p95_ms=p95,
                probes_total=probes,
                failures_total=failures,
            ))
        return MetricsSnapshot(
            generated_at=now,
            window_seconds=self.window_seconds,
            services=tuple(per_service),
            schema_violations_total=self.stats.schema_violations_total,
        )


class MonitorDaemon:
    """Runs Monitor.tick on a fixed cadence in a background thread."""

    def __init__(self, monitor: Monitor, interval_ms: int = DEFAULT_INTERVAL_MS):
        self.monitor = monitor
        self.interval_ms = interval_ms
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        if self._thread is not None:
            raise RuntimeError("daemon already started")
        self._thread = threading.Thread(target=self._run, name="medclaim-monitor",
                                        daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.wait(self.interval_ms / 1000.0):
            try:
                self.monitor.tick()
            except Exception:
                log.exception("monitor tick failed")

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
