"""Runtime service registry: services register once, get bound or
unbound at any time, and callers resolve only bound instances.

The registry is an in-process component; every inter-service call still
goes through resolve() plus the envelope layer, so swapping in a
networked registry would not change any caller.
"""

from __future__ import annotations

import re
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Optional
from urllib.parse import urlparse

from .envelope import SERVICE_NAMES


class RegistryError(Exception):
    pass


class DuplicateRegistration(RegistryError):
    pass


class InvalidDescriptor(RegistryError):
    pass


class UnknownService(RegistryError):
    pass


class Unresolved(RegistryError):
    """No bound instance for the requested service name."""


class ServiceState(str, Enum):
    BOUND = "bound"
    UNBOUND = "unbound"


_SEMVER_RE = re.compile(r"^\d+\.\d+\.\d+$")


@dataclass(frozen=True)
class Health:
    consecutive_failures: int = 0
    consecutive_successes: int = 0
    last_probe_at: Optional[datetime] = None


@dataclass(frozen=True)
class ServiceDescriptor:
    service_id: str
    name: str
    version: str
    endpoint: str
    state: ServiceState
    health: Health


def _check_descriptor(name: str, version: str, endpoint: str) -> None:
    if name not in SERVICE_NAMES:
        raise InvalidDescriptor(f"unknown service name '{name}'")
    if not _SEMVER_RE.match(version):
        raise InvalidDescriptor(f"version '{version}' is not MAJOR.MINOR.PATCH")
    parsed = urlparse(endpoint)
    if not parsed.scheme or not (parsed.netloc or parsed.path):
        raise InvalidDescriptor(f"endpoint '{endpoint}' is not a URL")


class Registry:
    """Linearizable register/resolve/set_state over a shared table.

    Registration order is total and stable; round-robin resolution
    rotates through the bound replicas of a name in that order.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[str, ServiceDescriptor] = {}
        self._order: list[str] = []              # service_ids, registration order
        self._rr: dict[str, int] = {}            # per-name rotation counters

    def register(self, name: str, version: str, endpoint: str) -> str:
        _check_descriptor(name, version, endpoint)
        with self._lock:
            for entry in self._entries.values():
                if entry.name == name and entry.endpoint == endpoint:
                    raise DuplicateRegistration(f"{name} already registered at {endpoint}")
            service_id = str(uuid.uuid4())
            self._entries[service_id] = ServiceDescriptor(
                service_id=service_id, name=name, version=version,
                endpoint=endpoint, state=ServiceState.BOUND, health=Health())
            self._order.append(service_id)
            return service_id

    def resolve(self, name: str) -> str:
        with self._lock:
            bound = [self._entries[sid] for sid in self._order
                     if self._entries[sid].name == name
                     and self._entries[sid].state == ServiceState.BOUND]
            if not bound:
                raise Unresolved(f"no bound instance of {name}")
            idx = self._rr.get(name, 0)
            self._rr[name] = idx + 1
            return bound[idx % len(bound)].endpoint

    def set_state(self, service_id: str, state: ServiceState) -> None:
        state = ServiceState(state)
        with self._lock:
            entry = self._entries.get(service_id)
            if entry is None:
                raise UnknownService(service_id)
            self._entries[service_id] = replace(entry, state=state)

    def record_probe(self, service_id: str, ok: bool, at: datetime) -> ServiceDescriptor:
        """Update health counters for one probe outcome; a success resets
        the failure streak and vice versa."""
        with self._lock:
            entry = self._entries.get(service_id)
            if entry is None:
                raise UnknownService(service_id)
            if ok:
                health = Health(0, entry.health.consecutive_successes + 1, at)
            else:
                health = Health(entry.health.consecutive_failures + 1, 0, at)
            updated = replace(entry, health=health)
            self._entries[service_id] = updated
            return updated

    def get(self, service_id: str) -> ServiceDescriptor:
        with self._lock:
            entry = self._entries.get(service_id)
        if entry is None:
            raise UnknownService(service_id)
        return entry

    def list(self) -> list[ServiceDescriptor]:
        with self._lock:
            order = {sid: pos for pos, sid in enumerate(self._order)}
            return sorted(self._entries.values(),
                          key=lambda e: (e.name, order[e.service_id]))
