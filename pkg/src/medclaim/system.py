"""Composition root: builds one complete deployment of the platform so
the gateway, the CLI, the scenario runner, and the tests all assemble
it the same way."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .bus import EnvelopeHandler, InProcTransport, ServiceBus, WireStats
from .registry import Registry
from .services import (
    CashAuthService,
    PaymentService,
    PreAuthService,
    ScrutinyService,
    SettlementService,
    VerificationService,
)
from .store import ClaimStore, FixtureSummary, ReferenceDirectory

DEFAULT_TPA_ID = "TPA-EAST"


def bundled_fixtures() -> str:
    return resources.files("medclaim").joinpath("fixtures/demo.fixtures").read_text("utf-8")


def bundled_scenario() -> str:
    return resources.files("medclaim").joinpath("scenarios/demo.scenario").read_text("utf-8")


@dataclass
class System:
    """One wired deployment: registry, transport, store, directory, and
    all six services bound to endpoints."""
    registry: Registry
    transport: InProcTransport
    stats: WireStats
    bus: ServiceBus
    directory: ReferenceDirectory
    store: ClaimStore
    services: dict[str, EnvelopeHandler]
    fixture_summary: FixtureSummary
    tpa_id: str
    endpoints: dict[str, str] = field(default_factory=dict)


def build_system(fixtures_text: Optional[str] = None,
                 journal_path: Optional[str] = None,
                 tpa_id: str = DEFAULT_TPA_ID) -> System:
    """Wire every layer together; identical inputs yield a system that
    answers identical envelope traffic identically."""
    registry = Registry()
    transport = InProcTransport()
    stats = WireStats()
    bus = ServiceBus(registry, transport, stats)

    directory = ReferenceDirectory()
    summary = directory.seed(bundled_fixtures() if fixtures_text is None else fixtures_text)
    store = ClaimStore(journal_path)

    services: dict[str, EnvelopeHandler] = {}
    for service in (
        VerificationService(directory, stats),
        PreAuthService(store, directory, bus, stats),
        ScrutinyService(store, directory, tpa_id, stats),
        CashAuthService(store, stats),
        PaymentService(store, stats),
        SettlementService(store, stats),
    ):
        services[service.NAME] = service

    endpoints: dict[str, str] = {}
    for name, service in services.items():
        endpoint = f"inproc://{name.lower()}-1"
        transport.bind_endpoint(endpoint, service.endpoint_handler())
        registry.register(name, service.VERSION, endpoint)
        endpoints[name] = endpoint

    return System(
        registry=registry,
        transport=transport,
        stats=stats,
        bus=bus,
        directory=directory,
        store=store,
        services=services,
        fixture_summary=summary,
        tpa_id=tpa_id,
        endpoints=endpoints,
    )
