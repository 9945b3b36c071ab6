"""Service-oriented medical-insurance claim platform.

Six cooperating services (pre-authorization, identity verification,
scrutiny, cash authorization, payment, settlement) speak one strict XML
envelope, discover each other through a runtime registry, and persist
claims to an append-only journal. An HTTP gateway exposes the workflow
to browsers and tools; a background monitor probes service health and
binds/unbinds replicas as they come and go.
"""

__version__ = "0.1.0"
