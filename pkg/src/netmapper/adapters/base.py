"""Shared adapter plumbing: descriptors, raw capture, normalization rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..model import Observation

MODE_EXTERNAL = "external_process"
MODE_SIMULATED = "simulated"

KIND_SCANNER = "scanner"
KIND_ANALYZER = "analyzer"

DEFAULT_TIMEOUT_S = 3600.0
DEFAULT_CONCURRENCY = 8


class AdapterError(Exception):
    """Tool invocation failed (missing binary, timeout, bad options)."""


class NormalizationError(Exception):
    """Raw output could not be normalized; names the offending element."""


@dataclass(frozen=True)
class AdapterDescriptor:
    module_id: str
    kind: str
    supported_options: tuple[str, ...]
    mode: str

    def to_doc(self) -> dict[str, Any]:
        return {
            "module_id": self.module_id,
            "kind": self.kind,
            "supported_options": list(self.supported_options),
            "mode": self.mode,
        }


@dataclass
class RawResult:
    """Unparsed capture of one module invocation, retained for audit."""

    module_id: str
    exit_status: int
    captured: bytes
    duration_s: float
    tool_options: str = ""
    iteration: int = 1
    completed_at: float = 0.0  # unix seconds


@dataclass
class NormalizedHost:
    """One scanned target: its observation plus node-level addressing facts.

    The observation schema intentionally carries no address or hostname
    fields (those belong to the node record), so normalizers pair each
    observation with them here.
    """

    address: str
    observation: Observation
    extra_addresses: list[str] = field(default_factory=list)
    hostnames: list[str] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        return {
            "address": self.address,
            "observation": self.observation.to_doc(),
            "extra_addresses": list(self.extra_addresses),
            "hostnames": list(self.hostnames),
        }
