"""Scanner adapter registry.

A registry maps module ids to adapter objects (scanners) or analyzer
markers; the orchestrator resolves policy chains against it.
"""

from __future__ import annotations

from .. import simnet
from .base import (AdapterDescriptor, AdapterError, NormalizationError, NormalizedHost,
                   RawResult, KIND_ANALYZER, KIND_SCANNER, MODE_EXTERNAL, MODE_SIMULATED)
from .portscan import PortscanAdapter
from .snmpwalk import SnmpWalkAdapter

ANALYZER_GATEWAY = "dgw-analyzer"

__all__ = [
    "AdapterDescriptor", "AdapterError", "NormalizationError", "NormalizedHost",
    "RawResult", "KIND_ANALYZER", "KIND_SCANNER", "MODE_EXTERNAL", "MODE_SIMULATED",
    "PortscanAdapter", "SnmpWalkAdapter", "ANALYZER_GATEWAY", "Registry",
    "build_registry",
]


class Registry:
    """Known modules for one run configuration."""

    def __init__(self) -> None:
        self.scanners: dict[str, object] = {}
        self.analyzers: dict[str, AdapterDescriptor] = {}

    def add_scanner(self, adapter) -> None:
        self.scanners[adapter.descriptor().module_id] = adapter

    def add_analyzer(self, module_id: str) -> None:
        self.analyzers[module_id] = AdapterDescriptor(
            module_id, KIND_ANALYZER, (), "simulated")

    def kinds(self) -> dict[str, str]:
        kinds = {mid: KIND_SCANNER for mid in self.scanners}
        kinds.update({mid: KIND_ANALYZER for mid in self.analyzers})
        return kinds

    def descriptors(self) -> list[AdapterDescriptor]:
        descs = [a.descriptor() for a in self.scanners.values()]
        descs.extend(self.analyzers.values())
        return sorted(descs, key=lambda d: d.module_id)

    def scanner(self, module_id: str):
        return self.scanners.get(module_id)

    def is_analyzer(self, module_id: str) -> bool:
        return module_id in self.analyzers


def build_registry(mode: str, topology: simnet.SimTopology | None = None,
                   portscan_binary: str = "nmap",
                   snmpwalk_binary: str = "snmpwalk") -> Registry:
    """Default registry: both scanners plus the gateway analyzer."""
    registry = Registry()
    registry.add_scanner(PortscanAdapter(mode, topology, binary=portscan_binary))
    registry.add_scanner(SnmpWalkAdapter(mode, topology, binary=snmpwalk_binary))
    registry.add_analyzer(ANALYZER_GATEWAY)
    return registry
