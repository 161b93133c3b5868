"""SNMP walk adapter: ARP neighbor tables and system descriptions.

Raw documents are sectioned walk text, one section per queried device:

    # target: 10.1.0.1 community: public time: 1723384000.000
    SNMPv2-MIB::sysDescr.0 = STRING: EdgeOS 2.0 on r1
    IP-MIB::ipNetToMediaPhysAddress.2.10.1.0.10 = STRING: 02:00:0a:01:00:0a

A refused or silent device keeps its section with a timeout line instead,
which normalizes to an observation without snmp data and a refusal note.
"""

from __future__ import annotations

import ipaddress
import re
import shutil
import subprocess
import time
from datetime import datetime, timezone

from .. import simnet
from ..model import (ArpEntry, Dataset, Observation, PortState, Protocol, SnmpData,
                     Status)
from .base import (DEFAULT_TIMEOUT_S, KIND_SCANNER, MODE_SIMULATED, AdapterDescriptor,
                   AdapterError, NormalizationError, NormalizedHost, RawResult)

MODULE_ID = "snmpwalk"
SUPPORTED_OPTIONS = ("communities", "timeout_s")
DEFAULT_COMMUNITIES = ("public",)

REFUSAL_NOTE = "no SNMP response: community refused or agent absent"

_SECTION_RE = re.compile(
    r"^# target: (?P<addr>\S+) community: (?P<community>\S+) time: (?P<time>[\d.]+)\s*$")
_SYSDESCR_RE = re.compile(r"^SNMPv2-MIB::sysDescr\.0 = STRING: (?P<text>.*)$")
_ARP_RE = re.compile(
    r"^IP-MIB::ipNetToMediaPhysAddress\.\d+\.(?P<ip>(?:\d{1,3}\.){3}\d{1,3})"
    r" = (?:STRING|Hex-STRING): (?P<mac>[0-9a-fA-F: ]+)$")
_TIMEOUT_RE = re.compile(r"^Timeout: No Response from (?P<addr>\S+)")


def parse_communities(options: dict[str, str]) -> list[str]:
    raw = options.get("communities", ",".join(DEFAULT_COMMUNITIES))
    communities = [c.strip() for c in raw.split(",") if c.strip()]
    if not communities:
        raise AdapterError("communities option is empty")
    return communities


def snmp_port_open(dataset: Dataset, address: str) -> bool:
    """True when the newest observations show udp/161 open at this address."""
    node = dataset.find_node_by_address(address)
    if node is None:
        return False
    best: dict[str, tuple] = {}
    for idx, obs in enumerate(node.observations):
        for finding in obs.ports:
            if finding.port == 161 and finding.protocol is Protocol.UDP:
                key = (obs.iteration, obs.timestamp, idx)
                if obs.tool_name not in best or key > best[obs.tool_name][0]:
                    best[obs.tool_name] = (key, finding.state)
    return any(state is PortState.OPEN for _, state in best.values())


class SnmpWalkAdapter:
    """Walks ARP tables of devices that answer on udp/161."""

    def __init__(self, mode: str, topology: simnet.SimTopology | None = None,
                 binary: str = "snmpwalk") -> None:
        if mode == MODE_SIMULATED and topology is None:
            raise AdapterError("simulated snmpwalk needs a topology")
        self.mode = mode
        self.topology = topology
        self.binary = binary

    def descriptor(self) -> AdapterDescriptor:
        return AdapterDescriptor(MODULE_ID, KIND_SCANNER, SUPPORTED_OPTIONS, self.mode)

    def select_targets(self, targets: list[str], dataset: Dataset) -> list[str]:
        return [t for t in targets if snmp_port_open(dataset, t)]

    def run(self, instance_id: str, targets: list[str], options: dict[str, str],
            iteration: int, dataset: Dataset) -> RawResult:
        started = time.monotonic()
        communities = parse_communities(options)
        selected = self.select_targets(targets, dataset)
        sections: list[str] = []
        for address in selected:
            if self.mode == MODE_SIMULATED:
                sections.append(self._walk_simulated(address, communities))
            else:
                sections.append(self._walk_external(address, communities, options))
        captured = "\n".join(sections).encode("utf-8")
        return RawResult(
            module_id=instance_id,
            exit_status=0,
            captured=captured,
            duration_s=time.monotonic() - started,
            tool_options=" ".join(f"{k}={v}" for k, v in sorted(options.items())),
            iteration=iteration,
            completed_at=time.time(),
        )

    def _walk_simulated(self, address: str, communities: list[str]) -> str:
        top = self.topology
        assert top is not None
        now = time.time()
        for community in communities:
            answer = simnet.snmp_query(top, address, community)
            if answer is not None:
                sysdescr, arp = answer
                return format_section(address, community, now, sysdescr, arp)
        return format_refusal(address, communities[-1], now)

    def _walk_external(self, address: str, communities: list[str],
                       options: dict[str, str]) -> str:
        if shutil.which(self.binary) is None:
            raise AdapterError(f"walker binary {self.binary!r} is not installed")
        timeout = float(options.get("timeout_s", DEFAULT_TIMEOUT_S))
        now = time.time()
        for community in communities:
            argv = [self.binary, "-v2c", "-c", community, address]
            try:
                proc = subprocess.run(argv + ["SNMPv2-MIB::sysDescr"],
                                      capture_output=True, text=True, timeout=timeout)
                arp_proc = subprocess.run(argv + ["IP-MIB::ipNetToMediaPhysAddress"],
                                          capture_output=True, text=True, timeout=timeout)
            except subprocess.TimeoutExpired:
                continue
            except FileNotFoundError as exc:
                raise AdapterError(
                    f"walker binary {self.binary!r} is not installed") from exc
            output = proc.stdout + arp_proc.stdout
            if proc.returncode != 0 or "Timeout" in output:
                continue
            body = "\n".join(line for line in output.splitlines() if line.strip())
            return f"# target: {address} community: {community} time: {now:.3f}\n{body}\n"
        return format_refusal(address, communities[-1], now)

    def normalize(self, raw: RawResult) -> list[NormalizedHost]:
        return normalize_snmp(raw)

    def extract_seeds(self, rows: list[NormalizedHost], dataset: Dataset) -> list[str]:
        return extract_arp_seeds(rows, dataset)


def format_section(address: str, community: str, at: float, sysdescr: str,
                   arp: list[tuple[str, str]]) -> str:
    lines = [f"# target: {address} community: {community} time: {at:.3f}",
             f"SNMPv2-MIB::sysDescr.0 = STRING: {sysdescr}"]
    for idx, (ip, mac) in enumerate(arp, start=2):
        lines.append(f"IP-MIB::ipNetToMediaPhysAddress.{idx}.{ip} = STRING: {mac}")
    return "\n".join(lines) + "\n"


def format_refusal(address: str, community: str, at: float) -> str:
    return (f"# target: {address} community: {community} time: {at:.3f}\n"
            f"Timeout: No Response from {address}\n")


def normalize_snmp(raw: RawResult) -> list[NormalizedHost]:
    """One observation per queried device; refusals keep snmp absent."""
    text = raw.captured.decode("utf-8")
    rows: list[NormalizedHost] = []
    current: dict | None = None

    def flush() -> None:
        if current is None:
            return
        refused = current["refused"] or current["sysdescr"] is None
        snmp = None
        note = None
        if refused:
            note = REFUSAL_NOTE
        else:
            snmp = SnmpData(system_description=current["sysdescr"],
                            neighbors=current["neighbors"])
        obs = Observation(
            tool_name=raw.module_id,
            tool_options=raw.tool_options,
            iteration=raw.iteration,
            timestamp=datetime.fromtimestamp(current["time"], tz=timezone.utc),
            status=Status.UNKNOWN if refused else Status.UP,
            snmp=snmp,
            note=note,
        )
        rows.append(NormalizedHost(address=current["addr"], observation=obs))

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        header = _SECTION_RE.match(line)
        if header:
            flush()
            current = {
                "addr": header.group("addr"),
                "time": float(header.group("time")),
                "sysdescr": None,
                "neighbors": [],
                "refused": False,
            }
            continue
        if current is None:
            raise NormalizationError(f"line {lineno}: walk line before any target header")
        if _TIMEOUT_RE.match(line):
            current["refused"] = True
            continue
        sysdescr = _SYSDESCR_RE.match(line)
        if sysdescr:
            current["sysdescr"] = sysdescr.group("text").strip()
            continue
        arp = _ARP_RE.match(line)
        if arp:
            mac = _parse_mac(arp.group("mac"))
            if mac is None:
                raise NormalizationError(f"line {lineno}: unparseable MAC in ARP entry")
            current["neighbors"].append(ArpEntry(arp.group("ip"), mac))
            continue
        # other MIB lines are fine to ignore
    flush()
    return rows


def _parse_mac(text: str) -> str | None:
    parts = re.split(r"[: ]+", text.strip().lower())
    parts = [p for p in parts if p]
    if len(parts) != 6 or not all(re.fullmatch(r"[0-9a-f]{1,2}", p) for p in parts):
        return None
    return ":".join(f"{int(p, 16):02x}" for p in parts)


def extract_arp_seeds(rows: list[NormalizedHost], dataset: Dataset) -> list[str]:
    """ARP neighbor addresses absent from the dataset."""
    known = dataset.known_addresses()
    for row in rows:
        known.add(row.address)
    found: set[str] = set()
    for row in rows:
        snmp = row.observation.snmp
        if snmp is None:
            continue
        for neighbor in snmp.neighbors:
            if neighbor.address not in known:
                found.add(neighbor.address)
    return sorted(found, key=lambda a: int(ipaddress.IPv4Address(a)))
