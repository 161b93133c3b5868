"""Port scanning adapter: external scanner process or simnet-backed.

Both modes produce the same XML document shape, so a single normalizer
serves real captures, simulated runs and the golden fixtures.  Consumed
elements: host/status@state, address@addr (ipv4), hostnames/hostname@name,
ports/port@portid@protocol with nested state@state and service@name,
os/osmatch@name@accuracy with nested osclass@type, trace/hop@ttl@ipaddr@rtt.
Anything else is ignored.
"""

from __future__ import annotations

import ipaddress
import shutil
import subprocess
import time
import xml.etree.ElementTree as ET
from datetime import datetime, timezone

from .. import simnet
from ..model import (Dataset, Hop, Observation, OsGuess, PortFinding, PortState,
                     Protocol, Status, TargetSpec, TracePath)
from .base import (DEFAULT_TIMEOUT_S, MODE_EXTERNAL, MODE_SIMULATED, AdapterDescriptor,
                   AdapterError, NormalizationError, NormalizedHost, RawResult,
                   KIND_SCANNER)

MODULE_ID = "portscan"
SUPPORTED_OPTIONS = ("profile", "ports", "timeout_s")

#: TCP ports probed by the full profile, a compact common-services list.
DEFAULT_TCP_PORTS = (22, 25, 53, 80, 110, 139, 443, 445, 3306, 3389, 8080)

SERVICE_NAMES = {
    (Protocol.TCP, 22): "ssh", (Protocol.TCP, 25): "smtp", (Protocol.TCP, 53): "domain",
    (Protocol.TCP, 80): "http", (Protocol.TCP, 110): "pop3", (Protocol.TCP, 139): "netbios-ssn",
    (Protocol.TCP, 443): "https", (Protocol.TCP, 445): "microsoft-ds",
    (Protocol.TCP, 3306): "mysql", (Protocol.TCP, 3389): "ms-wbt-server",
    (Protocol.TCP, 8080): "http-proxy", (Protocol.UDP, 161): "snmp",
}


def parse_ports_option(value: str) -> list[tuple[Protocol, int]]:
    """Parse "udp:161" / "tcp:22,80" / "tcp:22;udp:53" option strings."""
    result: list[tuple[Protocol, int]] = []
    for chunk in value.split(";"):
        proto_text, _, ports_text = chunk.partition(":")
        try:
            proto = Protocol(proto_text.strip())
        except ValueError:
            raise AdapterError(f"bad ports option {value!r}: unknown protocol") from None
        for p in ports_text.split(","):
            if not p.strip().isdigit():
                raise AdapterError(f"bad ports option {value!r}: {p!r} is not a port")
            result.append((proto, int(p)))
    if not result:
        raise AdapterError(f"bad ports option {value!r}: no ports given")
    return result


class PortscanAdapter:
    """Runs the port scanner and turns its XML into observations."""

    def __init__(self, mode: str, topology: simnet.SimTopology | None = None,
                 binary: str = "nmap") -> None:
        if mode == MODE_SIMULATED and topology is None:
            raise AdapterError("simulated portscan needs a topology")
        self.mode = mode
        self.topology = topology
        self.binary = binary

    def descriptor(self) -> AdapterDescriptor:
        return AdapterDescriptor(MODULE_ID, KIND_SCANNER, SUPPORTED_OPTIONS, self.mode)

    # -- running -----------------------------------------------------------

    def run(self, instance_id: str, targets: list[str], options: dict[str, str],
            iteration: int, dataset: Dataset) -> RawResult:
        started = time.monotonic()
        if self.mode == MODE_SIMULATED:
            captured, status = self._run_simulated(instance_id, targets, options, iteration)
        else:
            captured, status = self._run_external(targets, options)
        return RawResult(
            module_id=instance_id,
            exit_status=status,
            captured=captured,
            duration_s=time.monotonic() - started,
            tool_options=" ".join(f"{k}={v}" for k, v in sorted(options.items())),
            iteration=iteration,
            completed_at=time.time(),
        )

    def _run_external(self, targets: list[str], options: dict[str, str]) -> tuple[bytes, int]:
        if shutil.which(self.binary) is None:
            raise AdapterError(f"scanner binary {self.binary!r} is not installed")
        argv = [self.binary, "-oX", "-", "-n"]
        if "ports" in options:
            specs = parse_ports_option(options["ports"])
            protos = {p for p, _ in specs}
            if protos == {Protocol.UDP}:
                argv.append("-sU")
            argv += ["-p", ",".join(str(n) for _, n in specs)]
        else:
            argv.append("-A")
        argv += targets
        timeout = float(options.get("timeout_s", DEFAULT_TIMEOUT_S))
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            raise AdapterError(f"scanner timed out after {timeout}s") from exc
        except FileNotFoundError as exc:
            raise AdapterError(f"scanner binary {self.binary!r} is not installed") from exc
        return proc.stdout, proc.returncode

    def _run_simulated(self, instance_id: str, targets: list[str],
                       options: dict[str, str], iteration: int) -> tuple[bytes, int]:
        top = self.topology
        assert top is not None
        if "ports" in options:
            port_list = parse_ports_option(options["ports"])
            with_os = with_trace = False
        else:
            port_list = [(Protocol.TCP, p) for p in DEFAULT_TCP_PORTS]
            with_os = with_trace = True
        now = time.time()
        rows: list[NormalizedHost] = []
        for address in expand_targets(targets):
            if address == top.scanner_address:
                continue
            rows.append(self._scan_one(top, instance_id, address, port_list,
                                       with_os, with_trace, options, iteration, now))
        return observations_to_xml(rows), 0

    def _scan_one(self, top: simnet.SimTopology, instance_id: str, address: str,
                  port_list: list[tuple[Protocol, int]], with_os: bool, with_trace: bool,
                  options: dict[str, str], iteration: int, now: float) -> NormalizedHost:
        explicit = "ports" in options
        ports: list[PortFinding] = []
        any_open = False
        for proto, number in port_list:
            state = simnet.probe(top, address, proto.value, number)
            if state == simnet.PROBE_UNREACHABLE:
                continue
            port_state = PortState(state)
            if port_state is PortState.OPEN:
                any_open = True
            # Explicitly requested ports are always reported; the default
            # profile keeps only open and filtered findings.
            if explicit or port_state is not PortState.CLOSED:
                ports.append(PortFinding(number, proto, port_state,
                                         SERVICE_NAMES.get((proto, number))))
        up = simnet.ping(top, address) or any_open
        device = top.device_at(address)
        os_guesses: list[OsGuess] = []
        trace_path: TracePath | None = None
        hostnames: list[str] = []
        if up and device is not None:
            if with_os:
                if isinstance(device, simnet.SimRouter):
                    os_guesses = [OsGuess(device.os_name, device.os_class, 95)]
                else:
                    os_guesses = [OsGuess(device.os_name, device.os_class, 90)]
            if with_trace:
                trace_path = simnet.trace(top, address)
            if isinstance(device, simnet.SimHost) and device.hostname:
                hostnames = [device.hostname]
        obs = Observation(
            tool_name=instance_id,
            tool_options=" ".join(f"{k}={v}" for k, v in sorted(options.items())),
            iteration=iteration,
            timestamp=datetime.fromtimestamp(now, tz=timezone.utc),
            status=Status.UP if up else Status.DOWN,
            ports=[p for p in ports if up],
            os_guesses=os_guesses,
            trace=trace_path,
        )
        return NormalizedHost(address=address, observation=obs, hostnames=hostnames)

    # -- normalization --------------------------------------------------------

    def normalize(self, raw: RawResult) -> list[NormalizedHost]:
        return normalize_portscan(raw)

    def extract_seeds(self, rows: list[NormalizedHost], dataset: Dataset) -> list[str]:
        return extract_trace_seeds(rows, dataset)


def expand_targets(targets: list[str]) -> list[str]:
    """Concrete addresses for a mix of single addresses and CIDR entries."""
    return list(TargetSpec(list(targets)).iter_addresses())


def extract_trace_seeds(rows: list[NormalizedHost], dataset: Dataset) -> list[str]:
    """Trace hop addresses that the dataset has never seen."""
    known = dataset.known_addresses()
    for row in rows:
        known.add(row.address)
    found: set[str] = set()
    for row in rows:
        trace_path = row.observation.trace
        if trace_path is None:
            continue
        for hop in trace_path.hops:
            if hop.address is not None and hop.address not in known:
                found.add(hop.address)
    return sorted(found, key=lambda a: int(ipaddress.IPv4Address(a)))


_STATUS_MAP = {"up": Status.UP, "down": Status.DOWN}
_PORT_STATE_MAP = {"open": PortState.OPEN, "closed": PortState.CLOSED}


def normalize_portscan(raw: RawResult) -> list[NormalizedHost]:
    """Parse scanner XML into normalization rows.

    Unknown elements and attributes are skipped; structurally broken ones
    (a port without a portid, a host without an ipv4 address) raise
    NormalizationError naming the element.
    """
    try:
        root = ET.fromstring(raw.captured.decode("utf-8"))
    except (ET.ParseError, UnicodeDecodeError) as exc:
        raise NormalizationError(f"document is not well-formed XML: {exc}") from None
    rows: list[NormalizedHost] = []
    for host_el in root.iter("host"):
        rows.append(_normalize_host(host_el, raw))
    return rows


def _normalize_host(host_el: ET.Element, raw: RawResult) -> NormalizedHost:
    status_el = host_el.find("status")
    status = Status.UNKNOWN
    if status_el is not None:
        status = _STATUS_MAP.get(status_el.get("state", ""), Status.UNKNOWN)

    addresses = [a.get("addr", "") for a in host_el.findall("address")
                 if a.get("addrtype", "ipv4") == "ipv4"]
    addresses = [a for a in addresses if a]
    if not addresses:
        raise NormalizationError("host element carries no ipv4 address element")

    hostnames = sorted({h.get("name", "") for h in host_el.findall("hostnames/hostname")
                        if h.get("name")})

    ports: list[PortFinding] = []
    for port_el in host_el.findall("ports/port"):
        portid = port_el.get("portid", "")
        proto = port_el.get("protocol", "")
        if not portid.isdigit():
            raise NormalizationError(f"port element with bad portid {portid!r}")
        try:
            protocol = Protocol(proto)
        except ValueError:
            raise NormalizationError(f"port element with bad protocol {proto!r}") from None
        state_el = port_el.find("state")
        if state_el is None or not state_el.get("state"):
            raise NormalizationError(f"port {portid}/{proto} without a state element")
        state = _PORT_STATE_MAP.get(state_el.get("state", ""), PortState.FILTERED)
        service_el = port_el.find("service")
        service = service_el.get("name") if service_el is not None else None
        ports.append(PortFinding(int(portid), protocol, state, service))

    os_guesses: list[OsGuess] = []
    for match_el in host_el.findall("os/osmatch"):
        name = match_el.get("name", "")
        accuracy_text = match_el.get("accuracy", "")
        if not name or not accuracy_text.isdigit():
            raise NormalizationError("osmatch element without name or numeric accuracy")
        class_el = match_el.find("osclass")
        os_class = class_el.get("type", "unknown") if class_el is not None else "unknown"
        os_guesses.append(OsGuess(name, os_class, min(100, int(accuracy_text))))

    trace_path = _normalize_trace(host_el.find("trace"))

    endtime = host_el.get("endtime")
    if endtime is not None:
        timestamp = datetime.fromtimestamp(float(endtime), tz=timezone.utc)
    else:
        timestamp = datetime.fromtimestamp(raw.completed_at, tz=timezone.utc)

    obs = Observation(
        tool_name=raw.module_id,
        tool_options=raw.tool_options,
        iteration=raw.iteration,
        timestamp=timestamp,
        status=status,
        ports=ports,
        os_guesses=os_guesses,
        trace=trace_path,
    )
    return NormalizedHost(address=addresses[0], observation=obs,
                          extra_addresses=addresses[1:], hostnames=hostnames)


def _normalize_trace(trace_el: ET.Element | None) -> TracePath | None:
    if trace_el is None:
        return None
    by_position: dict[int, Hop] = {}
    for hop_el in trace_el.findall("hop"):
        ttl = hop_el.get("ttl", "")
        if not ttl.isdigit() or int(ttl) < 1:
            raise NormalizationError(f"trace hop with bad ttl {ttl!r}")
        rtt_text = hop_el.get("rtt")
        by_position[int(ttl)] = Hop(
            position=int(ttl),
            address=hop_el.get("ipaddr"),
            rtt_ms=float(rtt_text) if rtt_text is not None else None,
        )
    if not by_position:
        return None
    length = max(by_position)
    hops = [by_position.get(pos, Hop(position=pos)) for pos in range(1, length + 1)]
    complete = all(h.address is not None for h in hops)
    return TracePath(hops=hops, complete=complete)


def observations_to_xml(rows: list[NormalizedHost]) -> bytes:
    """Serialize normalization rows back to the consumed XML subset.

    normalize_portscan() of the result yields equal rows, which is the
    round-trip contract the simulated adapter and the tests both lean on.
    """
    root = ET.Element("nmaprun", scanner="netmapper-sim", version="1")
    for row in rows:
        obs = row.observation
        host_el = ET.SubElement(root, "host")
        endtime = obs.timestamp.timestamp()
        host_el.set("endtime", f"{endtime:.3f}".rstrip("0").rstrip(".") or "0")
        ET.SubElement(host_el, "status", state=obs.status.value)
        for addr in [row.address] + list(row.extra_addresses):
            ET.SubElement(host_el, "address", addr=addr, addrtype="ipv4")
        if row.hostnames:
            names_el = ET.SubElement(host_el, "hostnames")
            for name in sorted(row.hostnames):
                ET.SubElement(names_el, "hostname", name=name)
        if obs.ports:
            ports_el = ET.SubElement(host_el, "ports")
            for finding in obs.ports:
                port_el = ET.SubElement(ports_el, "port",
                                        protocol=finding.protocol.value,
                                        portid=str(finding.port))
                ET.SubElement(port_el, "state", state=finding.state.value)
                if finding.service_name:
                    ET.SubElement(port_el, "service", name=finding.service_name)
        if obs.os_guesses:
            os_el = ET.SubElement(host_el, "os")
            for guess in obs.os_guesses:
                match_el = ET.SubElement(os_el, "osmatch", name=guess.name,
                                         accuracy=str(guess.accuracy))
                ET.SubElement(match_el, "osclass", type=guess.os_class,
                              accuracy=str(guess.accuracy))
        if obs.trace is not None:
            trace_el = ET.SubElement(host_el, "trace")
            for hop in obs.trace.hops:
                if hop.address is None:
                    continue
                hop_el = ET.SubElement(trace_el, "hop", ttl=str(hop.position),
                                       ipaddr=hop.address)
                if hop.rtt_ms is not None:
                    hop_el.set("rtt", f"{hop.rtt_ms:.2f}")
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)
