"""Core dataset model: nodes, observations, gateway estimates, policies.

Everything a scan run produces or consumes lives here as plain dataclasses
with canonical JSON serialization.  The dataset is the unit the version
store snapshots, the analyzers read, and the service exposes.
"""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Mapping

JSONDoc = dict[str, Any]

_MAC_RE = re.compile(r"^[0-9a-f]{2}(:[0-9a-f]{2}){5}$")


class ModelError(Exception):
    """Base class for dataset contract violations."""


class ValidationError(ModelError):
    pass


class UnknownNodeError(ModelError):
    pass


class DuplicateObservationError(ModelError):
    """Raised when a (tool, iteration, target) triple is recorded twice."""


class DeviceClass(str, Enum):
    HOST = "host"
    ROUTER = "router"
    UNKNOWN = "unknown"


class Status(str, Enum):
    UP = "up"
    DOWN = "down"
    UNKNOWN = "unknown"


class Protocol(str, Enum):
    TCP = "tcp"
    UDP = "udp"


class PortState(str, Enum):
    OPEN = "open"
    CLOSED = "closed"
    FILTERED = "filtered"


class GatewayMethod(str, Enum):
    TRACE = "trace"
    SINGLETON = "singleton"
    USUAL_SUSPECT = "usual_suspect"
    MANUAL = "manual"


#: Resolution precedence, strongest first.  A weaker method never replaces
#: a stronger one regardless of recency; within one method newer wins.
METHOD_PRECEDENCE: tuple[GatewayMethod, ...] = (
    GatewayMethod.MANUAL,
    GatewayMethod.TRACE,
    GatewayMethod.SINGLETON,
    GatewayMethod.USUAL_SUSPECT,
)


def is_ipv4(text: str) -> bool:
    try:
        ipaddress.IPv4Address(text)
    except (ipaddress.AddressValueError, ValueError):
        return False
    return True


def require_ipv4(text: str, what: str = "address") -> str:
    if not isinstance(text, str) or not is_ipv4(text):
        raise ValidationError(f"{what} {text!r} is not a valid IPv4 address")
    return text


def address_sort_key(address: str) -> int:
    return int(ipaddress.IPv4Address(address))


def canonical_json(doc: Any) -> str:
    """Serialize with sorted keys and no whitespace; digests hash this form."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def utc_now_ms() -> datetime:
    now = datetime.now(timezone.utc)
    return now.replace(microsecond=(now.microsecond // 1000) * 1000)


def timestamp_to_doc(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise ValidationError("timestamps must be timezone-aware UTC")
    return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def timestamp_from_doc(text: str) -> datetime:
    return datetime.fromisoformat(text).astimezone(timezone.utc)


@dataclass
class PortFinding:
    port: int
    protocol: Protocol
    state: PortState
    service_name: str | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValidationError(f"port {self.port} out of range")
        self.protocol = Protocol(self.protocol)
        self.state = PortState(self.state)

    def to_doc(self) -> JSONDoc:
        return {
            "port": self.port,
            "protocol": self.protocol.value,
            "state": self.state.value,
            "service_name": self.service_name,
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "PortFinding":
        return cls(doc["port"], Protocol(doc["protocol"]), PortState(doc["state"]),
                   doc.get("service_name"))


@dataclass
class OsGuess:
    name: str
    os_class: str
    accuracy: int

    def __post_init__(self) -> None:
        if not 0 <= self.accuracy <= 100:
            raise ValidationError(f"accuracy {self.accuracy} out of range")

    def to_doc(self) -> JSONDoc:
        return {"name": self.name, "os_class": self.os_class, "accuracy": self.accuracy}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "OsGuess":
        return cls(doc["name"], doc["os_class"], doc["accuracy"])


@dataclass
class Hop:
    """One traceroute position.  address is None when the hop did not answer."""

    position: int
    address: str | None = None
    rtt_ms: float | None = None

    def __post_init__(self) -> None:
        if self.position < 1:
            raise ValidationError("hop positions start at 1")
        if self.address is not None:
            require_ipv4(self.address, "hop address")

    def to_doc(self) -> JSONDoc:
        return {"position": self.position, "address": self.address, "rtt_ms": self.rtt_ms}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "Hop":
        return cls(doc["position"], doc.get("address"), doc.get("rtt_ms"))


@dataclass
class TracePath:
    """Hop sequence toward one target; the final hop is the target itself."""

    hops: list[Hop]
    complete: bool = True

    def __post_init__(self) -> None:
        positions = [h.position for h in self.hops]
        if positions != list(range(1, len(positions) + 1)):
            raise ValidationError("trace hop positions must be exactly 1..n")
        if self.complete and any(h.address is None for h in self.hops):
            raise ValidationError("complete trace cannot contain unresolved hops")

    @property
    def hopcount(self) -> int:
        return len(self.hops)

    def addresses(self) -> list[str | None]:
        return [h.address for h in self.hops]

    def to_doc(self) -> JSONDoc:
        return {"hops": [h.to_doc() for h in self.hops], "complete": self.complete}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "TracePath":
        return cls([Hop.from_doc(h) for h in doc["hops"]], doc["complete"])


@dataclass
class ArpEntry:
    address: str
    mac: str

    def __post_init__(self) -> None:
        require_ipv4(self.address, "ARP address")
        self.mac = self.mac.lower()
        if not _MAC_RE.match(self.mac):
            raise ValidationError(f"MAC {self.mac!r} is not a valid address")

    def to_doc(self) -> JSONDoc:
        return {"address": self.address, "mac": self.mac}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "ArpEntry":
        return cls(doc["address"], doc["mac"])


@dataclass
class SnmpData:
    system_description: str
    neighbors: list[ArpEntry] = field(default_factory=list)

    def to_doc(self) -> JSONDoc:
        return {
            "system_description": self.system_description,
            "neighbors": [n.to_doc() for n in self.neighbors],
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "SnmpData":
        return cls(doc["system_description"], [ArpEntry.from_doc(n) for n in doc["neighbors"]])


@dataclass
class Observation:
    """What one tool invocation saw at one target in one iteration.

    Observations from different tools are never merged; the resolution view
    picks the newest per tool at read time.  note carries tool-level remarks
    such as an SNMP community refusal.
    """

    tool_name: str
    tool_options: str
    iteration: int
    timestamp: datetime
    status: Status
    ports: list[PortFinding] = field(default_factory=list)
    os_guesses: list[OsGuess] = field(default_factory=list)
    trace: TracePath | None = None
    snmp: SnmpData | None = None
    note: str | None = None

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValidationError("iterations are counted from 1")
        self.status = Status(self.status)
        seen: set[tuple[int, Protocol]] = set()
        for p in self.ports:
            key = (p.port, p.protocol)
            if key in seen:
                raise ValidationError(f"duplicate port finding {p.port}/{p.protocol.value}")
            seen.add(key)

    def best_os_guess(self) -> OsGuess | None:
        if not self.os_guesses:
            return None
        return max(self.os_guesses, key=lambda g: g.accuracy)

    def to_doc(self) -> JSONDoc:
        return {
            "tool_name": self.tool_name,
            "tool_options": self.tool_options,
            "iteration": self.iteration,
            "timestamp": timestamp_to_doc(self.timestamp),
            "status": self.status.value,
            "ports": [p.to_doc() for p in self.ports],
            "os_guesses": [g.to_doc() for g in self.os_guesses],
            "trace": self.trace.to_doc() if self.trace else None,
            "snmp": self.snmp.to_doc() if self.snmp else None,
            "note": self.note,
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "Observation":
        return cls(
            tool_name=doc["tool_name"],
            tool_options=doc["tool_options"],
            iteration=doc["iteration"],
            timestamp=timestamp_from_doc(doc["timestamp"]),
            status=Status(doc["status"]),
            ports=[PortFinding.from_doc(p) for p in doc["ports"]],
            os_guesses=[OsGuess.from_doc(g) for g in doc["os_guesses"]],
            trace=TracePath.from_doc(doc["trace"]) if doc.get("trace") else None,
            snmp=SnmpData.from_doc(doc["snmp"]) if doc.get("snmp") else None,
            note=doc.get("note"),
        )


@dataclass
class GatewayEstimate:
    node_id: str
    gateway_address: str
    method: GatewayMethod
    confidence: float
    iteration: int

    def __post_init__(self) -> None:
        require_ipv4(self.gateway_address, "gateway address")
        self.method = GatewayMethod(self.method)
        if not 0.0 < self.confidence <= 1.0:
            raise ValidationError("confidence must be in (0, 1]")
        if self.method is GatewayMethod.MANUAL and self.confidence != 1.0:
            raise ValidationError("manual estimates carry confidence 1.0")

    def to_doc(self) -> JSONDoc:
        return {
            "node_id": self.node_id,
            "gateway_address": self.gateway_address,
            "method": self.method.value,
            "confidence": self.confidence,
            "iteration": self.iteration,
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "GatewayEstimate":
        return cls(doc["node_id"], doc["gateway_address"], GatewayMethod(doc["method"]),
                   doc["confidence"], doc["iteration"])


def pick_gateway(current: GatewayEstimate | None,
                 candidate: GatewayEstimate) -> GatewayEstimate:
    """Apply resolution precedence between the standing estimate and a candidate.

    Manual beats everything and is never replaced.  Across methods the
    stronger method wins regardless of age; within one method the newer
    iteration wins, ties keep the incumbent.
    """
    if current is None:
        return candidate
    cur_rank = METHOD_PRECEDENCE.index(current.method)
    cand_rank = METHOD_PRECEDENCE.index(candidate.method)
    if cand_rank < cur_rank:
        return candidate
    if cand_rank == cur_rank and candidate.iteration > current.iteration:
        return candidate
    return current


@dataclass
class NodeRecord:
    """One network node, keyed by its primary IPv4 address."""

    node_id: str
    addresses: set[str]
    hostnames: set[str] = field(default_factory=set)
    device_class: DeviceClass = DeviceClass.UNKNOWN
    observations: list[Observation] = field(default_factory=list)
    gateway: GatewayEstimate | None = None
    first_seen_iteration: int = 1
    manual_fields: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        require_ipv4(self.node_id, "node id")
        if not self.addresses:
            raise ValidationError("a node carries at least one address")
        for a in self.addresses:
            require_ipv4(a, "node address")
        self.device_class = DeviceClass(self.device_class)

    def latest_observation(self, tool_name: str | None = None) -> Observation | None:
        best: Observation | None = None
        best_key = None
        for idx, obs in enumerate(self.observations):
            if tool_name is not None and obs.tool_name != tool_name:
                continue
            key = (obs.iteration, obs.timestamp, idx)
            if best_key is None or key > best_key:
                best, best_key = obs, key
        return best

    def latest_trace(self) -> TracePath | None:
        """Newest recorded trace across tools, regardless of completeness."""
        best: TracePath | None = None
        best_key = None
        for idx, obs in enumerate(self.observations):
            if obs.trace is None:
                continue
            key = (obs.iteration, obs.timestamp, idx)
            if best_key is None or key > best_key:
                best, best_key = obs.trace, key
        return best

    def recompute_device_class(self) -> None:
        if "device_class" in self.manual_fields:
            return
        guesses = [g for obs in self.observations for g in obs.os_guesses]
        if any("router" in g.os_class.lower() for g in guesses):
            self.device_class = DeviceClass.ROUTER
        elif guesses:
            self.device_class = DeviceClass.HOST
        else:
            self.device_class = DeviceClass.UNKNOWN

    def to_doc(self) -> JSONDoc:
        return {
            "node_id": self.node_id,
            "addresses": sorted(self.addresses, key=address_sort_key),
            "hostnames": sorted(self.hostnames),
            "device_class": self.device_class.value,
            "observations": [o.to_doc() for o in self.observations],
            "gateway": self.gateway.to_doc() if self.gateway else None,
            "first_seen_iteration": self.first_seen_iteration,
            "manual_fields": sorted(self.manual_fields),
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "NodeRecord":
        return cls(
            node_id=doc["node_id"],
            addresses=set(doc["addresses"]),
            hostnames=set(doc["hostnames"]),
            device_class=DeviceClass(doc["device_class"]),
            observations=[Observation.from_doc(o) for o in doc["observations"]],
            gateway=GatewayEstimate.from_doc(doc["gateway"]) if doc.get("gateway") else None,
            first_seen_iteration=doc["first_seen_iteration"],
            manual_fields=set(doc.get("manual_fields", [])),
        )


@dataclass
class SeedEntry:
    """Discovered address queued for a later iteration; scanned flips once."""

    address: str
    origin_module: str
    discovered_iteration: int
    scanned: bool = False

    def __post_init__(self) -> None:
        require_ipv4(self.address, "seed address")

    def to_doc(self) -> JSONDoc:
        return {
            "address": self.address,
            "origin_module": self.origin_module,
            "discovered_iteration": self.discovered_iteration,
            "scanned": self.scanned,
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "SeedEntry":
        return cls(doc["address"], doc["origin_module"], doc["discovered_iteration"],
                   doc["scanned"])


@dataclass
class TargetSpec:
    """Normalized list of IPv4 addresses and CIDR ranges."""

    entries: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        normalized: list[str] = []
        for raw in self.entries:
            normalized.append(normalize_target_entry(raw))
        self.entries = normalized

    def networks(self) -> list[ipaddress.IPv4Network]:
        return [ipaddress.IPv4Network(e) for e in self.entries]

    def contains(self, address: str) -> bool:
        addr = ipaddress.IPv4Address(address)
        return any(addr in net for net in self.networks())

    def iter_addresses(self) -> Iterable[str]:
        """All concrete addresses, network/broadcast included for /31 and /32."""
        for net in self.networks():
            if net.num_addresses <= 2:
                for a in net:
                    yield str(a)
            else:
                for a in net.hosts():
                    yield str(a)

    def is_empty(self) -> bool:
        return not self.entries

    def to_doc(self) -> JSONDoc:
        return {"entries": list(self.entries)}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "TargetSpec":
        return cls(list(doc["entries"]))


def normalize_target_entry(raw: str) -> str:
    """Canonicalize one target entry; host bits below the mask are zeroed."""
    text = raw.strip()
    if "/" in text:
        base, _, prefix = text.partition("/")
        require_ipv4(base, "target network")
        try:
            bits = int(prefix)
        except ValueError:
            raise ValidationError(f"target prefix {prefix!r} is not an integer") from None
        if not 0 <= bits <= 32:
            raise ValidationError(f"target prefix /{bits} out of range")
        net = ipaddress.IPv4Network((base, bits), strict=False)
        return str(net) if bits < 32 else str(net.network_address)
    require_ipv4(text, "target")
    return text


@dataclass
class ModuleInvocation:
    module_id: str
    options: dict[str, str] = field(default_factory=dict)

    def options_string(self) -> str:
        return " ".join(f"{k}={v}" for k, v in sorted(self.options.items()))

    def to_doc(self) -> JSONDoc:
        return {"module_id": self.module_id, "options": dict(sorted(self.options.items()))}

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "ModuleInvocation":
        return cls(doc["module_id"], dict(doc.get("options", {})))


@dataclass
class ScanningPolicy:
    name: str
    chain: list[ModuleInvocation]
    iterations: int = 1
    scope: TargetSpec = field(default_factory=TargetSpec)

    def to_doc(self) -> JSONDoc:
        return {
            "name": self.name,
            "chain": [m.to_doc() for m in self.chain],
            "iterations": self.iterations,
            "scope": self.scope.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "ScanningPolicy":
        return cls(
            name=doc["name"],
            chain=[ModuleInvocation.from_doc(m) for m in doc["chain"]],
            iterations=doc.get("iterations", 1),
            scope=TargetSpec.from_doc(doc["scope"]) if doc.get("scope") else TargetSpec(),
        )


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    location: str = ""

    def to_doc(self) -> JSONDoc:
        return {"severity": self.severity, "message": self.message, "location": self.location}


def validate_policy(policy: ScanningPolicy,
                    registry: Mapping[str, str]) -> list[Diagnostic]:
    """Check a policy against the known module registry.

    Args:
        policy: the policy to validate.
        registry: mapping of module id to its kind ("scanner" or "analyzer").

    Returns:
        Diagnostics, empty when the policy is clean.  Unknown module ids and
        a non-positive iteration count are errors; a chain without a single
        scanner module is a warning because nothing would ever be scanned.
    """
    diags: list[Diagnostic] = []
    if not policy.name:
        diags.append(Diagnostic("error", "policy name must not be empty", "name"))
    if policy.iterations < 1:
        diags.append(Diagnostic("error", "iterations must be at least 1", "iterations"))
    if not policy.chain:
        diags.append(Diagnostic("error", "module chain is empty", "chain"))
    kinds: list[str] = []
    for idx, inv in enumerate(policy.chain):
        kind = registry.get(inv.module_id)
        if kind is None:
            diags.append(Diagnostic("error", f"unknown module id {inv.module_id!r}",
                                    f"chain[{idx}]"))
        else:
            kinds.append(kind)
    if policy.chain and kinds and all(k == "analyzer" for k in kinds):
        diags.append(Diagnostic(
            "warning",
            "chain holds only analyzer modules; no scanner runs, so no results "
            "can be produced",
            "chain"))
    return diags


@dataclass
class DatasetMeta:
    """Dataset-level facts that are not per-node."""

    scanner_gateway: str | None = None
    network_entry_point: str | None = None
    links: list[tuple[str, str]] = field(default_factory=list)

    def add_link(self, a: str, b: str) -> None:
        pair = tuple(sorted((a, b), key=address_sort_key))
        if a != b and pair not in self.links:
            self.links.append(pair)  # type: ignore[arg-type]

    def to_doc(self) -> JSONDoc:
        return {
            "scanner_gateway": self.scanner_gateway,
            "network_entry_point": self.network_entry_point,
            "links": sorted([list(p) for p in self.links]),
        }

    @classmethod
    def from_doc(cls, doc: JSONDoc) -> "DatasetMeta":
        meta = cls(doc.get("scanner_gateway"), doc.get("network_entry_point"))
        meta.links = [tuple(p) for p in doc.get("links", [])]  # type: ignore[misc]
        return meta


@dataclass
class NodeView:
    """Read-time resolution of one node: per-tool latest plus a merged summary."""

    node_id: str
    per_tool: dict[str, Observation]
    summary: JSONDoc

    def to_doc(self) -> JSONDoc:
        return {
            "node_id": self.node_id,
            "per_tool": {t: o.to_doc() for t, o in sorted(self.per_tool.items())},
            "summary": self.summary,
        }


class Dataset:
    """All nodes, pending seeds and meta for one network under observation."""

    def __init__(self) -> None:
        self.nodes: dict[str, NodeRecord] = {}
        self.seeds: dict[str, SeedEntry] = {}
        self.meta = DatasetMeta()
        self.runs: dict[str, JSONDoc] = {}

    # -- node bookkeeping ---------------------------------------------------

    def find_node_by_address(self, address: str) -> NodeRecord | None:
        node = self.nodes.get(address)
        if node is not None:
            return node
        for candidate in self.nodes.values():
            if address in candidate.addresses:
                return candidate
        return None

    def record_observation(self, address: str, obs: Observation, *,
                           hostnames: Iterable[str] = (),
                           extra_addresses: Iterable[str] = ()) -> NodeRecord:
        """Attach an observation to the node at `address`, creating it if new.

        Raises DuplicateObservationError when the same tool already reported
        this target in the same iteration.  Fields listed in the node's
        manual_fields are left untouched.
        """
        require_ipv4(address, "target address")
        node = self.find_node_by_address(address)
        if node is None:
            node = NodeRecord(node_id=address, addresses={address},
                              first_seen_iteration=obs.iteration)
            self.nodes[address] = node
        for existing in node.observations:
            if existing.tool_name == obs.tool_name and existing.iteration == obs.iteration:
                raise DuplicateObservationError(
                    f"{obs.tool_name} already observed {address} in iteration "
                    f"{obs.iteration}")
        node.observations.append(obs)
        for extra in extra_addresses:
            node.addresses.add(require_ipv4(extra, "reported address"))
        if "hostnames" not in node.manual_fields:
            node.hostnames.update(hostnames)
        node.recompute_device_class()
        return node

    def resolve_view(self, node_id: str) -> NodeView:
        """Latest-per-tool breakdown plus a merged summary for one node."""
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNodeError(f"no node with id {node_id!r}")
        per_tool: dict[str, Observation] = {}
        for tool in {o.tool_name for o in node.observations}:
            latest = node.latest_observation(tool)
            assert latest is not None
            per_tool[tool] = latest

        newest = node.latest_observation()
        merged_ports: dict[tuple[int, str], JSONDoc] = {}
        ordered = sorted(per_tool.values(), key=lambda o: (o.iteration, o.timestamp))
        for obs in ordered:  # newer tools overwrite shared (port, proto) cells
            for p in obs.ports:
                merged_ports[(p.port, p.protocol.value)] = p.to_doc()
        os_guess = None
        for obs in reversed(ordered):
            if obs.os_guesses:
                os_guess = obs.best_os_guess()
                break
        hostnames = sorted(node.hostnames)
        summary: JSONDoc = {
            "status": newest.status.value if newest else Status.UNKNOWN.value,
            "ports": [merged_ports[k] for k in sorted(merged_ports)],
            "os": os_guess.to_doc() if os_guess else None,
            "hostnames": hostnames,
            "hostname_conflict": len(hostnames) > 1,
            "device_class": node.device_class.value,
            "gateway": node.gateway.to_doc() if node.gateway else None,
            "first_seen_iteration": node.first_seen_iteration,
            "addresses": sorted(node.addresses, key=address_sort_key),
        }
        return NodeView(node_id=node_id, per_tool=per_tool, summary=summary)

    # -- seed bookkeeping ----------------------------------------------------

    def add_seed(self, entry: SeedEntry) -> bool:
        """Queue a discovered address; returns False when already known."""
        if entry.address in self.seeds or entry.address in self.nodes:
            return False
        if self.find_node_by_address(entry.address) is not None:
            return False
        self.seeds[entry.address] = entry
        return True

    def pending_seeds(self) -> list[SeedEntry]:
        return [s for s in self.seeds.values() if not s.scanned]

    def mark_seed_scanned(self, address: str) -> None:
        seed = self.seeds.get(address)
        if seed is not None:
            seed.scanned = True

    def known_addresses(self) -> set[str]:
        known: set[str] = set(self.seeds)
        for node in self.nodes.values():
            known.update(node.addresses)
        return known

    # -- gateway resolution ---------------------------------------------------

    def apply_gateway_estimate(self, estimate: GatewayEstimate) -> bool:
        """Fold one candidate into the node's resolved gateway.

        Returns True when the resolved estimate changed.  Nodes whose gateway
        is flagged manual are never modified.
        """
        node = self.nodes.get(estimate.node_id)
        if node is None:
            raise UnknownNodeError(f"no node with id {estimate.node_id!r}")
        if "gateway" in node.manual_fields:
            return False
        chosen = pick_gateway(node.gateway, estimate)
        if chosen is node.gateway:
            return False
        if (node.gateway is not None
                and chosen.method is node.gateway.method
                and chosen.gateway_address == node.gateway.gateway_address):
            # Same conclusion re-derived later; keep the original stamp so
            # version diffs stay quiet on an unchanged network.
            return False
        node.gateway = chosen
        return True

    def set_manual_gateway(self, node_id: str, gateway_address: str,
                           iteration: int = 0) -> GatewayEstimate:
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNodeError(f"no node with id {node_id!r}")
        estimate = GatewayEstimate(node_id=node_id,
                                   gateway_address=require_ipv4(gateway_address),
                                   method=GatewayMethod.MANUAL,
                                   confidence=1.0,
                                   iteration=iteration)
        node.gateway = estimate
        node.manual_fields.add("gateway")
        return estimate

    # -- serialization ---------------------------------------------------------

    NODE_PREFIX = "node:"
    RUN_PREFIX = "run:"
    SEEDS_KEY = "seeds"
    META_KEY = "meta"

    def to_objects(self) -> dict[str, JSONDoc]:
        """Dataset as the object map the version store commits."""
        objects: dict[str, JSONDoc] = {
            self.SEEDS_KEY: {
                "entries": [self.seeds[a].to_doc()
                            for a in sorted(self.seeds, key=address_sort_key)],
            },
            self.META_KEY: self.meta.to_doc(),
        }
        for node_id, node in self.nodes.items():
            objects[self.NODE_PREFIX + node_id] = node.to_doc()
        for run_id, report in self.runs.items():
            objects[self.RUN_PREFIX + run_id] = report
        return objects

    @classmethod
    def from_objects(cls, objects: Mapping[str, JSONDoc]) -> "Dataset":
        ds = cls()
        for key in sorted(objects):
            if key.startswith(cls.NODE_PREFIX):
                node = NodeRecord.from_doc(objects[key])
                ds.nodes[node.node_id] = node
            elif key.startswith(cls.RUN_PREFIX):
                ds.runs[key[len(cls.RUN_PREFIX):]] = objects[key]
        for entry in objects.get(cls.SEEDS_KEY, {}).get("entries", []):
            seed = SeedEntry.from_doc(entry)
            ds.seeds[seed.address] = seed
        if cls.META_KEY in objects:
            ds.meta = DatasetMeta.from_doc(objects[cls.META_KEY])
        return ds

    def copy(self) -> "Dataset":
        return Dataset.from_objects(self.to_objects())

    def node_count(self) -> int:
        return len(self.nodes)
