"""Deterministic simulated network used for testing and sim-mode scans.

A topology is a set of /-notated subnets joined by routers into a tree, with
hosts attached to subnets and first-match ACL rules between the scanner and
everything else.  All query functions are pure: same topology, same answer.

Conventions the rest of the engine relies on:

* trace() reports each router by its interface in the NEXT subnet toward the
  target, so the hop right before a host is by construction the gateway
  interface of the host's subnet.
* Derived ARP tables cover active devices on a router's attached subnets.
  The scanner's own attachment address is excluded, as a transient device.
* Round-trip times are position * 1.0 ms.
"""

from __future__ import annotations

import ipaddress
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .model import Hop, TracePath, is_ipv4

JSONDoc = dict[str, Any]

PROBE_OPEN = "open"
PROBE_CLOSED = "closed"
PROBE_FILTERED = "filtered"
PROBE_UNREACHABLE = "unreachable"


class TopologyError(Exception):
    """Invalid topology document; message names the offending element."""


class UnreachableTargetError(Exception):
    pass


def parse_port(text: str) -> tuple[str, int]:
    """Parse "tcp/22" style port notation."""
    proto, _, num = text.partition("/")
    if proto not in ("tcp", "udp") or not num.isdigit():
        raise TopologyError(f"bad port spec {text!r}")
    port = int(num)
    if not 1 <= port <= 65535:
        raise TopologyError(f"port {port} out of range in {text!r}")
    return proto, port


def derive_mac(address: str) -> str:
    octets = address.split(".")
    return "02:00:" + ":".join(f"{int(o):02x}" for o in octets)


@dataclass
class SimHost:
    address: str
    os_name: str = "Linux 5.4"
    os_class: str = "general purpose"
    open_ports: list[tuple[str, int]] = field(default_factory=list)
    responds_to_ping: bool = True
    hostname: str | None = None

    @property
    def active(self) -> bool:
        return self.responds_to_ping or bool(self.open_ports)


@dataclass
class SimRouter:
    name: str
    interfaces: list[str]
    snmp_community: str | None = "public"
    os_name: str = "EdgeOS 2.0"
    os_class: str = "router"
    open_ports: list[tuple[str, int]] = field(default_factory=lambda: [("tcp", 22), ("udp", 161)])
    arp_table: list[tuple[str, str]] | None = None  # derived when None


@dataclass
class SimSubnet:
    cidr: str
    gateway: str

    def network(self) -> ipaddress.IPv4Network:
        return ipaddress.IPv4Network(self.cidr)


@dataclass
class SimRule:
    """First match wins; absent fields match anything.  Default is allow."""

    action: str  # "allow" | "deny"
    src: str = "0.0.0.0/0"
    dst: str = "0.0.0.0/0"
    protocol: str | None = None  # tcp | udp | icmp | None=any
    port: int | None = None

    def matches(self, src: str, dst: str, protocol: str, port: int | None) -> bool:
        if ipaddress.IPv4Address(src) not in ipaddress.IPv4Network(self.src):
            return False
        if ipaddress.IPv4Address(dst) not in ipaddress.IPv4Network(self.dst):
            return False
        if self.protocol is not None and self.protocol != protocol:
            return False
        if self.port is not None and self.port != port:
            return False
        return True


class SimTopology:
    def __init__(self, name: str, scanner_subnet: str, scanner_address: str,
                 subnets: list[SimSubnet], routers: list[SimRouter],
                 hosts: list[SimHost], acls: list[SimRule]) -> None:
        self.name = name
        self.scanner_subnet = scanner_subnet
        self.scanner_address = scanner_address
        self.subnets = subnets
        self.routers = routers
        self.hosts = {h.address: h for h in hosts}
        self.acls = acls
        self._subnet_by_cidr = {s.cidr: s for s in subnets}
        self._iface_owner: dict[str, SimRouter] = {}
        for r in routers:
            for iface in r.interfaces:
                self._iface_owner[iface] = r
        self._validate()
        self._paths = self._compute_paths()

    # -- structure ----------------------------------------------------------

    def subnet_of(self, address: str) -> SimSubnet | None:
        addr = ipaddress.IPv4Address(address)
        for s in self.subnets:
            if addr in s.network():
                return s
        return None

    def router_subnets(self, router: SimRouter) -> list[SimSubnet]:
        found = []
        for iface in router.interfaces:
            subnet = self.subnet_of(iface)
            if subnet is not None and subnet not in found:
                found.append(subnet)
        return found

    def interface_in(self, router: SimRouter, subnet: SimSubnet) -> str | None:
        net = subnet.network()
        for iface in router.interfaces:
            if ipaddress.IPv4Address(iface) in net:
                return iface
        return None

    def device_at(self, address: str) -> SimHost | SimRouter | None:
        if address in self.hosts:
            return self.hosts[address]
        return self._iface_owner.get(address)

    def scanner_gateway(self) -> str:
        return self._subnet_by_cidr[self.scanner_subnet].gateway

    def _validate(self) -> None:
        if self.scanner_subnet not in self._subnet_by_cidr:
            raise TopologyError(f"scanner.subnet: {self.scanner_subnet!r} is not a declared subnet")
        if not is_ipv4(self.scanner_address):
            raise TopologyError(f"scanner.address: {self.scanner_address!r} is not IPv4")
        scanner_net = self._subnet_by_cidr[self.scanner_subnet].network()
        if ipaddress.IPv4Address(self.scanner_address) not in scanner_net:
            raise TopologyError("scanner.address: not inside scanner.subnet")

        seen_cidrs: set[str] = set()
        for i, s in enumerate(self.subnets):
            try:
                net = s.network()
            except ValueError as exc:
                raise TopologyError(f"subnets[{i}].cidr: {exc}") from None
            if s.cidr in seen_cidrs:
                raise TopologyError(f"subnets[{i}].cidr: duplicate {s.cidr}")
            seen_cidrs.add(s.cidr)
            if not is_ipv4(s.gateway) or ipaddress.IPv4Address(s.gateway) not in net:
                raise TopologyError(f"subnets[{i}].gateway: {s.gateway!r} not inside {s.cidr}")
            if s.gateway not in self._iface_owner:
                raise TopologyError(f"subnets[{i}].gateway: {s.gateway} is not a router interface")

        seen_ifaces: set[str] = set()
        for ri, r in enumerate(self.routers):
            if not r.interfaces:
                raise TopologyError(f"routers[{ri}]: router {r.name!r} has no interfaces")
            for ii, iface in enumerate(r.interfaces):
                if not is_ipv4(iface):
                    raise TopologyError(f"routers[{ri}].interfaces[{ii}]: {iface!r} is not IPv4")
                if iface in seen_ifaces:
                    raise TopologyError(f"routers[{ri}].interfaces[{ii}]: duplicate {iface}")
                seen_ifaces.add(iface)
                if self.subnet_of(iface) is None:
                    raise TopologyError(
                        f"routers[{ri}].interfaces[{ii}]: {iface} is in no declared subnet")

        for hi, (address, host) in enumerate(self.hosts.items()):
            if not is_ipv4(address):
                raise TopologyError(f"hosts[{hi}].address: {address!r} is not IPv4")
            if self.subnet_of(address) is None:
                raise TopologyError(f"hosts[{hi}].address: {address} is in no declared subnet")
            if address in self._iface_owner:
                raise TopologyError(f"hosts[{hi}].address: {address} collides with a router interface")
            if address == self.scanner_address:
                raise TopologyError(f"hosts[{hi}].address: {address} collides with the scanner")

        for ai, rule in enumerate(self.acls):
            if rule.action not in ("allow", "deny"):
                raise TopologyError(f"acls[{ai}].action: {rule.action!r}")
            for fld in ("src", "dst"):
                try:
                    ipaddress.IPv4Network(getattr(rule, fld))
                except ValueError:
                    raise TopologyError(f"acls[{ai}].{fld}: bad network") from None
            if rule.protocol not in (None, "tcp", "udp", "icmp"):
                raise TopologyError(f"acls[{ai}].protocol: {rule.protocol!r}")

        self._validate_tree()

    def _validate_tree(self) -> None:
        # Bipartite graph: subnet vertices and router vertices.  A topology
        # is usable only when this graph is a single tree.
        edges: list[tuple[str, str]] = []
        for r in self.routers:
            for s in self.router_subnets(r):
                edges.append((f"router:{r.name}", f"subnet:{s.cidr}"))
        vertices = {f"subnet:{s.cidr}" for s in self.subnets}
        vertices.update(f"router:{r.name}" for r in self.routers)
        if len(set(edges)) != len(edges):
            raise TopologyError("topology: a router attaches twice to one subnet")
        if len(edges) != len(vertices) - 1:
            raise TopologyError("topology: subnet graph is not a tree")
        adjacency: dict[str, set[str]] = {v: set() for v in vertices}
        for a, b in edges:
            adjacency[a].add(b)
            adjacency[b].add(a)
        seen: set[str] = set()
        stack = [next(iter(vertices))]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adjacency[v] - seen)
        if seen != vertices:
            raise TopologyError("topology: subnet graph is not connected")

    def _compute_paths(self) -> dict[str, list[tuple[SimRouter, SimSubnet]]]:
        """BFS from the scanner subnet; per subnet the (router, entered-subnet)
        steps in path order."""
        start = f"subnet:{self.scanner_subnet}"
        adjacency: dict[str, list[str]] = {}
        for r in self.routers:
            rk = f"router:{r.name}"
            for s in self.router_subnets(r):
                sk = f"subnet:{s.cidr}"
                adjacency.setdefault(rk, []).append(sk)
                adjacency.setdefault(sk, []).append(rk)
        parent: dict[str, str] = {start: ""}
        queue = [start]
        while queue:
            v = queue.pop(0)
            for n in adjacency.get(v, []):
                if n not in parent:
                    parent[n] = v
                    queue.append(n)
        routers_by_name = {r.name: r for r in self.routers}
        paths: dict[str, list[tuple[SimRouter, SimSubnet]]] = {}
        for s in self.subnets:
            key = f"subnet:{s.cidr}"
            chain: list[tuple[SimRouter, SimSubnet]] = []
            cursor = key
            while cursor != start:
                router_key = parent[cursor]
                router = routers_by_name[router_key.split(":", 1)[1]]
                entered = self._subnet_by_cidr[cursor.split(":", 1)[1]]
                chain.append((router, entered))
                cursor = parent[router_key]
            chain.reverse()
            paths[s.cidr] = chain
        return paths

    # -- ARP ------------------------------------------------------------------

    def arp_table_of(self, router: SimRouter) -> list[tuple[str, str]]:
        if router.arp_table is not None:
            return list(router.arp_table)
        entries: list[tuple[str, str]] = []
        own = set(router.interfaces)
        for subnet in self.router_subnets(router):
            net = subnet.network()
            for host in self.hosts.values():
                if host.active and ipaddress.IPv4Address(host.address) in net:
                    entries.append((host.address, derive_mac(host.address)))
            for iface, owner in self._iface_owner.items():
                if owner is router or iface in own:
                    continue
                if ipaddress.IPv4Address(iface) in net:
                    entries.append((iface, derive_mac(iface)))
        entries = [e for e in entries if e[0] != self.scanner_address]
        return sorted(set(entries), key=lambda e: int(ipaddress.IPv4Address(e[0])))

    # -- serialization ----------------------------------------------------------

    def to_doc(self) -> JSONDoc:
        return {
            "name": self.name,
            "scanner": {"subnet": self.scanner_subnet, "address": self.scanner_address},
            "subnets": [{"cidr": s.cidr, "gateway": s.gateway} for s in self.subnets],
            "routers": [
                {
                    "name": r.name,
                    "interfaces": list(r.interfaces),
                    "snmp_community": r.snmp_community,
                    "os_name": r.os_name,
                    "os_class": r.os_class,
                    "open_ports": [f"{p}/{n}" for p, n in r.open_ports],
                    "arp_table": ([[a, m] for a, m in r.arp_table]
                                  if r.arp_table is not None else None),
                }
                for r in self.routers
            ],
            "hosts": [
                {
                    "address": h.address,
                    "os_name": h.os_name,
                    "os_class": h.os_class,
                    "open_ports": [f"{p}/{n}" for p, n in h.open_ports],
                    "responds_to_ping": h.responds_to_ping,
                    "hostname": h.hostname,
                }
                for h in self.hosts.values()
            ],
            "acls": [
                {
                    "action": rule.action,
                    "src": rule.src,
                    "dst": rule.dst,
                    "protocol": rule.protocol,
                    "port": rule.port,
                }
                for rule in self.acls
            ],
        }


def topology_from_doc(doc: JSONDoc) -> SimTopology:
    try:
        scanner = doc["scanner"]
        subnets = [SimSubnet(s["cidr"], s["gateway"]) for s in doc["subnets"]]
        routers = [
            SimRouter(
                name=r["name"],
                interfaces=list(r["interfaces"]),
                snmp_community=r.get("snmp_community", "public"),
                os_name=r.get("os_name", "EdgeOS 2.0"),
                os_class=r.get("os_class", "router"),
                open_ports=[parse_port(p) for p in r.get("open_ports", ["tcp/22", "udp/161"])],
                arp_table=([(a, m) for a, m in r["arp_table"]]
                           if r.get("arp_table") is not None else None),
            )
            for r in doc["routers"]
        ]
        hosts = [
            SimHost(
                address=h["address"],
                os_name=h.get("os_name", "Linux 5.4"),
                os_class=h.get("os_class", "general purpose"),
                open_ports=[parse_port(p) for p in h.get("open_ports", [])],
                responds_to_ping=h.get("responds_to_ping", True),
                hostname=h.get("hostname"),
            )
            for h in doc["hosts"]
        ]
        acls = [
            SimRule(
                action=a["action"],
                src=a.get("src", "0.0.0.0/0"),
                dst=a.get("dst", "0.0.0.0/0"),
                protocol=a.get("protocol"),
                port=a.get("port"),
            )
            for a in doc.get("acls", [])
        ]
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"topology document is missing element: {exc}") from None
    return SimTopology(doc.get("name", "unnamed"), scanner["subnet"], scanner["address"],
                       subnets, routers, hosts, acls)


def load_topology(path: str | Path) -> SimTopology:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return topology_from_doc(doc)


# -- queries -----------------------------------------------------------------


def _acl_action(top: SimTopology, dst: str, protocol: str, port: int | None) -> str:
    for rule in top.acls:
        if rule.matches(top.scanner_address, dst, protocol, port):
            return rule.action
    return "allow"


def probe(top: SimTopology, address: str, protocol: str, port: int) -> str:
    """Probe one port from the scanner.  Pure; see module docstring."""
    if top.subnet_of(address) is None:
        return PROBE_UNREACHABLE
    if _acl_action(top, address, protocol, port) == "deny":
        return PROBE_FILTERED
    device = top.device_at(address)
    if device is None:
        return PROBE_CLOSED
    if (protocol, port) in device.open_ports:
        return PROBE_OPEN
    return PROBE_CLOSED


def ping(top: SimTopology, address: str) -> bool:
    if top.subnet_of(address) is None:
        return False
    if _acl_action(top, address, "icmp", None) == "deny":
        return False
    device = top.device_at(address)
    if device is None:
        return False
    if isinstance(device, SimRouter):
        return True
    return device.responds_to_ping


def trace(top: SimTopology, address: str) -> TracePath:
    """Hop path from the scanner to a device address.

    Intermediate hops hidden by an icmp deny rule keep their position with
    an absent address.  Raises UnreachableTargetError when no device holds
    the address.
    """
    subnet = top.subnet_of(address)
    device = top.device_at(address)
    if subnet is None or device is None:
        raise UnreachableTargetError(f"no route to {address}")
    hop_addresses: list[str] = []
    for router, entered in top._paths[subnet.cidr]:
        iface = top.interface_in(router, entered)
        assert iface is not None
        if iface == address:
            break
        hop_addresses.append(iface)
    hop_addresses.append(address)
    hops: list[Hop] = []
    complete = True
    for pos, hop_addr in enumerate(hop_addresses, start=1):
        hidden = (hop_addr != address
                  and _acl_action(top, hop_addr, "icmp", None) == "deny")
        if hidden:
            complete = False
            hops.append(Hop(position=pos, address=None, rtt_ms=None))
        else:
            hops.append(Hop(position=pos, address=hop_addr, rtt_ms=pos * 1.0))
    return TracePath(hops=hops, complete=complete)


def ground_truth_gateway(top: SimTopology, host_address: str) -> str:
    """Oracle: the declared gateway interface of the host's subnet."""
    if host_address not in top.hosts:
        raise UnreachableTargetError(f"{host_address} is not a declared host")
    subnet = top.subnet_of(host_address)
    assert subnet is not None
    return subnet.gateway


def snmp_query(top: SimTopology, address: str, community: str) -> tuple[str, list[tuple[str, str]]] | None:
    """ARP table by SNMP; None is a refusal (bad community or no agent)."""
    device = top.device_at(address)
    if not isinstance(device, SimRouter):
        return None
    if device.snmp_community is None or device.snmp_community != community:
        return None
    sysdescr = f"{device.os_name} on {device.name}"
    return sysdescr, top.arp_table_of(device)


# -- random generation ---------------------------------------------------------

OS_CHOICES: list[tuple[str, str]] = [
    ("Linux 5.4", "general purpose"),
    ("Linux 4.19", "general purpose"),
    ("Windows Server 2019", "general purpose"),
    ("Windows 10", "general purpose"),
    ("FreeBSD 13.1", "general purpose"),
]

HOST_PORT_CHOICES: list[list[str]] = [
    ["tcp/22"],
    ["tcp/22", "tcp/80"],
    ["tcp/80", "tcp/443"],
    ["tcp/445", "tcp/3389"],
    ["tcp/22", "tcp/3306"],
]


def generate_topology(seed: int, min_subnets: int = 3, max_subnets: int = 30,
                      min_hosts: int = 5, max_hosts: int = 200) -> SimTopology:
    """Seeded random tree topology; the seed is embedded in the name for replay."""
    rng = random.Random(seed)
    n_subnets = rng.randint(min_subnets, max_subnets)
    cidrs = [f"10.{i}.0.0/24" for i in range(n_subnets)]

    routers: list[SimRouter] = []
    gateways: dict[int, str] = {}
    upstream_free: dict[int, int] = {i: 200 for i in range(n_subnets)}
    for child in range(1, n_subnets):
        parent = rng.randrange(0, child)
        child_iface = f"10.{child}.0.1"
        if parent == 0 and 0 not in gateways:
            parent_iface = "10.0.0.1"
            gateways[0] = parent_iface
        else:
            parent_iface = f"10.{parent}.0.{upstream_free[parent]}"
            upstream_free[parent] += 1
        routers.append(SimRouter(name=f"r{child}", interfaces=[parent_iface, child_iface]))
        gateways[child] = child_iface

    subnets = [SimSubnet(cidrs[i], gateways[i]) for i in range(n_subnets)]

    n_hosts = rng.randint(min_hosts, max_hosts)
    hosts: list[SimHost] = []
    next_host: dict[int, int] = {i: 10 for i in range(n_subnets)}
    for _ in range(n_hosts):
        subnet_idx = rng.randrange(n_subnets)
        octet = next_host[subnet_idx]
        if octet > 199:
            continue  # subnet full, drop the host
        next_host[subnet_idx] += 1
        os_name, os_class = rng.choice(OS_CHOICES)
        hosts.append(SimHost(
            address=f"10.{subnet_idx}.0.{octet}",
            os_name=os_name,
            os_class=os_class,
            open_ports=[parse_port(p) for p in rng.choice(HOST_PORT_CHOICES)],
            responds_to_ping=True,
        ))

    return SimTopology(
        name=f"random-{seed}",
        scanner_subnet=cidrs[0],
        scanner_address="10.0.0.250",
        subnets=subnets,
        routers=routers,
        hosts=hosts,
        acls=[],
    )
