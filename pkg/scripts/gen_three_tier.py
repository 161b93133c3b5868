"""Regenerate src/netmapper/fixtures/three_tier.json.

Chain of four subnets joined by three routers:

    A 10.0.0.0/24 (scanner, no hosts)
      r1 10.0.0.1 / 10.1.0.1
    B 10.1.0.0/24 (40 hosts: 30 Linux 5.4 + 10 Windows Server 2019)
      r2 10.1.0.2 / 10.2.0.1
    C 10.2.0.0/24 (42 hosts, 3 dark)
      r3 10.2.0.2 / 10.3.0.1
    D 10.3.0.0/24 (38 hosts, 2 dark)

Dark hosts neither answer pings nor open ports, so they never show up in
ARP tables and are invisible to every scan.  Reachable device count is
therefore 115 hosts plus 5 router interfaces past the scanner subnet.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from netmapper import simnet  # noqa: E402


def build() -> simnet.SimTopology:
    subnets = [
        simnet.SimSubnet("10.0.0.0/24", "10.0.0.1"),
        simnet.SimSubnet("10.1.0.0/24", "10.1.0.1"),
        simnet.SimSubnet("10.2.0.0/24", "10.2.0.1"),
        simnet.SimSubnet("10.3.0.0/24", "10.3.0.1"),
    ]
    routers = [
        simnet.SimRouter("r1", ["10.0.0.1", "10.1.0.1"], os_name="EdgeOS 2.0"),
        simnet.SimRouter("r2", ["10.1.0.2", "10.2.0.1"], os_name="RouterOS 7.1"),
        simnet.SimRouter("r3", ["10.2.0.2", "10.3.0.1"], os_name="IOS 15.2"),
    ]

    hosts: list[simnet.SimHost] = []

    def host(address, os_name, ports, hostname=None, dark=False):
        hosts.append(simnet.SimHost(
            address=address,
            os_name=os_name,
            open_ports=[] if dark else [simnet.parse_port(p) for p in ports],
            responds_to_ping=not dark,
            hostname=hostname,
        ))

    # B: 30 Linux + 10 Windows, all reachable
    for i in range(10, 40):
        ports = ["tcp/22", "tcp/80"] if i % 3 == 0 else ["tcp/22"]
        name = {10: "web-01", 11: "db-01"}.get(i)
        host(f"10.1.0.{i}", "Linux 5.4", ports, hostname=name)
    for i in range(40, 50):
        host(f"10.1.0.{i}", "Windows Server 2019", ["tcp/445", "tcp/3389"])

    # C: 20 Linux + 10 FreeBSD + 9 Windows reachable, 3 dark
    for i in range(10, 30):
        host(f"10.2.0.{i}", "Linux 4.19", ["tcp/22"])
    for i in range(30, 40):
        host(f"10.2.0.{i}", "FreeBSD 13.1", ["tcp/22", "tcp/80"])
    for i in range(40, 49):
        host(f"10.2.0.{i}", "Windows 10", ["tcp/445", "tcp/3389"])
    for i in range(49, 52):
        host(f"10.2.0.{i}", "Linux 4.19", [], dark=True)

    # D: 25 Linux + 11 Windows reachable, 2 dark
    for i in range(10, 35):
        ports = ["tcp/22", "tcp/8080"] if i % 4 == 0 else ["tcp/22"]
        name = "dev-box" if i == 10 else None
        host(f"10.3.0.{i}", "Linux 5.4", ports, hostname=name)
    for i in range(35, 46):
        host(f"10.3.0.{i}", "Windows Server 2019", ["tcp/445", "tcp/3389"])
    for i in range(46, 48):
        host(f"10.3.0.{i}", "Linux 5.4", [], dark=True)

    acls = [simnet.SimRule(action="deny", dst="10.2.0.0/24", protocol="tcp", port=3389)]

    return simnet.SimTopology(
        name="three-tier",
        scanner_subnet="10.0.0.0/24",
        scanner_address="10.0.0.99",
        subnets=subnets,
        routers=routers,
        hosts=hosts,
        acls=acls,
    )


def check(top: simnet.SimTopology) -> None:
    reachable = [h for h in top.hosts.values() if h.active]
    assert len(top.hosts) == 120, len(top.hosts)
    assert len(reachable) == 115, len(reachable)

    for h in reachable:
        t = simnet.trace(top, h.address)
        assert t.complete
        assert t.hops[-2].address == simnet.ground_truth_gateway(top, h.address), h.address

    by_name = {r.name: r for r in top.routers}
    arp_union: set[str] = set()
    for r in top.routers:
        for addr, _ in top.arp_table_of(r):
            arp_union.add(addr)
    assert "10.0.0.99" not in arp_union
    assert "10.0.0.1" not in arp_union
    assert {"10.1.0.2", "10.2.0.2", "10.1.0.1", "10.2.0.1"} <= arp_union
    assert len(arp_union) == 115 + 4, len(arp_union)

    assert simnet.snmp_query(top, "10.1.0.1", "public") is not None
    assert simnet.snmp_query(top, "10.1.0.1", "private") is None
    assert simnet.probe(top, "10.2.0.40", "tcp", 3389) == simnet.PROBE_FILTERED
    assert simnet.probe(top, "10.1.0.40", "tcp", 3389) == simnet.PROBE_OPEN
    assert by_name["r2"].snmp_community == "public"

    rebuilt = simnet.topology_from_doc(top.to_doc())
    assert rebuilt.to_doc() == top.to_doc()


def main() -> None:
    top = build()
    check(top)
    out = Path(__file__).resolve().parents[1] / "src/netmapper/fixtures/three_tier.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(top.to_doc(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
