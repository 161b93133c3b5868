"""Command line entry points.

Exit codes: 0 success, 1 operational failure (a scan failed, a binary is
missing), 2 invalid input (bad policy, bad version number, bad targets).
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import logging
import os
import sys
from pathlib import Path

from . import graph, simnet
from .adapters import build_registry
from .adapters.base import MODE_EXTERNAL, MODE_SIMULATED, AdapterError
from .model import ScanningPolicy, TargetSpec, ValidationError, canonical_json
from .orchestrator import (SCOPE_ENFORCE, SCOPE_EXPAND, STATUS_DONE,
                           PolicyInvalidError, detect_scanner_gateway, run_policy)
from .store import Store, StoreError, UnknownVersionError

logger = logging.getLogger("netmapper.cli")

DB_ENV_VAR = "NETMAPPER_DB"
DEFAULT_DB = "./netmapper.db"

#: used when no policy file is given: full sweep, gateway analysis, an
#: snmp port probe and a walk of whatever answered
DEFAULT_POLICY_DOC = {
    "name": "default",
    "iterations": 3,
    "chain": [
        {"module_id": "portscan", "options": {}},
        {"module_id": "dgw-analyzer", "options": {}},
        {"module_id": "portscan", "options": {"ports": "udp:161"}},
        {"module_id": "snmpwalk", "options": {}},
    ],
}

MODE_NAMES = {"sim": MODE_SIMULATED, "real": MODE_EXTERNAL}


def bundled_topology_path() -> Path:
    return Path(str(importlib.resources.files("netmapper") / "fixtures/three_tier.json"))


def load_policy(args: argparse.Namespace) -> ScanningPolicy:
    if args.policy:
        with open(args.policy, encoding="utf-8") as fh:
            doc = json.load(fh)
        policy = ScanningPolicy.from_doc(doc)
    else:
        policy = ScanningPolicy.from_doc(DEFAULT_POLICY_DOC)
    if args.iterations is not None:
        policy.iterations = args.iterations
    if args.scope:
        policy.scope = TargetSpec(list(args.scope))
    return policy


def load_sim_topology(args: argparse.Namespace) -> simnet.SimTopology:
    path = args.sim_topology or bundled_topology_path()
    return simnet.load_topology(path)


def cmd_scan(args: argparse.Namespace) -> int:
    policy = load_policy(args)
    mode = MODE_NAMES[args.mode]
    topology = None
    scanner_gateway = args.scanner_gateway
    if mode == MODE_SIMULATED:
        topology = load_sim_topology(args)
        if scanner_gateway is None:
            scanner_gateway = topology.scanner_gateway()
    elif scanner_gateway is None:
        scanner_gateway = detect_scanner_gateway()
        if scanner_gateway is None:
            logger.warning("could not detect the default gateway; pass --scanner-gateway")

    registry = build_registry(mode, topology,
                              portscan_binary=args.portscan_binary,
                              snmpwalk_binary=args.snmpwalk_binary)
    store = Store(args.db)
    report = run_policy(
        store, registry, policy, TargetSpec(list(args.targets)),
        mode=mode,
        scope_mode=args.scope_mode,
        scanner_gateway=scanner_gateway,
        abort_on_module_failure=args.abort_on_failure,
    )
    if args.report == "csv":
        print(report.to_csv(), end="")
    elif args.report == "json":
        print(canonical_json(report.to_doc()))
    else:
        print(report.table())
        print()
        print(f"run {report.run_id}: {report.status}"
              + (" (stopped early: nothing left to scan)" if report.early_stopped else ""))
        print(f"head version: {store.head_seq}")
    return 0 if report.status == STATUS_DONE else 1


def cmd_versions(args: argparse.Namespace) -> int:
    store = Store(args.db)
    rows = store.versions()
    if not rows:
        print("no versions yet")
        return 0
    for info in rows:
        print(f"{info.seq:>5}  {info.created_at}  {info.author:<11}  "
              f"{info.digest[:12]}  {info.message}")
    return 0


def cmd_diff(args: argparse.Namespace) -> int:
    store = Store(args.db)
    diff = store.diff(args.from_seq, args.to_seq)
    if args.json:
        print(canonical_json(diff.to_doc()))
        return 0
    if diff.is_empty():
        print(f"versions {args.from_seq} and {args.to_seq} hold the same nodes")
        return 0
    for node_id in diff.added_nodes:
        print(f"+ {node_id}")
    for node_id in diff.removed_nodes:
        print(f"- {node_id}")
    for change in diff.changed_nodes:
        print(f"~ {change.node_id}: {', '.join(change.fields)}")
        if change.gateway_change is not None:
            old, new = change.gateway_change
            print(f"    gateway {old or '(none)'} -> {new or '(none)'}")
    return 0


def cmd_rollback(args: argparse.Namespace) -> int:
    store = Store(args.db)
    version = store.rollback(args.seq)
    print(f"head is now version {version.seq} (contents of version {args.seq})")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    store = Store(args.db)
    text = store.export_version(args.seq)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote version {args.seq} to {args.output}")
    else:
        print(text)
    return 0


def cmd_import(args: argparse.Namespace) -> int:
    store = Store(args.db)
    with open(args.bundle, encoding="utf-8") as fh:
        version = store.import_bundle(fh.read())
    print(f"imported as version {version.seq}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    store = Store(args.db)
    seq = args.version if args.version is not None else store.head_seq
    dataset = store.checkout_dataset(seq)
    doc = graph.graph_doc(dataset, args.aggregate)
    if args.format == "svg":
        text = graph.render_svg(doc)
    elif args.format == "dot":
        text = graph.render_dot(doc)
    else:
        text = canonical_json(doc) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.format} for version {seq} to {args.output}")
    else:
        print(text, end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    mode = MODE_NAMES[args.mode]
    topology = load_sim_topology(args) if mode == MODE_SIMULATED else None
    if args.host not in ("127.0.0.1", "localhost", "::1"):
        logger.warning("binding to %s exposes scan control beyond this machine",
                       args.host)
    app = create_app(args.db, mode=mode, topology=topology,
                     portscan_binary=args.portscan_binary,
                     snmpwalk_binary=args.snmpwalk_binary,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netmapper",
        description="iterative network scanning with versioned results")
    parser.add_argument("--db", default=os.environ.get(DB_ENV_VAR, DEFAULT_DB),
                        help=f"version store directory (env {DB_ENV_VAR})")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run a scan policy")
    scan.add_argument("--targets", nargs="+", required=True,
                      help="addresses or CIDR blocks to start from")
    scan.add_argument("--policy", help="policy JSON file (default: built-in chain)")
    scan.add_argument("--iterations", type=int, help="override policy iterations")
    scan.add_argument("--scope", nargs="*", help="override policy scope entries")
    scan.add_argument("--scope-mode", choices=[SCOPE_ENFORCE, SCOPE_EXPAND],
                      default=SCOPE_EXPAND,
                      help="drop out-of-scope seeds or follow them (default expand)")
    scan.add_argument("--mode", choices=["sim", "real"], default="real")
    scan.add_argument("--sim-topology", help="topology JSON for sim mode "
                      "(default: bundled three-tier network)")
    scan.add_argument("--scanner-gateway", help="this machine's default gateway")
    scan.add_argument("--portscan-binary", default="nmap")
    scan.add_argument("--snmpwalk-binary", default="snmpwalk")
    scan.add_argument("--abort-on-failure", action="store_true",
                      help="stop the run when a module fails instead of skipping it")
    scan.add_argument("--report", choices=["table", "csv", "json"], default="table")
    scan.set_defaults(func=cmd_scan)

    versions = sub.add_parser("versions", help="list dataset versions")
    versions.set_defaults(func=cmd_versions)

    diff = sub.add_parser("diff", help="changes between two versions")
    diff.add_argument("from_seq", type=int)
    diff.add_argument("to_seq", type=int)
    diff.add_argument("--json", action="store_true")
    diff.set_defaults(func=cmd_diff)

    rollback = sub.add_parser("rollback", help="restore an old version as a new head")
    rollback.add_argument("seq", type=int)
    rollback.set_defaults(func=cmd_rollback)

    export = sub.add_parser("export", help="write one version as a canonical bundle")
    export.add_argument("seq", type=int)
    export.add_argument("-o", "--output")
    export.set_defaults(func=cmd_export)

    imp = sub.add_parser("import", help="import a bundle as a new version")
    imp.add_argument("bundle")
    imp.set_defaults(func=cmd_import)

    render = sub.add_parser("render", help="render the topology of a version")
    render.add_argument("--version", type=int, help="version to render (default head)")
    render.add_argument("--aggregate",
                        help='"none", "os" or "threshold:<n>" (default threshold:10)')
    render.add_argument("--format", choices=["svg", "dot", "json"], default="svg")
    render.add_argument("-o", "--output")
    render.set_defaults(func=cmd_render)

    serve = sub.add_parser("serve", help="run the HTTP API and web UI")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--mode", choices=["sim", "real"], default="sim")
    serve.add_argument("--sim-topology", help="topology JSON for sim mode")
    serve.add_argument("--portscan-binary", default="nmap")
    serve.add_argument("--snmpwalk-binary", default="snmpwalk")
    serve.add_argument("--frontend", help="directory with built web UI assets")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (PolicyInvalidError, ValidationError, simnet.TopologyError,
            graph.GraphError, UnknownVersionError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AdapterError, StoreError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
