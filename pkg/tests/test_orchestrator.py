"""Iterative run loop: instance ids, scope, early stop, isolation, reports."""

from __future__ import annotations

import threading

import pytest

from netmapper.adapters import (MODE_SIMULATED, AdapterDescriptor,
                                KIND_SCANNER, PortscanAdapter, Registry)
from netmapper.model import ModuleInvocation, ScanningPolicy, TargetSpec
from netmapper.orchestrator import (SCOPE_ENFORCE, SCOPE_EXPAND,
                                    STATUS_CANCELLED, STATUS_DONE,
                                    STATUS_FAILED, OrchestratorError,
                                    PolicyInvalidError, RunReport, apply_scope,
                                    chain_instance_ids, detect_scanner_gateway,
                                    run_policy)
from netmapper.store import Store

from conftest import INITIAL_TARGET


def policy_of(chain: list[dict], iterations: int = 3,
              scope: list[str] | None = None) -> ScanningPolicy:
    return ScanningPolicy(
        name="test", iterations=iterations,
        chain=[ModuleInvocation(c["module_id"], c.get("options", {}))
               for c in chain],
        scope=TargetSpec(scope or []))


FULL_CHAIN = [{"module_id": "portscan"},
              {"module_id": "dgw-analyzer"},
              {"module_id": "portscan", "options": {"ports": "udp:161"}},
              {"module_id": "snmpwalk"}]


def run(store, registry, policy, targets, **kw):
    kw.setdefault("mode", MODE_SIMULATED)
    return run_policy(store, registry, policy, TargetSpec(targets), **kw)


# -- plumbing -----------------------------------------------------------------------


def test_repeated_modules_get_numbered_instance_ids():
    policy = policy_of(FULL_CHAIN + [{"module_id": "portscan"}])
    assert chain_instance_ids(policy) == [
        "portscan", "dgw-analyzer", "portscan:2", "snmpwalk", "portscan:3"]


def test_scope_expand_keeps_everything():
    kept, dropped = apply_scope(["10.0.0.1", "192.168.0.9"],
                                TargetSpec(["10.0.0.0/24"]), SCOPE_EXPAND)
    assert kept == ["10.0.0.1", "192.168.0.9"] and dropped == []


def test_scope_enforce_filters_and_reports():
    kept, dropped = apply_scope(["10.0.0.1", "192.168.0.9"],
                                TargetSpec(["10.0.0.0/24"]), SCOPE_ENFORCE)
    assert kept == ["10.0.0.1"] and dropped == ["192.168.0.9"]


def test_empty_scope_under_enforce_keeps_nothing():
    kept, dropped = apply_scope(["10.0.0.1"], TargetSpec([]), SCOPE_ENFORCE)
    assert kept == [] and dropped == ["10.0.0.1"]
    with pytest.raises(OrchestratorError):
        apply_scope([], TargetSpec([]), "both")


def test_gateway_detection_parses_the_routing_table(tmp_path):
    route = tmp_path / "route"
    route.write_text(
        "Iface\tDestination\tGateway\tFlags\n"
        "eth0\t00004E0A\t00000000\t0001\n"
        "eth0\t00000000\t010000C0\t0003\n")
    assert detect_scanner_gateway(route) == "192.0.0.1"
    assert detect_scanner_gateway(tmp_path / "absent") is None
    route.write_text("Iface\tDestination\tGateway\n")
    assert detect_scanner_gateway(route) is None


# -- the loop --------------------------------------------------------------------------


def test_invalid_policies_are_rejected_up_front(tmp_path, registry):
    store = Store(tmp_path / "db")
    policy = policy_of([{"module_id": "nosuch"}])
    with pytest.raises(PolicyInvalidError):
        run(store, registry, policy, ["10.0.0.5"])
    assert store.head_seq == 0


def test_iterative_run_grows_the_dataset_and_commits_each_iteration(scanned_store):
    store, report = scanned_store
    assert report.status == STATUS_DONE
    counts = [it.cumulative_nodes for it in report.iterations]
    assert counts == sorted(counts) and len(set(counts)) == len(counts)
    assert counts[-1] == 120
    assert [it.version_seq for it in report.iterations] == [1, 2, 3]
    assert store.head_seq == 3
    # Every committed version carries the run report as of that iteration.
    for seq in (1, 2, 3):
        ds = store.checkout_dataset(seq)
        doc = ds.runs[report.run_id]
        assert len(doc["iterations"]) == seq


def test_seeds_discovered_in_one_iteration_are_scanned_in_the_next(scanned_store):
    store, report = scanned_store
    first = store.checkout_dataset(1)
    assert first.pending_seeds() != []
    final = store.checkout_dataset(3)
    assert final.pending_seeds() == []
    assert final.meta.network_entry_point == "10.1.0.1"


def test_second_run_reverifies_entry_points_then_stops(registry, default_policy,
                                                       topology, tmp_path):
    store = Store(tmp_path / "db")
    run(store, registry, default_policy, [INITIAL_TARGET],
        scanner_gateway=topology.scanner_gateway())
    head = store.head_seq
    report = run(store, registry, default_policy, [INITIAL_TARGET],
                 scanner_gateway=topology.scanner_gateway())
    assert report.status == STATUS_DONE
    assert report.early_stopped
    # Initial targets are always rescanned once; with every seed already
    # covered there is nothing left for a second iteration.
    assert len(report.iterations) == 1
    assert store.head_seq == head + 1


def test_scope_enforce_drops_out_of_scope_seeds(registry, topology, tmp_path):
    store = Store(tmp_path / "db")
    policy = policy_of(FULL_CHAIN, iterations=3, scope=["10.3.0.0/24"])
    report = run(store, registry, policy, [INITIAL_TARGET],
                 scope_mode=SCOPE_ENFORCE,
                 scanner_gateway=topology.scanner_gateway())
    dataset = store.checkout_dataset()
    # Gateway seeds outside subnet D are discovered but never scanned, so
    # the dataset holds only initial-subnet scans plus their hop records.
    scanned_addresses = {n for n in dataset.nodes
                         if dataset.nodes[n].observations}
    for address in scanned_addresses:
        node = dataset.nodes[address]
        portscanned = any(o.tool_name.startswith("portscan")
                          for o in node.observations)
        if portscanned:
            assert address.startswith("10.3.0.")
    assert any("out-of-scope" in note
               for it in report.iterations for note in it.notes)


def test_analyzer_only_chains_run_but_scan_nothing(registry, tmp_path):
    store = Store(tmp_path / "db")
    policy = policy_of([{"module_id": "dgw-analyzer"}], iterations=2)
    report = run(store, registry, policy, ["10.3.0.10"])
    # No scanner instance exists, so there is nothing unscanned to chase
    # and the loop stops before its first iteration.
    assert report.early_stopped
    assert report.iterations == []


def test_module_failure_is_isolated_by_default(topology, tmp_path):
    store = Store(tmp_path / "db")
    registry = Registry()
    registry.add_scanner(BrokenAdapter())
    registry.add_scanner(PortscanAdapter(MODE_SIMULATED, topology))
    policy = policy_of([{"module_id": "broken"}, {"module_id": "portscan"}],
                       iterations=1)
    report = run(store, registry, policy, ["10.3.0.10"])
    assert report.status == STATUS_DONE
    assert any("broken" in note for note in report.iterations[0].notes)
    assert store.checkout_dataset().find_node_by_address("10.3.0.10")


def test_module_failure_aborts_when_asked(topology, tmp_path):
    store = Store(tmp_path / "db")
    registry = Registry()
    registry.add_scanner(BrokenAdapter())
    policy = policy_of([{"module_id": "broken"}], iterations=2)
    report = run(store, registry, policy, ["10.3.0.10"],
                 abort_on_module_failure=True)
    assert report.status == STATUS_FAILED
    assert "boom" in report.error


class BrokenAdapter:
    def descriptor(self):
        return AdapterDescriptor("broken", KIND_SCANNER, (), MODE_SIMULATED)

    def run(self, instance_id, targets, options, iteration, dataset):
        raise RuntimeError("boom")

    def normalize(self, raw):  # pragma: no cover - never reached
        return []

    def extract_seeds(self, rows, dataset):  # pragma: no cover
        return []


def test_cancellation_between_modules_is_honored(registry, topology, tmp_path):
    store = Store(tmp_path / "db")
    cancel = threading.Event()
    cancel.set()
    report = run(store, registry,
                 policy_of(FULL_CHAIN), [INITIAL_TARGET],
                 scanner_gateway=topology.scanner_gateway(),
                 cancel_event=cancel)
    assert report.status == STATUS_CANCELLED
    assert report.iterations == []
    assert store.head_seq == 0


class CancelAfterFirst:
    """Event that flips set after the first is_set poll sequence."""

    def __init__(self) -> None:
        self.polls = 0

    def is_set(self) -> bool:
        self.polls += 1
        return self.polls > 2  # allow the loop entry and first module

    def set(self) -> None:  # pragma: no cover - Event interface
        pass


def test_cancellation_mid_iteration_still_commits_progress(registry, topology,
                                                           tmp_path):
    store = Store(tmp_path / "db")
    report = run(store, registry, policy_of(FULL_CHAIN, iterations=3),
                 [INITIAL_TARGET], scanner_gateway=topology.scanner_gateway(),
                 cancel_event=CancelAfterFirst())
    assert report.status == STATUS_CANCELLED
    assert len(report.iterations) == 1
    notes = report.iterations[0].notes
    assert any("cancelled before" in n for n in notes)
    assert store.head_seq == 1  # partial iteration was committed


# -- reports ------------------------------------------------------------------------------


def test_report_table_shape(scanned_store):
    _, report = scanned_store
    table = report.table()
    lines = table.splitlines()
    assert lines[0].split() == ["Module", "It.", "1", "It.", "2", "It.", "3"]
    first_column = [line.split("  ")[0].strip() for line in lines[1:]]
    assert first_column == ["portscan", "dgw-analyzer", "portscan:2", "snmpwalk",
                            "Modules", "Total", "Number of found nodes",
                            "Nodes per second"]
    nodes_row = lines[-2]
    assert nodes_row.rstrip().endswith("120")


def test_report_csv_shape(scanned_store):
    _, report = scanned_store
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "module,iteration_1,iteration_2,iteration_3"
    assert lines[-2].startswith("found_nodes,")
    assert lines[-2].split(",")[-1] == "120"
    assert lines[-1].startswith("nodes_per_second,")


def test_report_doc_round_trip_shape(scanned_store):
    _, report = scanned_store
    doc = report.to_doc()
    assert doc["status"] == STATUS_DONE
    assert doc["policy_name"] == "default"
    assert [it["iteration"] for it in doc["iterations"]] == [1, 2, 3]
    for it in doc["iterations"]:
        assert {t["instance_id"] for t in it["module_timings"]} == {
            "portscan", "dgw-analyzer", "portscan:2", "snmpwalk"}
        assert it["duration_s"] >= it["module_timings"][0]["duration_s"] >= 0.0
