"""Shared fixtures: the bundled three-tier topology and one finished run.

The scanned_store fixture executes the default policy once per session;
graph and reporting tests read from it instead of re-running the scan.
"""

from __future__ import annotations

import pytest

from netmapper import simnet
from netmapper.adapters import MODE_SIMULATED, build_registry
from netmapper.cli import DEFAULT_POLICY_DOC, bundled_topology_path
from netmapper.model import ScanningPolicy, TargetSpec
from netmapper.orchestrator import run_policy
from netmapper.store import Store

INITIAL_TARGET = "10.3.0.10"


@pytest.fixture(scope="session")
def topology() -> simnet.SimTopology:
    return simnet.load_topology(bundled_topology_path())


@pytest.fixture()
def registry(topology):
    return build_registry(MODE_SIMULATED, topology)


@pytest.fixture()
def default_policy() -> ScanningPolicy:
    return ScanningPolicy.from_doc(DEFAULT_POLICY_DOC)


@pytest.fixture(scope="session")
def scanned_store(tmp_path_factory, topology):
    """Store plus report after the default three-iteration run."""
    store = Store(tmp_path_factory.mktemp("scanned") / "db")
    registry = build_registry(MODE_SIMULATED, topology)
    policy = ScanningPolicy.from_doc(DEFAULT_POLICY_DOC)
    report = run_policy(store, registry, policy, TargetSpec([INITIAL_TARGET]),
                        mode=MODE_SIMULATED,
                        scanner_gateway=topology.scanner_gateway())
    return store, report


@pytest.fixture()
def dataset(scanned_store):
    store, _ = scanned_store
    return store.checkout_dataset()
