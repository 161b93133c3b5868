"""Iterative scan orchestration.

One run executes a policy's module chain for up to N iterations.  Results of
iteration k seed iteration k+1: trace hops and ARP neighbors become pending
seed entries, and the next iteration scans whichever of them survive the
scope rule.  Every iteration commits exactly one dataset version; a run with
nothing left to scan stops early without an empty commit.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .adapters import Registry
from .analyzers import run_gateway_analysis
from .model import (Dataset, DuplicateObservationError, ScanningPolicy, SeedEntry,
                    TargetSpec, address_sort_key, validate_policy)
from .store import Store, VersionId

logger = logging.getLogger("netmapper.orchestrator")

SCOPE_ENFORCE = "enforce"
SCOPE_EXPAND = "expand"

STATUS_RUNNING = "running"
STATUS_DONE = "done"
STATUS_FAILED = "failed"
STATUS_CANCELLED = "cancelled"


class OrchestratorError(Exception):
    pass


class PolicyInvalidError(OrchestratorError):
    def __init__(self, diagnostics) -> None:
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


class ModuleFailure(OrchestratorError):
    pass


@dataclass
class ModuleTiming:
    instance_id: str
    duration_s: float


@dataclass
class IterationReport:
    iteration: int
    module_timings: list[ModuleTiming] = field(default_factory=list)
    duration_s: float = 0.0
    cumulative_nodes: int = 0
    nodes_per_second: float = 0.0
    version_seq: int | None = None
    notes: list[str] = field(default_factory=list)

    def modules_total_s(self) -> float:
        return sum(t.duration_s for t in self.module_timings)

    def to_doc(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "module_timings": [{"instance_id": t.instance_id,
                                "duration_s": round(t.duration_s, 6)}
                               for t in self.module_timings],
            "duration_s": round(self.duration_s, 6),
            "cumulative_nodes": self.cumulative_nodes,
            "nodes_per_second": round(self.nodes_per_second, 6),
            "version_seq": self.version_seq,
            "notes": list(self.notes),
        }


@dataclass
class RunReport:
    run_id: str
    policy_name: str
    mode: str
    status: str = STATUS_RUNNING
    iterations: list[IterationReport] = field(default_factory=list)
    early_stopped: bool = False
    error: str | None = None

    def instance_ids(self) -> list[str]:
        ids: list[str] = []
        for it in self.iterations:
            for t in it.module_timings:
                if t.instance_id not in ids:
                    ids.append(t.instance_id)
        return ids

    def to_doc(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "policy_name": self.policy_name,
            "mode": self.mode,
            "status": self.status,
            "iterations": [it.to_doc() for it in self.iterations],
            "early_stopped": self.early_stopped,
            "error": self.error,
        }

    # -- rendering -----------------------------------------------------------

    def table(self) -> str:
        """Plain-text run summary: per-module durations by iteration, their
        sum, the iteration total, found node counts and the scan rate."""
        headers = ["Module"] + [f"It. {it.iteration}" for it in self.iterations]
        rows: list[list[str]] = []
        for instance_id in self.instance_ids():
            row = [instance_id]
            for it in self.iterations:
                timing = next((t for t in it.module_timings
                               if t.instance_id == instance_id), None)
                row.append(f"{timing.duration_s:.2f}" if timing else "-")
            rows.append(row)
        rows.append(["Modules"] + [f"{it.modules_total_s():.2f}" for it in self.iterations])
        rows.append(["Total"] + [f"{it.duration_s:.2f}" for it in self.iterations])
        rows.append(["Number of found nodes"]
                    + [str(it.cumulative_nodes) for it in self.iterations])
        rows.append(["Nodes per second"]
                    + [f"{it.nodes_per_second:.2f}" for it in self.iterations])
        widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
        lines = []
        for r in [headers] + rows:
            cells = [r[0].ljust(widths[0])]
            cells += [r[i].rjust(widths[i]) for i in range(1, len(r))]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["module," + ",".join(f"iteration_{it.iteration}" for it in self.iterations)]
        for instance_id in self.instance_ids():
            cells = [instance_id]
            for it in self.iterations:
                timing = next((t for t in it.module_timings
                               if t.instance_id == instance_id), None)
                cells.append(f"{timing.duration_s:.6f}" if timing else "")
            lines.append(",".join(cells))
        lines.append("modules," + ",".join(f"{it.modules_total_s():.6f}"
                                           for it in self.iterations))
        lines.append("total," + ",".join(f"{it.duration_s:.6f}" for it in self.iterations))
        lines.append("found_nodes," + ",".join(str(it.cumulative_nodes)
                                               for it in self.iterations))
        lines.append("nodes_per_second," + ",".join(f"{it.nodes_per_second:.6f}"
                                                    for it in self.iterations))
        return "\n".join(lines) + "\n"


def apply_scope(addresses: list[str], scope: TargetSpec, mode: str) -> tuple[list[str], list[str]]:
    """Split addresses into (kept, dropped) under the scope rule.

    enforce keeps only in-scope addresses; expand keeps everything.  An
    empty scope in enforce mode keeps nothing, which is the conservative
    reading of an authorization boundary nobody filled in.
    """
    if mode == SCOPE_EXPAND:
        return list(addresses), []
    if mode != SCOPE_ENFORCE:
        raise OrchestratorError(f"unknown scope mode {mode!r}")
    kept, dropped = [], []
    for address in addresses:
        (kept if not scope.is_empty() and scope.contains(address) else dropped).append(address)
    return kept, dropped


def chain_instance_ids(policy: ScanningPolicy) -> list[str]:
    """Unique per-entry ids: a module's second appearance becomes 'id:2'."""
    counts: dict[str, int] = {}
    ids = []
    for invocation in policy.chain:
        counts[invocation.module_id] = counts.get(invocation.module_id, 0) + 1
        n = counts[invocation.module_id]
        ids.append(invocation.module_id if n == 1 else f"{invocation.module_id}:{n}")
    return ids


def detect_scanner_gateway(route_file: str | Path = "/proc/net/route") -> str | None:
    """Default gateway from the host routing table (hex little-endian form)."""
    try:
        lines = Path(route_file).read_text().splitlines()
    except OSError:
        return None
    for line in lines[1:]:
        parts = line.split()
        if len(parts) >= 3 and parts[1] == "00000000":
            raw = parts[2]
            try:
                octets = [int(raw[i:i + 2], 16) for i in (6, 4, 2, 0)]
            except ValueError:
                return None
            return ".".join(str(o) for o in octets)
    return None


def run_policy(store: Store, registry: Registry, policy: ScanningPolicy,
               initial_targets: TargetSpec, *, mode: str,
               scope_mode: str = SCOPE_EXPAND,
               scanner_gateway: str | None = None,
               abort_on_module_failure: bool = False,
               cancel_event: threading.Event | None = None,
               report: RunReport | None = None) -> RunReport:
    """Execute a policy against the store's head dataset.

    Module failures are noted and skipped unless abort_on_module_failure is
    set.  A cancel_event is honored between module invocations.  The caller
    may pass a pre-built RunReport to observe progress from another thread.
    """
    diagnostics = validate_policy(policy, registry.kinds())
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise PolicyInvalidError(errors)
    for d in diagnostics:
        logger.warning("policy %s: %s", policy.name, d.message)

    if report is None:
        report = RunReport(run_id=f"run-{uuid.uuid4().hex[:12]}",
                           policy_name=policy.name, mode=mode)
    instance_ids = chain_instance_ids(policy)

    dataset = store.checkout_dataset()
    if scanner_gateway is not None:
        dataset.meta.scanner_gateway = scanner_gateway

    scanner_instances = {iid for iid, inv in zip(instance_ids, policy.chain)
                         if not registry.is_analyzer(inv.module_id)}
    initial_concrete = sorted(set(initial_targets.iter_addresses()), key=address_sort_key)
    scanned: dict[str, set[str]] = {iid: set() for iid in instance_ids}
    run_targets: set[str] = set(initial_concrete)
    cumulative_duration = 0.0

    try:
        for k in range(1, policy.iterations + 1):
            if cancel_event is not None and cancel_event.is_set():
                report.status = STATUS_CANCELLED
                break

            pending = sorted((s.address for s in dataset.pending_seeds()),
                             key=address_sort_key)
            kept, dropped = apply_scope(pending, policy.scope, scope_mode)
            for address in dropped:
                logger.info("iteration %d: seed %s dropped by scope", k, address)
            candidates = sorted(set(initial_concrete) | set(kept), key=address_sort_key)
            unscanned = {iid: [a for a in candidates if a not in scanned[iid]]
                         for iid in scanner_instances}
            if all(not v for v in unscanned.values()):
                report.early_stopped = True
                logger.info("iteration %d: target set empty, stopping early", k)
                break

            iteration = IterationReport(iteration=k)
            if dropped:
                iteration.notes.append(
                    f"{len(dropped)} out-of-scope seed(s) dropped")
            started = time.monotonic()

            for instance_id, invocation in zip(instance_ids, policy.chain):
                if cancel_event is not None and cancel_event.is_set():
                    report.status = STATUS_CANCELLED
                    iteration.notes.append(f"cancelled before {instance_id}")
                    break
                module_started = time.monotonic()
                try:
                    if registry.is_analyzer(invocation.module_id):
                        run_gateway_analysis(
                            dataset,
                            TargetSpec(sorted(run_targets, key=address_sort_key)),
                            k, instance_id)
                    else:
                        adapter = registry.scanner(invocation.module_id)
                        if adapter is None:
                            raise ModuleFailure(
                                f"module {invocation.module_id!r} is not registered")
                        targets = unscanned.get(instance_id, [])
                        _run_scanner_module(adapter, instance_id, invocation.options,
                                            targets, k, dataset, iteration)
                        scanned[instance_id].update(targets)
                        run_targets.update(targets)
                        for address in targets:
                            dataset.mark_seed_scanned(address)
                except Exception as exc:  # noqa: BLE001 - module isolation boundary
                    message = f"{instance_id}: {exc}"
                    iteration.notes.append(message)
                    logger.error("iteration %d: module failed: %s", k, message)
                    if abort_on_module_failure:
                        raise ModuleFailure(message) from exc
                finally:
                    iteration.module_timings.append(ModuleTiming(
                        instance_id, time.monotonic() - module_started))

            # Timing closes before the commit so the committed report is
            # complete; the store write is bookkeeping, not scan work.
            iteration.cumulative_nodes = dataset.node_count()
            iteration.duration_s = time.monotonic() - started
            cumulative_duration += iteration.duration_s
            iteration.nodes_per_second = (
                iteration.cumulative_nodes / cumulative_duration
                if cumulative_duration > 0 else 0.0)
            report.iterations.append(iteration)
            iteration.version_seq = store.head_seq + 1
            dataset.runs[report.run_id] = report.to_doc()
            version = _commit_iteration(store, dataset, policy, k)
            iteration.version_seq = version.seq

            if report.status == STATUS_CANCELLED:
                break
    except ModuleFailure as exc:
        report.status = STATUS_FAILED
        report.error = str(exc)
        return report

    if report.status == STATUS_RUNNING:
        report.status = STATUS_DONE
    return report


def _run_scanner_module(adapter, instance_id: str, options: dict[str, str],
                        targets: list[str], iteration: int, dataset: Dataset,
                        report_row: IterationReport) -> None:
    if not targets:
        return
    raw = adapter.run(instance_id, targets, options, iteration, dataset)
    rows = adapter.normalize(raw)
    recorded = 0
    for row in rows:
        try:
            dataset.record_observation(row.address, row.observation,
                                       hostnames=row.hostnames,
                                       extra_addresses=row.extra_addresses)
            recorded += 1
        except DuplicateObservationError as exc:
            report_row.notes.append(str(exc))
    for address in adapter.extract_seeds(rows, dataset):
        dataset.add_seed(SeedEntry(address=address, origin_module=instance_id,
                                   discovered_iteration=iteration))
    logger.info("iteration %d: %s scanned %d target(s), %d observation(s)",
                iteration, instance_id, len(targets), recorded)


def _commit_iteration(store: Store, dataset: Dataset, policy: ScanningPolicy,
                      iteration: int) -> VersionId | None:
    return store.commit_dataset(
        dataset, "scan_run", f"scan '{policy.name}' iteration {iteration}")
