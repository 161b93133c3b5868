"""HTTP API over the store, the orchestrator and the graph renderer.

All state lives in the version store; the service itself only tracks the
scan thread currently running.  One scan at a time per store: scans and
manual edits both commit, and interleaving them would silently drop
whichever snapshot committed first.  GET endpoints never write.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import graph, simnet
from .adapters import build_registry
from .model import (ScanningPolicy, TargetSpec, UnknownNodeError, ValidationError,
                    validate_policy)
from .orchestrator import (SCOPE_ENFORCE, SCOPE_EXPAND, STATUS_CANCELLED,
                           STATUS_RUNNING, RunReport, run_policy)
from .store import (ConcurrentWriteError, Store, StoreError, UnknownVersionError)

JSONDoc = dict[str, Any]


class ScanRequest(BaseModel):
    targets: list[str]
    policy: JSONDoc | None = None
    iterations: int | None = None
    scope_mode: str = SCOPE_EXPAND


class GatewayRequest(BaseModel):
    gateway_address: str


class ScanManager:
    """Tracks the one scan allowed to run at a time."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._cancel: threading.Event | None = None
        self._report: RunReport | None = None
        self.finished: dict[str, RunReport] = {}

    def busy(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self, report: RunReport, target, args) -> threading.Event:
        with self._lock:
            if self.busy():
                raise ConcurrentWriteError("a scan is already running")
            cancel = threading.Event()
            thread = threading.Thread(
                target=target, args=(*args, cancel), daemon=True,
                name=f"scan-{report.run_id}")
            self._thread = thread
            self._cancel = cancel
            self._report = report
            thread.start()
            return cancel

    def report_for(self, run_id: str) -> RunReport | None:
        if self._report is not None and self._report.run_id == run_id:
            return self._report
        return self.finished.get(run_id)

    def cancel(self, run_id: str) -> RunReport | None:
        with self._lock:
            report = self.report_for(run_id)
            if report is None:
                return None
            if (self._report is not None and self._report.run_id == run_id
                    and self._cancel is not None and self.busy()):
                self._cancel.set()
            return report

    def retire(self, report: RunReport) -> None:
        self.finished[report.run_id] = report


def create_app(db_path: str | Path, *, mode: str,
               topology: simnet.SimTopology | None = None,
               portscan_binary: str = "nmap",
               snmpwalk_binary: str = "snmpwalk",
               frontend_dir: str | Path | None = None) -> FastAPI:
    store = Store(db_path)
    registry = build_registry(mode, topology,
                              portscan_binary=portscan_binary,
                              snmpwalk_binary=snmpwalk_binary)
    manager = ScanManager()
    app = FastAPI(title="netmapper", docs_url="/api/docs", openapi_url="/api/openapi.json")
    app.state.store = store
    app.state.registry = registry
    app.state.manager = manager
    app.state.mode = mode
    app.state.topology = topology

    def dataset_at(seq: int):
        try:
            return store.checkout_dataset(seq)
        except UnknownVersionError:
            raise HTTPException(404, f"no version {seq}") from None

    def reject_while_scanning() -> None:
        if manager.busy():
            raise HTTPException(409, "a scan is running; retry when it finishes")

    # -- read side ---------------------------------------------------------

    @app.get("/api/health")
    def health() -> JSONDoc:
        return {"status": "ok", "mode": mode, "head": store.head_seq}

    @app.get("/api/modules")
    def modules() -> list[JSONDoc]:
        return [d.to_doc() for d in registry.descriptors()]

    @app.get("/api/versions")
    def versions() -> list[JSONDoc]:
        return [info.to_doc() for info in store.versions()]

    @app.get("/api/versions/{seq}/graph")
    def version_graph(seq: int, aggregate: str | None = None) -> JSONDoc:
        dataset = dataset_at(seq)
        try:
            return graph.graph_doc(dataset, aggregate)
        except graph.GraphError as exc:
            raise HTTPException(422, str(exc)) from None

    @app.get("/api/versions/{seq}/graph.svg")
    def version_graph_svg(seq: int, aggregate: str | None = None) -> Response:
        dataset = dataset_at(seq)
        try:
            doc = graph.graph_doc(dataset, aggregate)
        except graph.GraphError as exc:
            raise HTTPException(422, str(exc)) from None
        return Response(graph.render_svg(doc), media_type="image/svg+xml")

    @app.get("/api/versions/{seq}/nodes")
    def version_nodes(seq: int) -> list[JSONDoc]:
        dataset = dataset_at(seq)
        return [dataset.resolve_view(node_id).to_doc()
                for node_id in sorted(dataset.nodes)]

    @app.get("/api/versions/{seq}/nodes/{node_id}")
    def version_node(seq: int, node_id: str) -> JSONDoc:
        dataset = dataset_at(seq)
        try:
            return dataset.resolve_view(node_id).to_doc()
        except UnknownNodeError:
            raise HTTPException(404, f"no node {node_id} in version {seq}") from None

    @app.get("/api/diff/{a}/{b}")
    def diff(a: int, b: int) -> JSONDoc:
        try:
            return store.diff(a, b).to_doc()
        except UnknownVersionError as exc:
            raise HTTPException(404, str(exc)) from None

    @app.get("/api/diff/{a}/{b}/graph")
    def diff_graph(a: int, b: int) -> JSONDoc:
        return graph.compare_doc(dataset_at(a), dataset_at(b))

    @app.get("/api/export/{seq}")
    def export(seq: int) -> Response:
        try:
            text = store.export_version(seq)
        except UnknownVersionError as exc:
            raise HTTPException(404, str(exc)) from None
        return Response(text, media_type="application/json")

    @app.get("/api/runs")
    def runs() -> list[JSONDoc]:
        dataset = store.checkout_dataset()
        docs = {run_id: doc for run_id, doc in dataset.runs.items()}
        for run_id, report in manager.finished.items():
            docs[run_id] = report.to_doc()
        if manager._report is not None:
            docs[manager._report.run_id] = manager._report.to_doc()
        return [docs[k] for k in sorted(docs)]

    @app.get("/api/scans/{run_id}")
    def scan_status(run_id: str) -> JSONDoc:
        report = manager.report_for(run_id)
        if report is not None:
            return report.to_doc()
        dataset = store.checkout_dataset()
        if run_id in dataset.runs:
            return dataset.runs[run_id]
        raise HTTPException(404, f"no run {run_id}")

    # -- write side ----------------------------------------------------------

    @app.post("/api/scans", status_code=202)
    def start_scan(request: ScanRequest) -> JSONDoc:
        reject_while_scanning()
        policy_doc = request.policy
        if policy_doc is None:
            from .cli import DEFAULT_POLICY_DOC
            policy_doc = DEFAULT_POLICY_DOC
        try:
            policy = ScanningPolicy.from_doc(policy_doc)
            if request.iterations is not None:
                policy.iterations = request.iterations
            targets = TargetSpec(list(request.targets))
        except (ValidationError, KeyError, TypeError) as exc:
            raise HTTPException(422, f"bad scan request: {exc}") from None
        if request.scope_mode not in (SCOPE_ENFORCE, SCOPE_EXPAND):
            raise HTTPException(422, f"bad scope_mode {request.scope_mode!r}")
        diagnostics = validate_policy(policy, registry.kinds())
        errors = [d.to_doc() for d in diagnostics if d.severity == "error"]
        if errors:
            raise HTTPException(422, {"diagnostics": errors})

        scanner_gateway = topology.scanner_gateway() if topology is not None else None
        report = RunReport(run_id=_new_run_id(), policy_name=policy.name, mode=mode)

        def work(cancel: threading.Event) -> None:
            try:
                run_policy(store, registry, policy, targets,
                           mode=mode, scope_mode=request.scope_mode,
                           scanner_gateway=scanner_gateway,
                           cancel_event=cancel, report=report)
            except Exception as exc:  # noqa: BLE001 - thread boundary
                report.status = "failed"
                report.error = str(exc)
            finally:
                manager.retire(report)

        try:
            manager.start(report, work, ())
        except ConcurrentWriteError as exc:
            raise HTTPException(409, str(exc)) from None
        return {"run_id": report.run_id, "status": report.status,
                "warnings": [d.to_doc() for d in diagnostics
                             if d.severity == "warning"]}

    @app.post("/api/scans/{run_id}/cancel")
    def cancel_scan(run_id: str) -> JSONDoc:
        report = manager.cancel(run_id)
        if report is None:
            raise HTTPException(404, f"no run {run_id}")
        if report.status == STATUS_RUNNING:
            report.status = STATUS_CANCELLED
        return report.to_doc()

    @app.post("/api/nodes/{node_id}/gateway")
    def set_gateway(node_id: str, request: GatewayRequest) -> JSONDoc:
        reject_while_scanning()
        dataset = store.checkout_dataset()
        try:
            estimate = dataset.set_manual_gateway(node_id, request.gateway_address)
        except UnknownNodeError:
            raise HTTPException(404, f"no node {node_id}") from None
        except ValidationError as exc:
            raise HTTPException(422, str(exc)) from None
        try:
            version = store.commit_dataset(
                dataset, "manual_edit",
                f"manual gateway for {node_id}: {request.gateway_address}")
        except StoreError as exc:
            raise HTTPException(409, str(exc)) from None
        return {"version": version.seq, "estimate": estimate.to_doc()}

    @app.post("/api/rollback/{seq}")
    def rollback(seq: int) -> JSONDoc:
        reject_while_scanning()
        try:
            version = store.rollback(seq)
        except UnknownVersionError as exc:
            raise HTTPException(404, str(exc)) from None
        except StoreError as exc:
            raise HTTPException(409, str(exc)) from None
        return {"version": version.seq, "restored": seq}

    # -- frontend ----------------------------------------------------------

    if frontend_dir is not None:
        root = Path(frontend_dir)
        index = root / "index.html"

        @app.get("/", include_in_schema=False)
        def frontend_index() -> FileResponse:
            return FileResponse(index)

        app.mount("/ui", StaticFiles(directory=root, html=True), name="ui")
    else:

        @app.get("/", include_in_schema=False)
        def placeholder() -> Response:
            return Response(
                "netmapper API. See /api/docs. The web UI was not bundled; "
                "run serve with --frontend <dir>.",
                media_type="text/plain")

    return app


def _new_run_id() -> str:
    import uuid

    return f"run-{uuid.uuid4().hex[:12]}"
