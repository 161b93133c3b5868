"""Versioned dataset store: snapshots per object, reverse deltas per version.

The materialized head always holds the complete object map of the newest
version.  Each committed version records reverse entries (the prior value of
every object it touched), so checking out version v means walking the deltas
backward from head to v.  History is linear and append-only; a rollback is a
forward commit that reproduces an older state.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .model import Dataset, canonical_json, timestamp_to_doc, utc_now_ms

JSONDoc = dict[str, Any]

AUTHORS = ("scan_run", "manual_edit", "rollback")

#: Sentinel for "delete this object" in a commit's change map.
DELETE = None


class StoreError(Exception):
    pass


class EmptyCommitError(StoreError):
    pass


class UnknownVersionError(StoreError):
    pass


class ConcurrentWriteError(StoreError):
    pass


@dataclass(frozen=True)
class VersionId:
    seq: int
    digest: str

    def to_doc(self) -> JSONDoc:
        return {"seq": self.seq, "digest": self.digest}


@dataclass
class VersionInfo:
    seq: int
    digest: str
    author: str
    message: str
    created_at: str

    def to_doc(self) -> JSONDoc:
        return {"seq": self.seq, "digest": self.digest, "author": self.author,
                "message": self.message, "created_at": self.created_at}


@dataclass
class NodeChange:
    node_id: str
    fields: list[str]
    gateway_change: tuple[str | None, str | None] | None = None

    def to_doc(self) -> JSONDoc:
        return {
            "node_id": self.node_id,
            "fields": list(self.fields),
            "gateway_change": (list(self.gateway_change)
                               if self.gateway_change is not None else None),
        }


@dataclass
class DatasetDiff:
    """Node-level difference between two versions (a -> b)."""

    from_seq: int
    to_seq: int
    added_nodes: list[str] = field(default_factory=list)
    removed_nodes: list[str] = field(default_factory=list)
    changed_nodes: list[NodeChange] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added_nodes or self.removed_nodes or self.changed_nodes)

    def gateway_changes(self) -> list[NodeChange]:
        return [c for c in self.changed_nodes if c.gateway_change is not None]

    def to_doc(self) -> JSONDoc:
        return {
            "from_seq": self.from_seq,
            "to_seq": self.to_seq,
            "added_nodes": list(self.added_nodes),
            "removed_nodes": list(self.removed_nodes),
            "changed_nodes": [c.to_doc() for c in self.changed_nodes],
        }


def digest_objects(objects: dict[str, JSONDoc]) -> str:
    return hashlib.sha256(canonical_json(objects).encode("utf-8")).hexdigest()


class Store:
    """Append-only version store backed by a directory of JSON documents."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.versions_dir = self.path / "versions"
        self.head_path = self.path / "head.json"
        self.lock_path = self.path / "writer.lock"
        self._mutex = threading.RLock()
        self.versions_dir.mkdir(parents=True, exist_ok=True)
        if not self.head_path.exists():
            self._write_head({"seq": 0, "digest": digest_objects({}), "objects": {}})

    # -- plumbing -------------------------------------------------------------

    def _write_head(self, head: JSONDoc) -> None:
        tmp = self.head_path.with_suffix(".tmp")
        tmp.write_text(canonical_json(head), encoding="utf-8")
        os.replace(tmp, self.head_path)

    def _read_head(self) -> JSONDoc:
        return json.loads(self.head_path.read_text(encoding="utf-8"))

    def _version_path(self, seq: int) -> Path:
        return self.versions_dir / f"{seq:06d}.json"

    def _read_version(self, seq: int) -> JSONDoc:
        path = self._version_path(seq)
        if not path.exists():
            raise UnknownVersionError(f"no version {seq}")
        return json.loads(path.read_text(encoding="utf-8"))

    # -- reads ----------------------------------------------------------------

    @property
    def head_seq(self) -> int:
        return int(self._read_head()["seq"])

    def head_objects(self) -> dict[str, JSONDoc]:
        return dict(self._read_head()["objects"])

    def head_version(self) -> VersionId:
        head = self._read_head()
        return VersionId(int(head["seq"]), head["digest"])

    def versions(self) -> list[VersionInfo]:
        infos = []
        for seq in range(1, self.head_seq + 1):
            doc = self._read_version(seq)
            infos.append(VersionInfo(doc["seq"], doc["digest"], doc["author"],
                                     doc["message"], doc["created_at"]))
        return infos

    def checkout(self, seq: int) -> dict[str, JSONDoc]:
        """Object map at version seq.  Head needs no delta walk; version 0 is
        the implicit empty root."""
        head = self._read_head()
        head_seq = int(head["seq"])
        if seq < 0 or seq > head_seq:
            raise UnknownVersionError(f"no version {seq}")
        objects = dict(head["objects"])
        for v in range(head_seq, seq, -1):
            for entry in self._read_version(v)["reverse"]:
                if entry["prior"] is None:
                    objects.pop(entry["key"], None)
                else:
                    objects[entry["key"]] = entry["prior"]
        return objects

    def checkout_dataset(self, seq: int | None = None) -> Dataset:
        if seq is None:
            seq = self.head_seq
        return Dataset.from_objects(self.checkout(seq))

    # -- writes ----------------------------------------------------------------

    def commit(self, changes: dict[str, JSONDoc | None], author: str,
               message: str) -> VersionId:
        """Apply object writes/deletes as one new version.

        changes maps object key to its new document, or to DELETE (None) to
        remove it.  No-op entries are dropped; a commit that changes nothing
        is rejected.  A second writer racing this one gets
        ConcurrentWriteError instead of silently interleaving.
        """
        if author not in AUTHORS:
            raise StoreError(f"unknown author {author!r}")
        if not changes:
            raise EmptyCommitError("empty commit rejected")
        with self._mutex:
            lock_fd = self._acquire_writer_lock()
            try:
                head = self._read_head()
                objects = dict(head["objects"])
                reverse: list[JSONDoc] = []
                effective = 0
                for key in sorted(changes):
                    new_doc = changes[key]
                    prior = objects.get(key)
                    if new_doc == prior:
                        continue  # no-op write
                    if new_doc is None and key not in objects:
                        continue  # deleting something absent
                    effective += 1
                    reverse.append({"key": key,
                                    "prior": prior if key in objects else None})
                    if new_doc is None:
                        del objects[key]
                    else:
                        objects[key] = new_doc
                if effective == 0:
                    raise EmptyCommitError("commit contains no effective change")
                seq = int(head["seq"]) + 1
                digest = digest_objects(objects)
                version_doc = {
                    "seq": seq,
                    "digest": digest,
                    "parent": int(head["seq"]),
                    "author": author,
                    "message": message,
                    "created_at": timestamp_to_doc(utc_now_ms()),
                    "reverse": reverse,
                }
                tmp = self._version_path(seq).with_suffix(".tmp")
                tmp.write_text(canonical_json(version_doc), encoding="utf-8")
                os.replace(tmp, self._version_path(seq))
                self._write_head({"seq": seq, "digest": digest, "objects": objects})
                return VersionId(seq, digest)
            finally:
                self._release_writer_lock(lock_fd)

    def commit_dataset(self, dataset: Dataset, author: str, message: str) -> VersionId:
        """Commit exactly the objects that differ from head."""
        current = self.head_objects()
        target = dataset.to_objects()
        changes: dict[str, JSONDoc | None] = {}
        for key, doc in target.items():
            if current.get(key) != doc:
                changes[key] = doc
        for key in current:
            if key not in target:
                changes[key] = DELETE
        if not changes:
            raise EmptyCommitError("dataset is identical to head")
        return self.commit(changes, author, message)

    def rollback(self, seq: int) -> VersionId:
        """Forward commit that restores version seq's state verbatim."""
        target = self.checkout(seq)
        current = self.head_objects()
        changes: dict[str, JSONDoc | None] = {}
        for key, doc in target.items():
            if current.get(key) != doc:
                changes[key] = doc
        for key in current:
            if key not in target:
                changes[key] = DELETE
        if not changes:
            raise EmptyCommitError(f"head already matches version {seq}")
        return self.commit(changes, "rollback", f"rollback to version {seq}")

    def _acquire_writer_lock(self) -> int:
        try:
            return os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConcurrentWriteError("another writer holds the store lock") from None

    def _release_writer_lock(self, fd: int) -> None:
        os.close(fd)
        try:
            os.unlink(self.lock_path)
        except FileNotFoundError:
            pass

    # -- diff --------------------------------------------------------------------

    NODE_PREFIX = Dataset.NODE_PREFIX

    def diff(self, from_seq: int, to_seq: int) -> DatasetDiff:
        docs_a = self.checkout(from_seq)
        docs_b = self.checkout(to_seq)
        return diff_objects(docs_a, docs_b, from_seq, to_seq)

    # -- export / import -----------------------------------------------------------

    def export_version(self, seq: int) -> str:
        objects = self.checkout(seq)
        bundle = {"seq": seq, "digest": digest_objects(objects), "objects": objects}
        return canonical_json(bundle)

    def import_bundle(self, text: str, message: str = "import bundle") -> VersionId:
        bundle = json.loads(text)
        objects = bundle["objects"]
        if bundle.get("digest") != digest_objects(objects):
            raise StoreError("bundle digest does not match its objects")
        changes: dict[str, JSONDoc | None] = dict(objects)
        for key in self.head_objects():
            if key not in objects:
                changes[key] = DELETE
        return self.commit(changes, "manual_edit", message)


def _node_gateway_address(doc: JSONDoc | None) -> str | None:
    if doc is None:
        return None
    gateway = doc.get("gateway")
    return gateway["gateway_address"] if gateway else None


def diff_objects(docs_a: dict[str, JSONDoc], docs_b: dict[str, JSONDoc],
                 from_seq: int = -1, to_seq: int = -1) -> DatasetDiff:
    """Node-level diff between two object maps; see DatasetDiff."""
    prefix = Dataset.NODE_PREFIX
    nodes_a = {k[len(prefix):]: v for k, v in docs_a.items() if k.startswith(prefix)}
    nodes_b = {k[len(prefix):]: v for k, v in docs_b.items() if k.startswith(prefix)}
    diff = DatasetDiff(from_seq=from_seq, to_seq=to_seq)
    diff.added_nodes = sorted(set(nodes_b) - set(nodes_a))
    diff.removed_nodes = sorted(set(nodes_a) - set(nodes_b))
    for node_id in sorted(set(nodes_a) & set(nodes_b)):
        doc_a, doc_b = nodes_a[node_id], nodes_b[node_id]
        if doc_a == doc_b:
            continue
        fields = sorted(f for f in set(doc_a) | set(doc_b)
                        if doc_a.get(f) != doc_b.get(f))
        gw_a = _node_gateway_address(doc_a)
        gw_b = _node_gateway_address(doc_b)
        change = NodeChange(node_id=node_id, fields=fields)
        if gw_a != gw_b:
            change.gateway_change = (gw_a, gw_b)
        diff.changed_nodes.append(change)
    return diff
