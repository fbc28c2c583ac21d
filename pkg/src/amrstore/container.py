"""Aggregated on-disk database: few files, many contributing domains.

Layout: one directory holding a line-oriented `index.txt` plus data
files named `g<group>.f<seq>.dat`. A domain writes into group
domain_id // ncf, so at most ncf contributors share a file. Each record
is framed as

    magic "HDB1" | payload length (8B LE) | kind (1B) | context (4B LE)
    | domain (4B LE) | payload

and the index line `ctx domain group fileseq offset length kindtag`
locates it, `length` covering the whole framed record. A group rolls to
its next file when appending would push the current one past
max_file_size; a record bigger than the cap gets a file of its own and
is never split. Nothing is visible until commit atomically replaces the
index, so a crash before commit leaves an empty database.

Checkpoint databases store opaque byte blobs; post-processing databases
store AmrObjectPayload, a self-describing encoding of one domain tree.
"""

from __future__ import annotations

import os
import struct
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .boolcodec import decode_bools, encode_bools
from .deltacodec import DEFAULT_FACTOR, DEFAULT_HEADER_BITS, CompressedField, compress_field, decompress_field
from .errors import (
    AlreadyExists,
    AmrStoreError,
    CorruptRecord,
    DuplicateEntry,
    KindMismatch,
    NotADatabase,
    NotFound,
)
from .tree import DomainTree, build_tree

MAGIC = b"HDB1"
_HEADER = struct.Struct("<4sQBII")  # magic, payload length, kind, context, domain

KIND_CHECKPOINT = "checkpoint"
KIND_POSTPROC = "postproc"
_KIND_BYTE = {KIND_CHECKPOINT: 0, KIND_POSTPROC: 1}
_KIND_TAG = {KIND_CHECKPOINT: "raw", KIND_POSTPROC: "amr_object"}
_TAG_BYTE = {"raw": 0, "amr_object": 1}

MIN_FILE_SIZE = 1024
DEFAULT_MAX_FILE_SIZE = 2 * 1024**3

_LP = struct.Struct("<I")


@dataclass(frozen=True)
class DbParams:
    kind: str
    max_file_size: int = DEFAULT_MAX_FILE_SIZE
    ncf: int = 1
    field_selection: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in (KIND_CHECKPOINT, KIND_POSTPROC):
            raise ValueError(f"kind must be {KIND_CHECKPOINT!r} or {KIND_POSTPROC!r}")
        if self.ncf < 1:
            raise ValueError(f"ncf must be >= 1, got {self.ncf}")
        if self.max_file_size < MIN_FILE_SIZE:
            raise ValueError(f"max_file_size must be >= {MIN_FILE_SIZE}, got {self.max_file_size}")
        if self.field_selection is not None:
            if self.kind != KIND_POSTPROC:
                raise ValueError("field_selection only applies to postproc databases")
            object.__setattr__(self, "field_selection", tuple(self.field_selection))


@dataclass(frozen=True)
class IndexEntry:
    context_id: int
    domain_id: int
    group_id: int
    file_seq: int
    offset: int
    length: int
    kind_tag: str

    def to_line(self) -> str:
        return (
            f"{self.context_id} {self.domain_id} {self.group_id} "
            f"{self.file_seq} {self.offset} {self.length} {self.kind_tag}"
        )

    @classmethod
    def from_line(cls, line: str) -> "IndexEntry":
        parts = line.split()
        if len(parts) != 7 or parts[6] not in _TAG_BYTE:
            raise NotADatabase(f"bad index line: {line!r}")
        try:
            nums = [int(p) for p in parts[:6]]
        except ValueError:
            raise NotADatabase(f"bad index line: {line!r}") from None
        return cls(*nums, kind_tag=parts[6])


@dataclass(frozen=True)
class AmrObjectPayload:
    """Self-describing domain tree: codec text for the booleans, one
    CompressedField per node field."""

    dim: int
    node_count: int
    refinement_enc: str
    ownership_enc: str
    fields: dict[str, CompressedField]

    @classmethod
    def from_domain(cls, dt: DomainTree, k: int = DEFAULT_HEADER_BITS,
                    factor: float = DEFAULT_FACTOR) -> "AmrObjectPayload":
        return cls(
            dim=dt.tree.dim,
            node_count=dt.tree.node_count,
            refinement_enc=encode_bools(dt.tree.refinement),
            ownership_enc=encode_bools(dt.ownership),
            fields={
                name: compress_field(dt.tree, vals, k=k, factor=factor)
                for name, vals in dt.fields.items()
            },
        )

    def to_domain(self, domain_id: int) -> DomainTree:
        tree = build_tree(self.dim, decode_bools(self.refinement_enc))
        return DomainTree(
            tree=tree,
            ownership=decode_bools(self.ownership_enc),
            fields={name: decompress_field(cf, tree) for name, cf in self.fields.items()},
            domain_id=domain_id,
        )

    def select_fields(self, names) -> "AmrObjectPayload":
        keep = tuple(names)
        missing = [n for n in keep if n not in self.fields]
        if missing:
            raise KeyError(f"payload lacks fields {missing}")
        return replace(self, fields={n: self.fields[n] for n in keep})

    def encode(self) -> bytes:
        parts = [struct.pack("<BQ", self.dim, self.node_count)]
        for text in (self.refinement_enc, self.ownership_enc):
            raw = text.encode("ascii")
            parts.append(_LP.pack(len(raw)) + raw)
        parts.append(_LP.pack(len(self.fields)))
        for name, cf in self.fields.items():
            raw = name.encode("utf-8")
            parts.append(_LP.pack(len(raw)) + raw)
            parts.append(cf.to_bytes())
        return b"".join(parts)

    @classmethod
    def decode(cls, buf: bytes) -> "AmrObjectPayload":
        try:
            view = memoryview(buf)
            dim, node_count = struct.unpack_from("<BQ", view, 0)
            off = 9
            texts = []
            for _ in range(2):
                (ln,) = _LP.unpack_from(view, off)
                off += _LP.size
                texts.append(bytes(view[off:off + ln]).decode("ascii"))
                off += ln
            (nfields,) = _LP.unpack_from(view, off)
            off += _LP.size
            fields = {}
            for _ in range(nfields):
                (ln,) = _LP.unpack_from(view, off)
                off += _LP.size
                name = bytes(view[off:off + ln]).decode("utf-8")
                off += ln
                cf, off = CompressedField.from_bytes(view, off)
                fields[name] = cf
            if off != len(view):
                raise CorruptRecord(f"{len(view) - off} trailing bytes in payload")
        except (struct.error, UnicodeDecodeError, AmrStoreError) as e:
            raise CorruptRecord(f"undecodable payload: {e}") from e
        return cls(
            dim=dim, node_count=node_count,
            refinement_enc=texts[0], ownership_enc=texts[1], fields=fields,
        )


class Database:
    """Handle over one database directory. Writable only when freshly created."""

    def __init__(self, path: Path, params: DbParams | None, entries: list[IndexEntry],
                 writable: bool):
        self.path = Path(path)
        self.params = params
        self._entries = entries
        self._by_key = {(e.context_id, e.domain_id): e for e in entries}
        self._writable = writable
        self._handles: dict[int, object] = {}
        self._group_state: dict[int, tuple[int, int]] = {}  # group -> (seq, size)
        self._group_locks: dict[int, threading.Lock] = {}
        self._meta_lock = threading.Lock()

    # -- write side ---------------------------------------------------------

    def write_domain(self, context_id: int, domain_id: int, payload) -> IndexEntry:
        """Append one record; it stays invisible to readers until commit."""
        if not self._writable:
            raise AmrStoreError("database is open read-only")
        if context_id < 0 or domain_id < 0:
            raise ValueError("context and domain ids must be >= 0")
        if self.params.kind == KIND_CHECKPOINT:
            if not isinstance(payload, (bytes, bytearray, memoryview)):
                raise KindMismatch("checkpoint databases take raw bytes")
            body = bytes(payload)
        else:
            if not isinstance(payload, AmrObjectPayload):
                raise KindMismatch("postproc databases take AmrObjectPayload")
            if self.params.field_selection is not None:
                payload = payload.select_fields(self.params.field_selection)
            body = payload.encode()
        tag = _KIND_TAG[self.params.kind]
        record = _HEADER.pack(MAGIC, len(body), _TAG_BYTE[tag], context_id, domain_id) + body

        key = (context_id, domain_id)
        group = domain_id // self.params.ncf
        with self._meta_lock:
            if key in self._by_key:
                raise DuplicateEntry(f"context {context_id} domain {domain_id} already written")
            self._by_key[key] = None  # reserve under the lock
            lock = self._group_locks.setdefault(group, threading.Lock())
        with lock:
            seq, size = self._group_state.get(group, (0, 0))
            if size > 0 and size + len(record) > self.params.max_file_size:
                stale = self._handles.pop(group, None)
                if stale is not None:
                    stale.close()
                seq, size = seq + 1, 0
            handle = self._handles.get(group)
            if handle is None:
                handle = open(self.path / f"g{group}.f{seq}.dat", "ab")
                self._handles[group] = handle
            offset = size
            handle.write(record)
            self._group_state[group] = (seq, size + len(record))
        entry = IndexEntry(
            context_id=context_id, domain_id=domain_id, group_id=group,
            file_seq=seq, offset=offset, length=len(record), kind_tag=tag,
        )
        with self._meta_lock:
            self._by_key[key] = entry
            self._entries.append(entry)
        return entry

    def commit(self) -> None:
        """Durably publish everything written so far; safe to call again."""
        if not self._writable:
            raise AmrStoreError("database is open read-only")
        with self._meta_lock:
            for handle in self._handles.values():
                handle.flush()
            tmp = self.path / "index.txt.tmp"
            with open(tmp, "w") as f:
                for e in self._entries:
                    f.write(e.to_line() + "\n")
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, self.path / "index.txt")

    def close(self) -> None:
        for handle in self._handles.values():
            handle.close()
        self._handles.clear()

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- read side ----------------------------------------------------------

    def list_contexts(self) -> list[int]:
        return sorted({e.context_id for e in self._entries})

    def list_domains(self, context_id: int) -> list[int]:
        return sorted(e.domain_id for e in self._entries if e.context_id == context_id)

    def read_domain(self, context_id: int, domain_id: int):
        """Raw bytes for checkpoint records, AmrObjectPayload for postproc."""
        entry = self._by_key.get((context_id, domain_id))
        if entry is None:
            raise NotFound(f"no record for context {context_id} domain {domain_id}")
        if self._writable:
            handle = self._handles.get(entry.group_id)
            if handle is not None:
                handle.flush()
        path = self.path / f"g{entry.group_id}.f{entry.file_seq}.dat"
        try:
            with open(path, "rb") as f:
                f.seek(entry.offset)
                record = f.read(entry.length)
        except OSError as e:
            raise CorruptRecord(f"cannot read {path.name}: {e}") from e
        if len(record) != entry.length or len(record) < _HEADER.size:
            raise CorruptRecord(f"record at {path.name}:{entry.offset} is shorter than indexed")
        magic, body_len, kind_byte, ctx, dom = _HEADER.unpack_from(record, 0)
        body = record[_HEADER.size:]
        if (
            magic != MAGIC
            or body_len != len(body)
            or kind_byte != _TAG_BYTE.get(entry.kind_tag)
            or ctx != entry.context_id
            or dom != entry.domain_id
        ):
            raise CorruptRecord(f"framing mismatch at {path.name}:{entry.offset}")
        if entry.kind_tag == "raw":
            return body
        return AmrObjectPayload.decode(body)

    def file_count(self) -> int:
        """Data files currently on disk (the index is not counted)."""
        return len(list(self.path.glob("g*.f*.dat")))


def create_db(path, params: DbParams) -> Database:
    """Make an empty database directory; fails if one is already there."""
    p = Path(path)
    if (p / "index.txt").exists() or list(p.glob("g*.f*.dat")):
        raise AlreadyExists(f"{p} already holds a database")
    p.mkdir(parents=True, exist_ok=True)
    (p / "index.txt").touch()
    return Database(p, params, entries=[], writable=True)


def open_db(path) -> Database:
    """Open committed contents read-only."""
    p = Path(path)
    index = p / "index.txt"
    if not index.exists():
        raise NotADatabase(f"{p} has no index.txt")
    entries = [
        IndexEntry.from_line(line)
        for line in index.read_text().splitlines()
        if line.strip()
    ]
    return Database(p, params=None, entries=entries, writable=False)
