"""Arc-flags on transfers: computation, compression and storage.

Flag ``b(t, i)`` says that transfer ``t`` is part of some canonical journey
to a stop in cell ``i``.  Raw storage is cell-major so that a query touches
a single contiguous row.
"""
from __future__ import annotations

import json
import struct
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .canonical import CanonicalProfile
from .partition import Partition
from .tb import DEFAULT_MAX_ROUNDS
from .timetable import ParseError, Timetable
from .transfers import TransferSet

FL_MAGIC = b"FTFL"
FL_VERSION = 1
MODE_RAW, MODE_COMPRESSED = 0, 1


class FlagStore:
    """Bit matrix of shape (k, |T|); ``bits[i, t]`` is flag b(t, i)."""

    def __init__(self, bits: np.ndarray, meta: dict | None = None):
        self.bits = np.ascontiguousarray(bits, dtype=bool)
        self.meta = dict(meta or {})

    @property
    def k(self) -> int:
        return self.bits.shape[0]

    @property
    def n_transfers(self) -> int:
        return self.bits.shape[1]

    def flag(self, t: int, cell: int) -> bool:
        return bool(self.bits[cell, t])

    def row(self, cell: int) -> list:
        return self.bits[cell].tolist()

    def flat(self) -> np.ndarray:
        """Cell-major flat view: flag (t, i) sits at position i*|T| + t."""
        return self.bits.reshape(-1)

    def pairs(self) -> set:
        return {(int(i), int(t)) for i, t in zip(*np.nonzero(self.bits))}

    def __eq__(self, other):
        return isinstance(other, FlagStore) and np.array_equal(self.bits, other.bits)


class _PatternRow:
    __slots__ = ("bits", "index")

    def __init__(self, bits, index):
        self.bits = bits
        self.index = index

    def __getitem__(self, t):
        return self.bits[self.index[t]]

    def __len__(self):
        return len(self.index)


class CompressedFlagStore:
    """Distinct flag patterns, most frequent first, plus a pattern index per transfer."""

    def __init__(self, patterns: np.ndarray, index: np.ndarray, meta: dict | None = None):
        self.patterns = np.asarray(patterns, dtype=bool)
        if self.patterns.ndim != 2:
            raise ValueError("pattern table must be two-dimensional")
        self.index = np.asarray(index, dtype=np.int64)
        self.meta = dict(meta or {})
        self._index_list = self.index.tolist()

    @property
    def k(self) -> int:
        return self.patterns.shape[1]

    @property
    def n_transfers(self) -> int:
        return len(self.index)

    def flag(self, t: int, cell: int) -> bool:
        return bool(self.patterns[self.index[t], cell])

    def row(self, cell: int):
        return _PatternRow(self.patterns[:, cell].tolist(), self._index_list)

    def index_width(self) -> int:
        n = len(self.patterns)
        return 8 if n <= 1 << 8 else 16 if n <= 1 << 16 else 32


def compress_flags(store: FlagStore) -> CompressedFlagStore:
    cols = store.bits.T  # one pattern per transfer
    keys = [c.tobytes() for c in cols]
    freq = Counter(keys)
    first = {}
    for t, kb in enumerate(keys):
        first.setdefault(kb, t)
    order = sorted(freq, key=lambda kb: (-freq[kb], first[kb]))
    pos = {kb: i for i, kb in enumerate(order)}
    patterns = np.array([cols[first[kb]] for kb in order], dtype=bool).reshape(len(order), store.k)
    index = np.array([pos[kb] for kb in keys], dtype=np.int64)
    return CompressedFlagStore(patterns, index, store.meta)


def decompress_flags(cs: CompressedFlagStore) -> FlagStore:
    if cs.n_transfers == 0:
        return FlagStore(np.zeros((cs.k, 0), bool), cs.meta)
    return FlagStore(cs.patterns[cs.index].T.copy(), cs.meta)


# -- computation ---------------------------------------------------------------------

def transfer_usage(tt: Timetable, ts: TransferSet, sources=None,
                   max_rounds: int = DEFAULT_MAX_ROUNDS) -> dict:
    """Transfer id -> set of target stops reached by canonical journeys using it."""
    idx = ts.index()
    eng = CanonicalProfile(tt, ts, max_rounds)
    usage: dict = {}
    for s in (range(tt.n_stops) if sources is None else sources):
        for _, p, n, j in eng.profile(s):
            if n < 2:
                continue
            for pair in j.transfers(tt):
                usage.setdefault(idx[pair], set()).add(p)
    return usage


def _usage_worker(args):
    tt, ts, sources, max_rounds = args
    return transfer_usage(tt, ts, sources, max_rounds)


def compute_usage(tt, ts, max_rounds=DEFAULT_MAX_ROUNDS, threads: int = 1) -> dict:
    if threads <= 1:
        return transfer_usage(tt, ts, None, max_rounds)
    chunks = [list(range(k, tt.n_stops, threads)) for k in range(threads)]
    usage: dict = {}
    with ProcessPoolExecutor(threads) as ex:
        for part in ex.map(_usage_worker, [(tt, ts, c, max_rounds) for c in chunks]):
            for t, stops in part.items():
                usage.setdefault(t, set()).update(stops)
    return usage


def flags_from_usage(usage: dict, n_transfers: int, partition: Partition, meta=None) -> FlagStore:
    bits = np.zeros((partition.k, n_transfers), dtype=bool)
    for t, stops in usage.items():
        for p in stops:
            bits[partition.cell[p], t] = True
    return FlagStore(bits, meta)


def compute_flags(tt: Timetable, ts: TransferSet, partition: Partition,
                  max_rounds: int = DEFAULT_MAX_ROUNDS, threads: int = 1) -> FlagStore:
    usage = compute_usage(tt, ts, max_rounds, threads)
    return flags_from_usage(usage, len(ts), partition, {"max_rounds": max_rounds})


def prune_unflagged(tt: Timetable, ts: TransferSet, store: FlagStore):
    """Drop transfers without any flag; returns the reduced set and store."""
    keep = store.bits.any(axis=0)
    ts2 = ts.subset(tt, keep.tolist())
    return ts2, FlagStore(store.bits[:, keep], store.meta)


# -- storage ---------------------------------------------------------------------------------

def flags_to_bytes(store, meta: dict | None = None) -> bytes:
    meta = dict(store.meta if meta is None else meta)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    if isinstance(store, CompressedFlagStore):
        width = store.index_width()
        head = struct.pack("<HIIBB", FL_VERSION, store.k, store.n_transfers, MODE_COMPRESSED, width)
        pat = np.packbits(store.patterns, axis=1, bitorder="little") if len(store.patterns) \
            else np.zeros((0, (store.k + 7) // 8), np.uint8)
        body = struct.pack("<I", len(store.patterns)) + pat.tobytes() + \
            store.index.astype(f"<u{width // 8}").tobytes()
    else:
        head = struct.pack("<HIIBB", FL_VERSION, store.k, store.n_transfers, MODE_RAW, 0)
        body = np.packbits(store.flat(), bitorder="little").tobytes()
    return FL_MAGIC + head + struct.pack("<I", len(blob)) + blob + body


def flags_from_bytes(data: bytes, n_transfers: int | None = None):
    if data[:4] != FL_MAGIC:
        raise ParseError("bad magic, not an FTFL file")
    if len(data) < 20:
        raise ParseError("truncated flag header")
    version, k, nt, mode, width = struct.unpack_from("<HIIBB", data, 4)
    if version != FL_VERSION:
        raise ParseError(f"unsupported FTFL version {version}")
    if n_transfers is not None and nt != n_transfers:
        raise ParseError(f"flag store covers {nt} transfers, transfer set has {n_transfers}")
    pos = 16
    (mlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    try:
        meta = json.loads(data[pos:pos + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ParseError("corrupt flag metadata") from None
    pos += mlen
    if mode == MODE_RAW:
        nbytes = (k * nt + 7) // 8
        if len(data) - pos != nbytes:
            raise ParseError("flag payload size mismatch")
        flat = np.unpackbits(np.frombuffer(data, np.uint8, nbytes, pos), bitorder="little")
        return FlagStore(flat[:k * nt].astype(bool).reshape(k, nt), meta)
    if mode != MODE_COMPRESSED or width not in (8, 16, 32):
        raise ParseError("unknown flag storage mode")
    if len(data) < pos + 4:
        raise ParseError("truncated pattern table")
    (npat,) = struct.unpack_from("<I", data, pos)
    pos += 4
    rb = (k + 7) // 8
    need = npat * rb + nt * (width // 8)
    if len(data) - pos != need:
        raise ParseError("flag payload size mismatch")
    raw = np.frombuffer(data, np.uint8, npat * rb, pos).reshape(npat, rb)
    pats = np.unpackbits(raw, axis=1, bitorder="little")[:, :k].astype(bool)
    pos += npat * rb
    index = np.frombuffer(data, f"<u{width // 8}", nt, pos).astype(np.int64)
    if nt and index.max(initial=0) >= npat:
        raise ParseError("pattern index out of range")
    return CompressedFlagStore(pats.reshape(npat, k), index, meta)


def save_flags(store, path, meta: dict | None = None) -> None:
    Path(path).write_bytes(flags_to_bytes(store, meta))


def load_flags(path, n_transfers: int | None = None):
    return flags_from_bytes(Path(path).read_bytes(), n_transfers)
