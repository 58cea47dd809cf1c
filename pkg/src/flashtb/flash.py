"""FLASH-TB queries: trip-based search restricted to transfers flagged for the target cell."""
from __future__ import annotations

from .partition import Partition
from .tb import DEFAULT_MAX_ROUNDS, QueryResult, TBEngine
from .timetable import INF, Timetable
from .transfers import TransferSet

STAMP_BITS = 16


class FlashEngine(TBEngine):
    """One-to-one and profile search over flagged transfers.

    Reached indices are reset lazily: each trip carries a 16-bit stamp and an
    index only counts if its stamp matches the current query.  When the stamp
    counter wraps, everything is reset for real.
    """

    def __init__(self, tt: Timetable, ts: TransferSet, flags, partition: Partition,
                 max_rounds: int = DEFAULT_MAX_ROUNDS, **kw):
        super().__init__(tt, ts, max_rounds, **kw)
        if flags.n_transfers != len(ts):
            raise ValueError(f"flags cover {flags.n_transfers} transfers, set has {len(ts)}")
        if flags.k != partition.k or len(partition.cell) != tt.n_stops:
            raise ValueError("flags and partition disagree on cells")
        self.flags = flags
        self.partition = partition
        self._rows: dict = {}
        self.R = self.trip_len[:]
        self.eta = [0] * tt.n_trips
        self.counter = 0
        self.physical_resets = 0

    def _allowed(self, target):
        cell = self.partition.cell[target]
        row = self._rows.get(cell)
        if row is None:
            row = self._rows[cell] = self.flags.row(cell)
        return row

    def _reset_reached(self):
        self.counter = (self.counter + 1) & ((1 << STAMP_BITS) - 1)
        if self.counter == 0:
            self.R = self.trip_len[:]
            self.eta = [0] * self.tt.n_trips
            self.counter = 1
            self.physical_resets += 1
        return self.R

    def _enqueue(self, T, j, R, queue, parent):
        eta, cur, tl = self.eta, self.counter, self.trip_len
        r = R[T] if eta[T] == cur else tl[T]
        if r <= j:
            return
        queue.append((T, j, r, parent))
        if not self.line_pruning:
            R[T], eta[T] = j, cur
            return
        last = self.line_last[T]
        while T <= last:
            if (R[T] if eta[T] == cur else tl[T]) <= j:
                break
            R[T], eta[T] = j, cur
            T += 1

    def one_to_all(self, s, tau, unpack=False):
        raise NotImplementedError("flags are per target cell; use query() or profile()")


def flash_query(tt, ts, flags, partition, s, t, tau, max_rounds=DEFAULT_MAX_ROUNDS) -> QueryResult:
    return FlashEngine(tt, ts, flags, partition, max_rounds).query(s, t, tau)


def flash_profile_query(tt, ts, flags, partition, s, t, lo=-INF, hi=INF,
                        max_rounds=DEFAULT_MAX_ROUNDS) -> dict:
    return FlashEngine(tt, ts, flags, partition, max_rounds).profile(s, t, lo, hi)
