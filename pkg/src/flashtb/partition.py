"""Layout graph and balanced k-way stop partitions."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .timetable import ParseError, Timetable

DEFAULT_EPSILON = 0.05


class PartitionError(ValueError):
    pass


@dataclass
class LayoutGraph:
    """Directed stop graph; weight = number of consecutive-stop links plus footpaths."""

    n: int
    weights: dict  # (p, q) -> int

    def symmetric(self) -> list[dict]:
        """Undirected adjacency with weights summed over both directions."""
        adj: list = [dict() for _ in range(self.n)]
        for (p, q), w in self.weights.items():
            adj[p][q] = adj[p].get(q, 0) + w
            adj[q][p] = adj[q].get(p, 0) + w
        return adj

    def cut(self, cell) -> int:
        return sum(w for (p, q), w in self.weights.items() if cell[p] != cell[q])


def build_layout_graph(tt: Timetable) -> LayoutGraph:
    w: Counter = Counter()
    for stops in tt.trip_stops:
        for p, q in zip(stops, stops[1:]):
            if p != q:
                w[(p, q)] += 1
    for p, q, _ in tt.raw_footpaths:
        if p != q:
            w[(p, q)] += 1
    return LayoutGraph(tt.n_stops, dict(w))


def max_cell_size(n: int, k: int, eps: float) -> int:
    return math.floor((1 + eps) * math.ceil(n / k) + 1e-9)


@dataclass
class Partition:
    cell: list  # stop index -> cell in 0..k-1
    k: int
    eps: float = DEFAULT_EPSILON

    def sizes(self) -> list[int]:
        c = Counter(self.cell)
        return [c.get(i, 0) for i in range(self.k)]

    def is_balanced(self) -> bool:
        return max(self.sizes()) <= max_cell_size(len(self.cell), self.k, self.eps)

    def to_text(self, tt: Timetable) -> str:
        lines = [f"# k={self.k} eps={self.eps}"]
        lines += [f"{tt.stop_ids[p]}\t{c}" for p, c in enumerate(self.cell)]
        return "\n".join(lines) + "\n"

    def write(self, tt: Timetable, path) -> None:
        Path(path).write_text(self.to_text(tt))


def partition_stops(g: LayoutGraph, k: int, eps: float = DEFAULT_EPSILON, seed: int = 0,
                    passes: int = 8) -> Partition:
    """Greedy region growing from heavy seeds followed by boundary refinement."""
    n = g.n
    if k < 1:
        raise PartitionError("k must be positive")
    if k > n:
        raise PartitionError(f"k={k} exceeds number of stops {n}")
    if k == n:
        return Partition(list(range(n)), k, eps)
    if k == 1:
        return Partition([0] * n, k, eps)
    cap = max_cell_size(n, k, eps)
    adj = g.symmetric()
    rng = np.random.default_rng(seed)
    tie = rng.permutation(n)
    degree = [sum(a.values()) for a in adj]
    order = sorted(range(n), key=lambda p: (-degree[p], tie[p]))
    cell = [-1] * n
    sizes = [0] * k
    # seeds: heavy stops not adjacent to an earlier seed where possible
    seeds = []
    for p in order:
        if len(seeds) == k:
            break
        if all(q not in adj[p] for q in seeds):
            seeds.append(p)
    for p in order:
        if len(seeds) == k:
            break
        if p not in seeds:
            seeds.append(p)
    gain = [dict() for _ in range(k)]  # cell -> {stop: connection weight}
    for c, p in enumerate(seeds):
        cell[p] = c
        sizes[c] = 1
    for c, p in enumerate(seeds):
        for q, w in adj[p].items():
            if cell[q] < 0:
                gain[c][q] = gain[c].get(q, 0) + w
    unassigned = n - k
    while unassigned:
        c = min((c for c in range(k) if sizes[c] < cap), key=lambda c: (sizes[c], c))
        cand = [(w, -tie[q], q) for q, w in gain[c].items() if cell[q] < 0]
        if cand:
            q = max(cand)[2]
        else:
            q = next(p for p in order if cell[p] < 0)
        cell[q] = c
        sizes[c] += 1
        unassigned -= 1
        for cc in range(k):
            gain[cc].pop(q, None)
        for r, w in adj[q].items():
            if cell[r] < 0:
                gain[c][r] = gain[c].get(r, 0) + w
    _refine(adj, cell, sizes, k, cap, passes)
    return Partition(cell, k, eps)


def _refine(adj, cell, sizes, k, cap, passes):
    """Move boundary stops to the neighbouring cell with the largest positive gain."""
    n = len(cell)
    for _ in range(passes):
        moved = False
        for p in range(n):
            own = cell[p]
            if sizes[own] <= 1:
                continue
            conn: dict = {}
            for q, w in adj[p].items():
                conn[cell[q]] = conn.get(cell[q], 0) + w
            inside = conn.get(own, 0)
            best, best_gain = own, 0
            for c, w in sorted(conn.items()):
                if c != own and sizes[c] < cap and w - inside > best_gain:
                    best, best_gain = c, w - inside
            if best != own:
                cell[p] = best
                sizes[own] -= 1
                sizes[best] += 1
                moved = True
        if not moved:
            break


def random_balanced_partition(n: int, k: int, rng) -> list[int]:
    """Uniformly shuffled round-robin assignment; used as a sanity baseline."""
    perm = rng.permutation(n)
    cell = [0] * n
    for pos, p in enumerate(perm):
        cell[p] = pos % k
    return cell


def parse_partition(tt: Timetable, text: str, k: int | None = None,
                    eps: float = DEFAULT_EPSILON) -> Partition:
    """Read ``stop_id<TAB>cell`` lines; a ``# k=.. eps=..`` header is optional."""
    cell = [-1] * tt.n_stops
    header = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    header[key] = val
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"partition line {lineno}: expected stop<TAB>cell")
        sid, c = parts[0], parts[1].strip()
        if sid not in tt.stop_index:
            raise ParseError(f"partition line {lineno}: unknown stop {sid!r}")
        try:
            c = int(c)
        except ValueError:
            raise ParseError(f"partition line {lineno}: bad cell {c!r}") from None
        cell[tt.stop_index[sid]] = c
    missing = [tt.stop_ids[p] for p, c in enumerate(cell) if c < 0]
    if missing:
        raise ParseError(f"partition misses {len(missing)} stops, e.g. {missing[0]!r}")
    if k is None:
        k = int(header["k"]) if "k" in header else max(cell) + 1
    if "eps" in header:
        eps = float(header["eps"])
    bad = [c for c in cell if not 0 <= c < k]
    if bad:
        raise ParseError(f"cell {bad[0]} outside 0..{k - 1}")
    return Partition(cell, k, eps)


def read_partition(tt: Timetable, path, k: int | None = None) -> Partition:
    return parse_partition(tt, Path(path).read_text(), k)
