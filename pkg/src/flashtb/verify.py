"""Self-checks run by ``flashtb verify``: fixture regressions and oracle equivalence."""
from __future__ import annotations

from dataclasses import dataclass

from .canonical import CanonicalProfile
from .fixtures import fixture
from .flags import compute_flags
from .flash import FlashEngine
from .oracle import Oracle
from .partition import build_layout_graph, partition_stops
from .tb import TBEngine
from .transfers import TransferSet, tb_transfers, trans_ultra


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def fixture_checks(max_rounds: int = 8) -> list[Check]:
    out = []
    tt = fixture("fig1-net")
    a, f = tt.stop("A"), tt.stop("F")
    le = TransferSet(tt, tb_transfers(tt))
    tu = TransferSet(tt, trans_ultra(tt))
    _, r_le = TBEngine(tt, le, max_rounds).one_to_all(a, 0)
    _, r_tu = TBEngine(tt, tu, max_rounds).one_to_all(a, 0)
    out.append(Check("fig1-net latest-exit set misses A->F", r_le.front[f] == [], str(r_le.front[f])))
    out.append(Check("fig1-net canonical set finds A->F", r_tu.front[f] == [(35, 2)], str(r_tu.front[f])))

    tt = fixture("fig2-net")
    s, t = tt.stop("S"), tt.stop("T")
    ts = TransferSet(tt, trans_ultra(tt))
    trace: list = []
    TBEngine(tt, ts, max_rounds).profile(s, trace=trace)
    out.append(Check("fig2-net plain profile self-prunes the dep-0 journey",
                     (0, t, 2, 20) in trace, str(trace)))
    got = {(tau, j.describe(tt)) for tau, p, n, j in CanonicalProfile(tt, ts, max_rounds).profile(s)
           if p == t}
    want = (0, "S [T_b S@0->M@5] [T_d X2@10->T@20] T")
    out.append(Check("fig2-net canonical profile emits the dep-0 journey", want in got, str(sorted(got))))
    g = build_layout_graph(tt)
    for k in sorted({1, 2, tt.n_stops}):
        part = partition_stops(g, k)
        eng = FlashEngine(tt, ts, compute_flags(tt, ts, part, max_rounds), part, max_rounds)
        r = eng.query(s, t, 0)
        out.append(Check(f"fig2-net flash query k={k}", r.front == [(20, 2)], str(r.front)))
    return out


def oracle_checks(tt, ts, flash_engines=(), max_rounds: int = 8, sources=None,
                  limit: int = 5) -> list[Check]:
    """Compare every engine against the oracle for all (s, t) and all departures of s."""
    o = Oracle(tt, max_rounds)
    tb = TBEngine(tt, ts, max_rounds)
    bad: dict = {"tb_query": [], "one_to_all": [], "flash_query": [], "flash_profile": []}
    n = 0
    for s in (range(tt.n_stops) if sources is None else sources):
        deps = tt.departure_times(s)
        fronts = {tau: o.one_to_all(s, tau) for tau in deps}
        for tau in deps:
            _, r = tb.one_to_all(s, tau)
            if r.front != fronts[tau]:
                bad["one_to_all"].append((s, tau))
            for t in range(tt.n_stops):
                exp = fronts[tau][t]
                n += 1
                if tb.query(s, t, tau, unpack=False).front != exp:
                    bad["tb_query"].append((s, t, tau))
                for e in flash_engines:
                    if e.query(s, t, tau, unpack=False).front != exp:
                        bad["flash_query"].append((e.partition.k, s, t, tau))
        for t in range(tt.n_stops):
            for e in flash_engines:
                prof = e.profile(s, t)
                if any(prof.get(tau) != fronts[tau][t] for tau in deps):
                    bad["flash_profile"].append((e.partition.k, s, t))
    out = []
    for name, errs in bad.items():
        if name.startswith("flash") and not flash_engines:
            continue
        out.append(Check(f"oracle equivalence {name} ({n} queries)", not errs,
                         f"{len(errs)} mismatches, e.g. {errs[:limit]}" if errs else ""))
    return out
