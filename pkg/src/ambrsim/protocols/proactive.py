"""Proactive distance-vector baseline.

Every node broadcasts its whole table each ``update_period`` (plus rate
limited triggered updates when a route changes). Receivers keep the last
vector heard from each neighbor and route on the fewest hops.

Destination sequence numbers guard against stale routes: a destination
advertises itself with an even number that grows every period, and a node
that loses the link towards a destination advertises it as unreachable with
the next odd number. Entries older than the highest odd number seen for a
destination are never used again.
"""

from __future__ import annotations

import math

from .base import Protocol
from ..packets import KINDS, TABLE_ENTRY_BYTES

INF = math.inf


class Proactive(Protocol):
    name = "proactive"

    def __init__(self, sim):
        super().__init__(sim)
        n = self.n
        self.seq = [0] * n
        self.vectors = [{} for _ in range(n)]  # neighbor -> (heard at, {dst: (metric, seq)})
        self.table = [{} for _ in range(n)]    # dst -> [next hop, metric, seq]
        self.floor = [{} for _ in range(n)]    # dst -> lowest usable seq
        self.last_update = [-INF] * n
        self._trigger = [None] * n
        self.infinity = self.cfg.max_hops

    def start(self):
        for i in range(self.n):
            self.table[i][i] = [i, 0, 0]
            phase = self.jitter(0.0, self.cfg.update_period)
            self.kernel.schedule(phase, self._periodic, i, kind="proactive:tick")

    # ------------------------------------------------------------ updates

    def _periodic(self, i):
        self.kernel.schedule_in(self.cfg.update_period, self._periodic, i, kind="proactive:tick")
        self.proactive_tick(i)

    def proactive_tick(self, i):
        """Expire silent neighbors, then broadcast the full table; returns tx count."""
        limit = self.now - self.cfg.entry_timeout
        for v in [v for v, (t, _) in self.vectors[i].items() if t < limit]:
            self.invalidate(i, v)
        self.seq[i] += 2
        self.table[i][i] = [i, 0, self.seq[i]]
        self.advertise(i)
        return 1

    def advertise(self, i):
        entries = {d: (e[1], e[2]) for d, e in self.table[i].items()}
        size = KINDS["TableUpdate"][1] + TABLE_ENTRY_BYTES * len(entries)
        self.broadcast(i, self.packet("TableUpdate", i, None, size=size,
                                      info={"entries": entries}))
        self.last_update[i] = self.now
        if self._trigger[i] is not None:
            self._trigger[i].cancel()
            self._trigger[i] = None

    def schedule_trigger(self, i):
        if not self.cfg.triggered_updates or self._trigger[i] is not None:
            return
        t = max(self.now + self.cfg.trigger_holdoff,
                self.last_update[i] + self.cfg.min_trigger_interval)
        self._trigger[i] = self.kernel.schedule(t, self._triggered, i, kind="proactive:trigger")

    def _triggered(self, i):
        self._trigger[i] = None
        self.advertise(i)

    # -------------------------------------------------------------- merge

    def usable(self, i, d, metric, seq):
        return metric < self.infinity and seq >= self.floor[i].get(d, 0)

    def on_TableUpdate(self, r, pkt, s):
        entries = pkt.info["entries"]
        self.vectors[r][s] = (self.now, entries)
        tab = self.table[r]
        floor = self.floor[r]
        changed = False
        for d, (m, sq) in entries.items():
            if d == r:
                continue
            if sq % 2 == 1 and sq > floor.get(d, 0):
                floor[d] = sq
            cur = tab.get(d)
            cand = m + 1
            ok = self.usable(r, d, cand, sq)
            if cur is not None and cur[0] == s:
                if ok and cand <= cur[1]:
                    changed |= cand != cur[1]
                    cur[1], cur[2] = cand, sq
                else:
                    changed |= self.recompute(r, d)
            elif ok and (cur is None or cand < cur[1] or cur[2] < floor.get(d, 0)):
                tab[d] = [s, cand, sq]
                changed = True
            elif cur is not None and cur[1] < INF and cur[2] < floor.get(d, 0):
                changed |= self.recompute(r, d)
        if changed:
            self.schedule_trigger(r)

    def recompute(self, i, d):
        """Best fresh neighbor route to ``d``; returns True if the metric changed."""
        limit = self.now - self.cfg.entry_timeout
        best = None
        for v, (t, vec) in self.vectors[i].items():
            if t < limit:
                continue
            e = vec.get(d)
            if e is None:
                continue
            cand = e[0] + 1
            if self.usable(i, d, cand, e[1]) and (best is None or (cand, v) < (best[1], best[0])):
                best = (v, cand, e[1])
        cur = self.table[i].get(d)
        old = INF if cur is None else cur[1]
        if best is not None:
            self.table[i][d] = list(best)
            return best[1] != old
        if cur is not None and cur[1] < INF:
            bumped = cur[2] + 1 if cur[2] % 2 == 0 else cur[2]
            self.table[i][d] = [None, INF, bumped]
            self.floor[i][d] = max(self.floor[i].get(d, 0), bumped)
            return True
        return False

    def invalidate(self, i, v):
        """Link ``i``-``v`` is gone: advertise routes through ``v`` as unreachable."""
        self.vectors[i].pop(v, None)
        changed = False
        for d, e in self.table[i].items():
            if e[0] == v and d != i and e[1] < INF:
                bumped = e[2] + 1 if e[2] % 2 == 0 else e[2]
                e[0], e[1], e[2] = None, INF, bumped
                self.floor[i][d] = max(self.floor[i].get(d, 0), bumped)
                changed = True
        if changed:
            self.schedule_trigger(i)

    # --------------------------------------------------------------- data

    def send_data(self, src, pkt):
        self.route_packet(src, pkt)

    def route_packet(self, i, pkt):
        d = pkt.dst
        if i == d:
            self.deliver(i, pkt)
            return
        if pkt.hops >= self.cfg.max_hops:
            self.drop(i, pkt, "hop-limit")
            return
        e = self.table[i].get(d)
        if e is None or e[1] == INF:
            self.drop(i, pkt, "no-route")
            return
        self.unicast(i, e[0], pkt)

    def on_Data(self, r, pkt, s):
        pkt.hops += 1
        self.route_packet(r, pkt)

    def unicast_failed(self, i, target, pkt):
        self.invalidate(i, target)
        self.drop(i, pkt, "link-fail")

    # -------------------------------------------------------------- views

    def routing_table(self, i):
        """``{dst: (next hop, hops)}`` for every reachable destination."""
        return {d: (e[0], e[1]) for d, e in self.table[i].items() if e[1] < INF and d != i}
