"""Flood-based on-demand routing baseline, with optional local repair.

Route discovery floods an ``RREQ`` with duplicate suppression and a hop
bound; only the destination answers, with an ``RREP`` unicast back along
the reverse path. Data is forwarded hop by hop from per-node route tables.

On a broken link the holder either sends an ``RERR`` back to the source
along the path the packet travelled (the source then floods again for the
next packet), or, with local repair enabled, first floods a short-range
repair ``RREQ`` and falls back to ``RERR`` only if that fails.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import Protocol

RERR_HOLDOFF = 1.0


@dataclass
class Discovery:
    rid: int
    tries: int
    repair: bool
    timer: object = None


class FloodReactive(Protocol):
    name = "flood-reactive"
    local_repair = False

    def __init__(self, sim):
        super().__init__(sim)
        n = self.n
        self.routes = [{} for _ in range(n)]      # dst -> [next hop, hops, expires]
        self.reverse = [{} for _ in range(n)]     # (origin, rid) -> previous hop
        self.seen = [set() for _ in range(n)]     # (origin, rid) already handled
        self.pending = [{} for _ in range(n)]     # dst -> buffered data packets
        self.discovery = [{} for _ in range(n)]   # dst -> Discovery
        self.rid = [0] * n
        self.rebroadcasts = {}                    # (node, origin, rid) -> count
        self._rerr_sent = {}

    def start(self):
        pass

    # ------------------------------------------------------------- routes

    def lookup(self, i, d):
        e = self.routes[i].get(d)
        if e is None:
            return None
        if e[2] < self.now:
            del self.routes[i][d]
            return None
        return e

    def install(self, i, d, nxt, hops):
        cur = self.lookup(i, d)
        if cur is None or hops <= cur[1] or cur[0] == nxt:
            self.routes[i][d] = [nxt, hops, self.now + self.cfg.route_timeout]

    def drop_routes_via(self, i, nxt):
        table = self.routes[i]
        for d in [d for d, e in table.items() if e[0] == nxt]:
            del table[d]

    # --------------------------------------------------------------- data

    def send_data(self, src, pkt):
        pkt.path = [src]
        self.route_packet(src, pkt)

    def route_packet(self, i, pkt):
        d = pkt.dst
        if i == d:
            self.deliver(i, pkt)
            return
        if pkt.hops >= self.cfg.max_hops:
            self.drop(i, pkt, "hop-limit")
            return
        e = self.lookup(i, d)
        if e is not None:
            e[2] = self.now + self.cfg.route_timeout
            self.unicast(i, e[0], pkt)
        elif i == pkt.src:
            self.buffer(i, pkt, repair=False)
        else:
            self.on_break(i, pkt)

    def on_Data(self, r, pkt, s):
        pkt.hops += 1
        pkt.path.append(r)
        self.route_packet(r, pkt)

    def buffer(self, i, pkt, repair):
        d = pkt.dst
        self.pending[i].setdefault(d, []).append(pkt)
        if d not in self.discovery[i]:
            ttl = self.cfg.local_repair_ttl if repair else self.cfg.rreq_ttl
            self.discover(i, d, ttl, repair)

    # ---------------------------------------------------------- discovery

    def flood_route_discover(self, source, destination):
        """Start a discovery; returns ``[source]`` for the trivial self-route."""
        if source == destination:
            return [source]
        return self.discover(source, destination, self.cfg.rreq_ttl, repair=False)

    def discover(self, i, d, ttl, repair, tries=0):
        self.rid[i] += 1
        rid = self.rid[i]
        st = Discovery(rid, tries, repair)
        self.discovery[i][d] = st
        self.seen[i].add((i, rid))
        info = {"origin": i, "rid": rid, "target": d, "ttl": ttl, "hops": 0}
        self.broadcast(i, self.packet("RREQ", i, None, info=info))
        st.timer = self.kernel.schedule_in(self.cfg.discovery_timeout, self._discovery_timeout,
                                           i, d, rid, kind="flood:discovery")
        return st

    def _discovery_timeout(self, i, d, rid):
        st = self.discovery[i].get(d)
        if st is None or st.rid != rid:
            return
        if not st.repair and st.tries < self.cfg.rreq_retries:
            self.discover(i, d, self.cfg.rreq_ttl, False, st.tries + 1)
            return
        del self.discovery[i][d]
        for p in self.pending[i].pop(d, []):
            if st.repair:
                self.send_rerr(i, p)
                self.drop(i, p, "repair-failed")
            else:
                self.drop(i, p, "no-route")

    def on_RREQ(self, r, pkt, s):
        info = pkt.info
        key = (info["origin"], info["rid"])
        if key in self.seen[r]:
            return
        self.seen[r].add(key)
        hops = info["hops"] + 1
        self.reverse[r][key] = s
        self.install(r, info["origin"], s, hops)
        if r == info["target"]:
            reply = {"origin": key[0], "rid": key[1], "target": r, "hops": 0}
            self.unicast(r, s, self.packet("RREP", r, key[0], info=reply))
            return
        if info["ttl"] > 1:
            fwd = dict(info, ttl=info["ttl"] - 1, hops=hops)
            self.kernel.schedule_in(self.jitter(0.0, 0.01), self._rebroadcast, r, fwd,
                                    kind="flood:rebroadcast")

    def _rebroadcast(self, r, info):
        k = (r, info["origin"], info["rid"])
        self.rebroadcasts[k] = self.rebroadcasts.get(k, 0) + 1
        self.broadcast(r, self.packet("RREQ", info["origin"], None, info=info))

    def on_RREP(self, r, pkt, s):
        info = pkt.info
        info["hops"] += 1
        target = info["target"]
        self.install(r, target, s, info["hops"])
        origin = info["origin"]
        if r == origin:
            st = self.discovery[r].pop(target, None)
            if st is not None and st.timer is not None:
                st.timer.cancel()
            for p in self.pending[r].pop(target, []):
                self.route_packet(r, p)
            return
        prev = self.reverse[r].get((origin, info["rid"]))
        if prev is None:
            self.drop(r, pkt, "no-reverse-path")
            return
        self.unicast(r, prev, pkt)

    # ------------------------------------------------------------- breaks

    def unicast_failed(self, i, target, pkt):
        self.drop_routes_via(i, target)
        if pkt.kind == "Data":
            self.on_break(i, pkt)
        else:
            self.drop(i, pkt, "link-fail")

    def on_break(self, i, pkt):
        """Next hop unreachable (or no route) at holder ``i``."""
        if i == pkt.src:
            self.buffer(i, pkt, repair=False)
        elif self.local_repair and not pkt.info.get("repaired"):
            pkt.info["repaired"] = True
            self.log(i, "Data", "repair")
            self.buffer(i, pkt, repair=True)
        else:
            self.send_rerr(i, pkt)
            self.drop(i, pkt, "route-error")

    def send_rerr(self, i, pkt):
        key = (i, pkt.src, pkt.dst)
        last = self._rerr_sent.get(key)
        if last is not None and self.now - last < RERR_HOLDOFF:
            return False
        self._rerr_sent[key] = self.now
        back = list(reversed(pkt.path))
        if len(back) < 2 or back[0] != i:
            return False
        err = self.packet("RERR", i, pkt.src, path=back, info={"target": pkt.dst})
        self.unicast(i, back[1], err)
        return True

    def on_RERR(self, r, pkt, s):
        pkt.idx += 1
        e = self.routes[r].get(pkt.info["target"])
        if e is not None:
            del self.routes[r][pkt.info["target"]]
        if pkt.idx < len(pkt.path) - 1:
            self.unicast(r, pkt.path[pkt.idx + 1], pkt)


class FloodReactiveLocalRepair(FloodReactive):
    name = "flood-reactive-lr"
    local_repair = True
