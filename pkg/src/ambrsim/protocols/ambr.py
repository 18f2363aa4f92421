"""Adaptive monitor based routing.

Nodes announce themselves with an event-driven hello session. A node whose
first-hop connectivity reaches the threshold ``T`` becomes a *monitor*; nodes
that hear a monitor affiliate with it and keep the affiliation alive with
``MonitorAliveRequest``/``MonitorAliveReply`` pairs unless recent data
exchanged with the monitor already proves liveness.

Data forwarding, for source ``S``, destination ``D`` and monitor ``M``:

1. ``D`` is a neighbor of ``S`` -> send directly.
2. ``D`` is in the route cache of ``S`` -> follow the cached path.
3. otherwise hand the packet to ``M``, which sends directly if ``D`` is its
   neighbor, follows its own cached path, or runs the route finder: a
   depth-bounded query over adjacent monitors whose first reply is cached.

When a link on a cached path breaks, the node holding the packet (or its
monitor) repairs the route locally instead of going back to the source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .base import Protocol

ORDINARY = "ordinary"
MONITOR = "monitor"
MAX_REPAIRS = 4
MAX_RELAY = 3      # gateways between a relayed member and its monitor
FAR_FALLBACK = 2   # below this many closer monitors, use two-gateway links
NEVER = -math.inf


@dataclass
class RouteCacheEntry:
    destination: int
    path: tuple
    learned_at: float
    alive: bool = True


@dataclass
class RouteQueryState:
    """Origin-side bookkeeping for one route-finder run."""

    query_id: tuple
    destination: int
    started: float
    source: int | None = None
    repair_holder: int | None = None
    timer: object = None
    resolved: bool = False
    informed: set = field(default_factory=set)


class AmbrNode:
    __slots__ = (
        "id", "up", "role", "monitor", "members", "neighbors", "info",
        "known_monitors", "cache", "session", "session_tries", "session_timer",
        "session_ended", "last_exchange", "keepalive_timer", "alive_wait",
        "prune_timer", "src_queue", "pending", "queries", "seen_queries",
        "unreachable_until", "broken", "qseq", "hello_heard", "check_pending",
        "relay", "relayed", "elected_at",
    )

    def __init__(self, nid):
        self.id = nid
        self.up = False
        self.role = ORDINARY
        self.monitor = None
        self.members = {}          # member -> last heard (monitors only)
        self.neighbors = {}        # node -> last heard
        self.info = {}             # neighbor -> (t, affiliation, is monitor, heard, far)
        self.known_monitors = {}   # monitor heard directly -> last heard
        self.cache = {}            # destination -> RouteCacheEntry
        self.session = False
        self.session_tries = 0
        self.session_timer = None
        self.session_ended = NEVER
        self.last_exchange = NEVER
        self.keepalive_timer = None
        self.alive_wait = None
        self.prune_timer = None
        self.src_queue = []
        self.pending = {}          # destination -> packets waiting on a query
        self.queries = {}          # destination -> RouteQueryState
        self.seen_queries = set()
        self.unreachable_until = {}
        self.broken = {}           # neighbor -> time the link failed
        self.qseq = 0
        self.hello_heard = {}
        self.check_pending = False
        self.relay = ()            # gateways towards the monitor of a relayed member
        self.relayed = {}          # relayed member -> its gateways (monitors only)
        self.elected_at = None

    @property
    def affiliated(self):
        return self.role == ORDINARY and self.monitor is not None


def _cancel(ev):
    if ev is not None:
        ev.cancel()


def loop_free(path):
    """Remove cycles from a node path, keeping the first visit of each node."""
    out = []
    where = {}
    for v in path:
        if v in where:
            del out[where[v] + 1:]
            where = {u: i for i, u in enumerate(out)}
            continue
        where[v] = len(out)
        out.append(v)
    return out


class Ambr(Protocol):
    name = "ambr"

    def __init__(self, sim):
        super().__init__(sim)
        cfg = self.cfg
        self.nodes = [AmbrNode(i) for i in range(self.n)]
        self.T = cfg.monitor_threshold
        self.neighbor_lifetime = cfg.neighbor_lifetime
        self.member_timeout = 2.5 * cfg.alive_period
        self.hello_dedup = 0.25 * cfg.hello_retry
        self.hello_backoff = cfg.hello_retry * (cfg.hello_max_retries + 1)
        # audit trails read by the invariant checks and the tests
        self.elections = []      # (time, node, neighbor count)
        self.demotions = []      # (time, node)
        self.query_log = []      # RouteQueryState per route-finder run
        self.query_hops = []     # (query id, monitor, depth, visited)
        self.first_replies = {}  # query id -> (time, path)
        self.repair_log = []     # (time, holder, packet uid)
        self.up_at = {}          # node -> forced node-up time

    # ------------------------------------------------------------------ setup

    def start(self):
        spread = self.cfg.node_up_spread
        for i in range(self.n):
            t = self.jitter(0.0, spread) if spread > 0 else 0.0
            # up_at lets a scenario bring chosen nodes up late
            self.kernel.schedule(self.up_at.get(i, t), self.on_node_up, i, kind="ambr:up")
        self.kernel.schedule_in(1.0, self._sweep, kind="ambr:check")

    def finish(self):
        self._sweep(reschedule=False)

    # ----------------------------------------------------------- knowledge

    def fresh(self, t):
        return t is not None and self.now - t <= self.neighbor_lifetime

    def link_broken(self, nd, v):
        t = nd.broken.get(v)
        return t is not None and self.now - t <= self.cfg.broken_link_memory

    def is_neighbor(self, nd, v):
        return self.fresh(nd.neighbors.get(v)) and not self.link_broken(nd, v)

    def fresh_neighbors(self, nd):
        limit = self.now - self.neighbor_lifetime
        return [v for v, t in nd.neighbors.items() if t >= limit and not self.link_broken(nd, v)]

    def neighbor_count(self, nd):
        fresh = set(self.fresh_neighbors(nd))
        if nd.role == MONITOR:
            fresh.update(m for m in nd.members if m not in nd.relayed)
        return len(fresh)

    def heard_monitors(self, nd):
        limit = self.now - self.neighbor_lifetime
        return tuple(sorted(
            m for m, t in nd.known_monitors.items()
            if t >= limit and m != nd.monitor and m != nd.id
        ))

    def hdr(self, nd):
        """Piggybacked header.

        ``(affiliation, is monitor, other monitors heard, far monitors, chain)``
        where far monitors are ``(monitor, neighbor)`` pairs two hops away and
        chain is a relayed member's gateways plus monitor.
        """
        heard = self.heard_monitors(nd)
        if nd.role == MONITOR:
            return (None, True, heard, (), ())
        near = set(heard)
        if not nd.relay:
            near.add(nd.monitor)
        far = {}
        limit = self.now - self.neighbor_lifetime
        for g, rec in nd.info.items():
            if rec[0] < limit or rec[2] or g not in nd.neighbors:
                continue
            for m in ((rec[1],) if rec[1] is not None else ()) + rec[3]:
                if m != nd.id and m not in near and (m not in far or g < far[m]):
                    far[m] = g
        far = tuple(sorted(far.items()))
        if nd.relay:
            return (None, False, heard, far, (*nd.relay, nd.monitor))
        return (nd.monitor, False, heard, far, ())

    def hear(self, r, s, pkt):
        nd = self.nodes[r]
        nd.neighbors[s] = self.now
        nd.broken.pop(s, None)
        hdr = pkt.info.get("hdr")
        if hdr is None:
            return
        aff, is_mon, heard, far, chain = hdr
        nd.info[s] = (self.now, aff, is_mon, heard, far, chain)
        if is_mon:
            nd.known_monitors[s] = self.now
            if nd.role == ORDINARY and nd.relay:
                # a monitor in range beats membership through a relay
                self.affiliate(r, s)
        elif s in nd.known_monitors:
            del nd.known_monitors[s]
            if nd.role == ORDINARY and nd.monitor == s:
                self.lose_monitor(r)
        if nd.role == MONITOR:
            if aff == r:
                nd.members[s] = self.now
                nd.relayed.pop(s, None)
            elif s in nd.members and s not in nd.relayed:
                del nd.members[s]

    def adjacent_monitors(self, nd):
        """Monitors reachable directly or through one or two gateway nodes.

        Returns ``(monitor, gateways)`` pairs sorted by monitor id, keeping
        the shortest gateway chain per monitor.
        """
        best = {}
        far_links = {}
        for m, t in nd.known_monitors.items():
            if m != nd.id and self.fresh(t) and self.is_neighbor(nd, m):
                best[m] = ()
        for g in sorted(self.fresh_neighbors(nd)):
            if g in nd.known_monitors:
                continue
            rec = nd.info.get(g)
            if rec is None or not self.fresh(rec[0]) or rec[2]:
                continue
            _, aff, _, heard, far, _ = rec
            for m in ((aff,) if aff is not None else ()) + heard:
                if m != nd.id and (m not in best or len(best[m]) > 1):
                    best[m] = (g,)
            for m, h in far:
                if m != nd.id and h != nd.id and m not in far_links:
                    far_links[m] = (g, h)
        if len(best) < FAR_FALLBACK:
            # sparse neighborhood: reach further monitors through two gateways
            for m, gws in far_links.items():
                best.setdefault(m, gws)
        return sorted(best.items())

    def cache_lookup(self, nd, dst):
        e = nd.cache.get(dst)
        if e is None:
            return None
        if not e.alive or self.now - e.learned_at > self.cfg.cache_ttl:
            del nd.cache[dst]
            return None
        if len(e.path) > 1 and self.link_broken(nd, e.path[1]):
            del nd.cache[dst]
            return None
        return e

    def invalidate_link(self, nd, nxt):
        for dst, e in list(nd.cache.items()):
            if len(e.path) > 1 and e.path[1] == nxt:
                e.alive = False
                del nd.cache[dst]

    def find_proxy(self, nd):
        """Shortest ``(gateway, ..., monitor)`` path through an affiliated neighbor."""
        best = None
        for g in sorted(self.fresh_neighbors(nd)):
            rec = nd.info.get(g)
            if rec is None or not self.fresh(rec[0]) or rec[2]:
                continue
            if rec[1] is not None and rec[1] != nd.id:
                return g, rec[1]
            chain = rec[5]
            if chain and len(chain) <= MAX_RELAY and nd.id not in chain:
                if best is None or len(chain) + 1 < len(best):
                    best = (g, *chain)
        return best

    def send(self, i, nxt, pkt):
        nd = self.nodes[i]
        pkt.info["hdr"] = self.hdr(nd)
        ok = self.unicast(i, nxt, pkt)
        if ok:
            # the link-layer ack doubles as piggybacked liveness
            nd.neighbors[nxt] = self.now
            if nd.role == MONITOR and nxt in nd.members:
                nd.members[nxt] = self.now
        return ok

    # ------------------------------------------------------- hello sessions

    def on_node_up(self, i):
        nd = self.nodes[i]
        if nd.up:
            return
        nd.up = True
        self.log(i, "-", "up")
        self.start_session(i)

    def start_session(self, i):
        nd = self.nodes[i]
        if nd.session or not nd.up:
            return False
        nd.session = True
        nd.session_tries = 0
        self._check_role(nd)
        self._send_hello(i)
        return True

    def _send_hello(self, i):
        nd = self.nodes[i]
        pkt = self.packet("Hello", i, None, info={"hdr": self.hdr(nd)})
        self.broadcast(i, pkt)
        wait = self.cfg.hello_retry * self.jitter(0.9, 1.1)
        nd.session_timer = self.kernel.schedule_in(wait, self._session_timeout, i,
                                                   kind="ambr:hello-timer")

    def end_session(self, i):
        nd = self.nodes[i]
        if not nd.session:
            return
        nd.session = False
        nd.session_ended = self.now
        _cancel(nd.session_timer)
        nd.session_timer = None
        if nd.affiliated:
            self._start_keepalive(i)

    def _session_timeout(self, i):
        nd = self.nodes[i]
        nd.session_timer = None
        if not nd.session:
            return
        count = self.neighbor_count(nd)
        if nd.role == MONITOR:
            if count >= self.T:
                self.end_session(i)
            elif nd.session_tries < self.cfg.hello_max_retries:
                nd.session_tries += 1
                self._send_hello(i)
            else:
                self.end_session(i)
                if count < self.cfg.demote_threshold:
                    self.demote(i)
            return
        if nd.monitor is not None:
            self.end_session(i)
        elif self.find_proxy(nd) is not None:
            # no monitor in range, but a neighbor's monitor can cover us
            self.end_session(i)
            self.join_via_relay(i)
        elif nd.session_tries < self.cfg.hello_max_retries:
            nd.session_tries += 1
            self._send_hello(i)
        else:
            self.end_session(i)

    def on_Hello(self, r, pkt, s):
        nd = self.nodes[r]
        if not nd.up:
            return
        self.hear(r, s, pkt)
        last = nd.hello_heard.get(s)
        nd.hello_heard[s] = self.now
        if last is not None and self.now - last < self.hello_dedup:
            return
        aff, is_mon = pkt.info["hdr"][:2]
        if is_mon and self.wants_monitor(nd):
            self.affiliate(r, s)
        self.send(r, s, self.packet("HelloReply", r, s))
        if nd.role == MONITOR and not is_mon and aff is None:
            # affiliation offer to the newcomer
            self.send(r, s, self.packet("NewMonitor", r, s, info={"offer": True}))
        elif self.wants_monitor(nd):
            self._schedule_election_check(r)

    def on_HelloReply(self, r, pkt, s):
        nd = self.nodes[r]
        if not nd.up:
            return
        self.hear(r, s, pkt)
        is_mon = pkt.info["hdr"][1]
        if pkt.dst != r:
            return
        if is_mon and self.wants_monitor(nd):
            self.affiliate(r, s)
        elif self.wants_monitor(nd):
            self._schedule_election_check(r)

    def wants_monitor(self, nd):
        """Unaffiliated, or only reaching its monitor through a relay."""
        return nd.role == ORDINARY and (nd.monitor is None or bool(nd.relay))

    def _schedule_election_check(self, i):
        nd = self.nodes[i]
        if not nd.check_pending:
            # evaluate after every packet of the current burst has been processed
            nd.check_pending = True
            # random backoff: a neighbor's NewMonitor can arrive before we decide
            wait = self.jitter(0.0, self.cfg.election_backoff)
            self.kernel.schedule_in(wait, self._election_check, i, kind="ambr:elect-check")

    def _election_check(self, i):
        self.nodes[i].check_pending = False
        self.try_elect_monitor(i)

    # ------------------------------------------------------------ election

    def try_elect_monitor(self, i):
        nd = self.nodes[i]
        if not nd.up or not self.wants_monitor(nd):
            return False
        count = self.neighbor_count(nd)
        if count < self.T:
            return False
        self.check(count >= self.T, f"node {i} elected with {count} < T neighbors")
        self.elections.append((self.now, i, count))
        nd.role = MONITOR
        nd.monitor = None
        nd.elected_at = self.now
        self.end_session(i)
        _cancel(nd.keepalive_timer)
        _cancel(nd.alive_wait)
        nd.keepalive_timer = nd.alive_wait = None
        nd.relay = ()
        nd.members = {}
        nd.relayed = {}
        self.log(i, "NewMonitor", "elect")
        self.broadcast(i, self.packet("NewMonitor", i, None,
                                      info={"hdr": self.hdr(nd), "elected": self.now}))
        phase = self.cfg.alive_period * self.jitter(0.9, 1.1)
        nd.prune_timer = self.kernel.schedule_in(phase, self._prune_tick, i, kind="ambr:prune")
        self._check_role(nd)
        self.flush_queue(i)
        return True

    def on_NewMonitor(self, r, pkt, s):
        nd = self.nodes[r]
        if not nd.up:
            return
        self.hear(r, s, pkt)
        if self.wants_monitor(nd):
            self.affiliate(r, s)
        elif nd.role == MONITOR and self.lost_race(nd, s, pkt.info.get("elected")):
            self.demote(r)
            self.affiliate(r, s)

    def lost_race(self, nd, s, elected):
        """Elected just after neighbor ``s`` announced itself: step down."""
        if elected is None or nd.elected_at is None:
            return False
        if (elected, s) >= (nd.elected_at, nd.id):
            return False
        return nd.elected_at - elected <= self.cfg.hello_retry

    def affiliate(self, i, m):
        nd = self.nodes[i]
        if nd.monitor is not None:
            self._leave(nd)
        nd.monitor = m
        nd.last_exchange = self.now
        self.log(i, "NewMonitor", "affiliate")
        self.end_session(i)
        # acceptance goes to the monitor as a broadcast so neighbors learn the affiliation
        self.broadcast(i, self.packet("HelloReply", i, m, info={"hdr": self.hdr(nd)}))
        self._start_keepalive(i)
        self._check_role(nd)
        self.flush_queue(i)

    def lose_monitor(self, i):
        nd = self.nodes[i]
        m = nd.monitor
        if m is None:
            return
        if not nd.relay:
            nd.known_monitors.pop(m, None)
        self._leave(nd)
        self.log(i, "-", "lose-monitor")
        self.start_session(i)

    def _leave(self, nd):
        nd.monitor = None
        nd.relay = ()
        _cancel(nd.keepalive_timer)
        _cancel(nd.alive_wait)
        nd.keepalive_timer = nd.alive_wait = None

    def join_via_relay(self, i):
        """Uncovered node: join the monitor of an affiliated neighbor through it."""
        nd = self.nodes[i]
        if nd.role != ORDINARY or nd.monitor is not None:
            return False
        proxy = self.find_proxy(nd)
        if proxy is None:
            return False
        nd.monitor = proxy[-1]
        nd.relay = tuple(proxy[:-1])
        self.log(i, "-", "relay-join")
        self._check_role(nd)
        self._start_keepalive(i)
        self._alive_request(i)
        self.flush_queue(i)
        return True

    def monitor_path(self, nd):
        """Path from an affiliated node to its monitor."""
        return [nd.id, *nd.relay, nd.monitor]

    def demote(self, i):
        nd = self.nodes[i]
        self.demotions.append((self.now, i))
        self.log(i, "-", "demote")
        nd.role = ORDINARY
        nd.elected_at = None
        nd.members = {}
        nd.relayed = {}
        _cancel(nd.prune_timer)
        nd.prune_timer = None
        for q in nd.queries.values():
            _cancel(q.timer)
        nd.queries = {}
        for pkts in nd.pending.values():
            for p in pkts:
                self.drop(i, p, "demoted")
        nd.pending = {}
        self._check_role(nd)

    # ------------------------------------------------------------ liveness

    def _start_keepalive(self, i):
        nd = self.nodes[i]
        if nd.keepalive_timer is None:
            nd.keepalive_timer = self.kernel.schedule_in(
                self.cfg.alive_period, self.keepalive_tick, i, kind="ambr:alive")

    def keepalive_tick(self, i):
        """Periodic member-side liveness check; returns True if a request went out."""
        nd = self.nodes[i]
        nd.keepalive_timer = None
        if not nd.affiliated:
            return False
        nd.keepalive_timer = self.kernel.schedule_in(
            self.cfg.alive_period, self.keepalive_tick, i, kind="ambr:alive")
        if nd.session:
            return False
        if not nd.relay and self.now - nd.last_exchange < self.cfg.piggyback:
            return False
        if nd.alive_wait is not None:
            return False
        return self._alive_request(i)

    def _alive_request(self, i):
        nd = self.nodes[i]
        path = self.monitor_path(nd)
        req = self.packet("MonitorAliveRequest", i, nd.monitor, path=path)
        self.send(i, path[1], req)
        wait = 2.0 * (len(path) - 1) * self.radio.ack_timeout(req)
        _cancel(nd.alive_wait)
        nd.alive_wait = self.kernel.schedule_in(wait, self._alive_timeout, i, nd.monitor,
                                                kind="ambr:alive-wait")
        return True

    def _alive_timeout(self, i, m):
        nd = self.nodes[i]
        nd.alive_wait = None
        if nd.monitor == m:
            self.lose_monitor(i)

    def on_MonitorAliveRequest(self, r, pkt, s):
        nd = self.nodes[r]
        self.hear(r, s, pkt)
        pkt.idx += 1
        if pkt.idx < len(pkt.path) - 1:
            self._relay(r, pkt)
            return
        if nd.role != MONITOR:
            return
        member = pkt.src
        nd.members[member] = self.now
        if len(pkt.path) > 2:
            nd.relayed[member] = tuple(pkt.path[1:-1])
        else:
            nd.relayed.pop(member, None)
        back = list(reversed(pkt.path))
        self.send(r, back[1], self.packet("MonitorAliveReply", r, member, path=back))

    def on_MonitorAliveReply(self, r, pkt, s):
        nd = self.nodes[r]
        self.hear(r, s, pkt)
        pkt.idx += 1
        if pkt.idx < len(pkt.path) - 1:
            self._relay(r, pkt)
            return
        if nd.monitor == pkt.src:
            _cancel(nd.alive_wait)
            nd.alive_wait = None

    def _prune_tick(self, i):
        nd = self.nodes[i]
        nd.prune_timer = None
        if nd.role != MONITOR:
            return
        nd.prune_timer = self.kernel.schedule_in(self.cfg.alive_period, self._prune_tick, i,
                                                 kind="ambr:prune")
        self.monitor_prune(i)

    def monitor_prune(self, i):
        """Drop silent members; re-hello if connectivity fell below ``T``."""
        nd = self.nodes[i]
        if nd.role != MONITOR:
            return []
        removed = [m for m, t in nd.members.items() if self.now - t > self.member_timeout]
        for m in removed:
            del nd.members[m]
            if nd.relayed.pop(m, None) is None:
                nd.neighbors.pop(m, None)
            self.log(i, "-", f"remove-member:{m}")
        limit = self.now - self.neighbor_lifetime
        for v in [v for v, t in nd.neighbors.items() if t < limit]:
            del nd.neighbors[v]
        if removed and self.neighbor_count(nd) < self.T and not nd.session:
            self.start_session(i)
        return removed

    # ---------------------------------------------------------------- data

    def send_data(self, src, pkt):
        return self.route_from_source(src, pkt)

    def route_from_source(self, s, pkt):
        """Choose the forwarding case at the source; returns its name."""
        nd = self.nodes[s]
        d = pkt.dst
        pkt.path = [s]
        pkt.idx = 0
        if not nd.up:
            self.enqueue(s, pkt)
            return "queued"
        if self.is_neighbor(nd, d):
            pkt.path.append(d)
            self.forward(s, pkt)
            return "direct"
        entry = self.cache_lookup(nd, d)
        if entry is not None:
            pkt.path = list(entry.path)
            self.forward(s, pkt)
            return "source-cache"
        if nd.role == MONITOR:
            return self.monitor_handle(s, pkt)
        if nd.monitor is not None:
            pkt.path.extend(self.monitor_path(nd)[1:])
            self.forward(s, pkt)
            return "to-monitor"
        proxy = self.find_proxy(nd)
        if proxy is not None:
            pkt.path.extend(proxy)
            self.forward(s, pkt)
            return "proxy"
        self.enqueue(s, pkt)
        return "queued"

    def enqueue(self, i, pkt):
        nd = self.nodes[i]
        nd.src_queue.append(pkt)
        self.kernel.schedule_in(self.cfg.queue_timeout, self._queue_expire, i, pkt,
                                kind="ambr:queue")
        if nd.up and not nd.session and self.now - nd.session_ended >= self.hello_backoff:
            self.start_session(i)

    def _queue_expire(self, i, pkt):
        q = self.nodes[i].src_queue
        for k, p in enumerate(q):
            if p is pkt:
                del q[k]
                self.drop(i, pkt, "queue-timeout")
                return

    def flush_queue(self, i):
        nd = self.nodes[i]
        queued, nd.src_queue = nd.src_queue, []
        for pkt in queued:
            if pkt.src == i and pkt.idx == 0:
                self.route_from_source(i, pkt)
            else:
                self.recover_at(i, pkt)

    def forward(self, i, pkt):
        nd = self.nodes[i]
        nxt = pkt.path[pkt.idx + 1]
        if pkt.hops >= self.cfg.max_hops:
            self.drop(i, pkt, "hop-limit")
            return
        if self.link_broken(nd, nxt):
            self.on_route_break(i, pkt, nxt)
            return
        if nd.role == ORDINARY and nxt == nd.monitor:
            nd.last_exchange = self.now
        self.send(i, nxt, pkt)

    def on_Data(self, r, pkt, s):
        nd = self.nodes[r]
        self.hear(r, s, pkt)
        pkt.idx += 1
        pkt.hops += 1
        self.check(pkt.path[pkt.idx] == r, f"data packet {pkt.uid} off its path at {r}")
        if nd.role == ORDINARY and s == nd.monitor:
            nd.last_exchange = self.now
        if r == pkt.dst:
            self.deliver(r, pkt)
            return
        if not nd.up:
            self.drop(r, pkt, "node-down")
            return
        if pkt.idx == len(pkt.path) - 1:
            if nd.role == MONITOR:
                self.monitor_handle(r, pkt)
            else:
                self.recover_at(r, pkt)
            return
        self.forward(r, pkt)

    def recover_at(self, h, pkt):
        """An ordinary holder without a usable path hands the packet to a monitor."""
        nd = self.nodes[h]
        pkt.path = pkt.path[:pkt.idx + 1]
        if nd.role == MONITOR:
            self.monitor_handle(h, pkt)
            return
        target = nd.monitor
        if target is not None and target == pkt.src and pkt.info.get("repair") is not None:
            # prefer a monitor other than the source for a downstream repair
            for m, t in sorted(nd.known_monitors.items()):
                if m != pkt.src and self.is_neighbor(nd, m):
                    target = m
                    break
        if target is not None:
            pkt.path.extend(self.monitor_path(nd)[1:] if target == nd.monitor else [target])
            self.forward(h, pkt)
            return
        proxy = self.find_proxy(nd)
        if proxy is not None:
            pkt.path.extend(proxy)
            self.forward(h, pkt)
            return
        self.enqueue(h, pkt)

    def monitor_handle(self, m, pkt):
        nd = self.nodes[m]
        d = pkt.dst
        pkt.path = pkt.path[:pkt.idx + 1]
        if d == m:
            self.deliver(m, pkt)
            return "delivered"
        if self.is_neighbor(nd, d):
            pkt.path.append(d)
            self.forward(m, pkt)
            return "monitor-direct"
        via = self.relayed_via(nd, d)
        if via is not None:
            pkt.path.extend((*via, d))
            self.forward(m, pkt)
            return "monitor-direct"
        entry = self.cache_lookup(nd, d)
        if entry is not None:
            pkt.path.extend(entry.path[1:])
            self.forward(m, pkt)
            return "monitor-cache"
        if self.now < nd.unreachable_until.get(d, NEVER):
            self.drop(m, pkt, "unreachable")
            return "unreachable"
        nd.pending.setdefault(d, []).append(pkt)
        if d not in nd.queries:
            self.route_finder(m, d, pkt)
        return "query"

    def relayed_via(self, nd, d):
        """Gateways (monitor side first) to a live relayed member ``d``, if any."""
        gws = nd.relayed.get(d)
        if gws is None or not self.is_neighbor(nd, gws[-1]):
            return None
        if self.now - nd.members.get(d, NEVER) > self.member_timeout:
            return None
        return gws[::-1]

    def on_route_break(self, h, pkt, nxt):
        """Next hop ``nxt`` did not acknowledge ``pkt``: repair from ``h``."""
        nd = self.nodes[h]
        nd.neighbors.pop(nxt, None)
        nd.broken[nxt] = self.now
        self.invalidate_link(nd, nxt)
        if nd.role == MONITOR:
            nd.members.pop(nxt, None)
            nd.relayed.pop(nxt, None)
        elif nxt == nd.monitor or nd.relay[:1] == (nxt,):
            self.lose_monitor(h)
        reps = pkt.info.get("repairs", 0) + 1
        pkt.info["repairs"] = reps
        if reps > MAX_REPAIRS:
            self.drop(h, pkt, "repair-limit")
            return
        self.repair_log.append((self.now, h, pkt.uid))
        self.log(h, "Data", "repair")
        rest = pkt.path[pkt.idx + 2:]
        for k in range(len(rest) - 1, -1, -1):
            if self.is_neighbor(nd, rest[k]):
                # skip the lost hop: a later node on the path is still in range
                pkt.path = pkt.path[:pkt.idx + 1] + rest[k:]
                self.forward(h, pkt)
                return
        pkt.path = pkt.path[:pkt.idx + 1]
        if h == pkt.src:
            # a first-hop break is the source's own business, not a repair
            pkt.info.pop("repair", None)
            self.route_from_source(h, pkt)
            return
        pkt.info["repair"] = h
        if nd.role == MONITOR:
            self.monitor_handle(h, pkt)
        else:
            self.recover_at(h, pkt)

    # -------------------------------------------------------- route finder

    def route_finder(self, origin, dst, trigger=None):
        """Start a depth-bounded monitor query for ``dst`` at monitor ``origin``."""
        nd = self.nodes[origin]
        nd.qseq += 1
        q = RouteQueryState((origin, nd.qseq), dst, self.now)
        if trigger is not None:
            q.source = trigger.src
            q.repair_holder = trigger.info.get("repair")
            if q.repair_holder is not None:
                holder = self.nodes[q.repair_holder]
                self.check(
                    origin != trigger.src or holder.monitor == origin,
                    f"repair of packet {trigger.uid} re-queried from its source {origin}",
                )
        nd.queries[dst] = q
        self.query_log.append(q)
        self.log(origin, "RouteQuery", "route-finder")
        if self.cfg.dl_max == 0:
            self._query_failed(origin, q)
            return q
        targets = self.adjacent_monitors(nd)
        covered = (origin, *(m for m, _ in targets))
        for m, gws in targets:
            path = [origin, *gws, m]
            self._send_query(origin, path, q.query_id, dst, (origin,), 1, covered)
        q.timer = self.kernel.schedule_in(self.cfg.query_timeout, self._query_expired,
                                          origin, dst, q.query_id, kind="ambr:query-timer")
        return q

    def _send_query(self, i, path, qid, dst, visited, depth, covered):
        pkt = self.packet("RouteQuery", qid[0], dst, path=list(path),
                          info={"qid": qid, "visited": visited, "depth": depth,
                                "covered": covered})
        pkt.idx = path.index(i)
        self.send(i, path[pkt.idx + 1], pkt)

    def _relay(self, r, pkt):
        nxt = pkt.path[pkt.idx + 1]
        if self.link_broken(self.nodes[r], nxt):
            self.drop(r, pkt, "relay-broken")
            return
        self.send(r, nxt, pkt)

    def on_RouteQuery(self, r, pkt, s):
        self.hear(r, s, pkt)
        pkt.idx += 1
        if pkt.idx < len(pkt.path) - 1:
            self._relay(r, pkt)
            return
        nd = self.nodes[r]
        info = pkt.info
        qid = info["qid"]
        if nd.role != MONITOR or qid in nd.seen_queries or qid[0] == r:
            return
        nd.seen_queries.add(qid)
        visited, depth, dst = info["visited"], info["depth"], pkt.dst
        self.query_hops.append((qid, r, depth, visited))
        self.check(r not in visited, f"monitor {r} visited twice by query {qid}")
        self.check(depth <= self.cfg.dl_max, f"query {qid} copy at depth {depth} > DL_max")
        via = None if dst == r or self.is_neighbor(nd, dst) else self.relayed_via(nd, dst)
        cached = None
        if dst != r and not self.is_neighbor(nd, dst) and via is None:
            e = self.cache_lookup(nd, dst)
            if e is not None and not set(e.path[1:]).intersection(pkt.path):
                cached = list(e.path[1:])
        if dst == r or self.is_neighbor(nd, dst) or via is not None or cached:
            if cached:
                route = list(pkt.path) + cached
            else:
                route = list(pkt.path) + ([] if dst == r else [dst] if via is None else [*via, dst])
            back = list(reversed(pkt.path))
            reply = self.packet("RouteReply", r, qid[0], path=back,
                                info={"qid": qid, "route": route, "target": dst})
            self.send(r, back[1], reply)
            return
        if depth + 1 > self.cfg.dl_max:
            back = list(reversed(pkt.path))
            du = self.packet("DestinationUnreachable", r, qid[0], path=back,
                             info={"qid": qid, "target": dst})
            self.send(r, back[1], du)
            return
        # monitors the previous hop already queried get their own copy
        seen = set(visited) | {r} | set(pkt.path) | set(info["covered"])
        nvisited = visited + (r,)
        targets = [(m, gws) for m, gws in self.adjacent_monitors(nd)
                   if m not in seen and not seen.intersection(gws)]
        covered = tuple(sorted(seen.union(m for m, _ in targets)))
        for m, gws in targets:
            path = [*pkt.path, *gws, m]
            self._send_query(r, path, qid, dst, nvisited, depth + 1, covered)

    def on_RouteReply(self, r, pkt, s):
        self.hear(r, s, pkt)
        pkt.idx += 1
        nd = self.nodes[r]
        info = pkt.info
        if pkt.idx < len(pkt.path) - 1:
            route = info["route"]
            if nd.role == MONITOR and r in route and not info.get("to_source"):
                # relaying monitors keep the suffix for later queries
                suffix = tuple(loop_free(route[route.index(r):]))
                nd.cache[info["target"]] = RouteCacheEntry(info["target"], suffix, self.now)
            self._relay(r, pkt)
            return
        dst = info["target"]
        if info.get("to_source"):
            route = tuple(loop_free(info["route"]))
            nd.cache[dst] = RouteCacheEntry(dst, route, self.now)
            return
        qid = info["qid"]
        q = nd.queries.get(dst)
        if q is None or q.query_id != qid or q.resolved:
            first = self.first_replies.get(qid)
            self.check(first is None or first[0] <= self.now,
                       f"late reply for {qid} arrived before the accepted one")
            self.log(r, "RouteReply", "discard")
            return
        q.resolved = True
        _cancel(q.timer)
        del nd.queries[dst]
        route = loop_free(info["route"])
        self.first_replies[qid] = (self.now, tuple(route))
        nd.cache[dst] = RouteCacheEntry(dst, tuple(route), self.now)
        notified = set()
        for p in nd.pending.pop(dst, []):
            src = p.src
            if p.info.get("repair") is None and src != r and src not in notified and p.path[0] == src:
                notified.add(src)
                back = list(reversed(p.path[:p.idx + 1]))
                full = loop_free(p.path[:p.idx + 1] + route[1:])
                note = self.packet("RouteReply", r, src, path=back,
                                   info={"qid": qid, "route": full, "target": dst,
                                         "to_source": True})
                self.send(r, back[1], note)
            p.path = p.path[:p.idx + 1] + route[1:]
            self.forward(r, p)

    def on_DestinationUnreachable(self, r, pkt, s):
        self.hear(r, s, pkt)
        pkt.idx += 1
        if pkt.idx < len(pkt.path) - 1:
            self._relay(r, pkt)
            return
        nd = self.nodes[r]
        dst = pkt.info["target"]
        if pkt.info.get("to_source"):
            e = nd.cache.pop(dst, None)
            if e is not None:
                e.alive = False
            self.log(r, "DestinationUnreachable", "informed")
            return
        q = nd.queries.get(dst)
        if q is not None and q.query_id == pkt.info["qid"] and not q.resolved:
            self._inform_sources(r, q)

    def _inform_sources(self, origin, q):
        nd = self.nodes[origin]
        for p in nd.pending.get(q.destination, []):
            src = p.src
            if src == origin or src in q.informed:
                continue
            q.informed.add(src)
            back = list(reversed(p.path[:p.idx + 1]))
            if len(back) < 2 or back[-1] != src:
                continue
            du = self.packet("DestinationUnreachable", origin, src, path=back,
                             info={"qid": q.query_id, "target": q.destination,
                                   "to_source": True})
            self.send(origin, back[1], du)

    def _query_expired(self, origin, dst, qid):
        q = self.nodes[origin].queries.get(dst)
        if q is None or q.query_id != qid or q.resolved:
            return
        self._query_failed(origin, q)

    def _query_failed(self, origin, q):
        nd = self.nodes[origin]
        _cancel(q.timer)
        nd.queries.pop(q.destination, None)
        self._inform_sources(origin, q)
        for p in nd.pending.pop(q.destination, []):
            self.drop(origin, p, "unreachable")
        nd.unreachable_until[q.destination] = self.now + self.cfg.unreachable_holddown
        self.log(origin, "DestinationUnreachable", "query-failed")

    # ------------------------------------------------------- link failures

    def unicast_failed(self, i, target, pkt):
        nd = self.nodes[i]
        nd.neighbors.pop(target, None)
        nd.broken[target] = self.now
        kind = pkt.kind
        if kind == "Data":
            self.on_route_break(i, pkt, target)
            return
        self.drop(i, pkt, "link-fail")
        if kind == "MonitorAliveReply" and nd.role == MONITOR:
            nd.members.pop(target, None)
            nd.relayed.pop(target, None)
        elif nd.role == ORDINARY and nd.monitor is not None and (target == nd.monitor or nd.relay[:1] == (target,)):
            self.lose_monitor(i)

    # ---------------------------------------------------------- invariants

    def _check_role(self, nd):
        if nd.role == MONITOR:
            self.check(nd.monitor is None, f"monitor {nd.id} is affiliated to {nd.monitor}")
        else:
            self.check(nd.role == ORDINARY, f"node {nd.id} has unknown role {nd.role!r}")
            self.check(not (nd.monitor is not None and nd.session),
                       f"node {nd.id} is affiliated and in a hello session")
            self.check(not nd.members, f"ordinary node {nd.id} holds members")

    def _sweep(self, reschedule=True):
        for nd in self.nodes:
            self._check_role(nd)
            for e in nd.cache.values():
                self.check(len(set(e.path)) == len(e.path),
                           f"cached path {e.path} at {nd.id} repeats a node")
        if reschedule:
            self.kernel.schedule_in(1.0, self._sweep, kind="ambr:check")

    # -------------------------------------------------------------- views

    def roles(self):
        return [nd.role for nd in self.nodes]

    def monitors(self):
        return [nd.id for nd in self.nodes if nd.role == MONITOR]
