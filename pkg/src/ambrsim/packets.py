"""Packet kinds, their sizes and the control/data classification table."""

from __future__ import annotations

CONTROL = "control"
DATA = "data"

# kind -> (class, size in bytes); data size comes from the config
KINDS = {
    # AMBR
    "Hello": (CONTROL, 32),
    "HelloReply": (CONTROL, 32),
    "NewMonitor": (CONTROL, 32),
    "MonitorAliveRequest": (CONTROL, 32),
    "MonitorAliveReply": (CONTROL, 32),
    "RouteQuery": (CONTROL, 64),
    "RouteReply": (CONTROL, 64),
    "DestinationUnreachable": (CONTROL, 32),
    # flood-reactive
    "RREQ": (CONTROL, 64),
    "RREP": (CONTROL, 64),
    "RERR": (CONTROL, 32),
    # proactive
    "TableUpdate": (CONTROL, 32),
    # all protocols
    "Data": (DATA, None),
}

TABLE_ENTRY_BYTES = 8


def classify(kind):
    try:
        return KINDS[kind][0]
    except KeyError:
        raise KeyError(f"unknown packet kind {kind!r}") from None


class Packet:
    """A message on the air.

    ``src``/``dst`` are the end-to-end endpoints. ``path`` is an explicit node
    list and ``idx`` the position of the current holder in it. Everything
    kind-specific lives in ``info``. Broadcast packets are shared between
    receivers and must be treated as read-only.
    """

    __slots__ = ("kind", "size", "src", "dst", "uid", "path", "idx", "hops",
                 "created", "info")

    def __init__(self, kind, src, dst, uid, size=None, path=None, created=0.0, info=None):
        if kind not in KINDS:
            raise KeyError(f"unknown packet kind {kind!r}")
        self.kind = kind
        self.size = KINDS[kind][1] if size is None else size
        self.src = src
        self.dst = dst
        self.uid = uid
        self.path = path
        self.idx = 0
        self.hops = 0
        self.created = created
        self.info = info if info is not None else {}

    @property
    def is_control(self):
        return KINDS[self.kind][0] == CONTROL

    def __repr__(self):
        return f"Packet({self.kind}, {self.src}->{self.dst}, uid={self.uid}, path={self.path})"
