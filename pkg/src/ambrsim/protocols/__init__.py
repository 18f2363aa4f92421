"""Routing protocols selectable by name."""

from .ambr import Ambr
from .base import InvariantViolation, Protocol
from .flood import FloodReactive, FloodReactiveLocalRepair
from .proactive import Proactive

REGISTRY = {
    "ambr": Ambr,
    "flood-reactive": FloodReactive,
    "flood-reactive-lr": FloodReactiveLocalRepair,
    "proactive": Proactive,
}


def make_protocol(name, sim):
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(REGISTRY)}") from None
    return cls(sim)


__all__ = [
    "Ambr",
    "FloodReactive",
    "FloodReactiveLocalRepair",
    "InvariantViolation",
    "Proactive",
    "Protocol",
    "REGISTRY",
    "make_protocol",
]
