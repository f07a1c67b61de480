"""Fault injection hooks used to self-test the validation harness.

Production code paths consult :func:`enabled` at a handful of points; nothing
is active unless a caller enters :func:`inject`.
"""

from contextlib import contextmanager
from contextvars import ContextVar

KNOWN_FAULTS = frozenset({"kernel-sign", "gamma-sign"})

_active: ContextVar[frozenset] = ContextVar("kummerbs_faults", default=frozenset())


def enabled(name):
    return name in _active.get()


@contextmanager
def inject(*names):
    unknown = set(names) - KNOWN_FAULTS
    if unknown:
        raise ValueError(f"unknown fault(s): {sorted(unknown)}")
    token = _active.set(_active.get() | frozenset(names))
    try:
        yield
    finally:
        _active.reset(token)
