"""Backend dispatch for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
implementation is selected. :func:`use_backend` switches at runtime, which the
tests and the benchmark use to compare the two.
"""
from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["native"] = _ckernels

_active = _ckernels if _ckernels is not None else _pykernels


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "native" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    _active = _BACKENDS[name]


@contextmanager
def use_backend(name):
    previous = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def iou_matrix(a, b):
    return _active.iou_matrix(a, b)


def giou_matrix(a, b):
    return _active.giou_matrix(a, b)


def nms_ordered(boxes, categories, order, iou_threshold):
    return _active.nms_ordered(boxes, categories, order, float(iou_threshold))


def lsa_square(cost):
    return _active.lsa_square(cost)


def claim_matches(iou, iou_threshold):
    return _active.claim_matches(iou, float(iou_threshold))
