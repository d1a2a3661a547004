"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set STEINQD_BACKEND=python to force the fallback (e.g. for benchmarking);
STEINQD_BACKEND=compiled fails loudly if the extension is missing.
"""

import os

from . import py_backend

try:
    from . import _fastcore as _compiled
except ImportError:  # extension not built
    _compiled = None

_requested = os.environ.get("STEINQD_BACKEND", "")

if _requested == "python":
    impl = py_backend
elif _requested == "compiled":
    if _compiled is None:
        raise ImportError("compiled backend requested but steinqd.nn.backend._fastcore is not built")
    impl = _compiled
elif _requested == "":
    impl = _compiled if _compiled is not None else py_backend
else:
    raise ImportError(f"unknown STEINQD_BACKEND value: {_requested!r}")

BACKEND_NAME = impl.NAME

HEAD_IDENTITY = py_backend.HEAD_IDENTITY
HEAD_EXP = py_backend.HEAD_EXP
HEAD_SOFTMAX = py_backend.HEAD_SOFTMAX
EXP_CLAMP = py_backend.EXP_CLAMP


def available_backends():
    out = {"python": py_backend}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
