"""Backend selection for the numeric hot paths.

The compiled extension ``nlbi._kernels`` is used when it imports; otherwise
the pure-Python module ``nlbi._pykernels`` is used. ``set_backend`` switches
at runtime (the benchmark and the backend-agreement tests rely on it).
"""

import logging

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on build
    _compiled = None
    log.debug("compiled kernels unavailable, using pure-Python fallback")

_NAMES = (
    "normal_area",
    "line_ends",
    "emd_normal",
    "sub_interval",
    "emd_lb",
    "emd_lb_many",
    "emd_br",
    "cdf_l1",
    "error_extrema",
)

BACKEND = None


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]


def set_backend(name):
    """Select ``"compiled"`` or ``"python"`` kernels for the whole package."""
    global BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        mod = _compiled
    elif name == "python":
        mod = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name


def get_backend():
    return BACKEND


set_backend("compiled" if _compiled is not None else "python")
