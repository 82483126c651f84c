"""Hot-kernel backend selection.

Two interchangeable implementations of the per-step right-hand sides:

* ``_fastpath`` — Cython + BLAS (zgemm), built at install time when a
  compiler is available;
* ``_slowpath`` — pure numpy, always available.

The compiled path is preferred when importable. Set the environment
variable ``DECOSIEVE_BACKEND`` to ``python`` or ``native`` to force one;
asking for ``native`` when the extension is missing is an error rather
than a silent downgrade. The active choice is exposed as ``BACKEND`` and
recorded in run manifests, because results are guaranteed bit-for-bit
reproducible only per backend (BLAS and numpy may order floating-point
reductions differently).
"""

import os

from . import _slowpath

_requested = os.environ.get("DECOSIEVE_BACKEND", "").strip().lower()

if _requested not in ("", "python", "native"):
    raise ImportError(
        f"DECOSIEVE_BACKEND={_requested!r}: expected 'python' or 'native'"
    )

if _requested == "python":
    _impl = _slowpath
else:
    try:
        from . import _fastpath as _impl
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "DECOSIEVE_BACKEND=native but the compiled backend is not "
                "installed (build skipped or failed)"
            )
        _impl = _slowpath

BACKEND = _impl.NAME
channel_rhs = _impl.channel_rhs
qbm_rhs = _impl.qbm_rhs


def available_backends():
    out = ["python"]
    try:
        from . import _fastpath  # noqa: F401
        out.append("native")
    except ImportError:
        pass
    return out


def get_impl(name):
    """Fetch a specific implementation module (for benchmarks/tests)."""
    if name == "python":
        return _slowpath
    if name == "native":
        from . import _fastpath
        return _fastpath
    raise ValueError(f"unknown backend {name!r}")
