"""Selects the physics substep kernel backend at import time.

The compiled Cython kernel (multigait._speedups) is used when the
extension was built; otherwise the pure-Python reference
(multigait._substeps_py) takes over with identical numerics.  Set
MULTIGAIT_PURE=1 to force the pure backend (used by the parity tests and
the benchmark).
"""

from __future__ import annotations

import os

from . import _substeps_py

if os.environ.get("MULTIGAIT_PURE") == "1":
    _impl = _substeps_py
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _substeps_py

BACKEND: str = _impl.BACKEND
run_substeps = _impl.run_substeps
torque_step = _impl.torque_step


def backends() -> dict[str, object]:
    """All importable kernel backends, keyed by name."""
    found = {_substeps_py.BACKEND: _substeps_py}
    try:
        from . import _speedups
        found[_speedups.BACKEND] = _speedups
    except ImportError:
        pass
    return found
