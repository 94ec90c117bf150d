"""Selects the compiled trajectory kernels, falling back to pure Python.

Set ``ADADFO_FORCE_PURE=1`` to force the pure-Python implementation even
when the compiled extension is available (used by the kernel benchmark and
the equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py as pure

if os.environ.get("ADADFO_FORCE_PURE") == "1":
    impl = pure
else:
    try:
        from . import _kernels as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pure

IS_COMPILED: bool = impl.IS_COMPILED
kwsa_trajectory = impl.kwsa_trajectory
spsa_trajectory = impl.spsa_trajectory
