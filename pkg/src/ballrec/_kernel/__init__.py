"""Simulation kernels: compiled extension with a pure-Python fallback.

The compiled core (``ballrec._kernel._core``) and the pure fallback consume
the RNG stream in exactly the same order and do float arithmetic in the same
order, so they produce bit-identical results; only speed differs. Set
``BALLREC_PURE=1`` to force the fallback.
"""

import os

from . import pure

BACKEND = "pure"
_impl = pure

if not os.environ.get("BALLREC_PURE"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

throw_balls = _impl.throw_balls
run_game = _impl.run_game
run_btree = _impl.run_btree
