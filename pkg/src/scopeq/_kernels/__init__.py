"""Kernel backend selection.

Imports the compiled Cython extension when available and falls back to the
numpy implementation otherwise. ``SCOPEQ_BACKEND`` forces the choice:
``python`` always uses the fallback, ``compiled`` makes a missing extension
an import error, anything else (or unset / ``auto``) picks automatically.

``BACKEND`` names the implementation in use; both expose the same API.
"""

import os

from . import pyfallback

_requested = os.environ.get("SCOPEQ_BACKEND", "auto").lower() or "auto"

if _requested == "python":
    _impl = pyfallback
    BACKEND = "python"
elif _requested == "compiled":
    from . import _core as _impl  # type: ignore[no-redef]

    BACKEND = "compiled"
elif _requested == "auto":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = pyfallback
        BACKEND = "python"
else:
    raise ValueError(
        f"SCOPEQ_BACKEND={_requested!r} not recognized; "
        "use 'auto', 'python', or 'compiled'"
    )

soft_assign_batch = _impl.soft_assign_batch
lloyd_iteration = _impl.lloyd_iteration
nt_xent_loss_grad = _impl.nt_xent_loss_grad

__all__ = ["BACKEND", "soft_assign_batch", "lloyd_iteration", "nt_xent_loss_grad"]
