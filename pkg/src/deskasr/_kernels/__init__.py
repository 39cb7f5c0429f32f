"""CTC kernel backend selection.

The compiled extension (Cython) is preferred when it imported cleanly;
the pure-numpy twin is the fallback and the reference. Set
``DESKASR_PURE=1`` to force the pure backend (also used by the
benchmark and the parity tests).
"""

import os

from . import _ctc_py as pure

if os.environ.get("DESKASR_PURE", "") == "1":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _ctc_ext as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

ctc_required_frames = pure.ctc_required_frames
ctc_forward_backward = _impl.ctc_forward_backward
ctc_prefix_initial = _impl.ctc_prefix_initial
ctc_prefix_extend = _impl.ctc_prefix_extend
