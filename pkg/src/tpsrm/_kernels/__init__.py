"""Hot-loop backend selection.

The compiled extension is used when it imports; set ``TPSRM_PURE_PYTHON=1``
to force the reference implementation.
"""

import os

from . import _pure
from ._pure import (MODE_DEMAGNETIZE, MODE_IDLE, MODE_MAGNETIZE, STATUS_OK,  # noqa: F401
                    STATUS_OVERCURRENT)

_impl = _pure
BACKEND = "python"
if not os.environ.get("TPSRM_PURE_PYTHON"):
    try:
        from . import _ccore as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _pure

newton_element_terms = _impl.newton_element_terms
chc_simulate = _impl.chc_simulate


def backends():
    """Available implementations by name."""
    out = {"python": _pure}
    try:
        from . import _ccore
        out["cython"] = _ccore
    except ImportError:
        pass
    return out
