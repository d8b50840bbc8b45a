"""Numeric kernel backend selection.

The compiled extension is preferred when present; the numpy fallback is
used otherwise.  Set ASNMKIT_KERNELS=py to force the fallback or
ASNMKIT_KERNELS=c to require the extension (ImportError if missing).
"""

import os

from . import pure

_choice = os.environ.get("ASNMKIT_KERNELS", "auto").lower()

backend = "py"
if _choice in ("auto", "c"):
    try:
        from . import _speedups as _impl

        backend = "c"
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "ASNMKIT_KERNELS=c but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
        _impl = pure
elif _choice == "py":
    _impl = pure
else:
    raise ImportError("ASNMKIT_KERNELS must be one of auto, c, py")

kde_logpdf = _impl.kde_logpdf
gini_scan = _impl.gini_scan
