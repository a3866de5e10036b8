"""Kernel selection.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python fallback takes over with identical semantics.  Set the
environment variable ``GDAPORT_PURE=1`` to force the fallback (useful for
benchmarking and for debugging the extension).
"""

import os

if os.environ.get("GDAPORT_PURE"):
    from . import _pure as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pure as impl

IMPLEMENTATION = impl.IMPLEMENTATION

norm_cdf = impl.norm_cdf
norm_pdf = impl.norm_pdf
crra_log_benchmark = impl.crra_log_benchmark
crra_risk_tolerance = impl.crra_risk_tolerance
crra_inv_sq_tolerance = impl.crra_inv_sq_tolerance
crra_risk_tolerance_many = impl.crra_risk_tolerance_many
crra_inv_sq_tolerance_many = impl.crra_inv_sq_tolerance_many
