"""Backend selection for the per-step kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is. Set ``CONFSTREAM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from confstream import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from confstream import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("CONFSTREAM_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]


def use_backend(name: str) -> None:
    """Switch the active backend (for tests and benchmarks)."""
    global BACKEND, _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = name
    _impl = BACKENDS[name]


def raps_scores(probs, u, xi, k_reg, out):
    return _impl.raps_scores(probs, u, xi, k_reg, out)


def aggregate(alpha, logw, logh, n, wbar, hbar, mass):
    return _impl.aggregate(alpha, logw, logh, n, wbar, hbar, mass)


def update(alpha, cumsq, logw, logh, eps, wbar, hbar, n, alpha_bars, target, eta, sel_n, sel_m, sign):
    return _impl.update(alpha, cumsq, logw, logh, eps, wbar, hbar, n, alpha_bars,
                        target, eta, sel_n, sel_m, sign)
