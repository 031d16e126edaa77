"""Finite-difference validation of the gradient tape.

The analytic side runs the normal float32 tape; the numeric side reruns
the same forward closure with parameters cast to float64 so that central
differences are not drowned by single-precision rounding of the loss.
"""

from __future__ import annotations

import numpy as np

from .tensor import NumericsError, backward, no_grad


def finite_diff_check(fn, store, epsilon=1e-3, param_names=None):
    """Max relative error between tape gradients and central differences.

    ``fn`` is a deterministic closure over ``store``'s tensors returning a
    scalar loss tensor. Relative error per entry is
    |analytic - cd| / max(|analytic|, |cd|, 1e-6); the max over all
    checked parameter entries is returned.
    """
    loss = fn()
    if not np.isfinite(loss.data).all():
        raise NumericsError("non-finite loss in finite_diff_check")
    analytic = backward(loss, store)

    names = param_names if param_names is not None else store.unfrozen_names()
    originals = {n: store[n].data for n in names}
    worst = 0.0
    try:
        for n in names:
            store[n].data = originals[n].astype(np.float64)
        for n in names:
            base = store[n].data
            flat = base.reshape(-1)
            cd = np.empty_like(flat)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + epsilon
                with no_grad():
                    hi = fn().item()
                flat[i] = keep - epsilon
                with no_grad():
                    lo = fn().item()
                flat[i] = keep
                if not (np.isfinite(hi) and np.isfinite(lo)):
                    raise NumericsError(f"non-finite loss while perturbing '{n}'")
                cd[i] = (hi - lo) / (2.0 * epsilon)
            a = analytic[n].reshape(-1).astype(np.float64)
            denom = np.maximum(np.maximum(np.abs(a), np.abs(cd)), 1e-6)
            worst = max(worst, float(np.max(np.abs(a - cd) / denom)))
    finally:
        for n in names:
            store[n].data = originals[n]
    return worst
