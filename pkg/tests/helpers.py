"""Shared finite-difference oracle used across module tests.

The acceptance bound everywhere is |analytic - fd| <= 1e-4 * (1 + |fd|)
with a central difference of step 1e-3 evaluated in float64.
"""

import numpy as np

FD_STEP = 1e-3


def fd_gradient(fn, x, step=FD_STEP):
    """Central-difference gradient of scalar ``fn()`` wrt array ``x``,
    perturbing ``x`` in place (callers must rebuild the forward pass from
    ``x`` on every ``fn()`` call)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn()
        flat[i] = orig - step
        lo = fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def fd_max_rel_err(analytic, fd):
    """Worst-case relative error under the acceptance normalization."""
    return float(np.max(np.abs(analytic - fd) / (1.0 + np.abs(fd)))) if fd.size else 0.0


def assert_param_grads_match(build_loss, params, bound=1e-4):
    """Check every named parameter's analytic gradient against the oracle.

    ``build_loss()`` must construct a fresh graph from the parameter
    tensors and return a scalar Tensor. ``params`` maps name -> Tensor.
    """
    for p in params.values():
        p.grad = None
    loss = build_loss()
    loss.backward()
    for name, p in params.items():
        fd = fd_gradient(lambda: build_loss().item(), p.data)
        assert p.grad is not None, f"{name}: no gradient reached this parameter"
        err = np.abs(p.grad - fd)
        tol = bound * (1.0 + np.abs(fd))
        assert np.all(err <= tol), (
            f"{name}: max fd mismatch {fd_max_rel_err(p.grad, fd):.3e}"
        )
