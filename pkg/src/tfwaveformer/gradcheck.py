"""Finite-difference verification of the full model's gradients.

Runs the model at a desk-scale configuration in float64, compares every
parameter's analytic gradient against central differences and reports the
worst relative error per named parameter group.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

FD_STEP = 1e-3
PASS_THRESHOLD = 1e-3


def parameter_group(name):
    """Collapse a parameter name to its reporting group."""
    parts = name.split(".")
    if parts[0] == "predictor":
        return "predictor"
    if parts[0] == "encoder" and parts[1].startswith("layer"):
        sub = parts[2]
        if sub in ("ln1", "ln2"):
            return f"encoder.{parts[1]}.norms"
        return f"encoder.{parts[1]}.{sub}"
    return ".".join(parts[:2])


def max_rel_err(analytic, fd):
    if fd.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - fd) / (1.0 + np.abs(fd))))


def check_model_gradients(model, batch, labels, step=FD_STEP, corrupt_hook=None):
    """Per-group worst relative error of analytic vs central differences.

    ``corrupt_hook``, used only by tests as a negative control, may modify
    the dict of analytic gradients before comparison.
    """
    params = model.parameters()
    for p in params.values():
        if p.data.dtype != np.float64:
            raise ContractError("gradient checks must run on a float64 model")
        p.grad = None

    model.loss(batch, labels).backward()
    analytic = {}
    for name, p in params.items():
        if p.grad is None:
            raise ContractError(f"parameter {name} received no gradient")
        analytic[name] = p.grad.copy()
    if corrupt_hook is not None:
        corrupt_hook(analytic)

    def forward():
        return model.loss(batch, labels).item()

    report = {}
    for name, p in params.items():
        fd = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = forward()
            flat[i] = orig - step
            lo = forward()
            flat[i] = orig
            fd_flat[i] = (hi - lo) / (2.0 * step)
        group = parameter_group(name)
        err = max_rel_err(analytic[name], fd)
        report[group] = max(report.get(group, 0.0), err)
    return report


def report_lines(report, threshold=PASS_THRESHOLD):
    """Formatted per-group lines plus the overall verdict."""
    lines = []
    for group in sorted(report):
        err = report[group]
        status = "ok" if err <= threshold else "FAIL"
        lines.append(f"{group:40s} max_rel_err={err:.3e}  {status}")
    worst = max(report.values()) if report else 0.0
    passed = worst <= threshold
    lines.append(
        f"{'overall':40s} max_rel_err={worst:.3e}  "
        f"{'PASS' if passed else 'FAIL'} (threshold {threshold:g})"
    )
    return lines, passed
