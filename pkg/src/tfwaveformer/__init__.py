"""Temporal-frequency wavelet transformer for dynamic link prediction.

The package is organised as a small library plus a CLI:

- ``autodiff``: reverse-mode automatic differentiation over numpy arrays
- ``graph``: temporal event store, neighbor lookup, chronological splits
- ``features``: time / interaction-frequency encoders and modality fusion
- ``wavelet``: learnable multi-scale decomposition with gated fusion
- ``transformer``: hybrid temporal-frequency encoder stack
- ``predictor``: pooling, pairwise scoring and the training loss
- ``training``: negative sampling, Adam, checkpoints, the train loop
- ``metrics``: average precision / AUC and the evaluation protocol
- ``cli``: ``synth``, ``train``, ``evaluate``, ``gradcheck``, ``sweep-m``

Submodules are imported lazily so that ``import tfwaveformer`` stays cheap
and thread-limit environment variables set by the CLI take effect before
numpy loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "autodiff",
    "graph",
    "features",
    "wavelet",
    "transformer",
    "predictor",
    "model",
    "gradcheck",
    "sampling",
    "optim",
    "checkpoint",
    "training",
    "metrics",
    "synthetic",
    "config",
    "reporting",
    "errors",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        module = import_module(f"{__name__}.{name}")
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
