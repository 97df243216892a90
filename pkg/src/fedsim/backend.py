"""Selects the training-kernel backend at import time.

The compiled extension (`fedsim._mlp_c`, built from Cython) is preferred for
``sgd_train``, the sequential many-small-steps loop where per-call dispatch
overhead dominates; the one-shot batch kernels (``forward_probs``,
``mean_loss``, ``mean_grad``) stay on the NumPy reference, whose BLAS matmuls
are faster at any batch size (see ``benchmarks/benchmark_backends.py``).
Setting the environment variable ``FEDSIM_PURE_PYTHON`` to a non-empty value
forces everything onto the fallback, which is handy for benchmarking and for
debugging kernel discrepancies.

Both backends implement the same contract (see `fedsim._mlp_numpy`), and a
given routing is bitwise deterministic for fixed inputs. Results *across*
backends agree only to floating-point tolerance because summation orders
differ.
"""

import os

from . import _mlp_numpy

__all__ = [
    "ACT_TANH",
    "ACT_RELU",
    "ACTIVATION_IDS",
    "active_backend",
    "forward_probs",
    "mean_loss",
    "mean_grad",
    "sgd_train",
]

ACT_TANH = _mlp_numpy.ACT_TANH
ACT_RELU = _mlp_numpy.ACT_RELU
ACTIVATION_IDS = {"tanh": ACT_TANH, "relu": ACT_RELU}

_train_impl = _mlp_numpy
_name = "numpy"
if not os.environ.get("FEDSIM_PURE_PYTHON"):
    try:
        from . import _mlp_c as _compiled
    except ImportError:
        pass
    else:
        _train_impl = _compiled
        _name = "compiled"

forward_probs = _mlp_numpy.forward_probs
mean_loss = _mlp_numpy.mean_loss
mean_grad = _mlp_numpy.mean_grad
sgd_train = _train_impl.sgd_train


def active_backend():
    """Name of the kernel backend in use: ``"compiled"`` or ``"numpy"``."""
    return _name
