"""NumPy implementation of the training kernels.

This is the fallback backend; `fedsim._mlp_c` implements the same four
functions as a compiled extension. Both follow the kernel contract in
`fedsim.backend`:

* ``params`` is the flat float64 vector: for each consecutive layer pair
  ``(n_in, n_out)`` it holds the weight block (``n_in * n_out`` entries,
  row-major, input index major) followed by the ``n_out`` bias entries.
* ``act`` selects the hidden activation: 0 = tanh, 1 = relu. The output
  layer is linear and its softmax uses max-logit subtraction.
* ``labels0`` are 0-based class indices.
* Per-sample log-probabilities are floored at 1e-300 before the log so the
  cross-entropy stays finite even for badly poisoned parameters.
"""

from __future__ import annotations

import numpy as np

ACT_TANH = 0
ACT_RELU = 1

_LOG_FLOOR = 1e-300


def _unpack(params: np.ndarray, sizes: np.ndarray):
    """Split the flat vector into per-layer (weights, biases) views."""
    weights, biases = [], []
    offset = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        n_in, n_out = int(n_in), int(n_out)
        weights.append(params[offset : offset + n_in * n_out].reshape(n_in, n_out))
        offset += n_in * n_out
        biases.append(params[offset : offset + n_out])
        offset += n_out
    return weights, biases


def _forward_layers(params, sizes, act, X):
    """Forward pass keeping pre-activations; returns (zs, activations, probs)."""
    weights, biases = _unpack(params, sizes)
    a = X
    zs, acts = [], [X]
    for layer, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        zs.append(z)
        if layer < len(weights) - 1:
            a = np.tanh(z) if act == ACT_TANH else np.maximum(z, 0.0)
            acts.append(a)
    logits = zs[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    return zs, acts, probs


def forward_probs(params, sizes, act, X):
    """Softmax class probabilities, shape ``(n_samples, n_classes)``."""
    return _forward_layers(params, sizes, act, X)[2]


def mean_loss(params, sizes, act, X, labels0):
    """Mean cross-entropy of the true classes."""
    probs = forward_probs(params, sizes, act, X)
    picked = probs[np.arange(X.shape[0]), labels0]
    return float(-np.mean(np.log(np.maximum(picked, _LOG_FLOOR))))


def mean_grad(params, sizes, act, X, labels0):
    """Exact gradient of the mean cross-entropy w.r.t. the flat params."""
    n = X.shape[0]
    zs, acts, probs = _forward_layers(params, sizes, act, X)
    weights, _ = _unpack(params, sizes)

    grad = np.empty_like(params)
    delta = probs.copy()
    delta[np.arange(n), labels0] -= 1.0
    delta /= n

    # Walk the layers backwards, filling the flat gradient in layer order.
    offsets = []
    offset = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        offsets.append(offset)
        offset += int(n_in) * int(n_out) + int(n_out)

    for layer in range(len(weights) - 1, -1, -1):
        a_prev = acts[layer]
        n_in, n_out = a_prev.shape[1], delta.shape[1]
        start = offsets[layer]
        grad[start : start + n_in * n_out] = (a_prev.T @ delta).ravel()
        grad[start + n_in * n_out : start + n_in * n_out + n_out] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ weights[layer].T
            z_prev = zs[layer - 1]
            if act == ACT_TANH:
                delta = upstream * (1.0 - np.tanh(z_prev) ** 2)
            else:
                delta = upstream * (z_prev > 0.0)
    return grad


def sgd_train(params, sizes, act, X, labels0, perms, batch_size, lr, momentum):
    """Multi-epoch mini-batch SGD with momentum; returns the update delta.

    ``perms`` holds one precomputed sample permutation per epoch, so the
    visit order is fixed by the caller and identical across backends. The
    momentum buffer follows ``v <- momentum * v + g``, ``delta <- delta -
    lr * v``, each batch evaluates gradients at ``params + delta``, and the
    final incomplete batch is used. Returning the accumulated delta (rather
    than the moved parameters) keeps one-step training exactly equal to
    ``-lr * g``.
    """
    delta = np.zeros_like(params)
    velocity = np.zeros_like(params)
    n = X.shape[0]
    for epoch in range(perms.shape[0]):
        order = perms[epoch]
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            g = mean_grad(params + delta, sizes, act, X[idx], labels0[idx])
            velocity = momentum * velocity + g
            delta -= lr * velocity
    return delta
