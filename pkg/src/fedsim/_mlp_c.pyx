# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the training kernels.

Same contract as `fedsim._mlp_numpy` (flat parameter layout, activation ids,
0-based labels, floored log); the whole epoch/batch loop of `sgd_train` runs
without touching the interpreter, which is where the speedup over the NumPy
backend comes from on small models.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()

ctypedef cnp.int64_t i64

ACT_TANH = 0
ACT_RELU = 1

cdef double LOG_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Workspace layout
#
# All layer activations live in one flat buffer `ws`; layer l's activations
# for a batch of `rows` samples start at aoffs[l] and are row-major
# (rows x sizes[l]). Weight block l starts at woffs[l] inside the flat
# parameter vector, biases follow the weights.
# ---------------------------------------------------------------------------

def _offsets(sizes):
    woffs = np.zeros(len(sizes) - 1, dtype=np.int64)
    off = 0
    for l in range(len(sizes) - 1):
        woffs[l] = off
        off += int(sizes[l]) * int(sizes[l + 1]) + int(sizes[l + 1])
    return woffs, off


def _act_offsets(sizes, rows):
    aoffs = np.zeros(len(sizes), dtype=np.int64)
    off = 0
    for l in range(len(sizes)):
        aoffs[l] = off
        off += rows * int(sizes[l])
    return aoffs, off


cdef void _forward_ws(const double[::1] p, const i64[::1] sizes, const i64[::1] woffs,
                      int act, const double[:, ::1] X, const i64[::1] idx,
                      Py_ssize_t rows, double[::1] ws, const i64[::1] aoffs) noexcept nogil:
    cdef Py_ssize_t n_layers = sizes.shape[0] - 1
    cdef Py_ssize_t l, r, i, o, n_in, n_out, w_off, b_off, ab, zb
    cdef double xi, m, s, v

    n_in = sizes[0]
    for r in range(rows):
        for i in range(n_in):
            ws[aoffs[0] + r * n_in + i] = X[idx[r], i]

    for l in range(n_layers):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        w_off = woffs[l]
        b_off = w_off + n_in * n_out
        ab = aoffs[l]
        zb = aoffs[l + 1]
        for r in range(rows):
            for o in range(n_out):
                ws[zb + r * n_out + o] = p[b_off + o]
            for i in range(n_in):
                xi = ws[ab + r * n_in + i]
                for o in range(n_out):
                    ws[zb + r * n_out + o] = ws[zb + r * n_out + o] + xi * p[w_off + i * n_out + o]
        if l < n_layers - 1:
            for r in range(rows):
                for o in range(n_out):
                    v = ws[zb + r * n_out + o]
                    if act == 0:
                        ws[zb + r * n_out + o] = tanh(v)
                    else:
                        ws[zb + r * n_out + o] = v if v > 0.0 else 0.0

    # softmax with max-logit subtraction on the output buffer
    n_out = sizes[n_layers]
    zb = aoffs[n_layers]
    for r in range(rows):
        m = ws[zb + r * n_out]
        for o in range(1, n_out):
            if ws[zb + r * n_out + o] > m:
                m = ws[zb + r * n_out + o]
        s = 0.0
        for o in range(n_out):
            v = exp(ws[zb + r * n_out + o] - m)
            ws[zb + r * n_out + o] = v
            s += v
        for o in range(n_out):
            ws[zb + r * n_out + o] /= s


cdef void _backward_ws(const double[::1] p, const i64[::1] sizes, const i64[::1] woffs,
                       int act, const i64[::1] labels0, const i64[::1] idx,
                       Py_ssize_t rows, const double[::1] ws, const i64[::1] aoffs,
                       double[::1] delta_a, double[::1] delta_b,
                       double[::1] grad) noexcept nogil:
    cdef Py_ssize_t n_layers = sizes.shape[0] - 1
    cdef Py_ssize_t l, r, i, o, n_in, n_out, w_off, b_off, ab
    cdef double xi, s, a
    cdef double inv_rows = 1.0 / rows

    for i in range(grad.shape[0]):
        grad[i] = 0.0

    # delta_L = (probs - onehot) / rows
    n_out = sizes[n_layers]
    ab = aoffs[n_layers]
    for r in range(rows):
        for o in range(n_out):
            delta_a[r * n_out + o] = ws[ab + r * n_out + o] * inv_rows
        delta_a[r * n_out + labels0[idx[r]]] -= inv_rows

    for l in range(n_layers - 1, -1, -1):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        w_off = woffs[l]
        b_off = w_off + n_in * n_out
        ab = aoffs[l]
        for r in range(rows):
            for i in range(n_in):
                xi = ws[ab + r * n_in + i]
                for o in range(n_out):
                    grad[w_off + i * n_out + o] += xi * delta_a[r * n_out + o]
            for o in range(n_out):
                grad[b_off + o] += delta_a[r * n_out + o]
        if l > 0:
            for r in range(rows):
                for i in range(n_in):
                    s = 0.0
                    for o in range(n_out):
                        s += delta_a[r * n_out + o] * p[w_off + i * n_out + o]
                    a = ws[ab + r * n_in + i]
                    if act == 0:
                        delta_b[r * n_in + i] = s * (1.0 - a * a)
                    else:
                        delta_b[r * n_in + i] = s if a > 0.0 else 0.0
            # ping-pong: the new delta becomes the current one
            for i in range(rows * n_in):
                delta_a[i] = delta_b[i]


def _as_inputs(params, sizes, X):
    p = np.ascontiguousarray(params, dtype=np.float64)
    s = np.ascontiguousarray(sizes, dtype=np.int64)
    x = np.ascontiguousarray(X, dtype=np.float64)
    return p, s, x


def forward_probs(params, sizes, act, X):
    """Softmax class probabilities, shape ``(n_samples, n_classes)``."""
    p, s, x = _as_inputs(params, sizes, X)
    rows = x.shape[0]
    woffs, _ = _offsets(s)
    aoffs, ws_len = _act_offsets(s, rows)
    ws = np.empty(ws_len, dtype=np.float64)
    idx = np.arange(rows, dtype=np.int64)
    _forward_ws(p, s, woffs, act, x, idx, rows, ws, aoffs)
    k = int(s[len(s) - 1])
    base = int(aoffs[len(aoffs) - 1])
    return ws[base:base + rows * k].reshape(rows, k).copy()


def mean_loss(params, sizes, act, X, labels0):
    """Mean cross-entropy of the true classes."""
    p, s, x = _as_inputs(params, sizes, X)
    y = np.ascontiguousarray(labels0, dtype=np.int64)
    cdef Py_ssize_t rows = x.shape[0]
    woffs, _ = _offsets(s)
    aoffs, ws_len = _act_offsets(s, rows)
    ws = np.empty(ws_len, dtype=np.float64)
    idx = np.arange(rows, dtype=np.int64)

    cdef const double[::1] pv = p
    cdef const i64[::1] sv = s
    cdef const i64[::1] wo = woffs
    cdef const i64[::1] ao = aoffs
    cdef const double[:, ::1] xv = x
    cdef const i64[::1] iv = idx
    cdef const i64[::1] yv = y
    cdef double[::1] wsv = ws
    cdef int act_c = act
    cdef Py_ssize_t r, base, k
    cdef double total = 0.0, prob

    cdef Py_ssize_t s_last = sv.shape[0] - 1
    cdef Py_ssize_t a_last = ao.shape[0] - 1
    with nogil:
        _forward_ws(pv, sv, wo, act_c, xv, iv, rows, wsv, ao)
        k = sv[s_last]
        base = ao[a_last]
        for r in range(rows):
            prob = wsv[base + r * k + yv[r]]
            if prob < LOG_FLOOR:
                prob = LOG_FLOOR
            total += -log(prob)
    return total / rows


def mean_grad(params, sizes, act, X, labels0):
    """Exact gradient of the mean cross-entropy w.r.t. the flat params."""
    p, s, x = _as_inputs(params, sizes, X)
    y = np.ascontiguousarray(labels0, dtype=np.int64)
    rows = x.shape[0]
    woffs, n_params = _offsets(s)
    aoffs, ws_len = _act_offsets(s, rows)
    ws = np.empty(ws_len, dtype=np.float64)
    grad = np.empty(n_params, dtype=np.float64)
    max_width = int(max(s))
    delta_a = np.empty(rows * max_width, dtype=np.float64)
    delta_b = np.empty(rows * max_width, dtype=np.float64)
    idx = np.arange(rows, dtype=np.int64)
    _forward_ws(p, s, woffs, act, x, idx, rows, ws, aoffs)
    _backward_ws(p, s, woffs, act, y, idx, rows, ws, aoffs, delta_a, delta_b, grad)
    return grad


def sgd_train(params, sizes, act, X, labels0, perms, batch_size, lr, momentum):
    """Multi-epoch mini-batch SGD with momentum; returns the update delta.

    Visit order comes from the caller-supplied per-epoch permutations; the
    momentum buffer follows ``v <- momentum * v + g``, the accumulated delta
    ``delta <- delta - lr * v``, each batch evaluates gradients at
    ``params + delta``, and the final incomplete batch is used.
    """
    p, s, x = _as_inputs(params, sizes, X)
    y = np.ascontiguousarray(labels0, dtype=np.int64)
    pm = np.ascontiguousarray(perms, dtype=np.int64)

    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t bs = batch_size
    if bs > n:
        bs = n
    woffs, n_params = _offsets(s)
    aoffs, ws_len = _act_offsets(s, bs)
    ws = np.empty(ws_len, dtype=np.float64)
    grad = np.empty(n_params, dtype=np.float64)
    velocity = np.zeros(n_params, dtype=np.float64)
    delta = np.zeros(n_params, dtype=np.float64)
    eff = np.empty(n_params, dtype=np.float64)
    max_width = int(max(s))
    delta_a = np.empty(bs * max_width, dtype=np.float64)
    delta_b = np.empty(bs * max_width, dtype=np.float64)

    cdef const double[::1] p0 = p
    cdef double[::1] dl = delta
    cdef double[::1] ef = eff
    cdef const i64[::1] sv = s
    cdef const i64[::1] wo = woffs
    cdef const i64[::1] ao = aoffs
    cdef const double[:, ::1] xv = x
    cdef const i64[::1] yv = y
    cdef const i64[:, ::1] permv = pm
    cdef double[::1] wsv = ws
    cdef double[::1] gv = grad
    cdef double[::1] vv = velocity
    cdef double[::1] da = delta_a
    cdef double[::1] db = delta_b
    cdef int act_c = act
    cdef double lr_c = lr
    cdef double mu = momentum
    cdef Py_ssize_t epochs = pm.shape[0]
    cdef Py_ssize_t e, start, rows, j
    cdef Py_ssize_t pcount = n_params

    with nogil:
        for e in range(epochs):
            start = 0
            while start < n:
                rows = bs if start + bs <= n else n - start
                for j in range(pcount):
                    ef[j] = p0[j] + dl[j]
                _forward_ws(ef, sv, wo, act_c, xv, permv[e, start:start + rows],
                            rows, wsv, ao)
                _backward_ws(ef, sv, wo, act_c, yv, permv[e, start:start + rows],
                             rows, wsv, ao, da, db, gv)
                for j in range(pcount):
                    vv[j] = mu * vv[j] + gv[j]
                    dl[j] -= lr_c * vv[j]
                start += bs
    return delta
