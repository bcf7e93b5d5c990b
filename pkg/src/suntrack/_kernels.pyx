# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled dense-layer kernels: affine+ReLU chain and its reverse pass.

Same API and semantics as ``_kernels_py``; this version avoids per-call
numpy overhead, which dominates for the small matrices used here.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def forward_chain(list weights, list biases, cnp.ndarray x):
    """Batch forward through the chain; see _kernels_py.forward_chain."""
    cdef int n_layers = len(weights)
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w, out
    cdef double[::1] b
    cdef int n = a.shape[0]
    cdef int l, i, j, k, fan_in, fan_out
    cdef bint relu
    cdef double aik
    activations = [np.asarray(a)]
    cdef object out_arr
    for l in range(n_layers):
        w = weights[l]
        b = biases[l]
        fan_in = w.shape[0]
        fan_out = w.shape[1]
        out_arr = np.empty((n, fan_out), dtype=np.float64)
        out = out_arr
        relu = l < n_layers - 1
        for i in range(n):
            for j in range(fan_out):
                out[i, j] = b[j]
            for k in range(fan_in):
                aik = a[i, k]
                if aik != 0.0:
                    for j in range(fan_out):
                        out[i, j] += aik * w[k, j]
            if relu:
                for j in range(fan_out):
                    if out[i, j] < 0.0:
                        out[i, j] = 0.0
        a = out
        if relu:
            activations.append(out_arr)
    return np.asarray(a), activations


def backward_chain(list weights, list activations, cnp.ndarray d_y):
    """Reverse pass for forward_chain; see _kernels_py.backward_chain."""
    cdef int n_layers = len(weights)
    cdef double[:, ::1] dz = np.ascontiguousarray(d_y, dtype=np.float64)
    cdef double[:, ::1] w, act, dw, da
    cdef double[::1] db
    cdef int n = dz.shape[0]
    cdef int l, i, j, k, fan_in, fan_out
    cdef double aik, dzij
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    cdef object dw_arr, db_arr, da_arr
    for l in range(n_layers - 1, -1, -1):
        w = weights[l]
        act = activations[l]
        fan_in = w.shape[0]
        fan_out = w.shape[1]
        dw_arr = np.zeros((fan_in, fan_out), dtype=np.float64)
        db_arr = np.zeros(fan_out, dtype=np.float64)
        dw = dw_arr
        db = db_arr
        for i in range(n):
            for k in range(fan_in):
                aik = act[i, k]
                if aik != 0.0:
                    for j in range(fan_out):
                        dw[k, j] += aik * dz[i, j]
            for j in range(fan_out):
                db[j] += dz[i, j]
        d_weights[l] = dw_arr
        d_biases[l] = db_arr
        if l > 0:
            da_arr = np.zeros((n, fan_in), dtype=np.float64)
            da = da_arr
            for i in range(n):
                for j in range(fan_out):
                    dzij = dz[i, j]
                    if dzij != 0.0:
                        for k in range(fan_in):
                            da[i, k] += dzij * w[k, j]
                for k in range(fan_in):
                    if act[i, k] <= 0.0:
                        da[i, k] = 0.0
            dz = da_arr
    return d_weights, d_biases
