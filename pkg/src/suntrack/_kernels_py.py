"""Pure-numpy dense-layer kernels.

Fallback for the compiled extension in ``_kernels.pyx``; both expose the
same three functions with identical semantics. ``suntrack.backend`` picks
one at import time.

Layer convention: ``weights[l]`` has shape (fan_in, fan_out), activations
are row batches, hidden layers are ReLU, the output layer is identity.
"""

import numpy as np


def forward_chain(weights, biases, x):
    """Run a batch through the affine+ReLU chain.

    Args:
        weights: list of (fan_in, fan_out) float64 arrays.
        biases: list of (fan_out,) float64 arrays.
        x: (n, fan_in_0) float64 batch.

    Returns:
        (y, activations) where y is the (n, fan_out_last) identity output
        and activations is [x, a_1, ..., a_{L-1}] (post-ReLU hidden layers),
        as needed by backward_chain.
    """
    n_layers = len(weights)
    a = x
    activations = [x]
    for l in range(n_layers - 1):
        a = np.maximum(a @ weights[l] + biases[l], 0.0)
        activations.append(a)
    y = a @ weights[-1] + biases[-1]
    return y, activations


def backward_chain(weights, activations, d_y):
    """Reverse pass for forward_chain.

    Args:
        weights: same list passed to forward_chain.
        activations: the list forward_chain returned.
        d_y: (n, fan_out_last) cotangent on the identity output.

    Returns:
        (d_weights, d_biases), gradients summed over the batch rows.
        The ReLU subgradient at 0 is taken as 0.
    """
    n_layers = len(weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    dz = d_y
    for l in range(n_layers - 1, -1, -1):
        d_weights[l] = activations[l].T @ dz
        d_biases[l] = dz.sum(axis=0)
        if l > 0:
            dz = (dz @ weights[l].T) * (activations[l] > 0.0)
    return d_weights, d_biases
