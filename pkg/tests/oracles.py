"""Independent reference implementations used only by the test suite.

Everything here is written the slow, obvious way (dense matrices, explicit
loops) so the fast library paths can be checked against a second route.
"""

import numpy as np

# ---------------------------------------------------------------------------
# Dense-unitary circuit oracle.  Builds the full 2^n x 2^n matrix of every
# gate by Kronecker placement and multiplies it out; qubit 0 is the
# least-significant bit of the amplitude index.
# ---------------------------------------------------------------------------


def dense_rotation(kind, angle):
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "rz":
        return np.array([[np.exp(-1j * angle / 2), 0], [0, np.exp(1j * angle / 2)]])
    raise ValueError(kind)


DENSE_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def place_single(gate2x2, target, n):
    mat = np.eye(1, dtype=complex)
    for q in range(n - 1, -1, -1):
        mat = np.kron(mat, gate2x2 if q == target else np.eye(2, dtype=complex))
    return mat


def dense_cnot(control, target, n):
    dim = 2**n
    mat = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        k = j ^ (((j >> control) & 1) << target)
        mat[k, j] = 1.0
    return mat


def dense_block_unitary(n_qubits, n_layers, thetas, x):
    """Full unitary of the variational block for input vector ``x``."""
    ops = []
    for q in range(n_qubits):
        ops.append(place_single(dense_rotation("ry", np.arctan(x[q])), q, n_qubits))
        ops.append(place_single(dense_rotation("rz", np.arctan(x[q] ** 2)), q, n_qubits))
    for layer in range(n_layers):
        if n_qubits >= 2:
            for q in range(n_qubits):
                ops.append(dense_cnot(q, (q + 1) % n_qubits, n_qubits))
        for q in range(n_qubits):
            for k, kind in enumerate(("rx", "ry", "rz")):
                ops.append(place_single(dense_rotation(kind, thetas[layer, q, k]), q, n_qubits))
    unitary = np.eye(2**n_qubits, dtype=complex)
    for op in ops:
        unitary = op @ unitary
    return unitary


def dense_vqc_expectations(n_qubits, n_layers, thetas, x):
    """<Z_q> readout computed from the dense unitary applied to |0...0>."""
    psi = dense_block_unitary(n_qubits, n_layers, thetas, x)[:, 0]
    probs = np.abs(psi) ** 2
    out = np.empty(n_qubits)
    for q in range(n_qubits):
        signs = np.array([1.0 if ((j >> q) & 1) == 0 else -1.0 for j in range(2**n_qubits)])
        out[q] = float(probs @ signs)
    return out


# ---------------------------------------------------------------------------
# Finite differences.
# ---------------------------------------------------------------------------


def central_difference(f, x0, h=1e-5):
    """Central finite-difference gradient of a scalar function of an array."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    flat = grad.reshape(-1)
    xf = x0.reshape(-1)
    for i in range(xf.size):
        xp = xf.copy()
        xm = xf.copy()
        xp[i] += h
        xm[i] -= h
        flat[i] = (f(xp.reshape(x0.shape)) - f(xm.reshape(x0.shape))) / (2 * h)
    return grad


# ---------------------------------------------------------------------------
# Textbook Gaussian-process regression on a fixed Matern-5/2 kernel.
# ---------------------------------------------------------------------------


def matern52_kernel(xa, xb, length_scales, signal_var):
    xa = np.atleast_2d(xa)
    xb = np.atleast_2d(xb)
    d = (xa[:, None, :] - xb[None, :, :]) / np.asarray(length_scales)
    r = np.sqrt(np.maximum((d**2).sum(-1), 0.0))
    sq5r = np.sqrt(5.0) * r
    return signal_var * (1.0 + sq5r + 5.0 * r**2 / 3.0) * np.exp(-sq5r)


def gp_posterior_oracle(x_train, y_train, x_query, length_scales, signal_var, noise_var, mean):
    """Closed-form GP posterior via direct matrix inversion."""
    k_tt = matern52_kernel(x_train, x_train, length_scales, signal_var)
    k_tt += noise_var * np.eye(len(x_train))
    k_qt = matern52_kernel(x_query, x_train, length_scales, signal_var)
    k_inv = np.linalg.inv(k_tt)
    resid = np.asarray(y_train) - mean
    post_mean = mean + k_qt @ k_inv @ resid
    k_qq = matern52_kernel(x_query, x_query, length_scales, signal_var)
    post_var = np.diag(k_qq - k_qt @ k_inv @ k_qt.T)
    return post_mean, np.maximum(post_var, 0.0)


def expected_improvement_oracle(mean, var, best):
    """Phi/phi closed form of EI for minimization, via scipy.stats."""
    from scipy.stats import norm

    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    ei = np.zeros_like(mean)
    pos = sd > 0
    z = (best - mean[pos]) / sd[pos]
    ei[pos] = (best - mean[pos]) * norm.cdf(z) + sd[pos] * norm.pdf(z)
    ei[~pos] = np.maximum(best - mean[~pos], 0.0)
    return np.maximum(ei, 0.0)
