"""Hot inner loops, each in a numba flavour (``*_nb``) and a vectorised numpy
flavour (``*_np``).  The public names dispatch on :data:`qwalk._accel.USE_NUMBA`.

All kernels index basis states by integers whose bit ``j`` is the
computational state of qubit ``j``.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# walk Hamiltonian action:  out = alpha * (H v) + beta * v + coef_w * w
# with H = gamma * (n - sum_j X_j) + diag(energies)
# ---------------------------------------------------------------------------


@njit
def walk_affine_nb(v, energies, n, gamma, alpha, beta, w, coef_w, out):
    dim = v.shape[0]
    gn = gamma * n
    for x in range(dim):
        acc = 0.0 * v[x]
        for j in range(n):
            acc += v[x ^ (1 << j)]
        hv = (gn + energies[x]) * v[x] - gamma * acc
        out[x] = alpha * hv + beta * v[x] + coef_w * w[x]
    return out


def walk_affine_np(v, energies, n, gamma, alpha, beta, w, coef_w, out):
    flips = np.zeros_like(v)
    for j in range(n):
        flips += v.reshape(-1, 2, 1 << j)[:, ::-1, :].reshape(-1)
    hv = (gamma * n + energies) * v - gamma * flips
    out[:] = alpha * hv + beta * v + coef_w * w
    return out


@njit
def hypercube_apply_nb(v, n, gamma, out):
    dim = v.shape[0]
    for x in range(dim):
        acc = n * v[x]
        for j in range(n):
            acc -= v[x ^ (1 << j)]
        out[x] = gamma * acc
    return out


def hypercube_apply_np(v, n, gamma, out):
    acc = n * v
    for j in range(n):
        acc = acc - v.reshape(-1, 2, 1 << j)[:, ::-1, :].reshape(-1)
    out[:] = gamma * acc
    return out


# ---------------------------------------------------------------------------
# SK energy table
# ---------------------------------------------------------------------------


@njit
def sk_energy_table_nb(couplings, fields, n, out):
    """Gray-code traversal, O(n) work per visited state."""
    dim = 1 << n
    spins = np.ones(n)
    local = np.empty(n)
    energy = 0.0
    for k in range(n):
        acc = fields[k]
        for j in range(n):
            acc += couplings[k, j]
        local[k] = acc
        energy -= fields[k]
        for j in range(k + 1, n):
            energy -= couplings[k, j]
    out[0] = energy
    for i in range(1, dim):
        # the bit flipped between gray(i-1) and gray(i) is the lowest set bit of i
        j = 0
        while not (i >> j) & 1:
            j += 1
        s = spins[j]
        energy += 2.0 * s * local[j]
        spins[j] = -s
        for k in range(n):
            local[k] -= 2.0 * couplings[k, j] * s
        out[i ^ (i >> 1)] = energy
    return out


def sk_energy_table_np(couplings, fields, n, out, chunk=1 << 16):
    """Direct vectorised evaluation, O(n^2) per state."""
    dim = 1 << n
    bits = np.arange(n)
    for start in range(0, dim, chunk):
        x = np.arange(start, min(dim, start + chunk))
        spins = 1.0 - 2.0 * ((x[:, None] >> bits) & 1)
        pair = np.einsum("ij,ij->i", spins @ couplings, spins)
        out[start:start + len(x)] = -0.5 * pair - spins @ fields
    return out


# ---------------------------------------------------------------------------
# spectral window average:
#   sum_{a,b} c_a c_b K(E_a - E_b),
#   K(d) = [sin(d (t + dt)) - sin(d t)] / (d dt)
#        = cos(d (t + dt/2)) * sinc(d dt / 2)     (also valid for dt = 0)
# ---------------------------------------------------------------------------


@njit
def window_pair_sum_nb(energies, weights, t, dt):
    m = energies.shape[0]
    total = 0.0
    for a in range(m):
        ca = weights[a]
        total += ca * ca
        if ca == 0.0:
            continue
        ea = energies[a]
        mid = t + 0.5 * dt
        acc = 0.0
        for b in range(a + 1, m):
            d = ea - energies[b]
            h = 0.5 * d * dt
            k = np.cos(d * mid)
            if h != 0.0:
                k *= np.sin(h) / h
            acc += weights[b] * k
        total += 2.0 * ca * acc
    return total


def window_pair_sum_np(energies, weights, t, dt, block=512):
    m = energies.shape[0]
    total = float(np.dot(weights, weights))
    for start in range(0, m, block):
        stop = min(m, start + block)
        d = energies[start:stop, None] - energies[None, :]
        mask = np.arange(m)[None, :] > np.arange(start, stop)[:, None]
        k = np.cos(d * (t + 0.5 * dt)) * np.sinc(0.5 * d * dt / np.pi)
        k = np.where(mask, k, 0.0)
        total += 2.0 * float(weights[start:stop] @ (k @ weights))
    return total


# ---------------------------------------------------------------------------
# one Chebyshev step on the hypercube walk:
#   out = sum_k coeffs[k] T_k((H - center) / radius) psi
# ---------------------------------------------------------------------------


@njit
def chebyshev_hypercube_nb(psi, energies, n, gamma, center, radius, coeffs, out, t0, t1, t2):
    alpha = 1.0 / radius
    beta = -center / radius
    t0[:] = psi
    walk_affine_nb(psi, energies, n, gamma, alpha, beta, psi, 0.0, t1)
    for x in range(psi.shape[0]):
        out[x] = coeffs[0] * t0[x] + coeffs[1] * t1[x]
    for k in range(2, coeffs.shape[0]):
        walk_affine_nb(t1, energies, n, gamma, 2.0 * alpha, 2.0 * beta, t0, -1.0, t2)
        ck = coeffs[k]
        for x in range(psi.shape[0]):
            out[x] += ck * t2[x]
        t0, t1, t2 = t1, t2, t0
    return out


def chebyshev_hypercube_np(psi, energies, n, gamma, center, radius, coeffs, out, t0, t1, t2):
    alpha = 1.0 / radius
    beta = -center / radius
    t0[:] = psi
    walk_affine_np(psi, energies, n, gamma, alpha, beta, psi, 0.0, t1)
    out[:] = coeffs[0] * t0 + coeffs[1] * t1
    for k in range(2, coeffs.shape[0]):
        walk_affine_np(t1, energies, n, gamma, 2.0 * alpha, 2.0 * beta, t0, -1.0, t2)
        out += coeffs[k] * t2
        t0, t1, t2 = t1, t2, t0
    return out


if USE_NUMBA:
    walk_affine = walk_affine_nb
    hypercube_apply = hypercube_apply_nb
    sk_energy_table = sk_energy_table_nb
    window_pair_sum = window_pair_sum_nb
    chebyshev_hypercube = chebyshev_hypercube_nb
else:
    walk_affine = walk_affine_np
    hypercube_apply = hypercube_apply_np
    sk_energy_table = sk_energy_table_np
    window_pair_sum = window_pair_sum_np
    chebyshev_hypercube = chebyshev_hypercube_np
