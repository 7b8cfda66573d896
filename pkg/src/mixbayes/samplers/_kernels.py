"""Compiled inner loops. All randomness is passed in as pre-drawn arrays so
that chains stay reproducible from a numpy Generator."""

import math

import numpy as np
from numba import njit

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def mixture_loglik(x, atoms, weights):
    """sum_i log sum_j w_j phi(x_i - theta_j), shifted per row for stability."""
    n = x.shape[0]
    k = atoms.shape[0]
    logw = np.empty(k)
    for j in range(k):
        logw[j] = math.log(weights[j]) if weights[j] > 0 else -np.inf
    total = 0.0
    buf = np.empty(k)
    for i in range(n):
        top = -np.inf
        for j in range(k):
            d = x[i] - atoms[j]
            v = logw[j] - 0.5 * d * d
            buf[j] = v
            if v > top:
                top = v
        s = 0.0
        for j in range(k):
            s += math.exp(buf[j] - top)
        total += top + math.log(s)
    return total - n * _LOG_SQRT_2PI


@njit(cache=True)
def gibbs_assignments(x, atoms, weights, u, out):
    """Draw z_i proportional to w_j phi(x_i - theta_j) using uniforms u."""
    n = x.shape[0]
    k = atoms.shape[0]
    buf = np.empty(k)
    for i in range(n):
        top = -np.inf
        for j in range(k):
            d = x[i] - atoms[j]
            v = (math.log(weights[j]) if weights[j] > 0 else -np.inf) - 0.5 * d * d
            buf[j] = v
            if v > top:
                top = v
        s = 0.0
        for j in range(k):
            buf[j] = math.exp(buf[j] - top)
            s += buf[j]
        target = u[i] * s
        acc = 0.0
        choice = k - 1
        for j in range(k):
            acc += buf[j]
            if target < acc:
                choice = j
                break
        out[i] = choice


@njit(cache=True)
def _remove_cluster(c, z, counts, atoms, n_clusters):
    last = n_clusters - 1
    if c != last:
        atoms[c] = atoms[last]
        counts[c] = counts[last]
        for i in range(z.shape[0]):
            if z[i] == last:
                z[i] = c
    counts[last] = 0
    return last


@njit(cache=True)
def neal8_sweep(x, z, counts, atoms, n_clusters, kappa, m_aux, bound,
                use_lik, u_aux, u_cat, z_ref, u_ref, step, exact):
    """One sweep of Neal's auxiliary-component Gibbs sampler (Algorithm 8)
    for a DP mixture with uniform base on [-bound, bound].

    Atoms are refreshed by Metropolis: with ``exact`` the proposal is the
    untruncated Gaussian conditional N(cluster mean, 1/size), accepted iff
    it lands in the support; otherwise a random walk with sd ``step``.
    Returns the new number of occupied clusters; z, counts and atoms are
    updated in place. Cluster labels are kept compact in [0, n_clusters).
    """
    n = x.shape[0]
    aux = np.empty(m_aux)
    logp = np.empty(n + m_aux + 1)
    log_aux_mass = math.log(kappa / m_aux)
    for i in range(n):
        c = z[i]
        counts[c] -= 1
        first = 0
        if counts[c] == 0:
            aux[0] = atoms[c]
            first = 1
            n_clusters = _remove_cluster(c, z, counts, atoms, n_clusters)
        for j in range(first, m_aux):
            aux[j] = -bound + 2.0 * bound * u_aux[i, j]

        top = -np.inf
        for c2 in range(n_clusters):
            v = math.log(counts[c2])
            if use_lik:
                d = x[i] - atoms[c2]
                v -= 0.5 * d * d
            logp[c2] = v
            if v > top:
                top = v
        for j in range(m_aux):
            v = log_aux_mass
            if use_lik:
                d = x[i] - aux[j]
                v -= 0.5 * d * d
            logp[n_clusters + j] = v
            if v > top:
                top = v
        total = 0.0
        n_opts = n_clusters + m_aux
        for t in range(n_opts):
            logp[t] = math.exp(logp[t] - top)
            total += logp[t]
        target = u_cat[i] * total
        acc = 0.0
        choice = n_opts - 1
        for t in range(n_opts):
            acc += logp[t]
            if target < acc:
                choice = t
                break
        if choice < n_clusters:
            z[i] = choice
            counts[choice] += 1
        else:
            atoms[n_clusters] = aux[choice - n_clusters]
            counts[n_clusters] = 1
            z[i] = n_clusters
            n_clusters += 1

    # Metropolis refresh of each occupied atom
    sums = np.zeros(n_clusters)
    if use_lik:
        for i in range(n):
            sums[z[i]] += x[i]
    for c in range(n_clusters):
        if exact and use_lik:
            prop = sums[c] / counts[c] + z_ref[c] / math.sqrt(counts[c])
            if -bound <= prop <= bound:
                atoms[c] = prop
            continue
        prop = atoms[c] + step * z_ref[c]
        if prop < -bound or prop > bound:
            continue
        if use_lik:
            # sum_i [-(x_i - prop)^2 + (x_i - theta)^2] / 2 over the cluster
            log_ratio = (prop - atoms[c]) * sums[c] - 0.5 * counts[c] * (prop * prop - atoms[c] * atoms[c])
        else:
            log_ratio = 0.0
        if log_ratio >= 0.0 or u_ref[c] < math.exp(log_ratio):
            atoms[c] = prop
    return n_clusters
