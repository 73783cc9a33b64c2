"""Independent reference implementations used as test oracles.

Everything here is deliberately written from first principles (pure
python / plain numpy closed forms) so the oracles share no code with the
package paths they check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def batch_linreg_posterior(X, y, mu0, Sigma0, R):
    """Closed-form batch Bayesian linear-regression posterior.

    Sigma = (Sigma0^-1 + X^T X / R)^-1, mu = Sigma (Sigma0^-1 mu0 + X^T y / R).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    P0 = np.linalg.inv(Sigma0)
    P = P0 + X.T @ X / R
    Sigma = np.linalg.inv(P)
    mu = Sigma @ (P0 @ mu0 + X.T @ y / R)
    return mu, Sigma


def scalar_conjugate_predictive(m, v, x, y, R):
    """log N(y | x m, x^2 v + R) for a scalar-parameter linear model."""
    s = x * x * v + R
    return -0.5 * (math.log(2.0 * math.pi * s) + (y - x * m) ** 2 / s)


def scalar_conjugate_update(m, v, x, y, R):
    """Posterior (m', v') after observing y = x theta + noise(R)."""
    prec = 1.0 / v + x * x / R
    v2 = 1.0 / prec
    m2 = v2 * (m / v + x * y / R)
    return m2, v2


def runlength_posterior_bruteforce(xs, ys, m0, v0, R, pi):
    """Exact final runlength posterior by enumerating 2^(T-1) changepoint
    configurations of a scalar-parameter linear-Gaussian stream.

    A segment always starts at the first observation; the binary choices
    cover observations 2..T.  The no-reset configuration splits between
    final runlength T (first step grew) and T-1 (first step reset) in the
    hazard ratio, matching the recursion's root convention.
    """
    T = len(ys)
    masses: dict[int, list[float]] = {}

    def add(r, logm):
        masses.setdefault(r, []).append(logm)

    for bits in itertools.product([0, 1], repeat=T - 1):
        log_mass = sum(math.log(pi) if b else math.log(1.0 - pi) for b in bits)
        loglik = 0.0
        m, v = m0, v0
        for t in range(T):
            if t > 0 and bits[t - 1]:
                m, v = m0, v0
            loglik += scalar_conjugate_predictive(m, v, xs[t], ys[t], R)
            m, v = scalar_conjugate_update(m, v, xs[t], ys[t], R)
        resets = [i + 1 for i, b in enumerate(bits) if b]  # 0-based times
        if resets:
            r_final = (T - 1) - resets[-1]
            add(r_final, log_mass + loglik)
        else:
            add(T, log_mass + math.log(1.0 - pi) + loglik)
            add(T - 1, log_mass + math.log(pi) + loglik)

    logs = {r: _logsumexp(v) for r, v in masses.items()}
    total = _logsumexp(list(logs.values()))
    return {r: math.exp(lp - total) for r, lp in logs.items()}


def _logsumexp(values):
    m = max(values)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(v - m) for v in values))


def finite_diff_jacobian(fn, theta, step=1e-5):
    """Central finite-difference Jacobian of fn: R^m -> R^d."""
    theta = np.asarray(theta, dtype=float)
    f0 = np.atleast_1d(fn(theta))
    jac = np.empty((f0.size, theta.size))
    for j in range(theta.size):
        hi = theta.copy()
        lo = theta.copy()
        hi[j] += step
        lo[j] -= step
        jac[:, j] = (np.atleast_1d(fn(hi)) - np.atleast_1d(fn(lo))) / (2.0 * step)
    return jac
