"""Dense small-matrix numerics and log-space probability utilities.

All hypothesis masses in this package are carried as natural-log values;
probabilities are materialized only at API boundaries.  Positive
semi-definiteness is policed with a single tolerance, ``PSD_TOL``, taken
relative to the matrix trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Global PSD tolerance, relative to max(1, |trace|).  Override per call via
# the ``tol`` keyword accepted by the numeric routines below.
PSD_TOL = 1e-9

# Log-space mass (natural log).  -inf encodes zero mass; NaN is never valid.
LogWeight = float


class NumericDomainError(ValueError):
    """A matrix left the PSD domain beyond the repair tolerance."""


class ConfigError(ValueError):
    """A configuration is missing required parameters or carries unknown ones."""


def _tol_abs(trace: float, tol: float | None) -> float:
    t = PSD_TOL if tol is None else tol
    return t * max(1.0, abs(float(trace)))


@dataclass(frozen=True)
class GaussBelief:
    """Gaussian belief over model parameters: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"cov shape {cov.shape} inconsistent with mean length {mean.size}"
            )
        if np.isnan(mean).any() or np.isnan(cov).any():
            raise ValueError("belief contains NaN")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class LinearDynamics:
    """Affine-Gaussian parameter dynamics: next mean F mu + b, noise Q."""

    F: np.ndarray
    b: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        m = F.shape[0]
        if F.shape != (m, m) or b.shape != (m,) or Q.shape != (m, m):
            raise ValueError(
                f"inconsistent dynamics shapes F{F.shape} b{b.shape} Q{Q.shape}"
            )
        tol = _tol_abs(np.trace(Q), None)
        if np.abs(Q - Q.T).max() > tol:
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh((Q + Q.T) / 2.0).min() < -tol:
            raise ValueError("Q must be PSD within tolerance")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self) -> int:
        return self.F.shape[0]


def logsumexp(values) -> float:
    """log sum exp of a non-empty list, stable under large magnitudes.

    Zero-mass (-inf) entries are ignored; the result is never below
    max(values).
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("logsumexp of an empty list")
    m = v.max()
    if not np.isfinite(m):
        return float(m)  # all -inf (or +inf dominates)
    return float(m + np.log(np.exp(v - m).sum()))


def symmetrize_psd(cov: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Return the symmetric part (A + A^T)/2, repaired onto the PSD cone.

    Eigenvalues in (-tol, 0) are clamped to zero by a minimal diagonal
    shift; an eigenvalue below -tol (relative to trace) raises
    NumericDomainError.
    """
    a = np.asarray(cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    s = (a + a.T) / 2.0
    wmin = float(np.linalg.eigvalsh(s).min())
    if wmin >= 0.0:
        return s
    if wmin < -_tol_abs(np.trace(s), tol):
        raise NumericDomainError(
            f"matrix is not PSD within tolerance (min eigenvalue {wmin:.3e}):\n{s}"
        )
    return s + (-wmin) * np.eye(s.shape[0])


def symmetrize_psd_batch(covs: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Vectorized symmetrize_psd over a (k, d, d) stack."""
    s = (covs + covs.transpose(0, 2, 1)) / 2.0
    wmin = np.linalg.eigvalsh(s).min(axis=1)
    traces = np.einsum("kii->k", s)
    bad = wmin < -np.maximum(1.0, np.abs(traces)) * (PSD_TOL if tol is None else tol)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NumericDomainError(
            f"matrix {k} of batch is not PSD within tolerance "
            f"(min eigenvalue {wmin[k]:.3e}):\n{s[k]}"
        )
    shift = np.where(wmin < 0.0, -wmin, 0.0)
    return s + shift[:, None, None] * np.eye(s.shape[1])


def gaussian_log_pdf(y, mean, cov, tol: float | None = None) -> float:
    """log N(y | mean, cov) via a stable symmetric factorization.

    cov must be PSD within tolerance; matrices beyond tolerance raise
    NumericDomainError.  Singular-but-PSD covariances are evaluated on a
    minimally jittered matrix, so the result stays deterministic.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    c = np.atleast_2d(np.asarray(cov, dtype=float))
    d = y.size
    if mean.size != d or c.shape != (d, d):
        raise ValueError(
            f"dimension mismatch: y{y.shape} mean{mean.shape} cov{c.shape}"
        )
    e = y - mean
    if d == 1:
        v = float(c[0, 0])
        ta = _tol_abs(v, tol)
        if v < -ta:
            raise NumericDomainError(f"negative variance {v:.3e}")
        v = max(v, ta)
        return float(-0.5 * (np.log(2.0 * np.pi * v) + e[0] * e[0] / v))
    s = (c + c.T) / 2.0
    try:
        cf = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        wmin = float(np.linalg.eigvalsh(s).min())
        ta = _tol_abs(np.trace(s), tol)
        if wmin < -ta:
            raise NumericDomainError(
                f"covariance is not PSD within tolerance "
                f"(min eigenvalue {wmin:.3e}):\n{s}"
            ) from None
        s = s + (max(0.0, -wmin) + ta) * np.eye(d)
        cf = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
    quad = float(e @ scipy.linalg.cho_solve(cf, e, check_finite=False))
    logdet = 2.0 * float(np.log(np.diag(cf[0])).sum())
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)


def gaussian_log_pdf_batch(y: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """log N(y | means_k, covs_k) over a batch k; y is (d,), means (k, d), covs (k, d, d).

    Fast path for d == 1; the general path uses batched Cholesky factors.
    """
    e = y[None, :] - means
    d = y.size
    if d == 1:
        v = covs[:, 0, 0]
        ta = np.maximum(1.0, np.abs(v)) * PSD_TOL
        if (v < -ta).any():
            k = int(np.flatnonzero(v < -ta)[0])
            raise NumericDomainError(f"negative variance {v[k]:.3e} in batch item {k}")
        v = np.maximum(v, ta)
        return -0.5 * (np.log(2.0 * np.pi * v) + e[:, 0] ** 2 / v)
    s = (covs + covs.transpose(0, 2, 1)) / 2.0
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        # fall back item by item; the scalar path repairs or raises
        return np.array([gaussian_log_pdf(y, means[k], covs[k]) for k in range(covs.shape[0])])
    z = np.linalg.solve(chol, e[:, :, None])[:, :, 0]
    quad = (z**2).sum(axis=1)
    logdet = 2.0 * np.log(np.einsum("kii->ki", chol)).sum(axis=1)
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
