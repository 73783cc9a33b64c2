"""Recursive Gaussian posterior computation.

Predict step, linearized-Gaussian update, exponential-family update (noise
moment-matched at the prior mean, single pass, no relinearization), and the
robust update that inflates the observation covariance by an
inverse-multiquadric weight of the standardized residual.

The covariance update is Sigma - K S K^T followed by PSD symmetrization;
the Joseph form is deliberately not used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GaussBelief,
    LinearDynamics,
    NumericDomainError,
    symmetrize_psd,
    symmetrize_psd_batch,
)
from .measurement import (
    MeasurementSpec,
    SegmentAnchor,
    _free_obs,
    moments_for_update,
)


@dataclass(frozen=True)
class UpdateDiagnostics:
    """Per-update byproducts: residual, innovation covariance, gain size, weight."""

    innovation: np.ndarray
    innovation_cov: np.ndarray
    gain_norm: float
    wolf_weight: float = 1.0


def kf_predict(belief: GaussBelief, dyn: LinearDynamics) -> GaussBelief:
    """Push a Gaussian belief through affine dynamics: (F mu + b, F Sigma F^T + Q)."""
    if dyn.dim != belief.dim:
        raise ValueError(f"dynamics dim {dyn.dim} != belief dim {belief.dim}")
    mean = dyn.F @ belief.mean + dyn.b
    cov = symmetrize_psd(dyn.F @ belief.cov @ dyn.F.T + dyn.Q)
    return GaussBelief(mean, cov)


def _imq_weights(errors: np.ndarray, Rs: np.ndarray, c: float) -> np.ndarray:
    """Inverse-multiquadric weights (1 + ||e||^2_{R^-1} / c^2)^(-1/2), batched."""
    if errors.shape[1] == 1:
        maha = errors[:, 0] ** 2 / Rs[:, 0, 0]
    else:
        sol = np.linalg.solve(Rs, errors[:, :, None])[:, :, 0]
        maha = np.einsum("kd,kd->k", errors, sol)
    return 1.0 / np.sqrt(1.0 + maha / (c * c))


def lg_update_arrays(
    means: np.ndarray,
    covs: np.ndarray,
    jacs: np.ndarray,
    yhats: np.ndarray,
    y: np.ndarray,
    Rs: np.ndarray,
):
    """Batched linearized-Gaussian update.

    means (k, m), covs (k, m, m), jacs (k, d, m), yhats (k, d), y (d,),
    Rs (k, d, d).  Returns (new_means, new_covs, errors, Ss, gain_norms).
    """
    e = y[None, :] - yhats  # (k, d)
    PHt = np.einsum("kmn,kdn->kmd", covs, jacs)  # Sigma H^T
    S = np.einsum("kdm,kme->kde", jacs, PHt) + Rs  # (k, d, d)
    S = (S + S.transpose(0, 2, 1)) / 2.0
    d = S.shape[1]
    if d == 1:
        s = S[:, 0, 0]
        if (s <= 0).any():
            k = int(np.flatnonzero(s <= 0)[0])
            raise NumericDomainError(
                f"singular innovation covariance {s[k]:.3e} (hypothesis {k})"
            )
        K = PHt[:, :, 0] / s[:, None]  # (k, m)
        new_means = means + K * e
        new_covs = covs - np.einsum("km,kn->kmn", K, K) * s[:, None, None]
        gain_norms = np.sqrt((K**2).sum(axis=1))
    else:
        try:
            Kt = np.linalg.solve(S, PHt.transpose(0, 2, 1))  # S^-1 H Sigma
        except np.linalg.LinAlgError as err:
            raise NumericDomainError(f"singular innovation covariance: {err}") from None
        K = Kt.transpose(0, 2, 1)  # (k, m, d)
        new_means = means + np.einsum("kmd,kd->km", K, e)
        KS = np.einsum("kmd,kde->kme", K, S)
        new_covs = covs - np.einsum("kme,kne->kmn", KS, K)
        gain_norms = np.sqrt((K**2).sum(axis=(1, 2)))
    new_covs = symmetrize_psd_batch(new_covs)
    return new_means, new_covs, e, S, gain_norms


def _update(
    prior: GaussBelief,
    spec: MeasurementSpec,
    x,
    y,
    anchor: SegmentAnchor | None,
    wolf_c: float | None,
):
    yhat, jac, R = moments_for_update(spec, prior.mean, x, anchor)
    yv = _free_obs(spec, y)
    w = 1.0
    if wolf_c is not None:
        if not spec.is_gaussian:
            raise ValueError("robust update requires a Gaussian-likelihood family")
        w = float(_imq_weights((yv - yhat)[None, :], R[None], wolf_c)[0])
        R = R / (w * w)
    means, covs, e, S, gains = lg_update_arrays(
        prior.mean[None],
        prior.cov[None],
        jac[None],
        yhat[None],
        yv,
        np.asarray(R)[None],
    )
    diag = UpdateDiagnostics(e[0], S[0], float(gains[0]), w)
    return GaussBelief(means[0], covs[0]), diag


def lg_update(
    prior: GaussBelief,
    spec: MeasurementSpec,
    x,
    y,
    anchor: SegmentAnchor | None = None,
):
    """One conditional-Bayes update of a Gaussian prior against (x, y).

    Exponential-family specs route the observation noise through the
    moment-matched covariance at the prior mean.  Returns the posterior
    belief and diagnostics.
    """
    return _update(prior, spec, x, y, anchor, None)


def wolf_update(
    prior: GaussBelief,
    spec: MeasurementSpec,
    x,
    y,
    c: float,
    anchor: SegmentAnchor | None = None,
):
    """Outlier-robust update: observation covariance inflated to R / W^2.

    W = (1 + ||y - h(mu, x)||^2_{R^-1} / c^2)^(-1/2), so a residual of c
    standard deviations halves the precision and W -> 0 bounds the influence
    of gross outliers.
    """
    if c <= 0:
        raise ValueError("soft threshold c must be positive")
    return _update(prior, spec, x, y, anchor, c)
