"""Measurement models: link functions h, parameter Jacobians, noise models.

Families
--------
linear-gaussian      y = theta . phi(x) + Gaussian noise R
segment-poly-gaussian y = theta . [1, dx, dx^2] + noise, dx = x - anchor_x
mlp-gaussian         y = MLP(theta; x) + noise, dense ReLU layers
bernoulli-logit      natural parameter eta = theta . phi(x), y in {0, 1}
categorical-softmax  C classes, C-1 free logits (last class pinned to 0)

For the Gaussian families ``apply_h`` returns the predictive mean; for the
exponential families it returns the natural-parameter vector (logits) whose
moments come from ``expfam_moments``.  MLP parameters are flattened in layer
order: weights row-major, then biases, per layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, GaussBelief, gaussian_log_pdf, symmetrize_psd

GAUSSIAN_FAMILIES = ("linear-gaussian", "mlp-gaussian", "segment-poly-gaussian")
EXPFAM_FAMILIES = ("bernoulli-logit", "categorical-softmax")
FAMILIES = GAUSSIAN_FAMILIES + EXPFAM_FAMILIES


def _phi_identity(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _phi_bias(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.concatenate(([1.0], x))


def _phi_poly2(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != 1:
        raise ValueError("poly2 basis expects a scalar feature")
    return np.array([1.0, x[0], x[0] ** 2])


FEATURE_MAPS = {
    "identity": _phi_identity,
    "bias": _phi_bias,
    "poly2": _phi_poly2,
}


@dataclass(frozen=True)
class SegmentAnchor:
    """Feature value recorded at the last segment reset (x at runlength 0)."""

    anchor_x: float


@dataclass(frozen=True)
class MeasurementSpec:
    """One measurement-model family instance.

    obs_noise is the (d, d) observation covariance and must be given iff the
    family has a Gaussian likelihood.  hidden/in_dim describe the MLP
    architecture (ReLU hidden activations, identity output).
    """

    family: str
    out_dim: int = 1
    obs_noise: np.ndarray | None = None
    feature_map: str | None = None
    hidden: tuple[int, ...] = ()
    activation: str = "relu"
    in_dim: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown measurement family {self.family!r}")
        if self.family in GAUSSIAN_FAMILIES:
            if self.obs_noise is None:
                raise ConfigError(f"{self.family} requires obs_noise")
            R = np.atleast_2d(np.asarray(self.obs_noise, dtype=float))
            if R.shape != (self.out_dim, self.out_dim):
                raise ConfigError(
                    f"obs_noise shape {R.shape} does not match out_dim {self.out_dim}"
                )
            symmetrize_psd(R)  # validates PSD
            object.__setattr__(self, "obs_noise", R)
        else:
            if self.obs_noise is not None:
                raise ConfigError(f"{self.family} does not take obs_noise")
        if self.family == "bernoulli-logit" and self.out_dim != 1:
            raise ConfigError("bernoulli-logit has out_dim 1")
        if self.family == "categorical-softmax" and self.out_dim < 2:
            raise ConfigError("categorical-softmax needs out_dim = C >= 2 classes")
        if self.feature_map is not None and self.feature_map not in FEATURE_MAPS:
            raise ConfigError(f"unknown feature_map {self.feature_map!r}")
        if self.family == "mlp-gaussian":
            if self.in_dim is None or not self.hidden:
                raise ConfigError("mlp-gaussian requires in_dim and hidden widths")
            if self.activation != "relu":
                raise ConfigError("only relu hidden activations are supported")
            object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        elif self.hidden:
            raise ConfigError("hidden widths only apply to mlp-gaussian")
        if self.family == "segment-poly-gaussian" and self.feature_map is not None:
            raise ConfigError("segment-poly-gaussian builds its own basis")

    @property
    def is_gaussian(self) -> bool:
        return self.family in GAUSSIAN_FAMILIES

    @property
    def n_classes(self) -> int:
        if self.family != "categorical-softmax":
            raise ValueError("n_classes only defined for categorical-softmax")
        return self.out_dim

    def phi(self, x) -> np.ndarray:
        fn = FEATURE_MAPS[self.feature_map or "identity"]
        return fn(x)

    def layer_shapes(self) -> list[tuple[int, int]]:
        if self.family != "mlp-gaussian":
            raise ValueError("layer_shapes only defined for mlp-gaussian")
        dims = [self.in_dim, *self.hidden, self.out_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    def param_count(self, x=None) -> int:
        """Number of parameters, given a feature vector where it depends on x."""
        if self.family == "mlp-gaussian":
            return sum(o * i + o for o, i in self.layer_shapes())
        if self.family == "segment-poly-gaussian":
            return 3
        q = self.phi(x).size
        if self.family == "categorical-softmax":
            return (self.out_dim - 1) * q
        return q


def _mlp_forward_jac(spec: MeasurementSpec, theta: np.ndarray, x: np.ndarray):
    """Forward pass plus reverse-accumulated Jacobian d out / d theta.

    ReLU subgradient at exactly 0 is taken as 0.
    """
    shapes = spec.layer_shapes()
    Ws, bs, pos = [], [], 0
    for o, i in shapes:
        Ws.append(theta[pos : pos + o * i].reshape(o, i))
        pos += o * i
        bs.append(theta[pos : pos + o])
        pos += o
    if pos != theta.size:
        raise ValueError(f"theta has {theta.size} entries, expected {pos}")
    acts = [np.atleast_1d(np.asarray(x, dtype=float))]
    pre = []
    for li, (W, b) in enumerate(zip(Ws, bs)):
        z = W @ acts[-1] + b
        pre.append(z)
        acts.append(np.maximum(z, 0.0) if li < len(Ws) - 1 else z)
    out = acts[-1]
    d = out.size
    jac = np.empty((d, theta.size))
    # delta = d out / d z_l, propagated backwards
    delta = np.eye(d)
    pos = theta.size
    for li in range(len(Ws) - 1, -1, -1):
        o, i = shapes[li]
        pos -= o
        jac[:, pos : pos + o] = delta
        pos -= o * i
        jac[:, pos : pos + o * i] = np.einsum("do,i->doi", delta, acts[li]).reshape(d, o * i)
        if li > 0:
            delta = (delta @ Ws[li]) * (pre[li - 1] > 0.0)
    return out, jac


def apply_h(
    spec: MeasurementSpec,
    theta,
    x,
    anchor: SegmentAnchor | None = None,
):
    """Evaluate the measurement link and its parameter Jacobian at theta.

    Returns (out, jac) with out = h(theta; x) (natural parameters for the
    exponential families) and jac = d h / d theta, shape (d, m).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if spec.family == "segment-poly-gaussian":
        if anchor is None:
            raise ValueError("segment-poly-gaussian requires a SegmentAnchor")
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if xs.size != 1 or theta.size != 3:
            raise ValueError("segment-poly expects scalar x and 3 parameters")
        dx = xs[0] - anchor.anchor_x
        basis = np.array([1.0, dx, dx * dx])
        return np.array([theta @ basis]), basis[None, :]
    if anchor is not None:
        raise ValueError(f"{spec.family} does not take an anchor")
    if spec.family in ("linear-gaussian", "bernoulli-logit"):
        phi = spec.phi(x)
        if theta.size != phi.size:
            raise ValueError(
                f"theta length {theta.size} does not match basis length {phi.size}"
            )
        return np.array([theta @ phi]), phi[None, :]
    if spec.family == "categorical-softmax":
        phi = spec.phi(x)
        free = spec.out_dim - 1
        if theta.size != free * phi.size:
            raise ValueError(
                f"theta length {theta.size}, expected {(free, phi.size)} flattened"
            )
        W = theta.reshape(free, phi.size)
        return W @ phi, np.kron(np.eye(free), phi)
    return _mlp_forward_jac(spec, theta, x)


def expfam_moments(spec: MeasurementSpec, eta):
    """First two log-partition derivatives at natural parameters eta.

    Bernoulli: mean sigma(eta), variance sigma(1 - sigma).  Categorical with
    C classes and C-1 free logits: mean is the full softmax probability
    vector, covariance is diag(p) - p p^T restricted to the free coordinates.
    """
    if spec.family not in EXPFAM_FAMILIES:
        raise ConfigError(f"expfam_moments unsupported for family {spec.family!r}")
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if spec.family == "bernoulli-logit":
        if eta.size != 1:
            raise ValueError("bernoulli-logit has a single natural parameter")
        p = 1.0 / (1.0 + np.exp(-eta[0]))
        return np.array([p]), np.array([[p * (1.0 - p)]])
    free = spec.out_dim - 1
    if eta.size != free:
        raise ValueError(f"expected {free} free logits, got {eta.size}")
    z = np.concatenate([eta, [0.0]])
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    R = np.diag(p[:free]) - np.outer(p[:free], p[:free])
    return p, R


def _free_obs(spec: MeasurementSpec, y) -> np.ndarray:
    """Observation in the coordinates the update operates on."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if spec.family == "categorical-softmax":
        if y.size == spec.out_dim:
            return y[: spec.out_dim - 1]
        if y.size == 1:  # class index
            onehot = np.zeros(spec.out_dim)
            onehot[int(y[0])] = 1.0
            return onehot[: spec.out_dim - 1]
        raise ValueError(f"categorical observation of size {y.size}")
    return y


def moments_for_update(
    spec: MeasurementSpec,
    mean: np.ndarray,
    x,
    anchor: SegmentAnchor | None = None,
):
    """Linearization (yhat, jac, R) at the prior mean, for any family.

    Gaussian families use obs_noise; the exponential families are
    moment-matched at eta = h(mean, x) with the Jacobian taken in
    natural-parameter space.
    """
    out, jac = apply_h(spec, mean, x, anchor)
    if spec.is_gaussian:
        return out, jac, spec.obs_noise
    yhat, R = expfam_moments(spec, out)
    if spec.family == "categorical-softmax":
        yhat = yhat[: spec.out_dim - 1]
    return yhat, jac, R


def predictive_log_density(
    spec: MeasurementSpec,
    prior: GaussBelief,
    x,
    y,
    anchor: SegmentAnchor | None = None,
) -> float:
    """log p(y | x, prior) under linearization at the prior mean.

    Gaussian families: exact N(y | h(mu, x), H Sigma H^T + R).  Exponential
    families: moment-matched Gaussian with mean and noise from
    ``expfam_moments`` at eta = h(mu, x).
    """
    yhat, jac, R = moments_for_update(spec, prior.mean, x, anchor)
    S = jac @ prior.cov @ jac.T + R
    return gaussian_log_pdf(_free_obs(spec, y), yhat, S)


def link_mean(
    spec: MeasurementSpec,
    theta,
    x,
    anchor: SegmentAnchor | None = None,
) -> np.ndarray:
    """Predictive mean on the observation scale (probabilities for classifiers)."""
    out, _ = apply_h(spec, theta, x, anchor)
    if spec.is_gaussian:
        return out
    return expfam_moments(spec, out)[0]


def linearize_bank(
    spec: MeasurementSpec,
    means: np.ndarray,
    x,
    anchors: np.ndarray | None = None,
):
    """Batched (yhats, jacs, Rs) across hypothesis means.

    means is (k, m); returns yhats (k, d'), jacs (k, d', m), Rs (k, d', d')
    where d' is the update dimension (C-1 for categorical).  Linear-in-theta
    families take vectorized fast paths; MLP falls back to a loop.
    """
    k = means.shape[0]
    if spec.family in ("linear-gaussian", "bernoulli-logit"):
        phi = spec.phi(x)
        etas = means @ phi  # (k,)
        jacs = np.broadcast_to(phi[None, None, :], (k, 1, phi.size))
        if spec.family == "linear-gaussian":
            Rs = np.broadcast_to(spec.obs_noise[None], (k, 1, 1))
            return etas[:, None], jacs, Rs
        p = 1.0 / (1.0 + np.exp(-etas))
        return p[:, None], jacs, (p * (1.0 - p))[:, None, None]
    if spec.family == "segment-poly-gaussian":
        if anchors is None:
            raise ValueError("segment-poly-gaussian requires anchors")
        xs = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
        dx = xs - anchors
        basis = np.stack([np.ones(k), dx, dx * dx], axis=1)  # (k, 3)
        yhats = np.einsum("km,km->k", means, basis)[:, None]
        Rs = np.broadcast_to(spec.obs_noise[None], (k, 1, 1))
        return yhats, basis[:, None, :], Rs
    outs, jacs, Rs = [], [], []
    for i in range(k):
        yhat, jac, R = moments_for_update(spec, means[i], x)
        outs.append(yhat)
        jacs.append(jac)
        Rs.append(R)
    return np.stack(outs), np.stack(jacs), np.stack(Rs)
