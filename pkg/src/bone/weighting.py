"""Hypothesis-bank weighting over the auxiliary variable.

Implements the joint runlength recursion (all hypotheses kept), top-K
pruning for the low-memory variants, the greedy single-hypothesis
likelihood ratio, and the empirical-Bayes changepoint-probability estimate.

Joint masses are kept unnormalized in log space; weights are normalized
only at read-out.  The bank stores hypotheses columnar (stacked arrays) so
a step over k hypotheses is a handful of batched matrix operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ConfigError, GaussBelief, gaussian_log_pdf_batch, logsumexp
from .measurement import MeasurementSpec, SegmentAnchor, _free_obs, linearize_bank
from .posterior import _imq_weights, lg_update_arrays
from .priors import PriorPolicy, mmpr_prior


@dataclass(frozen=True)
class Hypothesis:
    """One auxiliary-variable value with its log-joint mass and belief."""

    runlength: int
    log_joint: float
    belief: GaussBelief
    anchor: SegmentAnchor | None = None

    def __post_init__(self):
        if self.runlength < 0:
            raise ValueError(f"runlength must be nonnegative, got {self.runlength}")
        if np.isnan(self.log_joint):
            raise ValueError("log_joint is NaN")


@dataclass(frozen=True)
class HazardSpec:
    """Constant hazard rate pi, with an optional runlength-dependent hook."""

    pi: float
    rate_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 0.0 < self.pi < 1.0:
            raise ValueError(f"hazard rate must be in (0, 1), got {self.pi}")

    def rates(self, runlengths: np.ndarray) -> np.ndarray:
        if self.rate_fn is None:
            return np.full(np.shape(runlengths), self.pi)
        r = np.asarray(self.rate_fn(np.asarray(runlengths)), dtype=float)
        if ((r <= 0.0) | (r >= 1.0)).any():
            raise ValueError("hazard function must map into (0, 1)")
        return r


@dataclass(frozen=True)
class HypothesisBank:
    """Active hypothesis set: distinct runlengths, joint masses, beliefs.

    Stored columnar: runlengths (k,), log_joints (k,), means (k, m),
    covs (k, m, m), and per-hypothesis segment anchors (k,) when the
    measurement family needs them.  capacity None means unbounded.
    """

    runlengths: np.ndarray
    log_joints: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    anchors: np.ndarray | None = None
    capacity: int | None = None
    timestep: int = 0

    def __post_init__(self):
        r = np.asarray(self.runlengths, dtype=int)
        lj = np.asarray(self.log_joints, dtype=float)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covs, dtype=float)
        k = r.size
        if lj.shape != (k,) or means.shape[0] != k or covs.shape[0] != k:
            raise ValueError("inconsistent bank column lengths")
        if np.unique(r).size != k:
            raise ValueError(f"runlengths must be distinct, got {r}")
        if (r > self.timestep).any():
            raise ValueError("runlength exceeds the current timestep")
        if np.isnan(lj).any():
            raise ValueError("log_joints contain NaN")
        if self.capacity is not None:
            if self.capacity < 1:
                raise ValueError("capacity must be a positive integer")
            if k > self.capacity:
                raise ValueError(f"bank holds {k} hypotheses, capacity {self.capacity}")
        anchors = self.anchors
        if anchors is not None:
            anchors = np.asarray(anchors, dtype=float)
            if anchors.shape != (k,):
                raise ValueError("anchors column length mismatch")
        object.__setattr__(self, "runlengths", r)
        object.__setattr__(self, "log_joints", lj)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "anchors", anchors)

    @classmethod
    def root(
        cls,
        belief: GaussBelief,
        capacity: int | None = None,
        anchor_x: float | None = None,
    ) -> "HypothesisBank":
        """Initial bank: a single runlength-0 hypothesis with unit mass."""
        anchors = None if anchor_x is None else np.array([float(anchor_x)])
        return cls(
            runlengths=np.array([0]),
            log_joints=np.array([0.0]),
            means=belief.mean[None, :],
            covs=belief.cov[None, :, :],
            anchors=anchors,
            capacity=capacity,
            timestep=0,
        )

    @classmethod
    def from_hypotheses(
        cls,
        hyps,
        capacity: int | None = None,
        timestep: int = 0,
    ) -> "HypothesisBank":
        hyps = list(hyps)
        anchors = None
        if any(h.anchor is not None for h in hyps):
            anchors = np.array([h.anchor.anchor_x for h in hyps])
        return cls(
            runlengths=np.array([h.runlength for h in hyps]),
            log_joints=np.array([h.log_joint for h in hyps]),
            means=np.stack([h.belief.mean for h in hyps]),
            covs=np.stack([h.belief.cov for h in hyps]),
            anchors=anchors,
            capacity=capacity,
            timestep=timestep,
        )

    @property
    def size(self) -> int:
        return self.runlengths.size

    @property
    def hypotheses(self) -> tuple[Hypothesis, ...]:
        return tuple(
            Hypothesis(
                runlength=int(self.runlengths[i]),
                log_joint=float(self.log_joints[i]),
                belief=GaussBelief(self.means[i], self.covs[i]),
                anchor=None if self.anchors is None else SegmentAnchor(float(self.anchors[i])),
            )
            for i in range(self.size)
        )

    @property
    def log_weights(self) -> np.ndarray:
        """Normalized log posterior over hypotheses."""
        return self.log_joints - logsumexp(self.log_joints)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def map_index(self) -> int:
        """Index of the most likely hypothesis; ties go to the larger runlength."""
        order = np.lexsort((-self.runlengths, -self.log_joints))
        return int(order[0])

    @property
    def map_runlength(self) -> int:
        return int(self.runlengths[self.map_index])

    def belief(self, i: int) -> GaussBelief:
        return GaussBelief(self.means[i], self.covs[i])

    def anchor(self, i: int) -> SegmentAnchor | None:
        if self.anchors is None:
            return None
        return SegmentAnchor(float(self.anchors[i]))


def prune_topk(bank: HypothesisBank, K: int) -> HypothesisBank:
    """Keep the K hypotheses of largest joint mass, ties toward larger runlength.

    Survivors keep their relative order, so pruning with K >= size is a
    bit-exact no-op apart from recording the capacity.
    """
    if K < 1:
        raise ValueError("K must be a positive integer")
    if bank.size <= K:
        if bank.capacity == K:
            return bank
        return HypothesisBank(
            bank.runlengths, bank.log_joints, bank.means, bank.covs,
            anchors=bank.anchors, capacity=K, timestep=bank.timestep,
        )
    order = np.lexsort((-bank.runlengths, -bank.log_joints))
    keep = np.sort(order[:K])  # preserve existing relative order
    return HypothesisBank(
        bank.runlengths[keep],
        bank.log_joints[keep],
        bank.means[keep],
        bank.covs[keep],
        anchors=None if bank.anchors is None else bank.anchors[keep],
        capacity=K,
        timestep=bank.timestep,
    )


def _reset_prior(bank: HypothesisBank, policy: PriorPolicy, pi: float) -> GaussBelief:
    if policy.kind == "rl-mmpr":
        return mmpr_prior(bank, pi)
    return policy.base_prior


def rl_step(
    bank: HypothesisBank,
    hazard: HazardSpec,
    spec: MeasurementSpec,
    policy: PriorPolicy,
    x,
    y,
    wolf_c: float | None = None,
) -> HypothesisBank:
    """One joint-recursion step: grow every hypothesis, add the reset, prune.

    Growth branch k: runlength + 1, log-joint += log p(y | hypothesis k)
    + log(1 - pi); belief updated on its conditional prior.  Reset branch:
    runlength 0 with mass p(y | reset prior) * sum_k joint_k * pi, belief
    updated from the reset prior, recording a fresh segment anchor for
    segment models.  When a robust threshold ``wolf_c`` is set, both the
    updates and the per-hypothesis predictive densities use the inflated
    observation covariance R / W^2, so outliers neither drag the beliefs nor
    trigger spurious resets.
    """
    if bank.size == 0:
        raise ValueError("rl_step on an empty hypothesis bank")
    if policy.kind not in ("rl-prior-reset", "rl-mmpr"):
        raise ConfigError(f"rl_step requires a runlength prior policy, got {policy.kind!r}")
    pis = hazard.rates(bank.runlengths)
    reset = _reset_prior(bank, policy, hazard.pi)

    # stack growth priors (tracked beliefs) with the reset prior
    means = np.concatenate([bank.means, reset.mean[None, :]])
    covs = np.concatenate([bank.covs, reset.cov[None, :, :]])
    segmental = spec.family == "segment-poly-gaussian"
    anchors = None
    if segmental:
        if bank.anchors is None:
            raise ValueError("segment-poly bank must carry anchors")
        x_now = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
        anchors = np.concatenate([bank.anchors, [x_now]])

    yhats, jacs, Rs = linearize_bank(spec, means, x, anchors)
    yv = _free_obs(spec, y)
    if wolf_c is not None:
        if not spec.is_gaussian:
            raise ConfigError("robust runlength steps require a Gaussian-likelihood family")
        W = _imq_weights(yv[None, :] - yhats, np.ascontiguousarray(Rs), wolf_c)
        Rs = Rs / (W * W)[:, None, None]
    S = np.einsum("kdm,kmn,ken->kde", jacs, covs, jacs) + Rs
    log_preds = gaussian_log_pdf_batch(yv, yhats, S)

    new_means, new_covs, _, _, _ = lg_update_arrays(means, covs, jacs, yhats, yv, Rs)

    grow_joints = bank.log_joints + log_preds[:-1] + np.log1p(-pis)
    reset_joint = log_preds[-1] + logsumexp(bank.log_joints + np.log(pis))
    out = HypothesisBank(
        runlengths=np.concatenate([bank.runlengths + 1, [0]]),
        log_joints=np.concatenate([grow_joints, [reset_joint]]),
        means=new_means,
        covs=new_covs,
        anchors=anchors,
        capacity=None,
        timestep=bank.timestep + 1,
    )
    if bank.capacity is not None:
        return prune_topk(out, bank.capacity)
    return out


def greedy_ratio(p_grow: float, p_reset: float, hazard: HazardSpec) -> float:
    """Continuation probability nu from the two predictive log densities.

    nu = e^{p_grow} (1 - pi) / (e^{p_reset} pi + e^{p_grow} (1 - pi)),
    evaluated in log space.
    """
    if np.isinf(p_grow) and np.isinf(p_reset) and p_grow < 0 and p_reset < 0:
        raise ValueError("both predictive densities are zero")
    pi = hazard.pi
    lg = p_grow + np.log1p(-pi)
    lr = p_reset + np.log(pi)
    return float(np.exp(lg - logsumexp([lg, lr])))


def cpp_empirical_bayes(
    prev: GaussBelief,
    base: GaussBelief,
    spec: MeasurementSpec,
    x,
    y,
    steps: int = 10,
    lr: float = 0.1,
) -> float:
    """Changepoint probability maximizing the one-step predictive density.

    Gradient ascent on upsilon in [0, 1] with central finite differences
    (one-sided at the boundaries), initialized at 1 (full continuity).  The
    conditional prior at rate upsilon is the blend
    (u mu + (1-u) mu0, u^2 Sigma + (1-u^2) Sigma0).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    from .measurement import predictive_log_density  # local to avoid cycle at import

    def objective(u: float) -> float:
        mean = u * prev.mean + (1.0 - u) * base.mean
        cov = u * u * prev.cov + (1.0 - u * u) * base.cov
        return predictive_log_density(spec, GaussBelief(mean, cov), x, y)

    u = 1.0
    h = 1e-4
    for _ in range(steps):
        hi = min(u + h, 1.0)
        lo = max(u - h, 0.0)
        if hi == lo:
            break
        g = (objective(hi) - objective(lo)) / (hi - lo)
        u = min(1.0, max(0.0, u + lr * g))
    return u


def runlength_posterior_rows(banks) -> list[tuple[int, int, float]]:
    """(t, r, log_posterior) rows over a sequence of banks, for CSV export."""
    rows = []
    for bank in banks:
        lw = bank.log_weights
        for i in range(bank.size):
            rows.append((int(bank.timestep), int(bank.runlengths[i]), float(lw[i])))
    return rows
