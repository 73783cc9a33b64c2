"""Named method compositions and the generic predict/update step.

A method pairs a measurement spec with a conditional-prior policy, a
weighting rule implied by the name, and optional hazard / capacity /
robustness knobs.  Every method's state is a hypothesis bank (a singleton
for the single-hypothesis methods), so one step is: build the conditional
prior per hypothesis, update it against (x, y), refresh the weights, and
optionally emit the weighted one-step-ahead prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError, GaussBelief
from .measurement import (
    MeasurementSpec,
    SegmentAnchor,
    link_mean,
    predictive_log_density,
)
from .posterior import lg_update, wolf_update
from .priors import PriorPolicy, conditional_prior
from .weighting import (
    HazardSpec,
    HypothesisBank,
    cpp_empirical_bayes,
    greedy_ratio,
    rl_step,
)

METHOD_NAMES = (
    "C-Static",
    "C-ACI",
    "C-OU",
    "CPP-OU",
    "RL-PR[K]",
    "RL-PR[inf]",
    "WoLF+RL-PR",
    "RL-MMPR",
    "RL-OUPR",
)

_METHOD_KIND = {
    "C-Static": "static",
    "C-ACI": "aci",
    "C-OU": "ou",
    "CPP-OU": "cpp-ou",
    "RL-PR[K]": "rl-prior-reset",
    "RL-PR[inf]": "rl-prior-reset",
    "WoLF+RL-PR": "rl-prior-reset",
    "RL-MMPR": "rl-mmpr",
    "RL-OUPR": "rl-oupr",
}

RL_METHODS = ("RL-PR[K]", "RL-PR[inf]", "WoLF+RL-PR", "RL-MMPR")


@dataclass(frozen=True)
class MethodConfig:
    """A named method with its required sub-configurations."""

    name: str
    spec: MeasurementSpec
    policy: PriorPolicy
    hazard: HazardSpec | None = None
    capacity: int | None = None
    wolf_c: float | None = None
    cpp_steps: int = 10
    cpp_lr: float = 0.1
    drift_unpulled: bool = True

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.name!r}")
        want = _METHOD_KIND[self.name]
        if self.policy.kind != want:
            raise ConfigError(
                f"{self.name} requires prior kind {want!r}, got {self.policy.kind!r}"
            )
        if self.name in RL_METHODS + ("RL-OUPR",) and self.hazard is None:
            raise ConfigError(f"{self.name} requires a hazard spec")
        if self.name == "RL-PR[K]" and (self.capacity is None or self.capacity < 1):
            raise ConfigError("RL-PR[K] requires a positive capacity K")
        if self.name == "RL-PR[inf]" and self.capacity is not None:
            raise ConfigError("RL-PR[inf] keeps every hypothesis; drop K")
        if self.name == "WoLF+RL-PR" and self.wolf_c is None:
            raise ConfigError("WoLF+RL-PR requires the soft threshold wolf_c")
        if self.wolf_c is not None:
            if self.wolf_c <= 0:
                raise ConfigError("wolf_c must be positive")
            if not self.spec.is_gaussian:
                raise ConfigError("robust updates require a Gaussian-likelihood family")

    @property
    def is_rl_bank(self) -> bool:
        return self.name in RL_METHODS


@dataclass(frozen=True)
class AgentState:
    """Hypothesis bank plus timestep; a value threaded through the stream."""

    bank: HypothesisBank
    timestep: int = 0

    def __post_init__(self):
        if self.timestep != self.bank.timestep:
            raise ValueError("state and bank timesteps disagree")


def _needs_anchor(cfg: MethodConfig) -> bool:
    return cfg.spec.family == "segment-poly-gaussian"


def init_agent(cfg: MethodConfig, anchor_x: float | None = None) -> AgentState:
    """Fresh state at the base prior, runlength 0, unit mass."""
    if _needs_anchor(cfg) and anchor_x is None:
        anchor_x = 0.0
    bank = HypothesisBank.root(cfg.policy.base_prior, cfg.capacity, anchor_x)
    return AgentState(bank=bank, timestep=0)


def predict_weighted(state: AgentState, cfg: MethodConfig, x):
    """Weighted plug-in prediction sum_k nu_k h(mu_k; x) and the per-hypothesis parts.

    For classification families the per-hypothesis outputs are probability
    vectors, so the weighted sum is one as well.
    """
    bank = state.bank
    w = bank.weights
    per_hyp = []
    total = None
    for i in range(bank.size):
        yhat = link_mean(cfg.spec, bank.means[i], x, bank.anchor(i))
        per_hyp.append((float(w[i]), yhat))
        total = w[i] * yhat if total is None else total + w[i] * yhat
    return total, per_hyp


def _singleton_state(belief, runlength, t, anchor_x=None):
    anchors = None if anchor_x is None else np.array([float(anchor_x)])
    bank = HypothesisBank(
        runlengths=np.array([runlength]),
        log_joints=np.array([0.0]),
        means=belief.mean[None, :],
        covs=belief.cov[None, :, :],
        anchors=anchors,
        capacity=None,
        timestep=t,
    )
    return AgentState(bank=bank, timestep=t)


def _step_single(state: AgentState, cfg: MethodConfig, x, y) -> AgentState:
    bank = state.bank
    belief = bank.belief(0)
    anchor = bank.anchor(0)
    anchor_x = None if bank.anchors is None else float(bank.anchors[0])
    t = state.timestep + 1
    kind = cfg.policy.kind
    runlength = int(bank.runlengths[0]) + 1

    if kind == "cpp-ou":
        ups = cpp_empirical_bayes(
            belief, cfg.policy.base_prior, cfg.spec, x, y,
            steps=cfg.cpp_steps, lr=cfg.cpp_lr,
        )
        prior = conditional_prior(cfg.policy, belief, aux=ups)
    elif kind == "rl-oupr":
        p_grow = predictive_log_density(cfg.spec, belief, x, y, anchor)
        reset_anchor = None
        if _needs_anchor(cfg):
            reset_anchor = SegmentAnchor(float(np.atleast_1d(x)[0]))
        p_reset = predictive_log_density(cfg.spec, cfg.policy.base_prior, x, y, reset_anchor)
        nu = greedy_ratio(p_grow, p_reset, cfg.hazard)
        prior = conditional_prior(cfg.policy, belief, aux=runlength, weight=nu)
        if nu <= cfg.policy.epsilon:  # hard reset branch
            runlength = 0
            if _needs_anchor(cfg):
                anchor = reset_anchor
                anchor_x = reset_anchor.anchor_x
    else:  # static / ou / aci / shrink-perturb / lssm
        prior = conditional_prior(cfg.policy, belief)

    if cfg.wolf_c is not None:
        post, _ = wolf_update(prior, cfg.spec, x, y, cfg.wolf_c, anchor)
    else:
        post, _ = lg_update(prior, cfg.spec, x, y, anchor)
    return _singleton_state(post, runlength, t, anchor_x)


def bone_step(state: AgentState, cfg: MethodConfig, x, y, x_next=None):
    """One generic update step, optionally followed by the weighted prediction.

    Returns (new_state, yhat_next or None, per-hypothesis (weight, yhat)
    list for the prediction).  Errors raised inside a hypothesis update
    carry the hypothesis index in their message.
    """
    if cfg.is_rl_bank:
        bank = rl_step(
            state.bank, cfg.hazard, cfg.spec, cfg.policy, x, y, wolf_c=cfg.wolf_c
        )
        new_state = AgentState(bank=bank, timestep=state.timestep + 1)
    else:
        new_state = _step_single(state, cfg, x, y)
    if x_next is None:
        return new_state, None, []
    yhat, per_hyp = predict_weighted(new_state, cfg, x_next)
    return new_state, yhat, per_hyp


def drift_unobserved(state: AgentState, cfg: MethodConfig) -> AgentState:
    """Apply the data-free part of the conditional prior (for unpulled arms).

    OU, ACI, shrink-perturb, and LSSM beliefs diffuse without an
    observation; data-dependent kinds (cpp-ou, rl-*) are left unchanged
    because their auxiliary value needs the current observation.
    """
    kind = cfg.policy.kind
    if kind not in ("ou", "aci", "shrink-perturb", "lssm") or not cfg.drift_unpulled:
        return state
    bank = state.bank
    belief = conditional_prior(cfg.policy, bank.belief(0))
    anchor_x = None if bank.anchors is None else float(bank.anchors[0])
    out = _singleton_state(belief, int(bank.runlengths[0]), bank.timestep, anchor_x)
    return out


def thompson_action(
    states: list[AgentState],
    cfg: MethodConfig,
    x,
    rng: np.random.Generator,
) -> int:
    """Sample a parameter draw per arm from its modal-hypothesis belief and
    act greedily on the sampled expected rewards.  Ties break to the lowest
    arm index."""
    rewards = np.empty(len(states))
    for a, st in enumerate(states):
        i = st.bank.map_index
        belief = st.bank.belief(i)
        z = rng.standard_normal(belief.dim)
        if belief.dim == 1:
            theta = belief.mean + np.sqrt(max(belief.cov[0, 0], 0.0)) * z
        else:
            chol = np.linalg.cholesky(
                belief.cov + 1e-12 * np.eye(belief.dim)
            )
            theta = belief.mean + chol @ z
        yhat = link_mean(cfg.spec, theta, x, st.bank.anchor(i))
        rewards[a] = float(np.asarray(yhat).ravel()[0])
    return int(np.argmax(rewards))
