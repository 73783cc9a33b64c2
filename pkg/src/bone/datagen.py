"""Seeded synthetic stream generators with ground truth.

Every generator is a pure function of its parameters and seed: identical
seeds give identical streams.  Records carry whatever truth the process
defines (true parameters, changepoint flags, per-arm reward probabilities).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEG5 = np.pi / 36.0  # 5 degrees


@dataclass(frozen=True)
class StreamRecord:
    """One (x, y) pair with optional ground-truth metadata."""

    t: int
    x: np.ndarray
    y: float | np.ndarray | None
    true_theta: np.ndarray | None = None
    is_changepoint: bool | None = None
    arm_probs: np.ndarray | None = None


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def gen_periodic_drift(T: int = 720, seed: int = 0) -> list[StreamRecord]:
    """Binary labels from a logistic model whose weights rotate 5 degrees
    per step at radius 10: theta_t = (10 sin(5 deg t), 10 cos(5 deg t)),
    x ~ U[-3, 3]^2."""
    rng = np.random.default_rng(seed)
    out = []
    for t in range(T):
        x = rng.uniform(-3.0, 3.0, size=2)
        theta = np.array([10.0 * np.sin(DEG5 * t), 10.0 * np.cos(DEG5 * t)])
        y = float(rng.random() < _sigmoid(theta @ x))
        out.append(StreamRecord(t=t, x=x, y=y, true_theta=theta))
    return out


def gen_drift_jumps(
    T: int = 1000,
    seed: int = 0,
    p_jump: float = 0.01,
    drift_sd: float = 0.01,
) -> list[StreamRecord]:
    """Logistic weights that random-walk slowly (sd 0.01 per step) and jump
    to a fresh U[-2, 2]^2 draw with probability 0.01; x ~ U[-3, 3]^2."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-2.0, 2.0, size=2)
    out = []
    for t in range(T):
        jumped = False
        if t > 0:
            if rng.random() < p_jump:
                theta = rng.uniform(-2.0, 2.0, size=2)
                jumped = True
            else:
                theta = theta + drift_sd * rng.standard_normal(2)
        x = rng.uniform(-3.0, 3.0, size=2)
        y = float(rng.random() < _sigmoid(theta @ x))
        out.append(
            StreamRecord(t=t, x=x, y=y, true_theta=theta.copy(), is_changepoint=jumped)
        )
    return out


def _student_t(rng: np.random.Generator, df: float) -> float:
    # normal / chi-square ratio; exact and seedable
    z = rng.standard_normal()
    v = rng.chisquare(df)
    return float(z / np.sqrt(v / df))


def gen_heavy_tail(
    T: int = 500,
    seed: int = 0,
    p_eps: float = 0.01,
    df: float = 2.01,
) -> list[StreamRecord]:
    """Piecewise quadratic regression with Student-t errors.

    x ~ U[-2, 2]; y = (1, x, x^2) . theta + t(df) noise at unit scale; theta
    jumps to U[-3, 3]^3 with probability p_eps per step.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-3.0, 3.0, size=3)
    out = []
    for t in range(T):
        jumped = False
        if t > 0 and rng.random() < p_eps:
            theta = rng.uniform(-3.0, 3.0, size=3)
            jumped = True
        x = rng.uniform(-2.0, 2.0)
        phi = np.array([1.0, x, x * x])
        y = float(phi @ theta + _student_t(rng, df))
        out.append(
            StreamRecord(
                t=t,
                x=np.array([x]),
                y=y,
                true_theta=theta.copy(),
                is_changepoint=jumped,
            )
        )
    return out


def gen_bandit_stream(
    arms: int = 10,
    T: int = 10000,
    seed: int = 0,
    walk_sd: float = 0.03,
) -> list[StreamRecord]:
    """Per-arm Bernoulli probabilities following clipped Gaussian walks:
    theta_t = clip(theta_{t-1} + 0.03 Z, 0, 1), theta_0 ~ U[0, 1].

    Rewards are not realized here; the harness draws them for the pulled
    arm.  The feature is the constant 1 (non-contextual).
    """
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.0, 1.0, size=arms)
    x = np.array([1.0])
    out = []
    for t in range(T):
        if t > 0:
            probs = np.clip(probs + walk_sd * rng.standard_normal(arms), 0.0, 1.0)
        out.append(StreamRecord(t=t, x=x, y=None, arm_probs=probs.copy()))
    return out


def gen_dependent_segments(
    T: int = 500,
    pi: float = 0.01,
    seed: int = 0,
    noise_sd: float = 0.1,
    coef_range: float = 1.0,
    x_max: float = 10.0,
) -> list[StreamRecord]:
    """Piecewise quadratics on a monotone feature grid, continuous across
    segment boundaries.

    x moves on a uniform grid over [0, x_max].  Within a segment anchored at
    x_s, the noiseless value is a + b dx + c dx^2 with dx = x - x_s.  A new
    segment starts with probability pi per step; its constant term equals
    the old curve's value at the boundary (continuity), and the remaining
    coefficients are fresh U[-coef_range, coef_range] draws.
    """
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, x_max, T) if T > 1 else np.zeros(max(T, 0))
    theta = rng.uniform(-coef_range, coef_range, size=3)
    anchor = xs[0] if T else 0.0
    out = []
    for t in range(T):
        x = xs[t]
        jumped = False
        if t > 0 and rng.random() < pi:
            dx = x - anchor
            boundary_value = theta @ np.array([1.0, dx, dx * dx])
            theta = np.array(
                [boundary_value, *rng.uniform(-coef_range, coef_range, size=2)]
            )
            anchor = x
            jumped = True
        dx = x - anchor
        f = theta @ np.array([1.0, dx, dx * dx])
        y = float(f + noise_sd * rng.standard_normal())
        out.append(
            StreamRecord(
                t=t,
                x=np.array([x]),
                y=y,
                true_theta=theta.copy(),
                is_changepoint=jumped,
            )
        )
    return out


GENERATORS = {
    "periodic-drift": gen_periodic_drift,
    "drift-jumps": gen_drift_jumps,
    "heavy-tail": gen_heavy_tail,
    "bandit": gen_bandit_stream,
    "dependent-segments": gen_dependent_segments,
}


def stream_to_rows(records: list[StreamRecord]):
    """Header and rows for CSV export (columns: t, x..., y..., truth...)."""
    if not records:
        return ["t"], []
    first = records[0]
    header = ["t"]
    q = np.atleast_1d(first.x).size
    header += [f"x{i}" for i in range(q)]
    if first.y is not None:
        header += ["y"]
    if first.true_theta is not None:
        header += [f"theta{i}" for i in range(np.atleast_1d(first.true_theta).size)]
    if first.is_changepoint is not None:
        header += ["changepoint"]
    if first.arm_probs is not None:
        header += [f"arm_p{i}" for i in range(np.atleast_1d(first.arm_probs).size)]
    rows = []
    for r in records:
        row = [r.t, *np.atleast_1d(r.x).tolist()]
        if r.y is not None:
            row += np.atleast_1d(r.y).tolist()
        if r.true_theta is not None:
            row += np.atleast_1d(r.true_theta).tolist()
        if r.is_changepoint is not None:
            row += [int(r.is_changepoint)]
        if r.arm_probs is not None:
            row += np.atleast_1d(r.arm_probs).tolist()
        rows.append(row)
    return header, rows
