"""Shot-level Monte Carlo for the weak coupling + strong readout estimator.

Each shot prepares system (x) Gaussian pointer, couples the observable to
the pointer momentum, measures the strong basis, then reads a single
pointer quadrature: position for the first round(split * shots) shots,
momentum for the rest (the split is deterministic, not drawn).  The
estimators

    Re ~ mean(c_value * q) / gt
    Im ~ 2 sigma^2 * mean(c_value * k) / gt

converge to the weak limit of sum_c c P(c) <A^w>_c as shots grow, with the
usual 1/sqrt(shots) statistical error on top of the O((gt)^2) bias.

Reproducibility contract: draws come from a counter-based generator keyed
by the plan seed, and shot i owns exactly the stream slots 2i (strong
outcome) and 2i + 1 (readout, by inverse CDF).  The record for any shot is
therefore a pure function of (seed, shot index), independent of chunking
or execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .evolution import (
    CouplingSpec,
    apply_coupling,
    make_joint,
    reduced_momentum_density,
    reduced_position_density,
    strong_measure,
)
from .hilbert import OperatorMatrix, StateVector
from .protocols import ProtocolParams


@dataclass(frozen=True)
class ShotPlan:
    """How many shots, which seed, and the position/momentum shot split."""

    shots: int
    seed: int
    readout_split: float = 0.5

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if not 0.0 <= self.readout_split <= 1.0:
            raise ValueError(
                f"readout_split must lie in [0, 1], got {self.readout_split}"
            )


@dataclass(frozen=True)
class WeakStrongSetting:
    """One weakly coupled observable, one strong basis, one value per outcome."""

    system: StateVector | object
    observable: OperatorMatrix
    basis: Sequence[StateVector]
    outcome_values: Sequence[float]
    params: ProtocolParams

    def __post_init__(self) -> None:
        if len(self.outcome_values) != len(self.basis):
            raise ValueError("need one outcome value per basis ket")


@dataclass(frozen=True)
class SampledEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    shots_position: int
    shots_momentum: int


def _cell_cdf(mass: np.ndarray, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cdf = np.concatenate(([0.0], np.cumsum(mass)))
    cdf /= cdf[-1]
    return cdf, edges


def sample_protocol(setting: WeakStrongSetting, plan: ShotPlan) -> SampledEstimate:
    """Simulate the exact per-outcome pointer laws once, then draw shots."""
    params = setting.params
    (gt,) = params.couplings(1)
    sigma = params.sigma
    grid = params.grid(1)

    joint = make_joint(setting.system, [(grid, sigma)])
    joint = apply_coupling(joint, CouplingSpec(setting.observable, 0, gt, 1.0))
    outcomes = strong_measure(joint, list(setting.basis))

    probs = np.array([p for _, p, _ in outcomes])
    dq = grid.dq
    q_edges = np.concatenate((grid.positions - dq / 2, [grid.positions[-1] + dq / 2]))
    k_sorted = np.fft.fftshift(grid.wavenumbers)
    dk = grid.dk
    k_edges = np.concatenate((k_sorted - dk / 2, [k_sorted[-1] + dk / 2]))
    laws = []
    for i, _, conditioned in outcomes:
        if conditioned is None:
            laws.append(None)
            continue
        q_mass = reduced_position_density(conditioned, 0)
        k_mass = np.fft.fftshift(reduced_momentum_density(conditioned, 0))
        laws.append((_cell_cdf(q_mass, q_edges), _cell_cdf(k_mass, k_edges)))

    n_pos = int(round(plan.readout_split * plan.shots))
    n_mom = plan.shots - n_pos
    if 0.0 < plan.readout_split < 1.0 and (n_pos == 0 or n_mom == 0):
        raise ValueError(
            "readout split leaves one quadrature with zero shots;"
            " increase shots or pin readout_split to 0 or 1"
        )

    rng = np.random.Generator(np.random.Philox(key=plan.seed))
    u = rng.random(2 * plan.shots)
    u_outcome = u[0::2]
    u_readout = u[1::2]

    outcome_cdf = np.cumsum(probs)
    shot_outcome = np.minimum(
        np.searchsorted(outcome_cdf, u_outcome, side="right"), probs.size - 1
    )
    is_position = np.arange(plan.shots) < n_pos

    readout = np.zeros(plan.shots)
    for c_idx, law in enumerate(laws):
        sel = shot_outcome == c_idx
        if law is None or not sel.any():
            continue
        (q_cdf, qe), (k_cdf, ke) = law
        sel_q = sel & is_position
        sel_k = sel & ~is_position
        readout[sel_q] = np.interp(u_readout[sel_q], q_cdf, qe)
        readout[sel_k] = np.interp(u_readout[sel_k], k_cdf, ke)

    values = np.asarray(setting.outcome_values, dtype=float)
    weights = values[shot_outcome]
    re_samples = weights[is_position] * readout[is_position] / gt
    im_samples = 2 * sigma**2 * weights[~is_position] * readout[~is_position] / gt

    def _stats(samples: np.ndarray) -> tuple[float, float]:
        if samples.size == 0:
            return 0.0, float("inf")
        if samples.size == 1:
            return float(samples[0]), float("inf")
        return (
            float(samples.mean()),
            float(samples.std(ddof=1) / np.sqrt(samples.size)),
        )

    re_mean, re_err = _stats(re_samples)
    im_mean, im_err = _stats(im_samples)
    return SampledEstimate(
        value=complex(re_mean, im_mean),
        stderr_re=re_err,
        stderr_im=im_err,
        shots_position=n_pos,
        shots_momentum=n_mom,
    )
