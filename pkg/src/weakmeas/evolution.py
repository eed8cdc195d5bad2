"""Exact joint evolution of a system coupled to Gaussian pointers.

A JointState is an ensemble of pure branches: mixed system states enter as
the eigendecomposition of rho (one branch per eigenvector, weighted by the
eigenvalue), which is exact for every expectation value by linearity of
Tr[. rho].  Each branch is a complex tensor of shape (N, M_1, ..., M_P),
axis 0 the system and one axis per pointer.

Couplings are the impulsive von Neumann unitaries

    exp(-i g A K t)            momentum coupling, translates the pointer,
    exp(-i g A Q t)            position coupling, kicks its momentum,
    exp(-i g2 E K_dst Q_src t) conditional coupling between two pointers,

applied spectrally: diagonalize the Hermitian system factor, multiply the
appropriate phases in the mixed representation, transform back.  All
operations preserve branch norms and return new immutable states.

Accumulated worst-case displacements are tracked per pointer and capped at a
quarter of the grid extent in the relevant representation, keeping spectral
wrap-around below Gaussian tail level.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple, Sequence

import numpy as np

from .hilbert import DensityMatrix, OperatorMatrix, StateVector
from .pointer import PointerGrid, WrapAroundError, gaussian_pointer

HERMITIAN_TOL = 1e-10


class PostselectionError(RuntimeError):
    """Post-selection outcome has (numerically) zero probability."""


class Branch(NamedTuple):
    weight: float
    amps: np.ndarray


class JointState:
    """Weighted ensemble of pure system-pointer branches."""

    def __init__(
        self,
        branches: Sequence[Branch],
        grids: Sequence[PointerGrid],
        sigmas: Sequence[float],
        q_shifts: Sequence[float] | None = None,
        k_shifts: Sequence[float] | None = None,
    ) -> None:
        self.grids = tuple(grids)
        self.sigmas = tuple(float(s) for s in sigmas)
        if len(self.grids) != len(self.sigmas):
            raise ValueError("need one sigma per pointer grid")
        self.q_shifts = tuple(q_shifts) if q_shifts is not None else (0.0,) * len(self.grids)
        self.k_shifts = tuple(k_shifts) if k_shifts is not None else (0.0,) * len(self.grids)
        measure = self.measure
        shape_tail = tuple(g.points for g in self.grids)
        checked = []
        total = 0.0
        for weight, amps in branches:
            amps = np.asarray(amps, dtype=complex)
            if amps.shape[1:] != shape_tail:
                raise ValueError(
                    f"branch shape {amps.shape} incompatible with grids {shape_tail}"
                )
            norm = np.sum(np.abs(amps) ** 2) * measure
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"branch norm^2 = {norm}, expected 1")
            if not 0.0 < weight <= 1.0 + 1e-12:
                raise ValueError(f"branch weight {weight} outside (0, 1]")
            total += weight
            checked.append(Branch(float(weight), amps))
        if not checked:
            raise ValueError("joint state needs at least one branch")
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"branch weights sum to {total}, expected 1")
        self.branches = tuple(checked)

    @property
    def measure(self) -> float:
        out = 1.0
        for g in self.grids:
            out *= g.dq
        return out

    @property
    def num_pointers(self) -> int:
        return len(self.grids)

    @property
    def dim(self) -> int:
        return self.branches[0].amps.shape[0]

    def _replace_branches(self, branches, q_shifts=None, k_shifts=None) -> "JointState":
        return JointState(
            branches,
            self.grids,
            self.sigmas,
            self.q_shifts if q_shifts is None else q_shifts,
            self.k_shifts if k_shifts is None else k_shifts,
        )

    def __repr__(self) -> str:
        return (
            f"JointState(dim={self.dim}, pointers={self.num_pointers},"
            f" branches={len(self.branches)})"
        )


@dataclass(frozen=True)
class CouplingSpec:
    """One von Neumann interaction: Hermitian observable, target pointer,
    strength g, duration t, and which pointer variable it couples to."""

    observable: OperatorMatrix
    pointer_index: int
    g: float
    t: float
    variable: str = "K"

    def __post_init__(self) -> None:
        if self.variable not in ("K", "Q"):
            raise ValueError(f"variable must be 'K' or 'Q', got {self.variable!r}")
        m = self.observable.matrix
        defect = np.max(np.abs(m - m.conj().T))
        if defect > HERMITIAN_TOL:
            raise ValueError(
                f"coupling observable not Hermitian (defect {defect:.2e});"
                " non-Hermitian products arise from coupling sequences only"
            )

    @property
    def gt(self) -> float:
        return self.g * self.t


def _coupling_eigs(op: OperatorMatrix) -> tuple[np.ndarray, np.ndarray]:
    m = op.matrix
    lam, vecs = np.linalg.eigh(m)
    # projectors get their exact {0, 1} spectrum back
    if np.max(np.abs(m @ m - m)) <= HERMITIAN_TOL:
        lam = np.where(lam > 0.5, 1.0, 0.0)
    return lam, vecs


def _axis_view(vec: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vec.size
    return vec.reshape(shape)


def make_joint(system, pointers: Sequence[tuple[PointerGrid, float]]) -> JointState:
    """Assemble system (x) phi_i (x) ... (x) phi_i.

    Mixed systems become one branch per eigenvector of rho; eigenvalues
    below 1e-12 are dropped and the remaining weights renormalized.
    """
    grids = [g for g, _ in pointers]
    sigmas = [s for _, s in pointers]
    pointer_amps = [gaussian_pointer(g, s).amps for g, s in pointers]
    if isinstance(system, StateVector):
        vecs = [(1.0, system.amps)]
    elif isinstance(system, DensityMatrix):
        w, v = np.linalg.eigh(system.matrix)
        keep = w > 1e-12
        w, v = w[keep], v[:, keep]
        w = w / w.sum()
        vecs = [(float(wi), v[:, i]) for i, wi in enumerate(w)]
    else:
        raise TypeError(f"system must be StateVector or DensityMatrix, got {type(system)}")
    branches = []
    for weight, vec in vecs:
        amps = vec
        for pa in pointer_amps:
            amps = np.multiply.outer(amps, pa)
        branches.append(Branch(weight, amps))
    return JointState(branches, grids, sigmas)


def apply_coupling(joint: JointState, spec: CouplingSpec) -> JointState:
    """exp(-i g A D t) with D the chosen variable of one pointer."""
    idx = spec.pointer_index
    if not 0 <= idx < joint.num_pointers:
        raise ValueError(f"pointer index {idx} out of range")
    gt = spec.gt
    if gt == 0.0:
        return joint
    lam, vecs = _coupling_eigs(spec.observable)
    if lam.size != joint.dim:
        raise ValueError("observable dimension does not match the system")
    grid = joint.grids[idx]
    reach = abs(gt) * float(np.max(np.abs(lam)))
    q_shifts = list(joint.q_shifts)
    k_shifts = list(joint.k_shifts)
    if spec.variable == "K":
        q_shifts[idx] += reach
        limit = grid.half_width / 4
        if q_shifts[idx] > limit:
            raise WrapAroundError(
                f"accumulated pointer shift {q_shifts[idx]:.3g} exceeds guard {limit:.3g}"
            )
    else:
        k_shifts[idx] += reach
        limit = np.pi / grid.dq / 4
        if k_shifts[idx] > limit:
            raise WrapAroundError(
                f"accumulated momentum kick {k_shifts[idx]:.3g} exceeds guard {limit:.3g}"
            )
    ax = idx + 1
    out = []
    for weight, amps in joint.branches:
        nd = amps.ndim
        eig_amps = np.tensordot(vecs.conj().T, amps, axes=(1, 0))
        lam_b = _axis_view(lam, nd, 0)
        if spec.variable == "K":
            ft = np.fft.fft(eig_amps, axis=ax)
            ft *= np.exp(-1j * gt * lam_b * _axis_view(grid.wavenumbers, nd, ax))
            eig_amps = np.fft.ifft(ft, axis=ax)
        else:
            eig_amps = eig_amps * np.exp(
                -1j * gt * lam_b * _axis_view(grid.positions, nd, ax)
            )
        out.append(Branch(weight, np.tensordot(vecs, eig_amps, axes=(1, 0))))
    return joint._replace_branches(out, q_shifts=tuple(q_shifts), k_shifts=tuple(k_shifts))


def apply_conditional_coupling(
    joint: JointState,
    e_op: OperatorMatrix,
    src_pointer: int,
    dst_pointer: int,
    g2: float,
    t: float,
) -> JointState:
    """exp(-i g2 E K_dst Q_src t): translate pointer dst by g2*t*lambda_E*q_src."""
    if src_pointer == dst_pointer:
        raise ValueError("source and destination pointer must differ")
    for idx in (src_pointer, dst_pointer):
        if not 0 <= idx < joint.num_pointers:
            raise ValueError(f"pointer index {idx} out of range")
    m = e_op.matrix
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("conditional coupling requires a Hermitian observable")
    gt = g2 * t
    if gt == 0.0:
        return joint
    lam, vecs = _coupling_eigs(e_op)
    src_grid = joint.grids[src_pointer]
    dst_grid = joint.grids[dst_pointer]
    reach = abs(gt) * float(np.max(np.abs(lam))) * src_grid.half_width
    q_shifts = list(joint.q_shifts)
    q_shifts[dst_pointer] += reach
    limit = dst_grid.half_width / 4
    if q_shifts[dst_pointer] > limit:
        raise WrapAroundError(
            f"worst-case conditional shift {q_shifts[dst_pointer]:.3g}"
            f" exceeds guard {limit:.3g}"
        )
    src_ax, dst_ax = src_pointer + 1, dst_pointer + 1
    out = []
    for weight, amps in joint.branches:
        nd = amps.ndim
        eig_amps = np.tensordot(vecs.conj().T, amps, axes=(1, 0))
        ft = np.fft.fft(eig_amps, axis=dst_ax)
        ft *= np.exp(
            -1j
            * gt
            * _axis_view(lam, nd, 0)
            * _axis_view(src_grid.positions, nd, src_ax)
            * _axis_view(dst_grid.wavenumbers, nd, dst_ax)
        )
        eig_amps = np.fft.ifft(ft, axis=dst_ax)
        out.append(Branch(weight, np.tensordot(vecs, eig_amps, axes=(1, 0))))
    return joint._replace_branches(out, q_shifts=tuple(q_shifts))


def _project(joint: JointState, c: StateVector) -> tuple[float, JointState | None]:
    measure = joint.measure
    projected = []
    prob = 0.0
    for weight, amps in joint.branches:
        cond = np.tensordot(c.amps.conj(), amps, axes=(0, 0))
        p_branch = float(np.sum(np.abs(cond) ** 2) * measure)
        prob += weight * p_branch
        projected.append((weight, p_branch, cond))
    if prob < 1e-14:
        return prob, None
    branches = []
    for weight, p_branch, cond in projected:
        mass = weight * p_branch / prob
        if mass < 1e-15:
            continue
        amps = np.multiply.outer(c.amps, cond / np.sqrt(p_branch))
        branches.append(Branch(mass, amps))
    total = sum(b.weight for b in branches)
    branches = [Branch(b.weight / total, b.amps) for b in branches]
    return prob, joint._replace_branches(branches)


def postselect(joint: JointState, c: StateVector) -> tuple[float, JointState]:
    """Project the system on |c>, renormalize, and report the probability.

    After projection the system factor is |c> itself; the pointers keep the
    conditional amplitudes.  The probability equals <c|rho'|c> of the evolved
    reduced system state.
    """
    if c.dim != joint.dim:
        raise ValueError("post-selection ket dimension mismatch")
    prob, conditioned = _project(joint, c)
    if conditioned is None:
        raise PostselectionError(
            f"post-selection probability {prob:.3e} is numerically zero"
        )
    return prob, conditioned


def strong_measure(
    joint: JointState, basis: Sequence[StateVector]
) -> list[tuple[int, float, JointState | None]]:
    """Projective measurement in a complete orthonormal basis.

    Returns one (outcome index, probability, conditioned state) triple per
    basis ket; the conditioned state is None when the probability is
    numerically zero.  Probabilities sum to 1 within 1e-10.
    """
    dim = joint.dim
    if len(basis) != dim:
        raise ValueError(f"need a complete basis of {dim} kets, got {len(basis)}")
    rows = np.array([b.amps for b in basis])
    gram = rows @ rows.conj().T
    if np.max(np.abs(gram - np.eye(dim))) > 1e-10:
        raise ValueError("measurement basis is not orthonormal")
    results = []
    total = 0.0
    for i, ket in enumerate(basis):
        prob, conditioned = _project(joint, ket)
        total += prob
        results.append((i, prob, conditioned))
    if abs(total - 1.0) > 1e-10:
        raise RuntimeError(f"outcome probabilities sum to {total}, expected 1")
    return results


def reduced_system_density(joint: JointState) -> np.ndarray:
    """Trace out all pointers; returns the N x N system density matrix."""
    pointer_axes = list(range(1, joint.num_pointers + 1))
    rho = np.zeros((joint.dim, joint.dim), dtype=complex)
    for weight, amps in joint.branches:
        rho += weight * np.tensordot(amps, amps.conj(), axes=(pointer_axes, pointer_axes))
    return rho * joint.measure


def reduced_position_density(joint: JointState, idx: int) -> np.ndarray:
    """Probability mass per position cell of pointer idx; sums to 1."""
    if not 0 <= idx < joint.num_pointers:
        raise ValueError(f"pointer index {idx} out of range")
    ax = idx + 1
    mass = np.zeros(joint.grids[idx].points)
    for weight, amps in joint.branches:
        dens = np.abs(amps) ** 2
        other = tuple(a for a in range(amps.ndim) if a != ax)
        mass += weight * dens.sum(axis=other)
    return mass * joint.measure


def reduced_momentum_density(joint: JointState, idx: int) -> np.ndarray:
    """Probability mass per wavenumber cell (FFT order) of pointer idx."""
    if not 0 <= idx < joint.num_pointers:
        raise ValueError(f"pointer index {idx} out of range")
    ax = idx + 1
    grid = joint.grids[idx]
    mass = np.zeros(grid.points)
    for weight, amps in joint.branches:
        ft = np.fft.fft(amps, axis=ax)
        dens = np.abs(ft) ** 2
        other = tuple(a for a in range(amps.ndim) if a != ax)
        mass += weight * dens.sum(axis=other)
    return mass * joint.measure / grid.points


def pointer_moments(joint: JointState, idx: int) -> tuple[float, float]:
    """(<Q>_f, <K>_f) of pointer idx on the branch-weighted reduced state."""
    q_mass = reduced_position_density(joint, idx)
    k_mass = reduced_momentum_density(joint, idx)
    grid = joint.grids[idx]
    return (
        float(np.sum(grid.positions * q_mass)),
        float(np.sum(grid.wavenumbers * k_mass)),
    )


def joint_ann_moment(joint: JointState, idx1: int, idx2: int, *more: int) -> complex:
    """<a_i a_j ...> with a = Q/(2 sigma) + i K sigma per pointer.

    Computed as a genuine operator moment on the joint tensor by expanding
    the product over the 2^n mixed position/momentum moments; operators on
    distinct pointers commute, so each term is a density contraction in the
    corresponding mixed representation.
    """
    indices = (idx1, idx2) + more
    if len(set(indices)) != len(indices):
        raise ValueError(f"pointer indices must be distinct, got {indices}")
    for idx in indices:
        if not 0 <= idx < joint.num_pointers:
            raise ValueError(f"pointer index {idx} out of range")
    npointers = joint.num_pointers
    letters = "abcdefgh"[:npointers]
    total = 0.0 + 0.0j
    for choice in product((0, 1), repeat=len(indices)):
        # 0 -> Q factor, 1 -> K factor for the matching index
        coeff = 1.0 + 0.0j
        vectors = []
        k_axes = []
        for idx, pick in zip(indices, choice):
            sigma = joint.sigmas[idx]
            if pick == 0:
                coeff *= 1.0 / (2.0 * sigma)
                vectors.append((idx, joint.grids[idx].positions))
            else:
                coeff *= 1j * sigma
                vectors.append((idx, joint.grids[idx].wavenumbers))
                k_axes.append(idx + 1)
        norm_factor = joint.measure
        for idx, pick in zip(indices, choice):
            if pick == 1:
                norm_factor /= joint.grids[idx].points
        moment = 0.0
        subscripts = (
            "s" + letters + "," + ",".join(letters[idx] for idx, _ in vectors) + "->"
        )
        operands_tail = [vec for _, vec in vectors]
        for weight, amps in joint.branches:
            f = amps
            if k_axes:
                f = np.fft.fftn(f, axes=k_axes)
            dens = np.abs(f) ** 2
            moment += weight * np.einsum(subscripts, dens, *operands_tail)
        total += coeff * moment * norm_factor
    return complex(total)


def weak_value_from_moments(qf: float, kf: float, g: float, t: float, sigma: float) -> complex:
    """<A^w> = <Q>_f/(g t) + i <K>_f 2 sigma^2/(g t), hbar = 1."""
    gt = g * t
    if gt <= 0:
        raise ValueError(f"need positive coupling g*t, got {gt}")
    return qf / gt + 1j * kf * 2.0 * sigma**2 / gt
