"""Direct-measurement procedures assembled from weak pointer couplings.

Four front-line protocols:

* direct_wavefunction: weakly measure each standard projector pi_a, post-
  select the uniform Fourier ket b0; the weak values are proportional to the
  amplitudes <a|psi> up to one global constant.
* direct_dirac: estimate S(a, b) = Tr[pi_b pi_a rho] for every label pair,
  either by one weak coupling plus a strong Fourier readout (substitution)
  or by the two-pointer product schemes.
* direct_density: estimate <Pi_{a1 a2}> = <a1|rho|a2>/N from the triple
  pi_a2 pi_b0 pi_a1, scanning a1 (weak) and a2 (strong outcome) with b0
  fixed; multiply by N, Hermitize, trace-normalize.
* weak product readout: Tr[EF rho] without post-selection via Scheme 1
  (independent couplings, correlated annihilation-moment readout) or
  Scheme 2 (conditional coupling).

Scheme 1 readout constant: the product moment obeys
<a1 a2>_f = (g1 t/(2 sigma1)) (g2 t/(2 sigma2)) Tr[EF rho] + O((gt)^2),
so the calibration constant is kappa = (2 sigma1/(g1 t)) (2 sigma2/(g2 t));
calibrate_scheme1 re-derives this numerically on an eigenstate case where
the relation is exact at any coupling.

Scheme 2 conventions, fixed numerically against closed-form values on
random states: with U_D = exp(-i g2 E K2 Q1 t) exp(-i g_D F D1 t),

* D = K: Re Tr[EF rho] = <Q2>_f / (g_K g2 t^2), and <K2>_f = 0;
* D = Q: Im Tr[EF rho] = <Q2>_f / (2 g_Q g2 t^2 sigma1^2).

In both variants the second pointer's *position* carries the signal and
sigma1 is the first pointer's width.  Correlating a Scheme 2 readout with a
subsequent strong outcome c is biased: it converges to the symmetrized
(<c|EF rho|c> + <c|E rho F|c>)/2 rather than <c|EF rho|c>, so the density
protocol refuses scheme2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .evolution import (
    CouplingSpec,
    PostselectionError,
    apply_conditional_coupling,
    apply_coupling,
    joint_ann_moment,
    make_joint,
    pointer_moments,
    postselect,
    strong_measure,
    weak_value_from_moments,
)
from .hilbert import (
    DensityMatrix,
    DiracDistribution,
    OperatorMatrix,
    StateVector,
    fourier_basis,
    fourier_ket,
    projector,
    standard_basis,
    standard_ket,
    unbiasedness_defect,
)
from .pointer import PointerGrid

DEFAULT_SWEEP = (0.08, 0.04, 0.02, 0.01)
DEFAULT_GRID_POINTS = {1: 512, 2: 256, 3: 64}
SCHEMES = ("substitution", "scheme1", "scheme2")


@dataclass(frozen=True)
class ProtocolParams:
    """Coupling strengths and pointer discretization for one protocol run.

    gt is the first (or only) coupling product g*t; gt2/gt3 default to gt.
    Grid size defaults depend on how many pointers the route needs (512 for
    one, 256 for two, 64 for three) and the half-width defaults to 16 sigma.
    """

    gt: float = 0.02
    gt2: float | None = None
    gt3: float | None = None
    scheme: str = "substitution"
    sigma: float = 1.0
    grid_points: int | None = None
    half_width: float | None = None
    postselect_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.gt <= 0:
            raise ValueError(f"gt must be positive, got {self.gt}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def couplings(self, n: int) -> tuple[float, ...]:
        extras = (self.gt2, self.gt3)
        out = [self.gt]
        for i in range(n - 1):
            out.append(self.gt if extras[i] is None else extras[i])
        return tuple(out[:n])

    def grid(self, pointers: int) -> PointerGrid:
        if pointers not in DEFAULT_GRID_POINTS:
            raise ValueError(f"supported pointer counts are 1..3, got {pointers}")
        points = self.grid_points or DEFAULT_GRID_POINTS[pointers]
        half_width = self.half_width or 16.0 * self.sigma
        return PointerGrid(points, half_width)


@dataclass(frozen=True)
class ProtocolEstimate:
    """One estimated weak quantity plus the run metadata behind it."""

    value: complex
    setting: tuple[tuple[str, int], ...]
    scheme: str
    gt_products: tuple[float, ...]
    postselect_prob: float | None = None
    stderr: float | None = None


@dataclass(frozen=True)
class WavefunctionReadout:
    weak_values: np.ndarray
    normalized: np.ndarray
    postselect_probs: np.ndarray
    estimates: tuple[ProtocolEstimate, ...]


@dataclass(frozen=True)
class DiracReadout:
    distribution: DiracDistribution
    estimates: tuple[ProtocolEstimate, ...]


@dataclass(frozen=True)
class DensityReadout:
    """raw holds the <Pi_{a1 a2}> estimates; matrix is N*raw after
    Hermitization and trace normalization.  Positivity is never repaired,
    only reported through diagnostics."""

    raw: np.ndarray
    matrix: np.ndarray
    diagnostics: dict
    estimates: tuple[ProtocolEstimate, ...]


@dataclass(frozen=True)
class CalibrationResult:
    gts: tuple[float, ...]
    ratios: tuple[complex, ...]
    extrapolated: complex
    kappas: tuple[float, ...]


def _warn_if_strong(gt_product: float, sigma: float) -> None:
    if gt_product / sigma**2 > 0.05:
        warnings.warn(
            f"coupling product {gt_product:g} is outside the weak-product regime;"
            " expect visible O((gt)^2) bias",
            RuntimeWarning,
            stacklevel=3,
        )


def _require_uniform_b0(b0: StateVector) -> None:
    if np.max(np.abs(b0.amps - np.mean(b0.amps))) > 1e-10:
        raise ValueError(
            "b0 must have constant overlap with the standard basis"
            " (the uniform ket up to a global phase)"
        )


def _as_system(state):
    """Normalize pure/mixed input to (typed system, density matrix array)."""
    if isinstance(state, StateVector):
        return state, np.outer(state.amps, state.amps.conj())
    if isinstance(state, DensityMatrix):
        return state, state.matrix
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        ket = StateVector(arr)
        return ket, np.outer(ket.amps, ket.amps.conj())
    rho = DensityMatrix(arr)
    return rho, rho.matrix


def direct_wavefunction(
    psi: StateVector, b0: StateVector, params: ProtocolParams | None = None
) -> WavefunctionReadout:
    """Scan a, weakly measure pi_a, post-select b0, read the weak value.

    The returned weak values are proportional to the amplitudes of psi; the
    normalized field divides out the norm and rotates the first amplitude
    with magnitude above 1e-6 to the positive real axis, since the overall
    constant is not physical.
    """
    params = params or ProtocolParams()
    if unbiasedness_defect(b0) > 1e-10:
        raise ValueError("b0 must be unbiased with respect to the standard basis")
    n = psi.dim
    grid = params.grid(1)
    (gt,) = params.couplings(1)
    sigma = params.sigma
    raw = np.empty(n, dtype=complex)
    probs = np.empty(n)
    estimates = []
    for a in range(n):
        joint = make_joint(psi, [(grid, sigma)])
        spec = CouplingSpec(projector(standard_ket(n, a)), 0, gt, 1.0)
        joint = apply_coupling(joint, spec)
        prob, conditioned = postselect(joint, b0)
        if prob < params.postselect_floor:
            raise PostselectionError(
                f"post-selection probability {prob:.3e} below floor"
                f" {params.postselect_floor:g} at setting a={a}"
            )
        qf, kf = pointer_moments(conditioned, 0)
        wv = weak_value_from_moments(qf, kf, gt, 1.0, sigma)
        raw[a] = wv
        probs[a] = prob
        estimates.append(
            ProtocolEstimate(
                value=wv,
                setting=(("a", a),),
                scheme="weak_strong",
                gt_products=(gt,),
                postselect_prob=prob,
            )
        )
    norm = np.linalg.norm(raw)
    if norm < 1e-12:
        raise RuntimeError("weak-value readout vanished for every a")
    normalized = raw / norm
    for amp in normalized:
        if abs(amp) > 1e-6:
            normalized = normalized * np.exp(-1j * np.angle(amp))
            break
    return WavefunctionReadout(raw, normalized, probs, tuple(estimates))


def mixed_state_response(rho, b0: StateVector) -> np.ndarray:
    """The N weak values <b0|a><a|rho|b0>/<b0|rho|b0> the pure-state scan
    would report for rho.

    Depends on rho only through the single column rho|b0>, so 2N real
    numbers: identical for rho = I/N and rho = |b0><b0|, which is why the
    scan cannot identify a mixed state.
    """
    _, r = _as_system(rho)
    if b0.dim != r.shape[0]:
        raise ValueError("b0 dimension mismatch")
    column = r @ b0.amps
    denom = float(np.real(np.vdot(b0.amps, column)))
    if denom < 1e-12:
        raise ValueError(f"post-selection probability {denom:.3e} vanishes")
    return b0.amps.conj() * column / denom


def scheme1_weak_product(system, e_op: OperatorMatrix, f_op: OperatorMatrix,
                         params: ProtocolParams | None = None) -> complex:
    """Tr[EF rho] from independent weak couplings of F then E.

    Applies exp(-i g2 E K2 t) exp(-i g1 F K1 t) and reads
    kappa * <a1 a2>_f with kappa = (2 sigma/(g1 t)) (2 sigma/(g2 t)).
    Complex output is expected whenever EF is not Hermitian.
    """
    params = params or ProtocolParams()
    system, _ = _as_system(system)
    gt1, gt2 = params.couplings(2)
    sigma = params.sigma
    _warn_if_strong(gt1 * gt2, sigma)
    grid = params.grid(2)
    joint = make_joint(system, [(grid, sigma), (grid, sigma)])
    joint = apply_coupling(joint, CouplingSpec(f_op, 0, gt1, 1.0))
    joint = apply_coupling(joint, CouplingSpec(e_op, 1, gt2, 1.0))
    kappa = (2 * sigma / gt1) * (2 * sigma / gt2)
    return kappa * joint_ann_moment(joint, 0, 1)


def scheme2_weak_product(system, e_op: OperatorMatrix, f_op: OperatorMatrix,
                         params: ProtocolParams | None = None) -> complex:
    """Tr[EF rho] from a conditional coupling, one variant per quadrature.

    Run 1 couples F to K1 and reads Re from <Q2>/(g_K g2 t^2); run 2 couples
    F to Q1 and reads Im from <Q2>/(2 g_Q g2 t^2 sigma1^2).  See the module
    docstring for how the D = Q convention was pinned down.
    """
    params = params or ProtocolParams()
    system, _ = _as_system(system)
    gt1, gt2 = params.couplings(2)
    sigma = params.sigma
    _warn_if_strong(gt1 * gt2, sigma)
    grid = params.grid(2)

    def run(variable: str) -> float:
        joint = make_joint(system, [(grid, sigma), (grid, sigma)])
        joint = apply_coupling(joint, CouplingSpec(f_op, 0, gt1, 1.0, variable))
        joint = apply_conditional_coupling(joint, e_op, 0, 1, gt2, 1.0)
        return pointer_moments(joint, 1)[0]

    re = run("K") / (gt1 * gt2)
    im = run("Q") / (2 * gt1 * gt2 * sigma**2)
    return complex(re, im)


def weak_strong_product(
    system,
    weak_ops: OperatorMatrix | Sequence[OperatorMatrix],
    basis: Sequence[StateVector],
    outcome_values: Sequence[float],
    params: ProtocolParams | None = None,
) -> complex:
    """sum_c c P(c) <G^w>^c = Tr[C G rho], trading post-selection for a
    strong readout correlated with the weak signal.

    weak_ops may be a single Hermitian observable (one pointer, weak-value
    readout per outcome) or a chain applied first-to-last, each factor on
    its own pointer (product readout per outcome); a chain (F, E) measures
    the operator product EF.
    """
    params = params or ProtocolParams()
    system, _ = _as_system(system)
    if isinstance(weak_ops, OperatorMatrix):
        chain = [weak_ops]
    else:
        chain = list(weak_ops)
    if not 1 <= len(chain) <= 3:
        raise ValueError(f"need 1 to 3 weak factors, got {len(chain)}")
    values = np.asarray(outcome_values, dtype=float)
    if values.size != len(basis):
        raise ValueError("need one outcome value per basis ket")
    n_ptr = len(chain)
    gts = params.couplings(n_ptr)
    sigma = params.sigma
    grid = params.grid(n_ptr)
    joint = make_joint(system, [(grid, sigma)] * n_ptr)
    for j, op in enumerate(chain):
        joint = apply_coupling(joint, CouplingSpec(op, j, gts[j], 1.0))
    kappa = 1.0
    for gt in gts:
        kappa *= 2 * sigma / gt
    total = 0.0 + 0.0j
    for i, prob, conditioned in strong_measure(joint, list(basis)):
        if values[i] == 0.0 or prob < 1e-12 or conditioned is None:
            continue
        if n_ptr == 1:
            qf, kf = pointer_moments(conditioned, 0)
            signal = weak_value_from_moments(qf, kf, gts[0], 1.0, sigma)
        else:
            signal = kappa * joint_ann_moment(conditioned, *range(n_ptr))
        total += values[i] * prob * signal
    return complex(total)


def direct_dirac(rho, params: ProtocolParams | None = None) -> DiracReadout:
    """Estimate every S(a, b) = Tr[pi_b pi_a rho].

    Default route: for each a, one weak pi_a coupling followed by a strong
    Fourier-basis measurement; the (a, b) entry is P(b) times the weak value
    conditioned on outcome b.  scheme1/scheme2 estimate each entry as a
    two-pointer product instead.
    """
    params = params or ProtocolParams()
    system, r = _as_system(rho)
    n = r.shape[0]
    sigma = params.sigma
    entries = np.zeros((n, n), dtype=complex)
    estimates = []
    f_basis = fourier_basis(n)
    if params.scheme == "substitution":
        grid = params.grid(1)
        (gt,) = params.couplings(1)
        gts = (gt,)
        for a in range(n):
            joint = make_joint(system, [(grid, sigma)])
            joint = apply_coupling(
                joint, CouplingSpec(projector(standard_ket(n, a)), 0, gt, 1.0)
            )
            for b, prob, conditioned in strong_measure(joint, f_basis):
                if prob < 1e-12 or conditioned is None:
                    value = 0.0 + 0.0j
                else:
                    qf, kf = pointer_moments(conditioned, 0)
                    value = prob * weak_value_from_moments(qf, kf, gt, 1.0, sigma)
                entries[a, b] = value
                estimates.append(
                    ProtocolEstimate(
                        value=value,
                        setting=(("a", a), ("b", b)),
                        scheme="weak_strong",
                        gt_products=gts,
                        postselect_prob=prob,
                    )
                )
    else:
        gts = params.couplings(2)
        run = scheme1_weak_product if params.scheme == "scheme1" else scheme2_weak_product
        for a in range(n):
            f_op = projector(standard_ket(n, a))
            for b in range(n):
                value = run(system, projector(f_basis[b]), f_op, params)
                entries[a, b] = value
                estimates.append(
                    ProtocolEstimate(
                        value=value,
                        setting=(("a", a), ("b", b)),
                        scheme=params.scheme,
                        gt_products=gts,
                    )
                )
    atol = 0.05 * max(1.0, (max(gts) / 0.02) ** 2)
    return DiracReadout(DiracDistribution(entries, atol=atol), tuple(estimates))


def direct_density(rho, b0: StateVector | None = None,
                   params: ProtocolParams | None = None) -> DensityReadout:
    """Reconstruct rho entrywise from triple-projector weak products.

    For each a1 the chain (pi_a1, pi_b0) is measured weakly; a strong
    standard-basis readout supplies a2, and P(a2) times the conditioned
    product signal estimates <Pi_{a1 a2}> = <a1|rho|a2>/N.  scheme1 instead
    couples all three projectors to their own pointers and reads the triple
    moment without any strong measurement.  scheme2 is refused: conditioning
    its readout on a2 mixes in <a2|pi_b0 rho pi_a1|a2> (see module docstring).
    """
    params = params or ProtocolParams()
    system, r = _as_system(rho)
    n = r.shape[0]
    if b0 is None:
        b0 = fourier_ket(n, 0)
    _require_uniform_b0(b0)
    if params.scheme == "scheme2":
        raise ValueError(
            "density reconstruction via scheme2 is biased: the conditioned"
            " readout converges to (<c|EF rho|c> + <c|E rho F|c>)/2;"
            " use scheme='substitution' or scheme='scheme1'"
        )
    sigma = params.sigma
    raw = np.zeros((n, n), dtype=complex)
    estimates = []
    e_op = projector(b0)
    if params.scheme == "substitution":
        gt1, gt2 = params.couplings(2)
        gts = (gt1, gt2)
        grid = params.grid(2)
        kappa = (2 * sigma / gt1) * (2 * sigma / gt2)
        s_basis = standard_basis(n)
        for a1 in range(n):
            joint = make_joint(system, [(grid, sigma)] * 2)
            joint = apply_coupling(
                joint, CouplingSpec(projector(standard_ket(n, a1)), 0, gt1, 1.0)
            )
            joint = apply_coupling(joint, CouplingSpec(e_op, 1, gt2, 1.0))
            for a2, prob, conditioned in strong_measure(joint, s_basis):
                if prob < 1e-12 or conditioned is None:
                    value = 0.0 + 0.0j
                else:
                    value = prob * kappa * joint_ann_moment(conditioned, 0, 1)
                raw[a1, a2] = value
                estimates.append(
                    ProtocolEstimate(
                        value=value,
                        setting=(("a1", a1), ("a2", a2)),
                        scheme="weak_strong",
                        gt_products=gts,
                        postselect_prob=prob,
                    )
                )
    else:
        gts = params.couplings(3)
        grid = params.grid(3)
        kappa = 1.0
        for gt in gts:
            kappa *= 2 * sigma / gt
        for a1 in range(n):
            for a2 in range(n):
                joint = make_joint(system, [(grid, sigma)] * 3)
                joint = apply_coupling(
                    joint, CouplingSpec(projector(standard_ket(n, a1)), 0, gts[0], 1.0)
                )
                joint = apply_coupling(joint, CouplingSpec(e_op, 1, gts[1], 1.0))
                joint = apply_coupling(
                    joint, CouplingSpec(projector(standard_ket(n, a2)), 2, gts[2], 1.0)
                )
                value = kappa * joint_ann_moment(joint, 0, 1, 2)
                raw[a1, a2] = value
                estimates.append(
                    ProtocolEstimate(
                        value=value,
                        setting=(("a1", a1), ("a2", a2)),
                        scheme="scheme1",
                        gt_products=gts,
                    )
                )
    scaled = n * raw
    hermitized = (scaled + scaled.conj().T) / 2
    trace = float(np.real(np.trace(hermitized)))
    if abs(trace) < 1e-6:
        raise RuntimeError(f"reconstructed trace {trace:.3e} too small to normalize")
    matrix = hermitized / trace
    diagnostics = {
        "trace_raw": complex(np.trace(scaled)),
        "hermiticity_defect": float(np.max(np.abs(scaled - scaled.conj().T))),
        "min_eigenvalue": float(np.linalg.eigvalsh(matrix)[0]),
    }
    return DensityReadout(raw, matrix, diagnostics, tuple(estimates))


def invert_dirac(entries: np.ndarray) -> np.ndarray:
    """rho_{a1 a2} = sum_b S(a1, b) exp(i 2 pi b (a1 - a2)/N), entrywise."""
    s = np.asarray(entries, dtype=complex)
    n = s.shape[0]
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    phases = np.exp(2j * np.pi * np.einsum("b,ij->bij", idx, diff) / n)
    return np.einsum("ib,bij->ij", s, phases)


def dirac_to_density(dist: DiracDistribution) -> DensityMatrix:
    """Exact discrete-Fourier inversion of the Dirac distribution.

    Intended for closed-form input: the result must satisfy the density
    invariants, which finite-coupling estimates generally will not; invert
    those with invert_dirac and inspect the raw matrix instead.
    """
    return DensityMatrix(invert_dirac(dist.entries))


def calibrate_scheme1(params: ProtocolParams | None = None,
                      sweep: Sequence[float] = DEFAULT_SWEEP) -> CalibrationResult:
    """Check the Scheme 1 readout constant against an exactly solvable case.

    E = F = pi_0 on the |0> eigenstate has Tr[EF rho] = 1, so the calibrated
    readout kappa <a1 a2>_f must come out 1; the constant itself is
    kappa = (2 sigma/(g1 t)) (2 sigma/(g2 t)) per coupling pair.
    """
    base = params or ProtocolParams()
    state = standard_ket(2, 0)
    pi0 = projector(state)
    ratios = []
    kappas = []
    for gt in sweep:
        p = replace(base, gt=gt, gt2=gt, scheme="scheme1")
        ratios.append(scheme1_weak_product(state, pi0, pi0, p))
        kappas.append((2 * base.sigma / gt) ** 2)
    extrapolated = extrapolate_sweep(sweep, ratios)
    return CalibrationResult(tuple(sweep), tuple(ratios), extrapolated, tuple(kappas))


def extrapolate_sweep(gts: Sequence[float], values: Sequence[complex]) -> complex:
    """Zero-coupling limit of a sweep, assuming corrections even in gt.

    Least-squares fit of value = v0 + c1 (gt)^2 + c2 (gt)^4 (degree capped
    by the number of points); returns v0.
    """
    gts = np.asarray(gts, dtype=float)
    values = np.asarray(values, dtype=complex)
    if gts.size != values.size or gts.size < 2:
        raise ValueError("need at least two sweep points to extrapolate")
    x = (gts / gts.max()) ** 2
    degree = min(gts.size - 1, 2)
    design = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    return complex(coef[0])


def convergence_slope(gts: Sequence[float], errors: Sequence[float]) -> float:
    """Fitted slope of log-error against log-coupling."""
    gts = np.asarray(gts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = errors > 1e-14
    if mask.sum() < 2:
        raise ValueError("not enough resolvable error points to fit a slope")
    return float(np.polyfit(np.log(gts[mask]), np.log(errors[mask]), 1)[0])
