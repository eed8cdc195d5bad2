"""Closed-form reference values for every quantity the simulator estimates.

Everything here is dense linear algebra on the system Hilbert space alone,
with no grid or pointer dependence, so these functions can serve as ground
truth for the pointer simulation without sharing code with it.

Identities with two independent computations (the triple-projector matrix
element and the weak-strong correlation) evaluate both routes and verify
they agree to 1e-12 before returning.
"""

from __future__ import annotations

import numpy as np

from .hilbert import (
    DiracDistribution,
    StateVector,
    _as_matrix,
    fourier_ket,
    triple_projector,
)


def weak_value_pure(op, psi: StateVector, c: StateVector) -> complex:
    """<c|A|psi> / <c|psi>; may be complex or far outside A's spectrum."""
    a = _as_matrix(op)
    denom = np.vdot(c.amps, psi.amps)
    if abs(denom) < 1e-12:
        raise ValueError("post-selection state is orthogonal to the input state")
    return complex(np.vdot(c.amps, a @ psi.amps) / denom)


def weak_value_mixed(op, rho, c: StateVector) -> complex:
    """<c|A rho|c> / <c|rho|c>; reduces to the pure-state ratio for rank-1 rho."""
    a = _as_matrix(op)
    r = _as_matrix(rho)
    denom = np.vdot(c.amps, r @ c.amps)
    if denom.real < 1e-12:
        raise ValueError("post-selection probability vanishes for this state")
    return complex(np.vdot(c.amps, a @ r @ c.amps) / denom)


def weak_average(op, rho) -> complex:
    """Tr[A rho]; valid for non-Hermitian A as well."""
    a = _as_matrix(op)
    r = _as_matrix(rho)
    if a.shape != r.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {r.shape}")
    return complex(np.trace(a @ r))


def dirac_exact(rho) -> DiracDistribution:
    """S(a, b) = <a|rho|b><b|a> over the standard/Fourier basis pair.

    Row sums are the standard-basis Born probabilities <a|rho|a>, column
    sums the Fourier ones, and the total is Tr[rho] = 1.
    """
    r = _as_matrix(rho)
    n = r.shape[0]
    # columns of f are the Fourier kets
    f = np.array([fourier_ket(n, b).amps for b in range(n)]).T
    entries = (r @ f) * f.conj()
    return DiracDistribution(entries)


def density_from_triple_exact(rho, b0: StateVector) -> np.ndarray:
    """Matrix of weak averages Tr[Pi_{a1 a2} rho] = <a1|rho|a2>/N.

    Both routes are computed independently (explicit operator traces vs
    direct matrix elements) and must agree entrywise to 1e-12.  b0 must have
    constant real overlap <a|b0> = 1/sqrt(N) with the standard basis, which
    pins it to the uniform Fourier b=0 ket up to a global phase.
    """
    r = _as_matrix(rho)
    n = r.shape[0]
    if b0.dim != n:
        raise ValueError("b0 dimension mismatch")
    overlaps = b0.amps  # <a|b0>
    if np.max(np.abs(overlaps - np.mean(overlaps))) > 1e-10:
        raise ValueError(
            "b0 must have constant overlap with the standard basis"
            " (the uniform ket up to a global phase)"
        )
    via_trace = np.empty((n, n), dtype=complex)
    for a1 in range(n):
        for a2 in range(n):
            pi = triple_projector(n, a1, a2, b0)
            via_trace[a1, a2] = np.trace(pi.matrix @ r)
    via_elements = r / n
    defect = np.max(np.abs(via_trace - via_elements))
    if defect > 1e-12:
        raise RuntimeError(
            f"triple-projector routes disagree by {defect:.3e}; inconsistent inputs"
        )
    return via_trace


def weak_strong_exact(rho, g_op, c_op) -> complex:
    """sum_c c <c|G rho|c> = Tr[C G rho], with C Hermitian.

    Evaluates the eigen-decomposed sum and the trace form independently and
    checks they match to 1e-12 before returning the value.
    """
    g = _as_matrix(g_op)
    c = _as_matrix(c_op)
    if np.max(np.abs(c - c.conj().T)) > 1e-10:
        raise ValueError("strong observable C must be Hermitian")
    r = _as_matrix(rho)
    vals, vecs = np.linalg.eigh(c)
    grho = g @ r
    eigen_sum = sum(
        vals[i] * np.vdot(vecs[:, i], grho @ vecs[:, i]) for i in range(vals.size)
    )
    trace_form = np.trace(c @ grho)
    if abs(eigen_sum - trace_form) > 1e-12:
        raise RuntimeError(
            f"weak-strong routes disagree: {eigen_sum} vs {trace_form}"
        )
    return complex(trace_form)
