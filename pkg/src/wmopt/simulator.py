"""
Exact postselected von Neumann measurement and its perturbative tiers.

The joint evolution is U = exp(i lam A (x) q).  Three estimates of the
conditional detector output are produced side by side:

* exact: M/N from the full unitary;
* interpolating: the first-order propagator kept on both sides of the
  state, ratio of second-order polynomials in lam that stays finite when
  preparation and postselection are orthogonal;
* AAV: the same expansion truncated to first order in lam (needs a finite
  weak value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, PostselectionError, ValidationError
from .linalg import DEFAULT_TOL, MAX_DIM, as_matrix, dagger, hermitian_eig, partial_trace
from .states import DensityMatrix, MeasurementSetup
from .weak_values import WeakValueTriple, canonical_weak_values, weak_value_triple

N_FLOOR = 1e-14


@dataclass(frozen=True)
class DetectorAverages:
    """Averages over the initial detector state used by the expansions."""

    o: float
    q: float
    q2: float
    oq: complex  # Tr[o q rho_det]
    qo: complex  # Tr[q o rho_det]
    qoq: float

    @property
    def commutator(self) -> complex:  # <[q, o]>
        return self.qo - self.oq

    @property
    def anticommutator(self) -> float:  # <{q, o}>
        return (self.qo + self.oq).real


def detector_averages(rho_det, q, o) -> DetectorAverages:
    rho = as_matrix(rho_det, "rho_det")
    q = as_matrix(q, "q")
    o = as_matrix(o, "o")

    def bar(x):
        return complex(np.trace(x @ rho))

    return DetectorAverages(
        o=bar(o).real,
        q=bar(q).real,
        q2=bar(q @ q).real,
        oq=bar(o @ q),
        qo=bar(q @ o),
        qoq=bar(q @ o @ q).real,
    )


@dataclass(frozen=True)
class ConditionalOutput:
    mean_exact: float
    N_exact: float
    M_exact: float
    mean_interp: float
    mean_aav: float | None  # None when the weak value is undefined
    M1: float
    N1: float
    rho_det_cond: DensityMatrix
    mean_from_state: float  # Tr[o rho_det|f], second route to mean_exact


def joint_unitary(A, q, lam: float) -> np.ndarray:
    """exp(i lam A (x) q), diagonalised factor by factor."""
    a, va = hermitian_eig(A)
    b, vb = hermitian_eig(q)
    if len(a) * len(b) > MAX_DIM:
        raise DimensionError(f"combined dimension {len(a) * len(b)} exceeds cap {MAX_DIM}")
    v = np.kron(va, vb)
    phase = np.exp(1j * lam * np.outer(a, b).ravel())
    return (v * phase) @ dagger(v)


def evolve_joint(setup: MeasurementSetup) -> np.ndarray:
    u = joint_unitary(setup.A, setup.q, setup.lam)
    rho = np.kron(setup.rho_i.matrix, setup.rho_det.matrix)
    out = u @ rho @ dagger(u)
    return 0.5 * (out + dagger(out))


def postselect(rho_plus, E_f, dims: tuple[int, int]):
    """Conditional detector state Tr_sys[(E (x) 1) rho+]/N and the probability N."""
    rho_plus = as_matrix(rho_plus, "rho_plus")
    E = as_matrix(E_f, "E_f")
    d_sys, d_det = dims
    if E.shape != (d_sys, d_sys):
        raise DimensionError(f"E_f must be {d_sys}x{d_sys}", path="E_f")
    unnorm = partial_trace(np.kron(E, np.eye(d_det)) @ rho_plus, dims, keep="det")
    N = float(np.trace(unnorm).real)
    if N < N_FLOOR:
        raise PostselectionError(f"postselection probability numerically zero (N={N:.3e})")
    cond = unnorm / N
    return DensityMatrix(0.5 * (cond + dagger(cond)), tol=DEFAULT_TOL, path="rho_det_cond"), N


def expansion_terms(t: WeakValueTriple, av: DetectorAverages, lam: float) -> tuple[float, float]:
    """M1 and N1: unnormalized output and postselection probability with the
    first-order propagator kept on both sides of the state."""
    a = t.alpha
    m1 = av.o * t.omega + 1j * lam * (av.oq * a - av.qo * a.conjugate()) + lam**2 * av.qoq * t.beta
    n1 = t.omega - 2 * lam * av.q * a.imag + lam**2 * av.q2 * t.beta
    return float(np.real(m1)), float(n1)


def interpolating_mean(A_w: complex, B_w: float, av: DetectorAverages, lam: float) -> float:
    """Conditional output as a ratio of quadratics in lam, in weak-value form."""
    num = (
        av.o
        + lam * ((-1j * av.commutator).real * A_w.real - av.anticommutator * A_w.imag)
        + lam**2 * av.qoq * B_w
    )
    den = 1 - 2 * lam * av.q * A_w.imag + lam**2 * av.q2 * B_w
    return float(num / den)


def aav_mean(A_w: complex, av: DetectorAverages, lam: float) -> float:
    slope = (-1j * av.commutator).real * A_w.real - (av.anticommutator - 2 * av.q * av.o) * A_w.imag
    return float(av.o + lam * slope)


def conditional_mean(setup: MeasurementSetup) -> ConditionalOutput:
    rho_plus = evolve_joint(setup)
    d_det = setup.rho_det.dim
    rho_cond, _ = postselect(rho_plus, setup.E_f, setup.dims)

    E = setup.E_f.matrix
    N = float(np.trace(np.kron(E, np.eye(d_det)) @ rho_plus).real)
    M = float(np.trace(np.kron(E, setup.o.matrix) @ rho_plus).real)

    t = weak_value_triple(setup.E_f, setup.rho_i, setup.A)
    cw = canonical_weak_values(t, setup.E_f, setup.rho_i, setup.A)
    av = detector_averages(setup.rho_det, setup.q, setup.o)
    M1, N1 = expansion_terms(t, av, setup.lam)
    mean_aav = None if cw.orthogonal_flag else aav_mean(cw.A_w, av, setup.lam)

    return ConditionalOutput(
        mean_exact=M / N,
        N_exact=N,
        M_exact=M,
        mean_interp=M1 / N1,
        mean_aav=mean_aav,
        M1=M1,
        N1=N1,
        rho_det_cond=rho_cond,
        mean_from_state=float(np.trace(setup.o.matrix @ rho_cond.matrix).real),
    )


# -- probabilities ---------------------------------------------------------------

@dataclass(frozen=True)
class ProbabilityReport:
    joint: list[float]
    marginal: float
    normalization: float
    complement_marginal: float


def spectral_projectors(o, tol: float = 1e-9) -> list[np.ndarray]:
    """Projectors onto the eigenspaces of a Hermitian matrix (degenerate levels merged)."""
    w, v = hermitian_eig(o)
    groups: list[list[int]] = []
    for k in range(len(w)):
        if groups and abs(w[k] - w[groups[-1][0]]) <= tol * max(1.0, abs(w[k])):
            groups[-1].append(k)
        else:
            groups.append([k])
    return [v[:, g] @ dagger(v[:, g]) for g in groups]


def normalized_probabilities(setup: MeasurementSetup, outcomes, tol: float = 1e-9) -> ProbabilityReport:
    """Joint and marginal postselection probabilities from the positivity-
    preserving expansion, divided by the common factor 1 + lam^2 <A^2>_i <q^2>.

    ``outcomes`` must be detector projectors resolving the identity.
    """
    projs = [as_matrix(p, f"outcomes[{k}]") for k, p in enumerate(outcomes)]
    d_det = setup.rho_det.dim
    if not projs or any(p.shape != (d_det, d_det) for p in projs):
        raise DimensionError(f"outcome projectors must be {d_det}x{d_det}", path="outcomes")
    if np.max(np.abs(sum(projs) - np.eye(d_det))) > tol:
        raise ValidationError("projectors do not resolve the identity", path="outcomes")

    lam = setup.lam
    rho_d = setup.rho_det.matrix
    q = setup.q.matrix

    def bar(x):
        return complex(np.trace(x @ rho_d))

    def joint0(t, proj):
        # i*alpha*<Pi q> + c.c.
        cross = 2 * (1j * t.alpha * bar(proj @ q)).real
        return t.omega * bar(proj).real + lam * cross + lam**2 * t.beta * bar(q @ proj @ q).real

    t = weak_value_triple(setup.E_f, setup.rho_i, setup.A)
    tc = weak_value_triple(setup.E_f.complement().matrix, setup.rho_i, setup.A)
    A2 = float(np.trace(setup.A.matrix @ setup.A.matrix @ setup.rho_i.matrix).real)
    norm = 1 + lam**2 * A2 * bar(q @ q).real
    ident = np.eye(d_det)
    return ProbabilityReport(
        joint=[joint0(t, p) / norm for p in projs],
        marginal=joint0(t, ident) / norm,
        normalization=norm,
        complement_marginal=joint0(tc, ident) / norm,
    )


# -- validity of the expansion -------------------------------------------------

@dataclass(frozen=True)
class ValidityReport:
    delta: float
    n_max: int
    condition_holds: bool
    epsilon: float
    N_error_bound: float
    M_error_bound: float
    u_conjecture: float
    N_error_actual: float
    M_error_actual: float
    conjecture_violated: bool


def perturbation_condition(lam: float, A, q, rho_det, delta: float, n_max: int) -> bool:
    """(2 lam max|A|)^n <q^2n>^(1/2) <= delta^n for n = 1..n_max."""
    amax = float(np.max(np.abs(np.linalg.eigvalsh(as_matrix(A, "A")))))
    qm = as_matrix(q, "q")
    rho = as_matrix(rho_det, "rho_det")
    x = 2 * abs(lam) * amax
    q2 = qm @ qm
    power = np.eye(qm.shape[0], dtype=np.complex128)
    for n in range(1, n_max + 1):
        power = power @ q2
        mom = max(float(np.trace(power @ rho).real), 0.0)
        if x**n * math.sqrt(mom) > delta**n * (1 + 1e-12):
            return False
    return True


def validity_report(setup: MeasurementSetup, delta: float = 0.1, n_max: int = 8, u: float = 1.0) -> ValidityReport:
    if not delta > 0:
        raise ValidationError("delta must be positive", path="delta")
    if n_max < 2:
        raise ValidationError("n_max must be >= 2", path="n_max")
    holds = perturbation_condition(setup.lam, setup.A, setup.q, setup.rho_det, delta, n_max)
    trE = float(np.trace(setup.E_f.matrix).real)
    eps = trE * (math.expm1(delta) - delta)
    o2 = float(np.trace(setup.o.matrix @ setup.o.matrix @ setup.rho_det.matrix).real)
    m_bound = (1 + u) * math.sqrt(max(o2, 0.0)) * eps

    out = conditional_mean(setup) if setup.lam != 0 else None
    if out is None:
        n_err = m_err = 0.0
    else:
        n_err = abs(out.N_exact - out.N1)
        m_err = abs(out.M_exact - out.M1)
    return ValidityReport(
        delta=delta,
        n_max=n_max,
        condition_holds=holds,
        epsilon=eps,
        N_error_bound=eps,
        M_error_bound=m_bound,
        u_conjecture=u,
        N_error_actual=n_err,
        M_error_actual=m_err,
        conjecture_violated=bool(holds and m_err > m_bound),
    )
