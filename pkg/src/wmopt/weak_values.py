"""System-side scalars of a postselected measurement and their weak values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, support_projector

ORTHOGONALITY_REL = 1e-12
EIGEN_CUTOFF = 1e-10


@dataclass(frozen=True)
class WeakValueTriple:
    """omega = Tr[E rho], alpha = Tr[E A rho], beta = Tr[E A rho A]."""

    omega: float
    alpha: complex
    beta: float


@dataclass(frozen=True)
class CanonicalWeakValues:
    A_w: complex | None
    B_w: float | None
    C_w: complex | None
    orthogonal_flag: bool

    @property
    def A_re(self) -> float:
        return self.A_w.real

    @property
    def A_im(self) -> float:
        return self.A_w.imag


def _square_triplet(E_f, rho_i, A):
    E = as_matrix(E_f, "E_f")
    rho = as_matrix(rho_i, "rho_i")
    A = as_matrix(A, "A")
    d = rho.shape[0]
    for name, m in (("E_f", E), ("rho_i", rho), ("A", A)):
        if m.shape != (d, d):
            raise DimensionError(f"expected {d}x{d}, got {m.shape}", path=name)
    return E, rho, A


def weak_value_triple(E_f, rho_i, A, tol: Tolerances = DEFAULT_TOL) -> WeakValueTriple:
    E, rho, A = _square_triplet(E_f, rho_i, A)
    omega = np.trace(E @ rho)
    alpha = np.trace(E @ A @ rho)
    beta = np.trace(E @ A @ rho @ A)
    scale = max(1.0, abs(omega), abs(beta))
    for name, val in (("omega", omega), ("beta", beta)):
        if abs(val.imag) > tol.general_rel * scale:
            raise ValidationError(f"imaginary part {val.imag!r} too large; inputs not Hermitian/PSD?", path=name)
    return WeakValueTriple(float(omega.real), complex(alpha), float(beta.real))


def orthogonality_threshold(beta: float, A) -> float:
    amax2 = float(np.max(np.abs(np.linalg.eigvalsh(as_matrix(A, "A"))))) ** 2
    scale = beta / amax2 if amax2 > 0 else 1.0
    return ORTHOGONALITY_REL * scale


def canonical_weak_values(t: WeakValueTriple, E_f, rho_i, A) -> CanonicalWeakValues:
    """A_w = alpha/omega, B_w = beta/omega and C_w = Tr[E A^2 rho]/omega.

    Near-orthogonal preparation/postselection is a flagged state rather than
    an error; consumers then fall back on the triple.
    """
    E, rho, A = _square_triplet(E_f, rho_i, A)
    if t.omega <= orthogonality_threshold(t.beta, A) or t.omega <= 0:
        return CanonicalWeakValues(None, None, None, True)
    c = complex(np.trace(E @ A @ A @ rho))
    return CanonicalWeakValues(t.alpha / t.omega, t.beta / t.omega, c / t.omega, False)


def weak_values(E_f, rho_i, A) -> tuple[WeakValueTriple, CanonicalWeakValues]:
    t = weak_value_triple(E_f, rho_i, A)
    return t, canonical_weak_values(t, E_f, rho_i, A)


@dataclass(frozen=True)
class CauchySchwarzReport:
    lhs: float
    rhs: float
    equality: bool
    equality_reason: str  # omega_zero | beta_zero | shifted_null_vector | none


def cauchy_schwarz_report(E_f, rho_i, A, rel_tol: float = 1e-9) -> CauchySchwarzReport:
    """Compare |alpha|^2 with beta*omega and classify the equality case.

    Equality holds iff omega = 0, beta = 0, or A - z*I annihilates every
    pair of support vectors, <f|(A - z)|i> = 0 for eigenvectors f of E_f and
    i of rho_i with nonzero eigenvalue; z is then the weak value.
    """
    E, rho, A_m = _square_triplet(E_f, rho_i, A)
    t = weak_value_triple(E, rho, A_m)
    lhs = abs(t.alpha) ** 2
    rhs = t.beta * t.omega
    trE = float(np.trace(E).real)
    amax = float(np.max(np.abs(np.linalg.eigvalsh(A_m))))
    scale = trE * max(amax, 1.0) ** 2
    equality = abs(rhs - lhs) <= rel_tol * max(rhs, lhs) + 1e-15 * scale**2

    if t.omega <= 1e-14 * trE:
        reason = "omega_zero"
    elif t.beta <= 1e-14 * scale:
        reason = "beta_zero"
    else:
        f_vecs, _ = support_projector(E, EIGEN_CUTOFF)
        i_vecs, _ = support_projector(rho, EIGEN_CUTOFF)
        z = t.alpha / t.omega
        resid = f_vecs.conj().T @ (A_m - z * np.eye(A_m.shape[0])) @ i_vecs
        null = np.max(np.abs(resid), initial=0.0) <= 1e-7 * max(amax, abs(z), 1.0)
        reason = "shifted_null_vector" if null else "none"
    return CauchySchwarzReport(float(lhs), float(rhs), bool(equality), reason)
