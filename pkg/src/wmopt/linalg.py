"""
Dense complex matrix helpers.

All composite operators follow one fixed subsystem ordering: the measured
system is the first tensor factor, the detector the second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

MAX_DIM = 4096


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-9
    psd_eigen_floor: float = -1e-9
    trace_one: float = 1e-9
    general_rel: float = 1e-9

    def __post_init__(self):
        for name in ("hermiticity", "trace_one", "general_rel"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be positive", path=f"tolerances.{name}")
        if not self.psd_eigen_floor < 0:
            raise ValidationError("must be negative", path="tolerances.psd_eigen_floor")

    @classmethod
    def from_dict(cls, data: dict | None) -> "Tolerances":
        if not data:
            return cls()
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown keys {sorted(unknown)}", path="tolerances")
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT_TOL = Tolerances()


def as_matrix(m, name="matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}", path=name)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("entries must be finite", path=name)
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_hermitian(m, tol: float = DEFAULT_TOL.hermiticity) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol * scale)


def tensor_product(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise DimensionError(f"combined dimension {max(rows, cols)} exceeds cap {max_dim}")
    return np.kron(a, b)


def partial_trace(m, dims: tuple[int, int], keep: str = "det") -> np.ndarray:
    """Trace out one factor of a (system, detector) bipartite operator.

    ``keep`` is ``"det"`` (trace over the system) or ``"sys"``.
    """
    m = as_matrix(m, "M")
    d_sys, d_det = int(dims[0]), int(dims[1])
    n = d_sys * d_det
    if m.shape != (n, n):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    t = m.reshape(d_sys, d_det, d_sys, d_det)
    if keep == "det":
        return np.einsum("ijil->jl", t)
    if keep == "sys":
        return np.einsum("ijkj->ik", t)
    raise ValueError(f"keep must be 'sys' or 'det', not {keep!r}")


def hermitian_eig(h, tol: float = DEFAULT_TOL.hermiticity):
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix."""
    h = as_matrix(h, "H")
    if not is_hermitian(h, tol):
        raise ValidationError("matrix is not Hermitian", path="H")
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    return w, v


def unitary_exp(h, scale: float = 1.0, tol: float = DEFAULT_TOL.hermiticity) -> np.ndarray:
    """exp(i * scale * H) for Hermitian H, via the spectral decomposition."""
    w, v = hermitian_eig(h, tol)
    return (v * np.exp(1j * scale * w)) @ dagger(v)


def is_psd(m, floor: float = DEFAULT_TOL.psd_eigen_floor) -> bool:
    if not is_hermitian(m):
        return False
    w = np.linalg.eigvalsh(0.5 * (m + dagger(m)))
    return bool(w[0] >= floor * max(1.0, abs(w[-1])))


def semi_inner_product(p2, p1, x, y, tol: Tolerances = DEFAULT_TOL) -> complex:
    """Tr[P2 X P1 Y^dagger] for nonnegative P1, P2.

    Positive semi-definite but possibly degenerate: nonzero X can have zero
    length when it maps the support of P1 into the kernel of P2.
    """
    p2 = as_matrix(p2, "P2")
    p1 = as_matrix(p1, "P1")
    x = as_matrix(x, "X")
    y = as_matrix(y, "Y")
    d = p1.shape[0]
    for name, m in (("P2", p2), ("P1", p1), ("X", x), ("Y", y)):
        if m.shape != (d, d):
            raise DimensionError(f"expected {d}x{d}, got {m.shape}", path=name)
    for name, m in (("P2", p2), ("P1", p1)):
        if not is_psd(m, tol.psd_eigen_floor):
            raise ValidationError("must be nonnegative Hermitian", path=name)
    return complex(np.trace(p2 @ x @ p1 @ dagger(y)))


def support_projector(m, cutoff: float = 1e-10):
    """Eigenvectors of a Hermitian matrix whose eigenvalues exceed ``cutoff * ||m||``.

    Returns (support basis, kernel basis) as column matrices.
    """
    w, v = hermitian_eig(m)
    scale = max(np.max(np.abs(w)), 0.0)
    mask = np.abs(w) > cutoff * scale if scale > 0 else np.zeros_like(w, dtype=bool)
    return v[:, mask], v[:, ~mask]
