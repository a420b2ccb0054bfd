"""
Validated state and operator types, standard operators and seeded random states.

The wrapper types are immutable and validate on construction; they expose
``__array__`` so every function in the package also accepts plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, dagger, is_hermitian

DEFAULT_OSCILLATOR_DIM = 32


class _Operator:
    matrix: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _hermitian(m, path, tol):
    m = as_matrix(m, path)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"matrix must be square, got {m.shape}", path=path)
    if not is_hermitian(m, tol.hermiticity):
        raise ValidationError("matrix is not Hermitian", path=path)
    m = 0.5 * (m + dagger(m))
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Observable(_Operator):
    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)
    path: str = field(default="observable", repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _hermitian(self.matrix, self.path, self.tol))


@dataclass(frozen=True, eq=False)
class DensityMatrix(_Operator):
    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)
    path: str = field(default="rho", repr=False)

    def __post_init__(self):
        m = _hermitian(self.matrix, self.path, self.tol)
        tr = np.trace(m).real
        if abs(tr - 1.0) > self.tol.trace_one:
            raise ValidationError(f"trace is {tr!r}, expected 1", path=self.path)
        w = np.linalg.eigvalsh(m)
        if w[0] < self.tol.psd_eigen_floor:
            raise ValidationError(f"negative eigenvalue {w[0]!r}", path=self.path)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_ket(cls, ket, **kw) -> "DensityMatrix":
        return cls(ket_to_dm(ket), **kw)


@dataclass(frozen=True, eq=False)
class PovmElement(_Operator):
    """Postselection effect E_f; the trace is unconstrained."""

    matrix: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)
    path: str = field(default="E_f", repr=False)

    def __post_init__(self):
        m = _hermitian(self.matrix, self.path, self.tol)
        w = np.linalg.eigvalsh(m)
        floor = self.tol.psd_eigen_floor
        if w[0] < floor or w[-1] > 1.0 - floor:
            raise ValidationError(f"spectrum [{w[0]!r}, {w[-1]!r}] outside [0, 1]", path=self.path)
        if np.trace(m).real <= 0:
            raise ValidationError("effect has zero trace", path=self.path)
        object.__setattr__(self, "matrix", m)

    def complement(self) -> "PovmElement":
        return PovmElement(np.eye(self.dim) - self.matrix, tol=self.tol, path=self.path)


@dataclass(frozen=True, eq=False)
class MeasurementSetup:
    """Preparation, postselection and observable of the system, detector state,
    pointer q, readout o and the coupling lambda of H = -lambda delta(t) q A."""

    rho_i: DensityMatrix
    E_f: PovmElement
    A: Observable
    rho_det: DensityMatrix
    q: Observable
    o: Observable
    lam: float

    def __post_init__(self):
        coerce = (
            ("rho_i", DensityMatrix),
            ("E_f", PovmElement),
            ("A", Observable),
            ("rho_det", DensityMatrix),
            ("q", Observable),
            ("o", Observable),
        )
        for name, typ in coerce:
            val = getattr(self, name)
            if not isinstance(val, typ):
                object.__setattr__(self, name, typ(val, path=name))
        d_sys = self.rho_i.dim
        for name in ("E_f", "A"):
            if getattr(self, name).dim != d_sys:
                raise DimensionError(f"expected dimension {d_sys}", path=name)
        d_det = self.rho_det.dim
        for name in ("q", "o"):
            if getattr(self, name).dim != d_det:
                raise DimensionError(f"expected dimension {d_det}", path=name)
        lam = float(self.lam)
        if not np.isfinite(lam):
            raise ValidationError("coupling must be finite", path="lambda")
        object.__setattr__(self, "lam", lam)

    @property
    def dims(self) -> tuple[int, int]:
        return self.rho_i.dim, self.rho_det.dim

    def replace(self, **changes) -> "MeasurementSetup":
        kw = {k: getattr(self, k) for k in ("rho_i", "E_f", "A", "rho_det", "q", "o", "lam")}
        kw.update(changes)
        return MeasurementSetup(**kw)


# -- standard operators ------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

SPIN_KETS = {
    "+z": np.array([1, 0], dtype=np.complex128),
    "-z": np.array([0, 1], dtype=np.complex128),
    "+x": np.array([1, 1], dtype=np.complex128) / np.sqrt(2),
    "-x": np.array([1, -1], dtype=np.complex128) / np.sqrt(2),
    "+y": np.array([1, 1j], dtype=np.complex128) / np.sqrt(2),
    "-y": np.array([1, -1j], dtype=np.complex128) / np.sqrt(2),
}


def ket_to_dm(ket) -> np.ndarray:
    v = np.asarray(ket, dtype=np.complex128).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValidationError("zero vector")
    v = v / nrm
    return np.outer(v, v.conj())


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(np.complex128)


def oscillator_operators(dim: int = DEFAULT_OSCILLATOR_DIM) -> tuple[Observable, Observable]:
    """Truncated position and momentum, q = (a + a^dag)/sqrt2, p = (a - a^dag)/(i sqrt2).

    Truncation spoils the canonical commutator only on the top Fock level:
    [q, p] = i (I - dim |top><top|).
    """
    if dim < 2:
        raise ValidationError("oscillator dimension must be >= 2", path="dim")
    a = annihilation(dim)
    ad = dagger(a)
    q = (a + ad) / np.sqrt(2)
    p = (a - ad) / (1j * np.sqrt(2))
    return Observable(q, path="q"), Observable(p, path="p")


def fock_state(dim: int, n: int = 0) -> DensityMatrix:
    if not 0 <= n < dim:
        raise ValidationError(f"Fock index {n} outside [0, {dim})", path="named_state")
    ket = np.zeros(dim, dtype=np.complex128)
    ket[n] = 1.0
    return DensityMatrix.from_ket(ket)


def parity(dim: int) -> np.ndarray:
    """(-1)^n on a truncated Fock space; anticommutes with q and p."""
    return np.diag((-1.0) ** np.arange(dim)).astype(np.complex128)


# -- random states -----------------------------------------------------------

def sample_rng(master_seed: int, index: int | None = None) -> np.random.Generator:
    """Per-sample generator derived from (master_seed, index).

    Independent of evaluation order, so sweeps are reproducible regardless
    of how they are scheduled across threads.
    """
    if index is None:
        return np.random.default_rng(master_seed)
    return np.random.default_rng([int(master_seed), int(index)])


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ginibre(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_ket(dim: int, seed) -> np.ndarray:
    v = _ginibre(_rng(seed), dim)
    return v / np.linalg.norm(v)


def random_pure_state(dim: int, seed) -> DensityMatrix:
    if dim < 1:
        raise ValidationError("dimension must be >= 1", path="dim")
    return DensityMatrix(ket_to_dm(random_ket(dim, seed)))


def random_mixed_state(dim: int, seed) -> DensityMatrix:
    if dim < 1:
        raise ValidationError("dimension must be >= 1", path="dim")
    g = _ginibre(_rng(seed), (dim, dim))
    rho = g @ dagger(g)
    return DensityMatrix(rho / np.trace(rho).real)


def random_hermitian(dim: int, seed, scale: float = 1.0) -> Observable:
    g = _ginibre(_rng(seed), (dim, dim))
    return Observable(scale * 0.5 * (g + dagger(g)))


def random_effect(dim: int, seed, pure: bool = False) -> PovmElement:
    """Random postselection effect: a rank-1 projector, or a full-rank operator
    with spectrum drawn uniformly from (0, 1)."""
    rng = _rng(seed)
    if pure:
        return PovmElement(ket_to_dm(random_ket(dim, rng)))
    g = _ginibre(rng, (dim, dim))
    u, _ = np.linalg.qr(g)
    w = rng.uniform(0.0, 1.0, dim)
    return PovmElement((u * w) @ dagger(u))
