"""
Closed-form optima of the conditional detector output.

In the standardized frame (pointer xi = (q - <q>)/sigma_q, readout shifted to
zero mean, weak values rescaled by the coupling) the interpolating output is

    <delta o> = (c x - a y + s z) / (1 + z),

with x + iy the rescaled weak value, z the rescaled second weak value and
(a, c, s) the detector averages of the anticommutator {delta o, xi}, the
commutator i[delta o, xi] and the sandwich xi delta o xi.  Admissible
points fill the region z >= x^2 + y^2; the level sets are planes and the
extrema are where they touch the paraboloid z = x^2 + y^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProblemError, ValidationError
from .linalg import as_matrix, dagger, is_psd
from .simulator import perturbation_condition
from .states import DensityMatrix, MeasurementSetup

ZERO_MOMENT_TOL = 1e-12
DEGENERATE_REL = 1e-9
KERNEL_CUTOFF = 1e-10


@dataclass(frozen=True)
class DetectorMoments:
    a: float
    c: float
    s: float
    o_mean: float = 0.0
    sigma_o: float = float("nan")
    q_mean: float = 0.0
    sigma_q: float = 1.0
    xi_mean: float = 0.0

    def __post_init__(self):
        if not self.sigma_q > 0:
            raise ValidationError("sigma_q must be positive", path="sigma_q")
        if self.sigma_o < 0:
            raise ValidationError("sigma_o must be nonnegative", path="sigma_o")

    @property
    def radial(self) -> float:
        """sqrt(c^2 + a^2)."""
        return math.hypot(self.c, self.a)


@dataclass(frozen=True)
class WeakValuePoint:
    x: float
    y: float
    z: float

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]


@dataclass(frozen=True)
class Rescaling:
    """Map between physical weak values (A_w, B_w) and the rescaled frame."""

    lambda_sigma_q: float

    def to_point(self, A_w: complex, B_w: float) -> WeakValuePoint:
        k = self.lambda_sigma_q
        return WeakValuePoint(k * A_w.real, k * A_w.imag, k * k * B_w)

    def to_physical(self, p: WeakValuePoint) -> tuple[complex, float]:
        k = self.lambda_sigma_q
        if k == 0:
            raise ValidationError("zero coupling has no physical frame", path="lambda")
        return complex(p.x, p.y) / k, p.z / (k * k)


def pointer(q, rho_det) -> tuple[np.ndarray, float, float]:
    """Standardized pointer xi = (q - q_mean)/sigma_q with its mean and spread."""
    q = as_matrix(q, "q")
    rho = as_matrix(rho_det, "rho_det")
    q_mean = float(np.trace(q @ rho).real)
    var = float(np.trace(q @ q @ rho).real) - q_mean**2
    if not var > 1e-24 * max(1.0, q_mean**2):
        raise ValidationError("pointer has zero spread in the detector state", path="q")
    sigma_q = math.sqrt(var)
    xi = (q - q_mean * np.eye(q.shape[0])) / sigma_q
    return xi, q_mean, sigma_q


def detector_moments(rho_det, q, o) -> DetectorMoments:
    rho = as_matrix(rho_det, "rho_det")
    o = as_matrix(o, "o")
    xi, q_mean, sigma_q = pointer(q, rho)
    o_mean = float(np.trace(o @ rho).real)
    do = o - o_mean * np.eye(o.shape[0])

    def bar(x):
        return complex(np.trace(x @ rho))

    a = bar(do @ xi + xi @ do).real
    c = bar(1j * (do @ xi - xi @ do)).real
    s = bar(xi @ do @ xi).real
    var_o = max(bar(do @ do).real, 0.0)
    return DetectorMoments(
        a=a, c=c, s=s,
        o_mean=o_mean, sigma_o=math.sqrt(var_o),
        q_mean=q_mean, sigma_q=sigma_q, xi_mean=q_mean / sigma_q,
    )


def standardize(setup: MeasurementSetup) -> tuple[DetectorMoments, Rescaling]:
    m = detector_moments(setup.rho_det, setup.q, setup.o)
    return m, Rescaling(setup.lam * m.sigma_q)


def standardized_output(m: DetectorMoments, x, y, z):
    """Interpolating output <delta o> at rescaled weak values (vectorized)."""
    return (m.c * np.asarray(x) - m.a * np.asarray(y) + m.s * np.asarray(z)) / (1 + np.asarray(z))


@dataclass(frozen=True)
class ExtremumResult:
    max_value: float
    min_value: float
    max_point: WeakValuePoint | None  # None when attained only at infinity
    min_point: WeakValuePoint | None
    degenerate: bool = False
    attained_at_infinity: bool = False


def _check_nonzero(m: DetectorMoments, tol: float):
    if max(abs(m.a), abs(m.c), abs(m.s)) <= tol:
        raise DegenerateProblemError("output identically zero at this order: a = c = s = 0")


def extremal_outputs(m: DetectorMoments, tol: float = ZERO_MOMENT_TOL) -> ExtremumResult:
    """Maximum and minimum of the standardized output over the admissible region.

    Values are (s +/- sqrt(c^2 + a^2 + s^2))/2, reached on the paraboloid at
    x = c g, y = -a g with g = (s +/- root)/(c^2 + a^2).  When a = c = 0 the
    planes are horizontal: one extremum is 0 at the origin, the other is s,
    approached only as the second weak value diverges.
    """
    _check_nonzero(m, tol)
    k2 = m.c**2 + m.a**2
    if math.sqrt(k2) <= max(tol, DEGENERATE_REL * abs(m.s)):
        origin = WeakValuePoint(0.0, 0.0, 0.0)
        if m.s > 0:
            return ExtremumResult(m.s, 0.0, None, origin, degenerate=True, attained_at_infinity=True)
        return ExtremumResult(0.0, m.s, origin, None, degenerate=True, attained_at_infinity=True)

    root = math.sqrt(k2 + m.s**2)
    # plus * minus = -k2; take the non-cancelling branch directly
    if m.s >= 0:
        plus = m.s + root
        minus = -k2 / plus
    else:
        minus = m.s - root
        plus = -k2 / minus

    def point(branch):
        g = branch / k2
        x, y = m.c * g, -m.a * g
        return WeakValuePoint(x, y, x * x + y * y)

    return ExtremumResult(plus / 2, minus / 2, point(plus), point(minus))


@dataclass(frozen=True)
class TradeoffBound:
    bound: float
    saturates_sr: bool


def tradeoff_bound(m: DetectorMoments, tol: float = 1e-9) -> TradeoffBound:
    """|<delta o>| <= |s/2| + sqrt(sigma_o^2 + s^2/4); reduces to sigma_o when s = 0.

    Follows from 4 sigma_o^2 >= c^2 + a^2 (Schrodinger-Robertson with a
    unit-variance pointer).
    """
    if math.isnan(m.sigma_o):
        raise ValidationError("sigma_o unknown; compute moments from a detector state", path="sigma_o")
    half_s = m.s / 2
    bound = abs(half_s) + math.sqrt(m.sigma_o**2 + half_s**2)
    slack = 4 * m.sigma_o**2 - (m.c**2 + m.a**2)
    return TradeoffBound(bound, bool(slack < tol * max(1.0, 4 * m.sigma_o**2)))


# -- amplification beyond sigma_o ------------------------------------------------

@dataclass(frozen=True)
class AmplificationPlan:
    rho_det: DensityMatrix | None
    achieved_s: float
    target_s: float | None
    kernel_dim: int
    feasible: bool
    infeasibility_reason: str = ""
    rho_tilde: np.ndarray | None = field(default=None, repr=False)


def _split_kernel(xi):
    xi = as_matrix(xi, "xi")
    w, v = np.linalg.eigh(0.5 * (xi + dagger(xi)))
    scale = float(np.max(np.abs(w)))
    mask = np.abs(w) > KERNEL_CUTOFF * scale
    return w[mask], v[:, mask], v[:, ~mask]


def amplifying_detector_state(xi, o, rho_tilde, target_s: float | None = None, tol: float = 1e-9) -> AmplificationPlan:
    """Detector preparation whose sandwich average equals Tr[o rho_tilde].

    ``rho_tilde`` must vanish on the kernel K of the pointer ``xi``.  The
    state is xi_C^-1 rho_tilde xi_C^-1 on the complement C plus a block on K
    fixed so that the trace is one and <o> = 0.  The K block mixes the two
    extreme eigenvectors of o compressed to K.
    """
    xi = as_matrix(xi, "xi")
    o = as_matrix(o, "o")
    rt = as_matrix(rho_tilde, "rho_tilde")
    n = xi.shape[0]
    if o.shape != (n, n) or rt.shape != (n, n):
        raise ValidationError(f"xi, o and rho_tilde must all be {n}x{n}", path="rho_tilde")
    if not is_psd(rt):
        raise ValidationError("rho_tilde must be nonnegative Hermitian", path="rho_tilde")
    w, c_basis, k_basis = _split_kernel(xi)
    kdim = k_basis.shape[1]
    if kdim and np.max(np.abs(rt @ k_basis)) > tol * max(1.0, np.max(np.abs(rt))):
        raise ValidationError("rho_tilde has support on the kernel of xi", path="rho_tilde")

    achieved = float(np.trace(o @ rt).real)

    def infeasible(reason):
        return AmplificationPlan(None, achieved, target_s, kdim, False, reason, rt)

    xi_inv = (c_basis / w) @ dagger(c_basis)
    block = xi_inv @ rt @ xi_inv
    block = 0.5 * (block + dagger(block))
    t = float(np.trace(block).real)
    if t > 1 + tol:
        return infeasible(f"trace budget exceeded: Tr[xi^-1 rho_tilde xi^-1] = {t:.6g} > 1")
    rest = max(1.0 - t, 0.0)
    shift = float(np.trace(o @ block).real)

    if kdim == 0:
        if rest > tol or abs(shift) > tol:
            return infeasible("kernel of xi is trivial; trace and <o> = 0 cannot both be met")
        rho_k = np.zeros((n, n), dtype=np.complex128)
    else:
        o_k = dagger(k_basis) @ o @ k_basis
        wk, vk = np.linalg.eigh(0.5 * (o_k + dagger(o_k)))
        lo, hi = wk[0] * rest, wk[-1] * rest
        need = -shift
        if need < lo - tol or need > hi + tol:
            return infeasible(
                f"<o> = 0 unreachable: kernel block can supply [{lo:.6g}, {hi:.6g}], need {need:.6g}"
            )
        if hi - lo > 1e-300:
            p = min(max((need - lo) / (hi - lo), 0.0), 1.0)
        else:
            p = 1.0
        top = k_basis @ vk[:, -1]
        bottom = k_basis @ vk[:, 0]
        rho_k = rest * (p * np.outer(top, top.conj()) + (1 - p) * np.outer(bottom, bottom.conj()))

    rho = block + rho_k
    rho = 0.5 * (rho + dagger(rho))
    s_direct = float(np.trace(o @ xi @ rho @ xi).real)
    if target_s is not None and s_direct < target_s - tol * max(1.0, abs(target_s)):
        return infeasible(f"achieved s = {s_direct:.6g} below target {target_s:.6g}")
    return AmplificationPlan(DensityMatrix(rho, path="rho_det"), s_direct, target_s, kdim, True, "", rt)


def design_rho_tilde(xi, o, target_s: float, solver: str = "CLARABEL") -> np.ndarray | None:
    """Pick rho_tilde on the complement of ker xi reaching sandwich average
    ``target_s`` with the smallest readout spread.

    Solved as a semidefinite program over the two diagonal blocks of the
    detector state.  Besides trace one and <o> = 0 it also imposes <xi> = 0
    and Tr rho_tilde = <xi^2> = 1, so that xi remains the standardized
    pointer of the state it produces.  Returns None when infeasible.
    """
    import cvxpy as cp

    o = as_matrix(o, "o")
    w, c_basis, k_basis = _split_kernel(xi)
    nc, nk = c_basis.shape[1], k_basis.shape[1]
    if nc == 0:
        return None
    inv_w = np.diag(1.0 / w)
    o_c = dagger(c_basis) @ o @ c_basis
    o2 = o @ o
    o2_c = dagger(c_basis) @ o2 @ c_basis
    # blocks of the detector state in the xi eigenbasis
    R = cp.Variable((nc, nc), hermitian=True)
    rho_c = inv_w @ R @ inv_w
    cons = [R >> 0, cp.real(cp.trace(R)) == 1, cp.real(cp.trace(inv_w @ R)) == 0,
            cp.real(cp.trace(o_c @ R)) >= target_s]
    trace_rho = cp.real(cp.trace(rho_c))
    o_avg = cp.real(cp.trace(inv_w @ o_c @ inv_w @ R))
    spread = cp.real(cp.trace(inv_w @ o2_c @ inv_w @ R))
    if nk:
        S = cp.Variable((nk, nk), hermitian=True)
        o_k = dagger(k_basis) @ o @ k_basis
        o2_k = dagger(k_basis) @ o2 @ k_basis
        cons.append(S >> 0)
        trace_rho = trace_rho + cp.real(cp.trace(S))
        o_avg = o_avg + cp.real(cp.trace(o_k @ S))
        spread = spread + cp.real(cp.trace(o2_k @ S))
    cons += [trace_rho == 1, o_avg == 0]
    prob = cp.Problem(cp.Minimize(spread), cons)
    opts = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12) if solver == "CLARABEL" else {}
    try:
        with warnings.catch_warnings():
            # cvxpy builds 1x1 hermitian blocks from nested lists internally
            warnings.filterwarnings("ignore", message="Initializing a Constant with a nested list")
            prob.solve(solver=solver, **opts)
    except cp.SolverError:
        return None
    if prob.status not in ("optimal", "optimal_inaccurate") or R.value is None:
        return None
    r = 0.5 * (R.value + R.value.conj().T)
    ev, vec = np.linalg.eigh(r)
    r = (vec * np.clip(ev, 0.0, None)) @ vec.conj().T
    r /= np.trace(r).real
    return c_basis @ r @ dagger(c_basis)


# -- optimal coupling --------------------------------------------------------------

@dataclass(frozen=True)
class CouplingOptimum:
    lambda_roots: tuple[float, float]
    values: tuple[float, float]
    literal_printed_roots: tuple[float, float]
    literal_printed_values: tuple[float, float]
    argmax: float
    max_value: float
    argmin: float
    min_value: float
    beyond_perturbative: tuple[bool, bool] | None = None


def coupling_output(m: DetectorMoments, A_w: complex, B_w: float, lam):
    """Interpolating <delta o> as a function of the physical coupling for fixed
    weak values, keeping the pointer offset xi_mean = <q>/sigma_q."""
    mu = np.asarray(lam, dtype=float) * m.sigma_q
    lin = m.c * A_w.real - m.a * A_w.imag
    quad = (m.s + m.xi_mean * m.a) * B_w
    den = 1 - 2 * m.xi_mean * A_w.imag * mu + (1 + m.xi_mean**2) * B_w * mu**2
    return (lin * mu + quad * mu**2) / den


def _literal_roots(m: DetectorMoments, A_w: complex, B_w: float):
    p = m.c * A_w.real - m.a * A_w.imag
    xi = m.xi_mean
    d = (1 + xi**2) * p + 2 * m.s * xi * A_w.imag
    rad = m.s**2 + 4 * p * d / B_w if B_w > 0 else float("nan")
    if d == 0 or not rad >= 0:
        return float("nan"), float("nan")
    r = math.sqrt(rad)
    return (m.s + r) / d / m.sigma_q, (m.s - r) / d / m.sigma_q


def optimal_coupling(
    m: DetectorMoments,
    A_w: complex,
    B_w: float,
    setup: MeasurementSetup | None = None,
    delta: float = 0.1,
    n_max: int = 8,
) -> CouplingOptimum:
    """Stationary couplings of ``coupling_output`` for fixed weak values.

    With P = c A' - a A'', Q = (s + xi_mean a) B_w, R = -2 xi_mean A'' and
    T = (1 + xi_mean^2) B_w the stationary condition in mu = lam sigma_q is
    (P T - Q R) mu^2 - 2 Q mu - P = 0; its discriminant is a positive
    definite form in (P, Q), so both roots are real.  The roots of the
    printed closed form are returned alongside for comparison.  When
    ``setup`` is given each root is checked against the perturbative
    validity condition at ``delta``.
    """
    A_w = complex(A_w)
    B_w = float(B_w)
    if B_w < abs(A_w) ** 2 * (1 - 1e-12) - 1e-15:
        raise ValidationError("B_w must be >= |A_w|^2", path="B_w")
    P = m.c * A_w.real - m.a * A_w.imag
    Q = (m.s + m.xi_mean * m.a) * B_w
    R = -2 * m.xi_mean * A_w.imag
    T = (1 + m.xi_mean**2) * B_w
    lead = P * T - Q * R
    if max(abs(P), abs(Q)) <= ZERO_MOMENT_TOL:
        raise DegenerateProblemError("output identically zero in the coupling at this order")
    disc = Q * Q + P * lead
    qq = Q + math.copysign(math.sqrt(max(disc, 0.0)), Q if Q != 0 else 1.0)
    mu1 = qq / lead if lead != 0 else math.copysign(math.inf, qq)
    mu2 = -P / qq
    roots = (mu1 / m.sigma_q, mu2 / m.sigma_q)

    def value(lam):
        if math.isinf(lam):
            return Q / T  # horizontal asymptote
        if math.isnan(lam):
            return float("nan")
        return float(coupling_output(m, A_w, B_w, lam))

    values = (value(roots[0]), value(roots[1]))
    lit = _literal_roots(m, A_w, B_w)
    hi = 0 if values[0] >= values[1] else 1
    flags = None
    if setup is not None:
        flags = tuple(
            not (math.isfinite(r) and perturbation_condition(r, setup.A, setup.q, setup.rho_det, delta, n_max))
            for r in roots
        )
    return CouplingOptimum(
        lambda_roots=roots,
        values=values,
        literal_printed_roots=lit,
        literal_printed_values=(value(lit[0]), value(lit[1])),
        argmax=roots[hi],
        max_value=values[hi],
        argmin=roots[1 - hi],
        min_value=values[1 - hi],
        beyond_perturbative=flags,
    )
