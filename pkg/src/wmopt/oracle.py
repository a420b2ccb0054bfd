"""
Brute-force cross-checks for the closed forms.

Nothing here calls into the closed-form solutions: every scan evaluates the
objective directly on a grid, brackets the best cell and polishes it with a
golden-section search.  Refinement runs in extended precision (mpmath) so
that argument locations resolve well below the float64 flatness limit of a
smooth maximum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import PostselectionError
from .optimizer import DetectorMoments, detector_moments
from .simulator import conditional_mean
from .states import (
    MeasurementSetup,
    random_effect,
    random_mixed_state,
    random_pure_state,
    sample_rng,
)
from .weak_values import weak_values

INV_PHI = (math.sqrt(5) - 1) / 2
REFINE_DPS = 40


@dataclass(frozen=True)
class ScanConfig:
    grid_radius: float = 50.0
    grid_points_per_axis: int = 400
    region_points_per_axis: int = 64
    trials: int = 100
    master_seed: int = 0
    lambda_range: tuple[float, float] = (-10.0, 10.0)
    lambda_points: int = 10_000
    refine_tol: float = 1e-11
    max_doublings: int = 4
    threads: int = 1

    def __post_init__(self):
        if self.grid_points_per_axis < 3 or self.region_points_per_axis < 3:
            raise ValueError("need at least 3 grid points per axis")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.lambda_range[0] < self.lambda_range[1]:
            raise ValueError("lambda_range must be increasing")


def parallel_map(fn, items, threads: int = 1):
    """Ordered map; results do not depend on the thread count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def golden_section(f, lo, hi, tol: float, maximize: bool = True):
    """Golden-section search on [lo, hi]; returns (argument, value).

    Works on any ordered numeric type f returns (floats or mpmath numbers).
    """
    sign = 1 if maximize else -1
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = sign * f(d)
    x = (a + b) / 2
    return x, f(x)


# -- objective, independent of the optimizer's closed forms --------------------------

def _boundary_value(m: DetectorMoments, r, theta):
    """Interpolating output on the paraboloid z = r^2, x = r cos, y = r sin."""
    z = r * r
    return (m.c * r * np.cos(theta) - m.a * r * np.sin(theta) + m.s * z) / (1 + z)


def _boundary_value_mp(ctx, coef, r, theta):
    a, c, s = coef
    z = r * r
    return (c * r * ctx.cos(theta) - a * r * ctx.sin(theta) + s * z) / (1 + z)


@dataclass(frozen=True)
class ScanExtremum:
    value: float
    point: tuple[float, float, float]
    at_search_edge: bool = False  # extremum suspected at infinity


@dataclass(frozen=True)
class ScanResult:
    best: ScanExtremum
    worst: ScanExtremum
    radius: float
    extra: dict = field(default_factory=dict)


def _refine_boundary(m, r0, t0, dr, dt, r_max, tol, maximize):
    # private context: mpmath's global precision is shared between threads
    ctx = mpmath.MPContext()
    ctx.dps = REFINE_DPS
    coef = (ctx.mpf(m.a), ctx.mpf(m.c), ctx.mpf(m.s))
    r, t = ctx.mpf(r0), ctx.mpf(t0)
    dr, dt = ctx.mpf(dr), ctx.mpf(dt)
    # alternating 1-D searches; the Hessian is diagonal in (r, theta) at
    # the optimum, so this converges fast once bracketed
    for _ in range(12):
        t_new, _ = golden_section(lambda th: _boundary_value_mp(ctx, coef, r, th), t - dt, t + dt, tol, maximize)
        lo = max(ctx.mpf(0), r - dr)
        hi = min(ctx.mpf(r_max), r + dr)
        r_new, _ = golden_section(
            lambda rr: _boundary_value_mp(ctx, coef, rr, t_new), lo, hi, tol * max(1, r), maximize
        )
        step_r, step_t = abs(r_new - r), abs(t_new - t)
        r, t = r_new, t_new
        if step_r + step_t * max(1, r) < tol:
            break
        dr = max(4 * step_r, dr / 4, 8 * tol * max(1, r))
        dt = max(4 * step_t, dt / 4, 8 * tol)
    val = _boundary_value_mp(ctx, coef, r, t)
    return float(val), (float(r * ctx.cos(t)), float(r * ctx.sin(t)), float(r * r))


def boundary_scan(m: DetectorMoments, cfg: ScanConfig = ScanConfig()) -> ScanResult:
    """Extrema of the interpolating output on the paraboloid boundary, by polar
    grid search with golden-section polishing.  The search radius doubles while
    the best cell touches its outer edge, up to ``cfg.max_doublings`` times."""
    n = cfg.grid_points_per_axis
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    dt = theta[1] - theta[0]
    radius = float(cfg.grid_radius)
    results = {}
    for maximize in (True, False):
        R = radius
        for attempt in range(cfg.max_doublings + 1):
            r = np.linspace(0.0, R, n)
            vals = _boundary_value(m, r[:, None], theta[None, :])
            idx = np.argmax(vals) if maximize else np.argmin(vals)
            i, j = np.unravel_index(idx, vals.shape)
            on_edge = i == n - 1
            if not on_edge or attempt == cfg.max_doublings:
                break
            R *= 2
        dr = r[1] - r[0]
        val, pt = _refine_boundary(m, r[i], theta[j], dr, dt, R, cfg.refine_tol, maximize)
        grid_val = float(vals[i, j])
        if (val < grid_val) if maximize else (val > grid_val):
            val, pt = grid_val, (r[i] * np.cos(theta[j]), r[i] * np.sin(theta[j]), r[i] ** 2)
        results[maximize] = (ScanExtremum(val, tuple(float(v) for v in pt), bool(on_edge)), R)
    best, rb = results[True]
    worst, rw = results[False]
    return ScanResult(best, worst, max(rb, rw))


def region_scan(m: DetectorMoments, cfg: ScanConfig = ScanConfig(), tol: float = 1e-9) -> ScanResult:
    """Grid over the admissible region x^2 + y^2 <= z <= grid_radius^2.

    Points are laid out as z = (R u)^2, (x, y) = rho sqrt(z) (cos, sin) with
    u, rho in [0, 1]; rho = 1 is the boundary.  ``extra`` reports the best
    interior and boundary values separately and whether the interior ever
    beats the boundary by more than ``tol``.
    """
    n = cfg.region_points_per_axis
    R = float(cfg.grid_radius)
    u = np.linspace(0.0, 1.0, n)
    rho = np.linspace(0.0, 1.0, n)
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    z = (R * u)[:, None, None] ** 2
    rad = rho[None, :, None] * np.sqrt(z)
    x = rad * np.cos(theta)[None, None, :]
    y = rad * np.sin(theta)[None, None, :]
    vals = (m.c * x - m.a * y + m.s * z) / (1 + z)
    vals = np.broadcast_to(vals, (n, n, n))

    def pick(sub, fn):
        idx = np.unravel_index(fn(sub), sub.shape)
        return float(sub[idx]), idx

    best_v, bi = pick(vals, np.argmax)
    worst_v, wi = pick(vals, np.argmin)
    interior = vals[:, :-1, :]
    boundary = vals[:, -1, :]
    best_int = float(np.max(interior))
    best_bnd = float(np.max(boundary))
    worst_int = float(np.min(interior))
    worst_bnd = float(np.min(boundary))

    def point(idx):
        k, l, t = idx
        zz = float((R * u[k]) ** 2)
        rr = float(rho[l] * math.sqrt(zz))
        return (rr * math.cos(theta[t]), rr * math.sin(theta[t]), zz)

    return ScanResult(
        ScanExtremum(best_v, point(bi), bool(bi[0] == n - 1)),
        ScanExtremum(worst_v, point(wi), bool(wi[0] == n - 1)),
        R,
        extra={
            "best_interior": best_int,
            "best_boundary": best_bnd,
            "worst_interior": worst_int,
            "worst_boundary": worst_bnd,
            "interior_beats_boundary": bool(best_int > best_bnd + tol or worst_int < worst_bnd - tol),
            "value_at_origin": float(vals[0, 0, 0]),
        },
    )


# -- coupling ------------------------------------------------------------------------

def _coupling_value(m: DetectorMoments, A_w: complex, B_w: float, lam):
    mu = lam * m.sigma_q
    num = (m.c * A_w.real - m.a * A_w.imag) * mu + (m.s + m.xi_mean * m.a) * B_w * mu * mu
    den = 1 - 2 * m.xi_mean * A_w.imag * mu + (1 + m.xi_mean**2) * B_w * mu * mu
    return num / den


@dataclass(frozen=True)
class CouplingScan:
    argmax: float
    max: float
    argmin: float
    min: float
    spacing: float
    argmax_at_edge: bool
    argmin_at_edge: bool


def coupling_scan(m: DetectorMoments, A_w: complex, B_w: float, cfg: ScanConfig = ScanConfig()) -> CouplingScan:
    """Dense scan of the output over the coupling range, golden-section polished.

    An extremum on the range boundary is reported as found there and flagged.
    """
    A_w = complex(A_w)
    lo, hi = cfg.lambda_range
    lam = np.linspace(lo, hi, cfg.lambda_points)
    h = lam[1] - lam[0]
    vals = _coupling_value(m, A_w, float(B_w), lam)
    out = []
    for maximize in (True, False):
        i = int(np.argmax(vals) if maximize else np.argmin(vals))
        edge = i in (0, len(lam) - 1)
        if edge:
            out.append((float(lam[i]), float(vals[i]), True))
            continue
        x, v = golden_section(
            lambda t: _coupling_value(m, A_w, float(B_w), t), lam[i - 1], lam[i + 1], cfg.refine_tol, maximize
        )
        out.append((float(x), float(v), False))
    (amax, vmax, emax), (amin, vmin, emin) = out
    return CouplingScan(amax, vmax, amin, vmin, float(h), emax, emin)


# -- random preparations/postselections ---------------------------------------------

@dataclass(frozen=True)
class SweepReport:
    trials: int
    max_value_closed_form: float
    interp_violations: int
    worst_interp_margin: float  # max(interp - max_value) over samples
    best_exact: float
    best_interp: float
    exact_gap: float  # max_value - best_exact
    pure_boundary_residual: float  # max | |A_w|^2 - B_w | / B_w over pure pairs
    mixed_inside_fraction: float
    skipped: int
    records: list = field(default_factory=list, repr=False)


def random_state_sweep(
    A,
    detector: tuple,
    lam: float,
    cfg: ScanConfig = ScanConfig(),
    max_value: float | None = None,
    tol: float = 1e-9,
) -> SweepReport:
    """Sample pure (even index) and mixed (odd index) preparation/postselection
    pairs and compare both output tiers with the supplied closed-form maximum.

    The interpolating tier is evaluated in the standardized frame, where the
    maximum applies; the exact tier comes from full simulation.
    """
    rho_det, q, o = detector
    A = np.asarray(A, dtype=np.complex128)
    d = A.shape[0]
    m = detector_moments(rho_det, q, o)
    k = lam * m.sigma_q

    def one(i):
        rng = sample_rng(cfg.master_seed, i)
        pure = i % 2 == 0
        rho_i = random_pure_state(d, rng) if pure else random_mixed_state(d, rng)
        E_f = random_effect(d, rng, pure=pure)
        t, cw = weak_values(E_f, rho_i, A)
        if cw.orthogonal_flag:
            return None
        x, y, z = k * cw.A_w.real, k * cw.A_w.imag, k * k * cw.B_w
        interp = (m.c * x - m.a * y + m.s * z) / (1 + z)
        setup = MeasurementSetup(rho_i, E_f, A, rho_det, q, o, lam)
        try:
            exact = conditional_mean(setup).mean_exact - m.o_mean
        except PostselectionError:
            exact = float("nan")
        gap = abs(abs(cw.A_w) ** 2 - cw.B_w) / cw.B_w if cw.B_w > 0 else 0.0
        return dict(index=i, pure=pure, interp=float(interp), exact=float(exact), rel_gap=float(gap))

    records = [r for r in parallel_map(one, range(cfg.trials), cfg.threads)]
    kept = [r for r in records if r is not None]
    if max_value is None:
        max_value = float("nan")
    interp = np.array([r["interp"] for r in kept])
    exact = np.array([r["exact"] for r in kept])
    margins = interp - max_value
    pure_gaps = [r["rel_gap"] for r in kept if r["pure"]]
    mixed_gaps = [r["rel_gap"] for r in kept if not r["pure"]]
    return SweepReport(
        trials=cfg.trials,
        max_value_closed_form=max_value,
        interp_violations=int(np.sum(margins > tol)),
        worst_interp_margin=float(np.max(margins)) if len(kept) else float("nan"),
        best_exact=float(np.nanmax(exact)) if len(kept) else float("nan"),
        best_interp=float(np.max(interp)) if len(kept) else float("nan"),
        exact_gap=float(max_value - np.nanmax(exact)) if len(kept) else float("nan"),
        pure_boundary_residual=float(max(pure_gaps, default=0.0)),
        mixed_inside_fraction=float(np.mean([g > 1e-9 for g in mixed_gaps])) if mixed_gaps else float("nan"),
        skipped=len(records) - len(kept),
        records=kept,
    )
