"""
Seeded property suites behind ``wmopt verify``.

Each suite draws samples from (master_seed, index) streams, so a failing
sample is reproducible from the reported index alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateProblemError
from .oracle import ScanConfig, boundary_scan, coupling_scan, parallel_map
from .optimizer import DetectorMoments, detector_moments, extremal_outputs, optimal_coupling, tradeoff_bound
from .simulator import normalized_probabilities, spectral_projectors, validity_report
from .states import (
    MeasurementSetup,
    oscillator_operators,
    parity,
    random_effect,
    random_hermitian,
    random_mixed_state,
    random_pure_state,
    sample_rng,
)
from .weak_values import weak_value_triple

CAUCHY_DIMS = (2, 3, 4, 8)


@dataclass
class SuiteResult:
    name: str
    samples: int
    passed: int
    worst_margin: float  # largest violation measure; <= 0 means inside the tolerance
    failing_index: int | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed == self.samples and not self.details.get("failed_checks")

    def as_dict(self, seed: int) -> dict:
        out = {
            "samples": self.samples,
            "passed": self.passed,
            "ok": self.ok,
            "worst_margin": self.worst_margin,
            "failing_sample": None if self.failing_index is None else {"seed": seed, "index": self.failing_index},
        }
        out.update(self.details)
        return out


def _collect(name, results):
    """results: list of (index, margin, ok)."""
    bad = [r for r in results if not r[2]]
    worst = max((r[1] for r in results), default=float("nan"))
    return SuiteResult(name, len(results), len(results) - len(bad), worst, bad[0][0] if bad else None)


# -- Cauchy-Schwarz ------------------------------------------------------------------

def cauchy_suite(trials: int, seed: int, threads: int = 1, dims=CAUCHY_DIMS) -> SuiteResult:
    """Pure pairs: |alpha|^2 = beta omega within 1e-9 relative.  Mixed pairs:
    |alpha|^2 <= beta omega + 1e-12, strictly in at least 99% of samples."""
    jobs = [(d, i) for d in dims for i in range(trials)]

    def one(job):
        d, i = job
        index = d * 1_000_000 + i
        rng = sample_rng(seed, index)
        A = random_hermitian(d, rng)
        rho_p = random_pure_state(d, rng)
        E_p = random_effect(d, rng, pure=True)
        t = weak_value_triple(E_p, rho_p, A)
        rhs = t.beta * t.omega
        pure_rel = abs(abs(t.alpha) ** 2 - rhs) / max(rhs, 1e-300)
        rho_m = random_mixed_state(d, rng)
        E_m = random_effect(d, rng)
        t = weak_value_triple(E_m, rho_m, A)
        excess = abs(t.alpha) ** 2 - t.beta * t.omega
        strict = excess < -1e-12 * max(t.beta * t.omega, 1e-300)
        return index, pure_rel, excess, strict

    res = parallel_map(one, jobs, threads)
    pure_ok = [r[1] <= 1e-9 for r in res]
    mixed_ok = [r[2] <= 1e-12 for r in res]
    strict_frac = float(np.mean([r[3] for r in res]))
    fails = [r[0] for r, p, m in zip(res, pure_ok, mixed_ok) if not (p and m)]
    failed_checks = [] if strict_frac >= 0.99 else ["strict_fraction"]
    return SuiteResult(
        "cauchy",
        len(res),
        len(res) - len(fails),
        max(r[2] for r in res),
        fails[0] if fails else None,
        details={
            "dims": list(dims),
            "worst_pure_relative_gap": max(r[1] for r in res),
            "worst_mixed_excess": max(r[2] for r in res),
            "strict_fraction": strict_frac,
            "failed_checks": failed_checks,
        },
    )


# -- trade-off bound and perturbative bounds ------------------------------------------

def symmetric_detector(dim: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parity-even detector state with the oscillator pointer and a parity-odd
    readout, so the sandwich average s vanishes identically."""
    P = parity(dim)
    q, _ = oscillator_operators(dim)
    rho = random_mixed_state(dim, rng).matrix
    rho = 0.5 * (rho + P @ rho @ P)
    h = random_hermitian(dim, rng).matrix
    o = 0.5 * (h - P @ h @ P)
    return rho, q.matrix, o


def tradeoff_suite(trials: int, seed: int, threads: int = 1, dim: int = 8) -> SuiteResult:
    """Closed-form maximum <= trade-off bound + 1e-9, for generic and for
    symmetric (s = 0) detectors; in the latter the bound is sigma_o."""

    def one(i):
        rng = sample_rng(seed, i)
        if i % 2:
            rho, q, o = symmetric_detector(dim, rng)
        else:
            rho = random_mixed_state(dim, rng).matrix
            q = random_hermitian(dim, rng).matrix
            o = random_hermitian(dim, rng).matrix
        m = detector_moments(rho, q, o)
        try:
            e = extremal_outputs(m)
        except DegenerateProblemError:
            return i, -math.inf, True
        b = tradeoff_bound(m).bound
        margin = max(e.max_value - b, -e.min_value - b)
        return i, margin, margin <= 1e-9

    return _collect("tradeoff", parallel_map(one, range(trials), threads))


def random_valid_setup(rng, delta: float = 0.1, d_sys: int = 2, d_det: int = 6, fraction: float = 0.9):
    """Random setup whose coupling satisfies the perturbative condition at
    ``delta``; (2 lam max|A| max|q|)^n <= delta^n bounds every moment term."""
    A = random_hermitian(d_sys, rng)
    rho_i = random_mixed_state(d_sys, rng) if rng.random() < 0.5 else random_pure_state(d_sys, rng)
    E_f = random_effect(d_sys, rng, pure=bool(rng.random() < 0.5))
    rho_det = random_mixed_state(d_det, rng)
    q = random_hermitian(d_det, rng)
    o = random_hermitian(d_det, rng)
    amax = np.max(np.abs(np.linalg.eigvalsh(A.matrix)))
    qmax = np.max(np.abs(np.linalg.eigvalsh(q.matrix)))
    lam = fraction * rng.uniform(0.05, 1.0) * delta / (2 * amax * qmax)
    return MeasurementSetup(rho_i, E_f, A, rho_det, q, o, lam * (1 if rng.random() < 0.5 else -1))


def perturbation_suite(trials: int, seed: int, threads: int = 1, delta: float = 0.1, n_max: int = 8) -> SuiteResult:
    """|N - N1| <= epsilon on setups meeting the validity condition, and every
    normalized joint probability >= -1e-12."""

    def one(i):
        rng = sample_rng(seed, 10_000_000 + i)
        setup = random_valid_setup(rng, delta)
        rep = validity_report(setup, delta, n_max)
        probs = normalized_probabilities(setup, spectral_projectors(setup.o.matrix))
        neg = -min(probs.joint)
        margin = max(rep.N_error_actual - rep.epsilon, neg - 1e-12)
        return i, margin, rep.condition_holds and margin <= 0

    return _collect("perturbation", parallel_map(one, range(trials), threads))


# -- closed-form optima against the oracle -------------------------------------------

def random_moments(rng, box: float = 5.0) -> DetectorMoments:
    while True:
        a, c, s = rng.uniform(-box, box, 3)
        if max(abs(a), abs(c), abs(s)) > 0:
            return DetectorMoments(float(a), float(c), float(s))


def optima_suite(trials: int, seed: int, threads: int = 1, tol: float = 1e-6, cfg: ScanConfig = ScanConfig()) -> SuiteResult:
    """Extremal values and locations agree with boundary_scan within ``tol``;
    max * min = -(c^2 + a^2)/4 within 1e-12."""

    def one(i):
        m = random_moments(sample_rng(seed, 20_000_000 + i))
        e = extremal_outputs(m)
        scan = boundary_scan(m, cfg)
        dv = max(abs(e.max_value - scan.best.value), abs(e.min_value - scan.worst.value))
        dl = 0.0
        for pt, sp in ((e.max_point, scan.best), (e.min_point, scan.worst)):
            dl = max(dl, max(abs(u - v) for u, v in zip(pt.as_list(), sp.point)))
        dp = abs(e.max_value * e.min_value + (m.c**2 + m.a**2) / 4)
        margin = max(dv - tol, dl - tol, dp - 1e-12)
        return i, margin, margin <= 0, dv, dl, dp

    res = parallel_map(one, range(trials), threads)
    out = _collect("optima", [r[:3] for r in res])
    out.details = {
        "worst_value_error": max(r[3] for r in res),
        "worst_location_error": max(r[4] for r in res),
        "worst_root_product_error": max(r[5] for r in res),
    }
    return out


def coupling_case(m: DetectorMoments, A_w: complex, B_w: float, cfg: ScanConfig = ScanConfig()) -> dict:
    opt = optimal_coupling(m, A_w, B_w)
    scan = coupling_scan(m, A_w, B_w, cfg)
    lo, hi = cfg.lambda_range
    # a root outside the scanned range shows up as an edge hit in the scan
    inside = lo < opt.argmax < hi
    if inside:
        ok = not scan.argmax_at_edge and abs(scan.argmax - opt.argmax) <= scan.spacing
    else:
        ok = scan.argmax_at_edge
    return {
        "root": opt.argmax,
        "scan_argmax": scan.argmax,
        "spacing": scan.spacing,
        "value": opt.max_value,
        "scan_max": scan.max,
        "root_in_range": inside,
        "ok": bool(ok),
    }


def printed_formula_record() -> dict:
    """The reference case c = 1, a = s = xi_mean = 0, A_w = B_w = 1 with both
    the stationary roots and the roots of the printed closed form."""
    m = DetectorMoments(0.0, 1.0, 0.0)
    opt = optimal_coupling(m, 1.0, 1.0)
    scan = coupling_scan(m, 1.0, 1.0)
    return {
        "stationary_roots": list(opt.lambda_roots),
        "stationary_values": list(opt.values),
        "printed_formula_roots": list(opt.literal_printed_roots),
        "printed_formula_values": list(opt.literal_printed_values),
        "scan_argmax": scan.argmax,
        "scan_max": scan.max,
        "discrepancy": bool(abs(opt.literal_printed_roots[0] - opt.argmax) > scan.spacing),
    }


def coupling_suite(trials: int, seed: int, threads: int = 1, cfg: ScanConfig = ScanConfig()) -> SuiteResult:
    def one(i):
        rng = sample_rng(seed, 30_000_000 + i)
        a, c, s, xm = rng.uniform(-1, 1, 4)
        m = DetectorMoments(float(a), float(c), float(s), xi_mean=float(xm))
        A_w = complex(*rng.uniform(-2, 2, 2))
        B_w = abs(A_w) ** 2 * (1 + rng.exponential(1.0))
        rec = coupling_case(m, A_w, B_w, cfg)
        margin = abs(rec["scan_argmax"] - rec["root"]) - rec["spacing"] if rec["root_in_range"] else 0.0
        return i, margin, rec["ok"]

    out = _collect("coupling", parallel_map(one, range(trials), threads))
    # the printed-formula mismatch is recorded, never a failure
    out.details = {"printed_formula_record": printed_formula_record()}
    return out


SUITES = {
    "cauchy": lambda n, seed, th: [cauchy_suite(n, seed, th)],
    "bounds": lambda n, seed, th: [tradeoff_suite(n, seed, th), perturbation_suite(n, seed, th)],
    "optima": lambda n, seed, th: [optima_suite(n, seed, th)],
    "coupling": lambda n, seed, th: [coupling_suite(n, seed, th)],
}


def run_suites(name: str, trials: int, seed: int, threads: int = 1) -> list[SuiteResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        out.extend(SUITES[n](trials, seed, threads))
    return out
