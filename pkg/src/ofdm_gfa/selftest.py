"""Fast oracle checks runnable from an installed package (``ofdm-gfa selftest``).

Each check compares a library routine against an independent dense or
brute-force computation on a small random instance.  The full suites live
in the test directory; these are a smoke screen for a fresh install.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import covariance, mle_direct, mle_virtual
from .mle_direct import DetectOptions, SpectralData
from .polyroot import RealPolynomial, evaluate, real_roots_in_interval
from .signal_model import (SystemConfig, circulant_channel, complex_normal, dft_matrix,
                           generate_noise, generate_pilots, generate_scene, received_direct,
                           received_effective, sample_covariance)


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_model_equivalence(rng) -> float:
    cfg = SystemConfig(N=6, M=3, L=16, P=4)
    pilots = generate_pilots(cfg, rng)
    scene = generate_scene(cfg, rng, rng)
    noise = generate_noise(cfg, rng)
    return _rel(received_direct(scene, pilots, cfg, noise).R,
                received_effective(scene, pilots, cfg, noise).R)


def check_circulant_diagonal(rng) -> float:
    L = 8
    c = complex_normal(rng, L, 1.0)
    F = dft_matrix(L)
    D = F @ circulant_channel(c) @ F.conj().T
    return float(np.abs(D - np.diag(np.diag(D))).max() / np.linalg.norm(c))


def check_rank_p_update(rng) -> float:
    L, P, c = 16, 4, 0.7
    S = complex_normal(rng, (L, P), 1.0)
    X = complex_normal(rng, (L, 3), 1.0)
    base = 0.3 * np.eye(L) + X @ X.conj().T
    state = covariance.CovarianceState(np.linalg.inv(base), 0.3)
    covariance.rank_p_update(state, S, c)
    return _rel(state.inv, np.linalg.inv(base + c * S @ S.conj().T))


def check_numerator_example(rng) -> float:
    p = mle_direct.derivative_numerator(SpectralData(np.array([1.0, 2.0]), np.array([3.0, 5.0])))
    return float(np.abs(p.coeffs - [-5.0, -9.0, 1.0, 8.0]).max())


def check_direct_gradient(rng) -> float:
    P = 3
    v = rng.uniform(0.2, 3.0, P)
    sd = SpectralData(np.sort(v), rng.uniform(0.0, 4.0, P))
    num = mle_direct.derivative_numerator(sd)
    worst, h = 0.0, 1e-6
    for d in rng.uniform(-0.9 / v.max(), 1.0, 10):
        fd = (mle_direct.delta_objective(sd, d + h) - mle_direct.delta_objective(sd, d - h)) / (2 * h)
        an = evaluate(num, d) / np.prod((1 + d * sd.v_tilde) ** 2)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-3))
    return worst


def check_direct_step_grid(rng) -> float:
    P = 2
    sd = SpectralData(np.sort(rng.uniform(0.2, 3.0, P)), rng.uniform(0.0, 6.0, P))
    a = rng.uniform(0, 1)
    d_star = mle_direct.best_step(sd, -a, 1 - a)
    grid = np.linspace(-a, 1 - a, 20001)
    vals = np.sum(np.log1p(np.outer(grid, sd.v_tilde))
                  - grid[:, None] * sd.u_tilde / (1 + np.outer(grid, sd.v_tilde)), axis=1)
    return max(0.0, mle_direct.delta_objective(sd, d_star) - vals.min())


def check_polyroot(rng) -> float:
    p = RealPolynomial(np.polynomial.polynomial.polyfromroots([0.5, 0.5, 2.0, 1j, -1j]).real)
    return float(np.abs(np.array(real_roots_in_interval(p, 0.0, 3.0)) - [0.5, 2.0]).max())


def check_woodbury_after_detect(rng) -> float:
    cfg = SystemConfig(N=20, M=32, L=16, P=2)
    pilots = generate_pilots(cfg, rng)
    scene = generate_scene(cfg, rng, rng)
    sh = sample_covariance(received_effective(scene, pilots, cfg, generate_noise(cfg, rng)))
    alpha, diag = mle_direct.detect(sh, pilots, cfg, DetectOptions(max_sweeps=5))
    blocks = list(pilots.effective_pilots)
    dense = covariance.model_covariance(alpha, blocks, cfg.gains, cfg.noise_var)
    return _rel(diag.state.cov.inv, np.linalg.inv(dense))


def check_virtual_p1(rng) -> float:
    cfg = SystemConfig(N=15, M=32, L=16, P=1)
    pilots = generate_pilots(cfg, rng)
    scene = generate_scene(cfg, rng, rng)
    sh = sample_covariance(received_effective(scene, pilots, cfg, generate_noise(cfg, rng)))
    a, _ = mle_direct.detect(sh, pilots, cfg)
    b, _ = mle_virtual.detect(sh, pilots, cfg, rho=0.0)
    return float(np.abs(a - b).max())


CHECKS: list[tuple[str, Callable, float]] = [
    ("model equivalence", check_model_equivalence, 1e-9),
    ("circulant diagonalization", check_circulant_diagonal, 1e-12 * 8),
    ("rank-P Woodbury update", check_rank_p_update, 1e-9),
    ("numerator worked example", check_numerator_example, 1e-12),
    ("direct gradient consistency", check_direct_gradient, 1e-6),
    ("direct step vs grid", check_direct_step_grid, 1e-7),
    ("interval roots", check_polyroot, 1e-7),
    ("inverse after detect", check_woodbury_after_detect, 1e-8),
    ("P=1 virtual equals direct", check_virtual_p1, 1e-8),
]


def run(seed: int = 0, out=print) -> bool:
    ok = True
    for k, (name, fn, tol) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, k])
        try:
            err = fn(rng)
            passed = err <= tol
            detail = f"{err:.3g} (tol {tol:g})"
        except Exception as exc:  # report, keep going
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return ok
