"""Shared fixtures and independent oracles for the test suites."""

import itertools

import numpy as np
import pytest

from ofdm_gfa.signal_model import (SystemConfig, complex_normal, generate_noise, generate_pilots,
                                   generate_scene, received_effective, sample_covariance)


def dense_covariance(weights, blocks, gains, noise_var):
    """Sigma = sigma^2 I + sum_k w_k g_k B_k B_k^H, built term by term."""
    L = blocks[0].shape[0]
    sigma = noise_var * np.eye(L, dtype=complex)
    for w, g, B in zip(weights, gains, blocks):
        B = B.reshape(L, -1)
        sigma = sigma + w * g * (B @ B.conj().T)
    return sigma


def dense_objective(sigma, sigma_hat):
    """log|Sigma| + tr(Sigma^-1 Sigma_hat) via eigenvalues (no Cholesky)."""
    lam = np.linalg.eigvalsh(sigma)
    return float(np.sum(np.log(lam)) + np.trace(np.linalg.solve(sigma, sigma_hat)).real)


def h_combinatorial(z, t):
    """Sum over (x, y) in {0,1}^k with x_p + y_p <= 1 and sum(x + 2y) = t
    of prod 2^x_p z_p^(x_p + 2 y_p)."""
    total = 0.0
    for choice in itertools.product((0, 1, 2), repeat=len(z)):
        # 0: neither, 1: x_p = 1, 2: y_p = 1
        if sum(choice) != t:
            continue
        term = 1.0
        for c, zp in zip(choice, z):
            term *= (2.0 * zp) if c == 1 else (zp * zp if c == 2 else 1.0)
        total += term
    return total


def numerator_combinatorial(v, u):
    """Coefficient of d^t: sum_p v_p^2 h(v_-p, t-1) + (v_p - u_p) h(v_-p, t)."""
    P = len(v)
    out = np.zeros(2 * P)
    for t in range(2 * P):
        for p in range(P):
            rest = np.delete(v, p)
            if t >= 1:
                out[t] += v[p] ** 2 * h_combinatorial(rest, t - 1)
            if t <= 2 * P - 2:
                out[t] += (v[p] - u[p]) * h_combinatorial(rest, t)
    return out


def make_problem(N=20, M=32, L=16, P=2, noise_var=0.1, activity_prob=0.2, seed=0, gains=None):
    cfg = SystemConfig(N=N, M=M, L=L, P=P, noise_var=noise_var,
                       activity_prob=activity_prob, gains=gains)
    rng = np.random.default_rng(seed)
    pilots = generate_pilots(cfg, rng)
    scene = generate_scene(cfg, rng, rng, seed=seed)
    noise = generate_noise(cfg, rng)
    sh = sample_covariance(received_effective(scene, pilots, cfg, noise))
    return cfg, pilots, scene, sh


def random_psd_inverse(rng, L, noise_var=0.1, rank=3):
    X = complex_normal(rng, (L, rank), 1.0)
    sigma = noise_var * np.eye(L) + X @ X.conj().T
    return sigma, np.linalg.inv(sigma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
