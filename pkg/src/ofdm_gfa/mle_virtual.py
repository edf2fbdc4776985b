"""Penalized coordinate-descent ML detection over NP virtual devices.

Every (device, tap) pair is treated as its own rank-one atom ``S[:, i]``
with activity ``beta_i``.  The requirement that the P virtual devices of
one actual device share an activity is relaxed into the penalty

    rho * eta(beta),   eta(beta) = sum_n a_n (1 - a_n),   a_n = group mean,

which vanishes exactly when every group is constant at 0 or 1.  With
``rho = 0`` this is the plain flat-fading ML detector run on the virtual
devices (the BL-MLE baseline).  Device scores are the group means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import covariance
from .covariance import CovarianceState
from .mle_direct import (TIE_RTOL, DetectOptions, Diagnostics, InfeasibleStepError,
                         _sigma_hat, log_buffers)
from .polyroot import _roots_or_empty
from .signal_model import PilotSet, SystemConfig

# default penalty weight, as a multiple of tr(Sigma_hat) / L
RHO_SCALE = 0.1


def group_means(beta: np.ndarray, N: int, P: int) -> np.ndarray:
    return np.asarray(beta, dtype=float).reshape(N, P).mean(axis=1)


def map_to_alpha(beta: np.ndarray, N: int, P: int) -> np.ndarray:
    """Device activities as the mean over each device's P virtual devices."""
    return group_means(beta, N, P)


def penalty_value(beta: np.ndarray, N: int, P: int) -> float:
    a = group_means(beta, N, P)
    return float(np.sum(a * (1.0 - a)))


def default_rho(sigma_hat) -> float:
    """Penalty weight ``0.1 * tr(Sigma_hat) / L``, scaled to the received energy."""
    sh = _sigma_hat(sigma_hat)
    return RHO_SCALE * float(np.trace(sh).real / sh.shape[0])


@dataclass
class VirtualState:
    beta: np.ndarray
    cov: CovarianceState
    rho: float
    group_sums: np.ndarray
    P: int
    columns: np.ndarray        # (NP, L), row i is S[:, i]
    virtual_gains: np.ndarray  # (NP,)

    @classmethod
    def initial(cls, pilots: PilotSet, config: SystemConfig, rho: float) -> "VirtualState":
        N, P = config.N, config.P
        return cls(
            beta=np.zeros(N * P),
            cov=covariance.init(config.L, config.noise_var),
            rho=float(rho),
            group_sums=np.zeros(N),
            P=P,
            columns=np.ascontiguousarray(pilots.stacked.T, dtype=np.complex128),
            virtual_gains=np.repeat(np.asarray(config.gains, dtype=float), P),
        )

    def device_of(self, i: int) -> int:
        return i // self.P


@njit(cache=True)
def _forms(inv, s, sh):
    a = inv @ s
    v = np.vdot(s, a).real
    u = np.vdot(a, sh @ a).real
    return a, v, u


@njit(cache=True)
def _coefficients(v, u, g, rho, P, gsum):
    k = (rho / P) * (1.0 - 2.0 * gsum / P)
    w = g * v
    A = -2.0 * rho * w * w / (P * P)
    B = k * w * w - 4.0 * rho * w / (P * P)
    C = w * w + 2.0 * k * w - 2.0 * rho / (P * P)
    D = w - g * u + k
    return A, B, C, D


@njit(cache=True)
def _delta(d, v, u, g, rho, P, gsum):
    den = 1.0 + d * g * v
    if den <= 0.0:
        return np.inf
    return np.log1p(d * g * v) - d * g * u / den + (rho * d / P) * (1.0 - d / P - 2.0 * gsum / P)


@njit(cache=True)
def _delta_scale(d, v, u, g, rho, P, gsum):
    den = 1.0 + d * g * v
    return (abs(np.log1p(d * g * v)) + abs(d * g * u / den)
            + abs(rho * d / P) * (1.0 + abs(d / P) + abs(2.0 * gsum / P)))


@njit(cache=True)
def _best_step(v, u, g, rho, P, gsum, lo, hi):
    A, B, C, D = _coefficients(v, u, g, rho, P, gsum)
    roots = _roots_or_empty(np.array([D, C, B, A]), lo, hi)
    best_d = 0.0
    best_f = 0.0
    best_s = 0.0
    for k in range(roots.size + 2):
        if k == 0:
            d = lo
        elif k == 1:
            d = hi
        else:
            d = roots[k - 2]
        f = _delta(d, v, u, g, rho, P, gsum)
        if not np.isfinite(f):
            continue
        sc = _delta_scale(d, v, u, g, rho, P, gsum)
        tie = TIE_RTOL * (sc + best_s)
        if f < best_f - tie or (abs(f - best_f) <= tie and abs(d) < abs(best_d)):
            best_d = d
            best_f = f
            best_s = sc
    return best_d


@njit(cache=True)
def _sweep(inv, beta, sums, cols, gains, sh, rho, P, log_idx, log_d, log_pos):
    max_change = 0.0
    for i in range(beta.size):
        g = gains[i]
        if g == 0.0 and rho == 0.0:
            continue
        s = cols[i]
        a, v, u = _forms(inv, s, sh)
        b = beta[i]
        n = i // P
        d = _best_step(v, u, g, rho, P, sums[n], -b, 1.0 - b)
        if d == 0.0:
            continue
        if d == 1.0 - b:
            nb = 1.0
        elif d == -b:
            nb = 0.0
        else:
            nb = min(1.0, max(0.0, b + d))
        beta[i] = nb
        sums[n] += nb - b
        if g != 0.0:
            c = d * g / (1.0 + d * g * v)
            inv -= c * np.outer(a, np.conj(a))
        max_change = max(max_change, abs(d))
        if log_idx.size > 0:
            log_idx[log_pos[0]] = i
            log_d[log_pos[0]] = d
        log_pos[0] += 1
    return max_change


def _scalars(i: int, state: VirtualState, sigma_hat):
    _, v, u = _forms(np.ascontiguousarray(state.cov.inv), state.columns[i], _sigma_hat(sigma_hat))
    return float(v), float(u), float(state.virtual_gains[i]), float(state.group_sums[state.device_of(i)])


def cubic_coefficients(i: int, state: VirtualState, sigma_hat) -> tuple[float, float, float, float]:
    """(A, B, C, D) of the derivative numerator ``A d^3 + B d^2 + C d + D`` for ``beta[i]``."""
    v, u, g, gsum = _scalars(i, state, sigma_hat)
    return tuple(float(x) for x in _coefficients(v, u, g, state.rho, state.P, gsum))


def delta_penalized_objective(i: int, state: VirtualState, sigma_hat, d: float) -> float:
    """Change of the penalized objective when ``beta[i]`` moves by ``d``."""
    v, u, g, gsum = _scalars(i, state, sigma_hat)
    if not 1.0 + d * g * v > 0.0:
        raise InfeasibleStepError("infeasible step")
    return float(_delta(float(d), v, u, g, state.rho, state.P, gsum))


def coordinate_step(i: int, state: VirtualState, sigma_hat) -> float:
    """Optimal increment of ``beta[i]`` with the other coordinates fixed."""
    v, u, g, gsum = _scalars(i, state, sigma_hat)
    if g == 0.0 and state.rho == 0.0:
        return 0.0
    b = float(state.beta[i])
    return float(_best_step(v, u, g, state.rho, state.P, gsum, -b, 1.0 - b))


def penalized_objective(state: VirtualState, sigma_hat) -> float:
    """Penalized objective of the current state, from the maintained inverse."""
    N = len(state.group_sums)
    return (covariance.objective_from_inverse(state.cov.inv, _sigma_hat(sigma_hat))
            + state.rho * penalty_value(state.beta, N, state.P))


def detect(sigma_hat, pilots: PilotSet, config: SystemConfig, rho: float | None = None,
           options: DetectOptions | None = None) -> tuple[np.ndarray, Diagnostics]:
    """Coordinate sweeps over the virtual devices in index order.

    ``rho=None`` uses :func:`default_rho`; ``rho=0`` gives BL-MLE.  Returns
    the length-NP vector ``beta``; :func:`map_to_alpha` turns it into
    device scores.
    """
    opts = options or DetectOptions()
    sh = _sigma_hat(sigma_hat)
    if rho is None:
        rho = default_rho(sh)
    if not (rho >= 0 and math.isfinite(rho)):
        raise ValueError(f"rho must be finite and >= 0, got {rho}")
    state = VirtualState.initial(pilots, config, rho)
    NP = config.N * config.P
    log_idx, log_d, log_pos = log_buffers(opts.record_updates, NP * opts.max_sweeps)
    diag = Diagnostics()
    if opts.track_objective:
        diag.objective.append(penalized_objective(state, sh))
    for _ in range(opts.max_sweeps):
        max_change = _sweep(state.cov.inv, state.beta, state.group_sums, state.columns,
                            state.virtual_gains, sh, state.rho, state.P, log_idx, log_d, log_pos)
        state.cov.hermitize()
        diag.sweeps += 1
        diag.max_changes.append(float(max_change))
        if opts.track_objective:
            diag.objective.append(penalized_objective(state, sh))
        if max_change < opts.tol:
            diag.converged = True
            break
    diag.updates = int(log_pos[0])
    if opts.record_updates:
        n_log = int(log_pos[0])
        diag.update_log = list(zip(log_idx[:n_log].tolist(), log_d[:n_log].tolist()))
    diag.state = state
    return state.beta.copy(), diag
