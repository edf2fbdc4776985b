"""Coordinate-descent ML activity detection over the N actual devices.

Each device contributes ``alpha_n g_n S_n S_n^H`` (rank P) to the model
covariance.  For one coordinate the change in objective depends only on
the eigenvalues ``v`` of ``g_n S_n^H Sigma^{-1} S_n`` and the matching
diagonal ``u`` of ``g_n S_n^H Sigma^{-1} Sigma_hat Sigma^{-1} S_n`` in that
eigenbasis:

    delta(d) = sum_p log(1 + d v_p) - d sum_p u_p / (1 + d v_p)

Its derivative is ``numerator(d) / prod_p (1 + d v_p)^2`` with a
numerator of degree 2P-1, so the exact coordinate minimizer lies among
the numerator's real roots in the feasible interval and the two
endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import covariance
from .covariance import CovarianceState
from .polyroot import RealPolynomial, _roots_or_empty
from .signal_model import PilotSet, SampleCovariance, SystemConfig

# candidates whose objective values differ by less than this multiple of
# their accumulated term magnitudes count as ties
TIE_RTOL = 1e-13


class InfeasibleStepError(ValueError):
    pass


@dataclass
class DetectOptions:
    max_sweeps: int = 20
    tol: float = 1e-4
    track_objective: bool = True
    # keep (coordinate, increment) for every accepted update
    record_updates: bool = False


@dataclass
class Diagnostics:
    sweeps: int = 0
    converged: bool = False
    updates: int = 0
    max_changes: list[float] = field(default_factory=list)
    # objective before the first sweep, then after each sweep
    objective: list[float] = field(default_factory=list)
    update_log: list[tuple[int, float]] = field(default_factory=list)
    # final detector state, covariance inverse included
    state: object = None


@dataclass
class DirectState:
    alpha: np.ndarray
    cov: CovarianceState
    sweep_count: int = 0

    @classmethod
    def initial(cls, N: int, L: int, noise_var: float) -> "DirectState":
        return cls(np.zeros(N), covariance.init(L, noise_var))


@dataclass(frozen=True)
class SpectralData:
    v_tilde: np.ndarray
    u_tilde: np.ndarray


def _sigma_hat(sigma_hat) -> np.ndarray:
    sh = sigma_hat.mat if isinstance(sigma_hat, SampleCovariance) else np.asarray(sigma_hat)
    return np.ascontiguousarray(sh, dtype=np.complex128)


@njit(cache=True)
def _forms(inv, block, block_h, sh, gain):
    A = inv @ block
    V = gain * (block_h @ A)
    T = gain * (np.ascontiguousarray(A.conj().T) @ (sh @ A))
    V = 0.5 * (V + np.ascontiguousarray(V.conj().T))
    T = 0.5 * (T + np.ascontiguousarray(T.conj().T))
    return A, V, T


@njit(cache=True)
def _eig(V, T):
    v, U = np.linalg.eigh(V)
    W = T @ U
    P = v.size
    u = np.empty(P)
    for p in range(P):
        acc = 0.0
        for i in range(P):
            acc += (np.conj(U[i, p]) * W[i, p]).real
        u[p] = acc
    return v, u, U


@njit(cache=True)
def _mul_linear(c, deg, a0, a1):
    """In place: c[:deg+2] = c[:deg+1] * (a0 + a1 d)."""
    c[deg + 1] = 0.0
    for k in range(deg + 1, 0, -1):
        c[k] = c[k] * a0 + c[k - 1] * a1
    c[0] *= a0


@njit(cache=True)
def _numerator_coeffs(v, u):
    """Ascending coefficients of sum_p [v_p(1+d v_p) - u_p] prod_{q!=p} (1+d v_q)^2."""
    P = v.size
    out = np.zeros(2 * P)
    term = np.zeros(2 * P)
    for p in range(P):
        term[:] = 0.0
        term[0] = v[p] - u[p]
        term[1] = v[p] * v[p]
        deg = 1
        for q in range(P):
            if q != p:
                _mul_linear(term, deg, 1.0, v[q])
                _mul_linear(term, deg + 1, 1.0, v[q])
                deg += 2
        out += term
    return out


@njit(cache=True)
def _delta(v, u, d):
    acc = 0.0
    for p in range(v.size):
        den = 1.0 + d * v[p]
        if den <= 0.0:
            # reachable only through rounding at the lower endpoint, where f -> +inf
            return np.inf
        acc += np.log1p(d * v[p]) - d * u[p] / den
    return acc


@njit(cache=True)
def _delta_scale(v, u, d):
    """Sum of term magnitudes of :func:`_delta`, a rounding-error yardstick."""
    acc = 0.0
    for p in range(v.size):
        den = 1.0 + d * v[p]
        acc += abs(np.log1p(d * v[p])) + abs(d * u[p] / den)
    return acc


@njit(cache=True)
def _best_step(v, u, lo, hi):
    roots = _roots_or_empty(_numerator_coeffs(v, u), lo, hi)
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
        f = _delta(v, u, d)
        if not np.isfinite(f):
            continue
        sc = _delta_scale(v, u, d)
        tie = TIE_RTOL * (sc + best_s)
        if f < best_f - tie or (abs(f - best_f) <= tie and abs(d) < abs(best_d)):
            best_d = d
            best_f = f
            best_s = sc
    return best_d


@njit(cache=True)
def _sweep(inv, alpha, blocks, blocks_h, gains, sh, log_idx, log_d, log_pos):
    """One pass over all devices; updates ``inv`` and ``alpha`` in place."""
    max_change = 0.0
    for n in range(alpha.size):
        g = gains[n]
        if g == 0.0:
            continue
        A, V, T = _forms(inv, blocks[n], blocks_h[n], sh, g)
        v, u, U = _eig(V, T)
        a = alpha[n]
        d = _best_step(v, u, -a, 1.0 - a)
        if d == 0.0:
            continue
        if d == 1.0 - a:
            alpha[n] = 1.0
        elif d == -a:
            alpha[n] = 0.0
        else:
            alpha[n] = min(1.0, max(0.0, a + d))
        # Woodbury in the eigenbasis of V: (I + d V)^{-1} = U diag(1/(1+d v)) U^H
        AU = A @ U
        scaled = AU.copy()
        for p in range(v.size):
            scaled[:, p] *= d * g / (1.0 + d * v[p])
        inv -= scaled @ np.ascontiguousarray(AU.conj().T)
        max_change = max(max_change, abs(d))
        if log_idx.size > 0:
            log_idx[log_pos[0]] = n
            log_d[log_pos[0]] = d
        log_pos[0] += 1
    return max_change


def quadratic_forms(inv, block: np.ndarray, sigma_hat, gain: float):
    """``V = g S^H Sigma^{-1} S`` and ``T = g S^H Sigma^{-1} Sigma_hat Sigma^{-1} S``."""
    inv = inv.inv if isinstance(inv, CovarianceState) else inv
    block = np.ascontiguousarray(block, dtype=np.complex128)
    _, V, T = _forms(np.ascontiguousarray(inv, dtype=np.complex128), block,
                     np.ascontiguousarray(block.conj().T), _sigma_hat(sigma_hat), float(gain))
    return V, T


def spectral(V: np.ndarray, T: np.ndarray) -> SpectralData:
    v, u, _ = _eig(np.ascontiguousarray(V, dtype=np.complex128),
                   np.ascontiguousarray(T, dtype=np.complex128))
    return SpectralData(v, u)


def delta_objective(sd: SpectralData, d: float) -> float:
    den = 1.0 + d * np.asarray(sd.v_tilde)
    if np.any(den <= 0.0):
        raise InfeasibleStepError("infeasible step")
    return float(np.sum(np.log1p(d * np.asarray(sd.v_tilde))) - d * np.sum(sd.u_tilde / den))


def derivative_numerator(sd: SpectralData) -> RealPolynomial:
    return RealPolynomial(_numerator_coeffs(np.asarray(sd.v_tilde, dtype=float),
                                            np.asarray(sd.u_tilde, dtype=float)))


def best_step(sd: SpectralData, lo: float, hi: float) -> float:
    """Exact minimizer of the coordinate delta-objective on ``[lo, hi]``.

    Candidates are the numerator roots in the interval, both endpoints and
    ``d = 0``; near-ties go to the smallest ``|d|``.
    """
    return float(_best_step(np.asarray(sd.v_tilde, dtype=float),
                            np.asarray(sd.u_tilde, dtype=float), float(lo), float(hi)))


def coordinate_step(n: int, state: DirectState, sigma_hat, pilots: PilotSet,
                    config: SystemConfig) -> float:
    """Optimal increment of ``alpha[n]`` with the other coordinates fixed."""
    g = float(config.gains[n])
    if g == 0.0:
        return 0.0
    V, T = quadratic_forms(state.cov.inv, pilots.effective_pilots[n], sigma_hat, g)
    a = float(state.alpha[n])
    return best_step(spectral(V, T), -a, 1.0 - a)


def log_buffers(record: bool, size: int):
    n = size if record else 0
    return np.zeros(n, dtype=np.int64), np.zeros(n), np.zeros(1, dtype=np.int64)


def detect(sigma_hat, pilots: PilotSet, config: SystemConfig,
           options: DetectOptions | None = None) -> tuple[np.ndarray, Diagnostics]:
    """Sweep the devices in index order until the activities settle.

    Stops when the largest coordinate change within a sweep drops below
    ``options.tol`` or after ``options.max_sweeps`` sweeps.  The inverse
    covariance is re-symmetrized once per sweep.
    """
    opts = options or DetectOptions()
    sh = _sigma_hat(sigma_hat)
    N, L = config.N, config.L
    state = DirectState.initial(N, L, config.noise_var)
    blocks = np.ascontiguousarray(pilots.effective_pilots, dtype=np.complex128)
    blocks_h = np.ascontiguousarray(blocks.conj().transpose(0, 2, 1))
    gains = np.ascontiguousarray(config.gains, dtype=float)
    log_idx, log_d, log_pos = log_buffers(opts.record_updates, N * opts.max_sweeps)
    diag = Diagnostics()
    if opts.track_objective:
        diag.objective.append(covariance.objective_from_inverse(state.cov.inv, sh))
    for _ in range(opts.max_sweeps):
        max_change = _sweep(state.cov.inv, state.alpha, blocks, blocks_h, gains, sh,
                            log_idx, log_d, log_pos)
        state.cov.hermitize()
        state.sweep_count += 1
        diag.max_changes.append(float(max_change))
        if opts.track_objective:
            diag.objective.append(covariance.objective_from_inverse(state.cov.inv, sh))
        if max_change < opts.tol:
            diag.converged = True
            break
    diag.sweeps = state.sweep_count
    diag.updates = int(log_pos[0])
    if opts.record_updates:
        n_log = int(log_pos[0])
        diag.update_log = list(zip(log_idx[:n_log].tolist(), log_d[:n_log].tolist()))
    diag.state = state
    return state.alpha.copy(), diag
