"""Inverse model covariance kept current under low-rank updates.

The detectors only ever add ``c * S S^H`` to the covariance (``S`` an
L x P block or a single column), so the inverse is maintained with the
Woodbury identity at O(P L^2) per update.  The log-likelihood objective
itself is rebuilt densely and is meant for diagnostics and tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class SingularUpdateError(np.linalg.LinAlgError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass
class CovarianceState:
    inv: np.ndarray
    noise_var: float

    @property
    def L(self) -> int:
        return self.inv.shape[0]

    def copy(self) -> "CovarianceState":
        return CovarianceState(self.inv.copy(), self.noise_var)

    def hermitize(self) -> None:
        self.inv = 0.5 * (self.inv + self.inv.conj().T)


def init(L: int, noise_var: float) -> CovarianceState:
    if not noise_var > 0:
        raise ValueError(f"noise_var must be > 0, got {noise_var}")
    return CovarianceState(np.eye(L, dtype=complex) / noise_var, float(noise_var))


def rank_p_update(state: CovarianceState, block: np.ndarray, c: float,
                  inv_block: np.ndarray | None = None) -> CovarianceState:
    """Replace ``state.inv`` by ``(Sigma + c * block block^H)^{-1}`` in place.

    ``inv_block`` may carry a precomputed ``state.inv @ block``.
    """
    if c == 0.0:
        return state
    A = state.inv @ block if inv_block is None else inv_block
    P = A.shape[1]
    K = np.eye(P) + c * (block.conj().T @ A)
    K = 0.5 * (K + K.conj().T)
    try:
        factor = sla.cho_factor(K, lower=True, check_finite=False)
        X = sla.cho_solve(factor, A.conj().T, check_finite=False)
    except np.linalg.LinAlgError:
        try:
            with np.errstate(divide="ignore", invalid="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                X = sla.solve(K, A.conj().T, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularUpdateError("covariance update singular") from exc
    if not np.all(np.isfinite(X)):
        raise SingularUpdateError("covariance update singular")
    state.inv = state.inv - c * (A @ X)
    return state


def rank_one_update(state: CovarianceState, s: np.ndarray, c: float,
                    inv_s: np.ndarray | None = None) -> CovarianceState:
    """Sherman-Morrison form of :func:`rank_p_update` for one column."""
    if c == 0.0:
        return state
    a = state.inv @ s if inv_s is None else inv_s
    denom = 1.0 + c * np.vdot(s, a).real
    if not denom > 0.0:
        raise SingularUpdateError("covariance update singular")
    state.inv = state.inv - (c / denom) * np.outer(a, a.conj())
    return state


def _as_blocks(blocks) -> list[np.ndarray]:
    out = []
    for b in blocks:
        b = np.asarray(b)
        out.append(b[:, None] if b.ndim == 1 else b)
    return out


def model_covariance(weights, blocks, gains, noise_var: float) -> np.ndarray:
    """``sigma^2 I + sum_k w_k g_k B_k B_k^H`` built densely."""
    blocks = _as_blocks(blocks)
    L = blocks[0].shape[0]
    sigma = noise_var * np.eye(L, dtype=complex)
    for w, g, b in zip(weights, gains, blocks):
        if w * g != 0.0:
            sigma += (w * g) * (b @ b.conj().T)
    return sigma


def covariance_objective(sigma: np.ndarray, sigma_hat: np.ndarray) -> float:
    """``log|Sigma| + tr(Sigma^{-1} Sigma_hat)`` via Cholesky."""
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance not positive definite") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(chol).real))
    W = sla.solve_triangular(chol, sigma_hat, lower=True, check_finite=False)
    W = sla.solve_triangular(chol.conj().T, W, lower=False, check_finite=False)
    return float(logdet + np.trace(W).real)


def objective(weights, blocks, gains, noise_var: float, sigma_hat) -> float:
    """Negative log-likelihood (up to constants) of the activity weights.

    ``blocks`` is a sequence of L x k pilot blocks (or L-vectors), one per
    atom; ``gains`` the matching large-scale gains.
    """
    sh = getattr(sigma_hat, "mat", sigma_hat)
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("activity weights must lie in [0, 1]")
    return covariance_objective(model_covariance(w, blocks, gains, noise_var), sh)


def objective_from_inverse(inv: np.ndarray, sigma_hat: np.ndarray) -> float:
    """Same objective from a maintained inverse, O(L^3), no rebuild."""
    sign, logdet_inv = np.linalg.slogdet(inv)
    return float(-logdet_inv + np.einsum("ij,ji->", inv, sigma_hat).real)
