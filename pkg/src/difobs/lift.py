"""Linear lift from embedding coordinates back to feature space."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLiftError, InvalidInputError
from .features import FeatureSeries

RANK_TOL = 1e-10


@dataclass(frozen=True)
class LiftOperator:
    """``alpha`` (n x m), its left pseudo-inverse (m x n) and the feature
    mean removed before fitting. Reconstruction adds the mean back."""

    alpha: np.ndarray
    alpha_pinv: np.ndarray
    mean: np.ndarray
    rank: int

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def m(self):
        return self.alpha.shape[1]


def _frames(feats):
    return feats.frames if isinstance(feats, FeatureSeries) else np.atleast_2d(np.asarray(feats, float))


def fit_lift(feats, coords, weights=None, center=True):
    """Fit ``alpha[j, l] = sum_i z_j(t_i) psi_l(t_i)`` on centred features.

    ``weights`` (length N, e.g. a density estimate) turns the plain sum into
    a weighted inner product. Raises :class:`DegenerateLiftError` when alpha
    does not have full column rank.
    """
    z = _frames(feats)
    psi = np.atleast_2d(np.asarray(coords, dtype=float))
    if psi.shape[0] != z.shape[0] and psi.shape[1] == z.shape[0]:
        psi = psi.T
    if psi.shape[0] != z.shape[0]:
        raise InvalidInputError(f"{z.shape[0]} frames but {psi.shape[0]} embedding rows")
    if psi.shape[1] < 1:
        raise InvalidInputError("need at least one embedding coordinate")
    mean = z.mean(axis=0) if center else np.zeros(z.shape[1])
    zc = z - mean
    if weights is not None:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != z.shape[0]:
            raise InvalidInputError("weights must have one entry per frame")
        zc = zc * w[:, None]
    alpha = zc.T @ psi
    u, s, vt = np.linalg.svd(alpha, full_matrices=False)
    tol = RANK_TOL * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    m = psi.shape[1]
    if rank < m:
        null = vt[rank:]
        cols = sorted({int(np.argmax(np.abs(v))) + 1 for v in null})
        raise DegenerateLiftError(cols, rank)
    pinv = (vt.T / s) @ u.T
    return LiftOperator(alpha, pinv, mean, rank)


def reconstruct(lift, psi_point):
    """``z_hat = alpha psi + mean`` for one point ``(m,)`` or rows ``(N, m)``."""
    p = np.asarray(psi_point, dtype=float)
    if p.shape[-1] != lift.m:
        raise InvalidInputError(f"expected {lift.m} coordinates, got {p.shape[-1]}")
    return p @ lift.alpha.T + lift.mean


def invert(lift, z):
    """``alpha^+ (z - mean)`` for one vector ``(n,)`` or rows ``(N, n)``."""
    v = np.asarray(z, dtype=float)
    if v.shape[-1] != lift.n:
        raise InvalidInputError(f"expected {lift.n} features, got {v.shape[-1]}")
    return (v - lift.mean) @ lift.alpha_pinv.T
