"""Eigendecomposition of the diffusion operator and Fokker-Planck rates."""

from dataclasses import dataclass, replace
import logging

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, InvalidParameterError, NumericError
from .kernel import AffinityOperator

log = logging.getLogger(__name__)

GAP_SEARCH = 20


@dataclass(frozen=True)
class DiffusionModel:
    """Spectrum ``mu`` of W in descending order with right eigenvectors
    ``psi`` as columns (``psi[:, 0]`` is the all-ones vector), and the
    Fokker-Planck rates ``lam`` (NaN where ``mu <= 0``)."""

    mu: np.ndarray
    psi: np.ndarray
    lam: np.ndarray
    eps: float
    beta: float = 1.0
    m: int = None
    frame_dt: float = 1.0

    @property
    def count(self):
        return self.mu.size

    @property
    def usable(self):
        return np.isfinite(self.lam)


def _fix_signs(vecs):
    idx = np.argmax(np.abs(vecs), axis=0)  # first index on ties
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def diffusion_eigs(op, count=None, beta=1.0, frame_dt=1.0, check=True):
    """Leading ``count`` eigenpairs of the row-stochastic ``W``.

    Solved through the symmetric conjugate ``S = D^-1/2 K D^-1/2`` (similar to
    W) and back-transformed with ``psi = D^-1/2 phi``. ``psi_0`` is rescaled
    to ones, the others to unit Euclidean norm with their largest-magnitude
    entry positive.
    """
    if not isinstance(op, AffinityOperator):
        raise InvalidInputError("diffusion_eigs expects an AffinityOperator")
    n = len(op)
    count = n if count is None else int(count)
    if not 1 <= count <= n:
        raise InvalidParameterError(f"count must lie in [1, {n}], got {count}")
    root = np.sqrt(op.D)
    S = op.K / root[:, None] / root[None, :]
    S = 0.5 * (S + S.T)
    vals, vecs = scipy.linalg.eigh(S, subset_by_index=[n - count, n - 1], driver="evr")
    order = np.argsort(-vals, kind="stable")
    mu, phi = vals[order], vecs[:, order]
    psi = phi / root[:, None]
    psi[:, 0] = psi[:, 0] / psi[:, 0].mean()
    if count > 1:
        rest = psi[:, 1:] / np.linalg.norm(psi[:, 1:], axis=0)
        psi[:, 1:] = _fix_signs(rest)
    if check:
        res = np.linalg.norm(op.W @ psi - psi * mu, axis=0)
        scale = np.linalg.norm(psi, axis=0)
        bad = np.flatnonzero(res > 1e-8 * scale)
        if bad.size:
            raise NumericError(
                f"eigen-residual too large for modes {bad.tolist()}: "
                f"max {float(np.max(res[bad] / scale[bad])):.3g}"
            )
    return DiffusionModel(mu, psi, fp_eigenvalues(mu, op.eps, beta), op.eps, beta, None, frame_dt)


def fp_eigenvalues(mu, eps, beta=1.0):
    """Fokker-Planck rates ``lam = -(2 / (beta eps)) ln mu``.

    Entries with ``mu <= 0`` have no logarithm and come back as NaN.
    """
    if not eps > 0 or not beta > 0:
        raise InvalidParameterError("eps and beta must be > 0")
    mu = np.asarray(mu, dtype=float)
    lam = np.full(mu.shape, np.nan)
    pos = mu > 0
    lam[pos] = -(2.0 / (beta * eps)) * np.log(np.minimum(mu[pos], 1.0))
    return lam


def select_dimension(mu, policy="gap"):
    """Embedding dimension from the spectrum.

    ``"gap"`` picks the ``l`` in ``[1, L)``, ``L = min(N - 1, 20)``, with the
    largest drop ``mu[l] - mu[l + 1]``; an integer is returned as is.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.size < 3:
        raise InvalidInputError("need at least 3 eigenvalues")
    if policy == "gap":
        top = min(mu.size - 1, GAP_SEARCH)
        drops = mu[1:top] - mu[2 : top + 1]
        return int(np.argmax(drops)) + 1
    m = int(policy)
    if not 1 <= m < mu.size:
        raise InvalidParameterError(f"fixed dimension {m} must lie in [1, {mu.size - 1}]")
    return m


def with_dimension(model, m):
    if not 1 <= m <= model.count - 1:
        raise InvalidParameterError(f"m must lie in [1, {model.count - 1}], got {m}")
    return replace(model, m=int(m))


def embedding(model, m=None):
    """Columns ``psi_1 .. psi_m``; row ``i`` embeds frame ``i``."""
    m = model.m if m is None else m
    if m is None or not 1 <= m <= model.count - 1:
        raise InvalidParameterError(f"m must lie in [1, {model.count - 1}], got {m}")
    return model.psi[:, 1 : m + 1].copy()


def fit_diffusion(feats, covs, epsilon_factor=1.0, beta=1.0, count=32, dimension="gap"):
    """Distances, kernel, and spectrum in one call.

    Returns ``(model, affinity_operator)``; ``model.m`` is set by
    ``dimension`` (``"gap"`` or an integer).
    """
    from .kernel import affinity, distance_matrix, select_epsilon

    dist = distance_matrix(feats, covs)
    eps = select_epsilon(dist, epsilon_factor)
    op = affinity(dist, eps)
    frame_dt = getattr(feats, "frame_dt", 1.0)
    model = diffusion_eigs(op, min(int(count), len(op)), beta=beta, frame_dt=frame_dt)
    m = select_dimension(model.mu, dimension) if model.count >= 3 else 1
    return with_dimension(model, m), op
