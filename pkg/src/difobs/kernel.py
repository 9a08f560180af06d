"""Modified Mahalanobis distances, Gaussian affinities and row normalisation."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InvalidInputError, InvalidParameterError, NumericError
from .features import FeatureSeries, LocalCovariances


def mahalanobis_distance(zi, zj, pinv_i, pinv_j):
    """``0.5 * (zi - zj) (Ci^+ + Cj^+) (zi - zj)^T``, clamped at zero."""
    zi = np.asarray(zi, dtype=float).ravel()
    zj = np.asarray(zj, dtype=float).ravel()
    pi, pj = np.asarray(pinv_i, dtype=float), np.asarray(pinv_j, dtype=float)
    n = zi.size
    if zj.size != n or pi.shape != (n, n) or pj.shape != (n, n):
        raise InvalidInputError(
            f"dimension mismatch: z {zi.size}/{zj.size}, pinv {pi.shape}/{pj.shape}"
        )
    diff = zi - zj
    return max(0.0, 0.5 * float(diff @ (pi + pj) @ diff))


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray  # (N, N)
    median: float

    def __len__(self):
        return self.values.shape[0]


def _unpack(feats, covs):
    z = feats.frames if isinstance(feats, FeatureSeries) else np.atleast_2d(np.asarray(feats, float))
    p = covs.pinvs if isinstance(covs, LocalCovariances) else np.asarray(covs, float)
    if p.ndim != 3 or p.shape[0] != z.shape[0] or p.shape[1:] != (z.shape[1], z.shape[1]):
        raise InvalidInputError(
            f"features {z.shape} and pseudo-inverses {p.shape} do not match"
        )
    return z, p


def _one_sided(z_rows, p_rows, z_all):
    """``q[i, j] = (z_all[j] - z_rows[i]) P_i (z_all[j] - z_rows[i])``."""
    q = np.empty((z_rows.shape[0], z_all.shape[0]))
    for i in range(z_rows.shape[0]):
        diff = z_all - z_rows[i]
        q[i] = np.einsum("jn,nm,jm->j", diff, p_rows[i], diff, optimize=True)
    return q


def upper_median(values):
    iu = np.triu_indices(values.shape[0], k=1)
    return float(np.median(values[iu]))


def distance_matrix(feats, covs):
    """All pairwise modified Mahalanobis distances (dense, symmetric)."""
    z, p = _unpack(feats, covs)
    if z.shape[0] < 1:
        raise InvalidInputError("no frames")
    q = _one_sided(z, p, z)
    d = 0.5 * (q + q.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    if not np.all(np.isfinite(d)):
        bad = np.argwhere(~np.isfinite(d))[0]
        raise NumericError(f"non-finite distance between frames {bad[0]} and {bad[1]}")
    med = upper_median(d) if d.shape[0] >= 2 else 0.0
    return DistanceMatrix(d, med)


def cross_distances(new_feats, new_covs, feats, covs):
    """Distances from new frames (rows) to reference frames (columns)."""
    zn, pn = _unpack(new_feats, new_covs)
    z, p = _unpack(feats, covs)
    if zn.shape[1] != z.shape[1]:
        raise InvalidInputError(f"feature dimension {zn.shape[1]} != {z.shape[1]}")
    d = 0.5 * (_one_sided(zn, pn, z) + _one_sided(z, p, zn).T)
    return np.maximum(d, 0.0)


def select_epsilon(dist, factor=1.0):
    """Kernel scale ``factor * median`` of the strictly upper-triangular
    distances (the zero diagonal is excluded)."""
    values = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    if values.shape[0] < 2:
        raise InvalidInputError("need at least 2 frames to select epsilon")
    if not factor > 0:
        raise InvalidParameterError(f"epsilon factor must be > 0, got {factor}")
    med = upper_median(values)
    if not med > 0:
        if not np.any(values > 0):
            raise DegenerateDataError("all pairwise distances are zero; epsilon is undefined")
        raise DegenerateDataError("median pairwise distance is zero; epsilon is undefined")
    return factor * med


@dataclass(frozen=True)
class AffinityOperator:
    K: np.ndarray
    D: np.ndarray
    W: np.ndarray
    eps: float

    def __len__(self):
        return self.K.shape[0]


def gaussian_kernel(d, eps):
    return np.exp(-np.maximum(d, 0.0) / eps)


def affinity(dist, eps):
    """Gaussian kernel ``exp(-d/eps)`` and its row-stochastic normalisation."""
    if not eps > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {eps}")
    d = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    K = gaussian_kernel(d, eps)
    K = 0.5 * (K + K.T)
    D = K.sum(axis=1)
    assert np.all(D > 0), "row sum vanished despite unit diagonal"
    W = K / D[:, None]
    return AffinityOperator(K, D, W, float(eps))


def normalized_rows(d_rows, eps):
    """Row-stochastic affinities for out-of-sample distance rows."""
    k = gaussian_kernel(np.atleast_2d(d_rows), eps)
    s = k.sum(axis=1, keepdims=True)
    if np.any(s <= 0):
        raise NumericError("a new frame has zero affinity to every training frame")
    return k / s


def save_operator(path, dist, op):
    """Dump distances and the kernel for inspection: ``.dob`` holds
    ``distances``, ``K``, ``D`` and ``W``; any other suffix gets ``W`` as CSV."""
    from .io import write_csv, write_dobs

    if str(path).endswith(".dob"):
        write_dobs(path, {"distances": dist.values, "K": op.K, "D": op.D, "W": op.W},
                   {"eps": op.eps, "median": dist.median})
    else:
        write_csv(path, list(op.W.T), [f"w_{j + 1}" for j in range(len(op))])
