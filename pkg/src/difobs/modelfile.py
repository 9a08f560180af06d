"""Trained-model persistence in the ``DOBS1`` container (``.dob``)."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError
from .features import FeatureSeries, LocalCovariances, RankPolicy
from .io import array_digest, read_dobs, write_dobs
from .lift import LiftOperator
from .spectral import DiffusionModel

MODEL_KIND = "difobs-model"
MODEL_VERSION = 1


@dataclass
class TrainedModel:
    """Everything needed to observe or extend: spectrum, lift, the training
    frames with their pseudo-inverses (for Nystrom), and observer settings."""

    diffusion: DiffusionModel
    lift: LiftOperator
    features: FeatureSeries
    covs: LocalCovariances
    degrees: np.ndarray
    settings: dict


def save_model(path, tm):
    d, lf = tm.diffusion, tm.lift
    m = lf.m
    meta = {
        "kind": MODEL_KIND,
        "model_version": MODEL_VERSION,
        "eps": d.eps,
        "beta": d.beta,
        "m": m,
        "frame_dt": d.frame_dt,
        "feature_meta": tm.features.meta,
        "modes": list(range(1, m + 1)),
        "lift_rank": lf.rank,
        "provenance": {"features_sha256": array_digest(tm.features.frames)},
        "settings": tm.settings,
    }
    blocks = {
        "mu": d.mu,
        "lam": d.lam,
        "psi": d.psi,
        "degrees": tm.degrees,
        "lambda_diag": -d.lam[1 : m + 1],
        "alpha": lf.alpha,
        "alpha_pinv": lf.alpha_pinv,
        "feature_mean": lf.mean,
        "features": tm.features.frames,
        "covs": tm.covs.covs,
        "pinvs": tm.covs.pinvs,
        "ranks": tm.covs.ranks.astype(float),
    }
    write_dobs(path, blocks, meta)


def load_model(path):
    blocks, meta = read_dobs(path)
    if meta.get("kind") != MODEL_KIND:
        raise InvalidModelError(f"{path}: not a model file (kind={meta.get('kind')!r})")
    if meta.get("model_version") != MODEL_VERSION:
        raise InvalidModelError(
            f"{path}: unsupported model version {meta.get('model_version')!r}"
        )
    missing = [k for k in ("mu", "lam", "psi", "alpha", "alpha_pinv", "feature_mean", "features", "pinvs") if k not in blocks]
    if missing:
        raise InvalidModelError(f"{path}: missing blocks {missing}")
    diffusion = DiffusionModel(
        blocks["mu"], blocks["psi"], blocks["lam"], meta["eps"], meta["beta"], meta["m"], meta["frame_dt"]
    )
    lf = LiftOperator(blocks["alpha"], blocks["alpha_pinv"], blocks["feature_mean"], int(meta["lift_rank"]))
    feats = FeatureSeries(blocks["features"], meta["frame_dt"], meta["feature_meta"])
    covs = LocalCovariances(blocks["covs"], blocks["pinvs"], blocks["ranks"].astype(int))
    if array_digest(feats.frames) != meta["provenance"]["features_sha256"]:
        raise InvalidModelError(f"{path}: training features do not match their recorded hash")
    return TrainedModel(diffusion, lf, feats, covs, blocks["degrees"], meta["settings"])


def covariance_recipe(settings):
    return settings["cov_mode"], int(settings["cov_window"]), RankPolicy.parse(settings["rank_policy"])
