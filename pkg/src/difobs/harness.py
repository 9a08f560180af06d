"""Experiment drivers for the sphere and circle toys, metrics and reports."""

from dataclasses import asdict, dataclass, field, replace
import hashlib
import json
import logging
import math
import time

import numpy as np

from . import datagen, features, kernel, lift as liftmod, observer as obsmod, spectral
from .errors import DegenerateRegressionError, DifobsError, InvalidInputError, InvalidParameterError, UndefinedMetricError

log = logging.getLogger(__name__)

NRMSE_FLOOR_DB = -300.0


def align_linear(coords, truth):
    """Least-squares map (with intercept) from ``coords`` to each truth
    channel. Returns ``(fitted, weights)``; weights row 0 is the intercept."""
    x = np.asarray(coords, dtype=float)
    y = np.asarray(truth, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    squeeze = y.ndim == 1
    y = y[:, None] if squeeze else y
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError(f"{x.shape[0]} coordinate rows but {y.shape[0]} truth rows")
    if x.shape[0] <= x.shape[1] + 1:
        raise InvalidInputError(f"need more than {x.shape[1] + 1} rows for regression")
    design = np.column_stack([np.ones(x.shape[0]), x])
    w, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise DegenerateRegressionError(f"design matrix has rank {rank} < {design.shape[1]}")
    fitted = design @ w
    return (fitted[:, 0] if squeeze else fitted), w


def metrics(estimate, truth):
    """``(nrmse_db, pearson)`` with nRMSE normalised by the truth variance."""
    e = np.asarray(estimate, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if e.size != t.size or t.size < 2:
        raise InvalidInputError("estimate and truth need equal length >= 2")
    tc = t - t.mean()
    denom = float(tc @ tc)
    if denom == 0:
        raise UndefinedMetricError("truth is constant; metrics are undefined")
    err = float(np.sum((e - t) ** 2))
    nrmse = NRMSE_FLOOR_DB if err == 0 else max(NRMSE_FLOOR_DB, 10 * math.log10(err / denom))
    ec = e - e.mean()
    ee = float(ec @ ec)
    corr = 0.0 if ee == 0 else float(np.clip((ec @ tc) / math.sqrt(ee * denom), -1.0, 1.0))
    return nrmse, corr


def moving_average_baseline(lift, feats, window):
    """Causal moving average of ``alpha^+ z`` over the last ``window`` frames
    (shorter prefix at the start)."""
    if window < 1:
        raise InvalidParameterError(f"window must be >= 1, got {window}")
    z = feats.frames if isinstance(feats, features.FeatureSeries) else np.asarray(feats, float)
    u = liftmod.invert(lift, z) if lift is not None else np.asarray(z, float)
    u = u[:, None] if u.ndim == 1 else u
    c = np.vstack([np.zeros((1, u.shape[1])), np.cumsum(u, axis=0)])
    idx = np.arange(u.shape[0])
    lo = np.maximum(0, idx + 1 - window)
    return (c[idx + 1] - c[lo]) / (idx + 1 - lo)[:, None]


def _in_context(exc, context):
    """Prefix an error message with the experiment cell it came from."""
    exc.args = (f"{context}: {exc}",)
    return exc


def config_hash(cfg):
    blob = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if hasattr(obj, "__dataclass_fields__"):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class ExperimentReport:
    """Long-format result rows ``(method, coord, c, seed, metric, value)``
    plus the configuration they came from. ``runtime`` is informational and
    is never written to the report files."""

    kind: str
    rows: list
    config: dict
    seeds: list
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def config_hash(self):
        return config_hash(self.config)

    def values(self, method, coord, metric, c=None):
        return np.array(
            [r[5] for r in self.rows if r[0] == method and r[1] == coord and r[4] == metric and (c is None or r[2] == c)]
        )

    def summary(self, metric):
        """``{(method, coord, c): (mean, sample std, count)}`` across seeds."""
        groups = {}
        for method, coord, c, seed, name, value in self.rows:
            if name == metric:
                groups.setdefault((method, coord, c), []).append(value)
        out = {}
        for key, vals in groups.items():
            v = np.asarray(vals, dtype=float)
            out[key] = (float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0, int(v.size))
        return out


# ---------------------------------------------------------------- sphere toy


@dataclass(frozen=True)
class SphereConfig:
    drifts: tuple = (0.008, 0.016, 0.024)
    seeds: tuple = (0, 1, 2)
    b: float = 0.005
    dt: float = 0.1
    n_frames: int = 300
    frame_len: int = 60
    bins: int = 10
    noise_rate: float = 0.1
    sensors: tuple = datagen.DEFAULT_SENSORS
    cov_window: int = 30
    rank_policy: str = "relative:1e-3"
    epsilon_factor: float = 1.0
    beta: float = 1.0
    m: int = 4
    gamma: float = 0.85
    dt_eff: object = "frame"
    auto_rate: float = 1.0
    ma_windows: tuple = (2, 3, 5)
    initial_state: tuple = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidParameterError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.n_frames < 10 or self.frame_len < 1:
            raise InvalidParameterError("n_frames must be >= 10 and frame_len >= 1")
        if not self.seeds or not self.drifts:
            raise InvalidParameterError("need at least one seed and one drift rate")


def _sphere_data(cfg, c, seed, n_frames):
    n_samples = n_frames * cfg.frame_len
    sim = datagen.SimConfig(seed=seed, dt=cfg.dt, steps=n_samples - 1, initial_state=cfg.initial_state)
    traj, pos = datagen.simulate_sphere_toy(c, cfg.b, sim)
    obs = datagen.poisson_sensor_observe(pos, cfg.sensors, cfg.noise_rate, seed)
    feats = features.histogram_features(obs, cfg.frame_len, cfg.bins)
    truth = traj.states[: n_frames * cfg.frame_len].reshape(n_frames, cfg.frame_len, 2).mean(axis=1)
    return feats, truth


def _train(cfg, feats):
    covs = features.local_covariances(feats, "window", cfg.cov_window, rank_policy=cfg.rank_policy)
    model, op = spectral.fit_diffusion(
        feats, covs, cfg.epsilon_factor, cfg.beta, count=max(cfg.m + 1, 21), dimension=cfg.m
    )
    coords = spectral.embedding(model)
    lf = liftmod.fit_lift(feats, coords)
    obs = obsmod.build_observer(model, lf, cfg.gamma, cfg.dt_eff, cfg.auto_rate)
    return covs, model, op, coords, lf, obs


COORDS = ("elevation", "azimuth")


def run_sphere_experiment(cfg=SphereConfig()):
    """Observer vs raw diffusion coordinates vs moving averages of
    ``alpha^+ z``, scored after linear alignment to the true angles."""
    t0 = time.perf_counter()
    rows = []
    for c in cfg.drifts:
        for seed in cfg.seeds:
            try:
                feats, truth = _sphere_data(cfg, c, seed, cfg.n_frames)
                covs, model, op, coords, lf, obs = _train(cfg, feats)
                traj = obsmod.run(obs, feats, init=coords[0])
                estimates = {"diffusion_maps": coords, "observer": traj.states[1:]}
                for w in cfg.ma_windows:
                    estimates[f"moving_average_{w}"] = moving_average_baseline(lf, feats, w)
                for method, est in estimates.items():
                    fitted, _ = align_linear(est, truth)
                    for k, name in enumerate(COORDS):
                        nrmse, corr = metrics(fitted[:, k], truth[:, k])
                        rows.append((method, name, float(c), int(seed), "nrmse_db", nrmse))
                        rows.append((method, name, float(c), int(seed), "correlation", corr))
            except DifobsError as exc:
                raise _in_context(exc, f"sphere experiment (c={c}, seed={seed})")
    return ExperimentReport("sphere", rows, _jsonable(cfg), list(cfg.seeds), time.perf_counter() - t0)


# ---------------------------------------------------------------- circle toy


@dataclass(frozen=True)
class EigenConfig:
    """Circle-toy rate recovery.

    ``features="histogram"`` histograms each frame of ``frame_len`` samples
    and estimates covariances from ``burst_len`` re-simulated frames;
    ``features="raw"`` uses single (cos, sin) samples ``stride`` steps apart
    with one-step bursts.
    """

    n_frames: int = 400
    frame_len: int = 60
    burst_len: int = 50
    bins: int = 10
    seeds: tuple = tuple(range(10))
    dt: float = 0.02
    rank_policy: str = "fixed:1"
    epsilon_factor: float = 0.16
    beta: float = 1.0
    n_rates: int = 4
    features: str = "histogram"
    stride: int = 60
    burst_dt: float = 0.01

    def __post_init__(self):
        if self.burst_len < 2:
            raise InvalidParameterError("burst_len must be >= 2")
        if self.n_frames <= self.n_rates + 1:
            raise InvalidParameterError("n_frames must exceed n_rates + 1")
        if self.features not in ("histogram", "raw"):
            raise InvalidParameterError(f"features must be 'histogram' or 'raw', got {self.features!r}")


def circle_rates(cfg, seed):
    """Estimated rates ``lam_1 .. lam_k`` from one circle-toy realisation."""
    sim = datagen.SimConfig(seed=seed, dt=cfg.dt, beta=cfg.beta)
    if cfg.features == "histogram":
        fb = datagen.frame_bursts(sim, cfg.frame_len, cfg.n_frames, cfg.burst_len, toy="circle")
        edges = [(-1.0, 1.0)] * fb.frames.shape[-1]
        feats = features.FeatureSeries(
            features.bin_counts(fb.frames, edges, cfg.bins), cfg.dt * cfg.frame_len, "histogram"
        )
        bursts = features.bin_counts(fb.bursts, edges, cfg.bins)
        scale = fb.latent_variance
    else:
        bs = datagen.burst_sample(sim, cfg.burst_len, cfg.n_frames, toy="circle", stride=cfg.stride, burst_dt=cfg.burst_dt)
        feats, bursts, scale = bs.observations, bs.bursts, bs.step_variance
    covs = features.local_covariances(feats, "bursts", bursts=bursts, rank_policy=cfg.rank_policy, scale=scale)
    model, _ = spectral.fit_diffusion(
        feats, covs, cfg.epsilon_factor, cfg.beta, count=cfg.n_rates + 2, dimension=cfg.n_rates
    )
    return model.lam[1 : cfg.n_rates + 1], model


def run_eigenvalue_experiment(cfg=EigenConfig()):
    t0 = time.perf_counter()
    rows = []
    for seed in cfg.seeds:
        try:
            lam, _ = circle_rates(cfg, seed)
        except DifobsError as exc:
            raise _in_context(exc, f"eigenvalue experiment (seed={seed})")
        for k, v in enumerate(lam, start=1):
            rows.append(("diffusion_maps", f"lambda_{k}", 0.0, int(seed), "rate", float(v)))
    return ExperimentReport("eigs", rows, _jsonable(cfg), list(cfg.seeds), time.perf_counter() - t0)


def rate_statistics(report, n_rates=4):
    """``(means, sample variances)`` of the estimated rates across seeds."""
    vals = np.array([report.values("diffusion_maps", f"lambda_{k}", "rate") for k in range(1, n_rates + 1)])
    return vals.mean(axis=1), vals.var(axis=1, ddof=1)


# ---------------------------------------------------------------- extension


@dataclass(frozen=True)
class ExtensionConfig:
    sphere: SphereConfig = SphereConfig(drifts=(0.024,), seeds=(0,))
    n_train: int = 300
    n_extend: int = 100

    def __post_init__(self):
        if self.n_train < 10 * self.sphere.m:
            raise InvalidParameterError("n_train must be at least 10 x m")
        if self.n_extend < 1:
            raise InvalidParameterError("n_extend must be >= 1")


def nystrom_coordinates(model, train_feats, train_covs, new_feats, new_covs, m=None):
    d = kernel.cross_distances(new_feats, new_covs, train_feats, train_covs)
    return obsmod.nystrom_extend(model, kernel.normalized_rows(d, model.eps), m)


def run_extension_experiment(cfg=ExtensionConfig()):
    """Train on the first ``n_train`` frames, then extend across the next
    ``n_extend`` with the observer recursion and with Nystrom."""
    t0 = time.perf_counter()
    sc = cfg.sphere
    rows = []
    for c in sc.drifts:
        for seed in sc.seeds:
            try:
                feats, truth = _sphere_data(sc, c, seed, cfg.n_train + cfg.n_extend)
                train = features.FeatureSeries(feats.frames[: cfg.n_train], feats.frame_dt, feats.meta)
                new = features.FeatureSeries(feats.frames[cfg.n_train :], feats.frame_dt, feats.meta)
                covs, model, op, coords, lf, obs = _train(sc, train)
                trained = obsmod.run(obs, train, init=coords[0])
                ext = obsmod.extend_observer(obs, new, trained.states[-1])
                new_covs = features.local_covariances(new, "window", sc.cov_window, rank_policy=sc.rank_policy)
                nys = nystrom_coordinates(model, train, covs, new, new_covs)
                target = truth[cfg.n_train :]
                for method, est in (("observer_extension", ext.states[1:]), ("nystrom", nys)):
                    if est.shape[0] != cfg.n_extend or not np.all(np.isfinite(est)):
                        raise DifobsError(f"{method} produced malformed output")
                    fitted, _ = align_linear(est, target)
                    for k, name in enumerate(COORDS):
                        nrmse, corr = metrics(fitted[:, k], target[:, k])
                        rows.append((method, name, float(c), int(seed), "nrmse_db", nrmse))
                        rows.append((method, name, float(c), int(seed), "correlation", corr))
            except DifobsError as exc:
                raise _in_context(exc, f"extension experiment (c={c}, seed={seed})")
    return ExperimentReport("extend", rows, _jsonable(cfg), list(sc.seeds), time.perf_counter() - t0)
