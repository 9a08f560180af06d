"""Per-frame feature vectors and local covariance estimates."""

from dataclasses import dataclass
import math

import numpy as np

from .datagen import ObservationSeries
from .errors import InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class FeatureSeries:
    frames: np.ndarray  # (N, n)
    frame_dt: float
    meta: str = "raw"

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        if f.ndim != 2:
            raise InvalidInputError("frames must be a 2-D array")
        object.__setattr__(self, "frames", f)
        if not self.frame_dt > 0:
            raise InvalidParameterError("frame_dt must be > 0")

    @property
    def dim(self):
        return self.frames.shape[1]

    @property
    def times(self):
        return np.arange(len(self)) * self.frame_dt

    def __len__(self):
        return self.frames.shape[0]


def raw_features(obs):
    return FeatureSeries(np.asarray(obs.samples, dtype=float), obs.dt, "raw")


def histogram_features(obs, frame_len, bins=10, range=None):
    """Histogram each channel over non-overlapping frames of ``frame_len``.

    Bin edges are fixed per channel from the global min/max of the series
    (or from ``range=(lo, hi)``) so every frame shares one coordinate system.
    Channel histograms are concatenated, giving ``channels * bins`` features.
    """
    if frame_len < 1:
        raise InvalidParameterError(f"frame_len must be >= 1, got {frame_len}")
    if bins < 2:
        raise InvalidParameterError(f"bins must be >= 2, got {bins}")
    x = obs.samples if isinstance(obs, ObservationSeries) else np.atleast_2d(obs)
    dt = obs.dt if isinstance(obs, ObservationSeries) else 1.0
    n_frames = x.shape[0] // frame_len
    if n_frames < 1:
        raise InvalidInputError(
            f"{x.shape[0]} samples do not fill one frame of {frame_len}"
        )
    if range is not None:
        lo, hi = map(float, range)
        if not hi > lo:
            raise InvalidInputError(f"empty histogram range {range}")
    framed = x[: n_frames * frame_len].reshape(n_frames, frame_len, x.shape[1])
    if range is None:
        lo, hi = x.min(axis=0), x.max(axis=0)
        flat = lo == hi
        lo, hi = np.where(flat, lo - 0.5, lo), np.where(flat, hi + 0.5, hi)
        edges = list(zip(lo, hi))
    else:
        edges = [(lo, hi)] * x.shape[1]
    return FeatureSeries(
        bin_counts(framed, edges, bins), frame_len * dt, f"histogram(bins={bins}, frame_len={frame_len})"
    )


def bin_counts(framed, edges, bins):
    """Per-channel histograms of ``framed[..., L, channels]`` over the fixed
    ``edges[ch] = (lo, hi)``, concatenated channel-wise. Values outside the
    range are dropped; the upper edge belongs to the last bin."""
    framed = np.asarray(framed, dtype=float)
    lead = framed.shape[:-2]
    out = []
    for ch, (lo, hi) in enumerate(edges):
        e = np.linspace(lo, hi, bins + 1)
        v = framed[..., ch]
        idx = np.searchsorted(e, v, side="right") - 1
        idx[v == e[-1]] = bins - 1
        inside = (idx >= 0) & (idx < bins)
        counts = np.zeros(lead + (bins,))
        for b in np.arange(bins):
            counts[..., b] = np.sum(inside & (idx == b), axis=-1)
        out.append(counts)
    return np.concatenate(out, axis=-1)


def frame_samples(rate, ms):
    return int(math.floor(rate * ms / 1000.0 + 1e-9))


def stft_features(signal, rate, frame_ms=23.0, hop_ms=23.0, window="hann"):
    """Magnitude spectrogram, one column (here: row) per frame.

    Frames are ``floor(rate * frame_ms / 1000)`` samples long, advance by
    ``floor(rate * hop_ms / 1000)``, and yield ``frame // 2 + 1`` bins.
    ``window`` is any name accepted by ``scipy.signal.get_window``
    (``"boxcar"`` for rectangular).
    """
    from scipy.signal import get_window

    if not rate > 0:
        raise InvalidParameterError(f"sample rate must be > 0, got {rate}")
    flen = frame_samples(rate, frame_ms)
    hop = frame_samples(rate, hop_ms)
    if flen < 16:
        raise InvalidParameterError(f"frame of {frame_ms} ms has {flen} < 16 samples")
    if hop < 1:
        raise InvalidParameterError(f"hop of {hop_ms} ms is shorter than one sample")
    x = np.asarray(signal, dtype=float).ravel()
    if x.size < flen:
        raise InvalidInputError(f"audio of {x.size} samples is shorter than one frame ({flen})")
    n_frames = 1 + (x.size - flen) // hop
    idx = np.arange(flen)[None, :] + hop * np.arange(n_frames)[:, None]
    win = get_window(window, flen, fftbins=True)
    mag = np.abs(np.fft.rfft(x[idx] * win, axis=1))
    return FeatureSeries(mag, hop / rate, f"stft(frame_ms={frame_ms}, hop_ms={hop_ms})")


@dataclass(frozen=True)
class RankPolicy:
    """``fixed`` keeps the ``value`` largest singular values, ``relative``
    keeps those with ``s >= value * s_max``."""

    kind: str = "relative"
    value: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("fixed", "relative"):
            raise InvalidParameterError(f"unknown rank policy {self.kind!r}")
        if self.kind == "fixed" and (int(self.value) != self.value or self.value < 1):
            raise InvalidParameterError("fixed rank must be an integer >= 1")
        if self.kind == "relative" and not 0 < self.value < 1:
            raise InvalidParameterError("relative threshold must lie in (0, 1)")

    @classmethod
    def parse(cls, text):
        """``"fixed:2"`` or ``"relative:1e-3"`` (bare ``"relative"`` uses 1e-3)."""
        if isinstance(text, RankPolicy):
            return text
        kind, _, val = str(text).partition(":")
        kind = kind.strip()
        try:
            if kind == "fixed":
                if not val:
                    raise InvalidParameterError("fixed rank policy needs a value, e.g. fixed:2")
                return cls("fixed", int(val))
            return cls(kind, float(val) if val else 1e-3)
        except ValueError:
            raise InvalidParameterError(f"cannot parse rank policy {text!r}") from None

    def __str__(self):
        return f"fixed:{int(self.value)}" if self.kind == "fixed" else f"relative:{self.value:g}"


@dataclass(frozen=True)
class LocalCovariances:
    covs: np.ndarray  # (N, n, n)
    pinvs: np.ndarray  # (N, n, n)
    ranks: np.ndarray  # (N,)

    def __len__(self):
        return self.covs.shape[0]


def psd_pinv(c, policy):
    """Pseudo-inverse of a symmetric PSD matrix under a rank policy.

    Returns ``(pinv, rank)``; the zero matrix maps to the zero matrix.
    """
    s, v = np.linalg.eigh(c)
    order = np.argsort(s)[::-1]
    s, v = s[order], v[:, order]
    smax = s[0] if s.size else 0.0
    if not smax > 0:
        return np.zeros_like(c), 0
    # below the smallest normal double 1/s overflows; such matrices count as zero
    tiny = max(smax * c.shape[0] * np.finfo(float).eps, np.finfo(float).tiny)
    if policy.kind == "fixed":
        keep = min(int(policy.value), s.size)
        keep = int(np.sum(s[:keep] > tiny))
    else:
        keep = int(np.sum((s >= policy.value * smax) & (s > tiny)))
    vk = v[:, :keep]
    p = (vk / s[:keep]) @ vk.T
    return 0.5 * (p + p.T), keep


def _sample_cov(x):
    xc = x - x.mean(axis=0)
    c = xc.T @ xc / (x.shape[0] - 1)
    return 0.5 * (c + c.T)


def local_covariances(feats, mode="window", window=30, bursts=None, rank_policy="relative:1e-3", scale=1.0):
    """Per-frame covariance matrices and their pseudo-inverses.

    Parameters
    ----------
    feats : FeatureSeries or array (N, n)
    mode : {"window", "bursts"}
        ``window``: sample covariance over ``window`` frames centred on each
        frame (truncated at the ends, widened to at least 2 frames).
        ``bursts``: sample covariance of ``bursts[i]`` (shape ``(B, n)``).
    rank_policy : RankPolicy or str
    scale : float
        Covariances are divided by ``scale`` before inversion; pass the burst
        step variance ``2 dt / beta`` to express them in latent units.

    Covariances use the unbiased ``count - 1`` normalisation.
    """
    policy = RankPolicy.parse(rank_policy)
    if not scale > 0:
        raise InvalidParameterError("scale must be > 0")
    if mode == "window":
        frames = feats.frames if isinstance(feats, FeatureSeries) else np.atleast_2d(feats)
        n_frames = frames.shape[0]
        if n_frames < 2:
            raise InvalidInputError("need at least 2 frames for local covariances")
        if window < 2:
            raise InvalidParameterError(f"window must be >= 2, got {window}")
        half = window // 2
        chunks = []
        for i in range(n_frames):
            lo, hi = max(0, i - half), min(n_frames, i - half + window)
            if hi - lo < 2:
                lo, hi = (0, 2) if lo == 0 else (n_frames - 2, n_frames)
            chunks.append(frames[lo:hi])
    elif mode == "bursts":
        if bursts is None:
            raise InvalidInputError("burst mode requires burst samples")
        chunks = [np.asarray(b, dtype=float) for b in bursts]
        if len(chunks) < 1:
            raise InvalidInputError("no bursts given")
        if any(b.ndim != 2 or b.shape[0] < 2 for b in chunks):
            raise InvalidInputError("every burst needs at least 2 samples")
    else:
        raise InvalidParameterError(f"unknown covariance mode {mode!r}")
    covs = np.array([_sample_cov(c) / scale for c in chunks])
    pinvs = np.empty_like(covs)
    ranks = np.empty(len(covs), dtype=int)
    for i, c in enumerate(covs):
        pinvs[i], ranks[i] = psd_pinv(c, policy)
    return LocalCovariances(covs, pinvs, ranks)
