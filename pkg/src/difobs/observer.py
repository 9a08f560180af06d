"""Linear contracting observer on diffusion coordinates, its closed-form
filter, and out-of-sample extension (observer continuation and Nystrom)."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidInputError, InvalidModelError, InvalidParameterError, NumericError, StepTooLargeError
from .features import FeatureSeries
from .lift import LiftOperator, invert, reconstruct


@dataclass(frozen=True)
class ObserverModel:
    """``psi' = [I + (1 - gamma) Lambda dt] psi + gamma Lambda alpha^+ z dt``
    with ``Lambda = diag(lam_diag)`` strictly negative."""

    lam_diag: np.ndarray  # (m,) negative
    gamma: float
    dt_eff: float
    lift: LiftOperator
    kappa: np.ndarray  # (m, n) = gamma Lambda alpha^+
    modes: tuple = ()

    @property
    def m(self):
        return self.lam_diag.size

    @property
    def decay(self):
        """Diagonal of the discrete Jacobian ``I + (1 - gamma) Lambda dt``."""
        return 1.0 + (1.0 - self.gamma) * self.lam_diag * self.dt_eff

    @property
    def contraction(self):
        return float(np.max(np.abs(self.decay)))


@dataclass
class ObserverTrajectory:
    states: np.ndarray  # (N + 1, m), row 0 is the initial state
    innovations: np.ndarray  # (N,)
    init: str = "zero"
    substeps: int = 1

    def __len__(self):
        return self.states.shape[0]


def max_stable_dt(lam, gamma):
    """Largest admissible step (exclusive) for rates ``lam > 0``."""
    return 2.0 / ((1.0 - gamma) * float(np.max(lam)))


def auto_dt(lam, gamma, rate=1.0):
    """Step making ``(1 - gamma) lam_max dt == rate`` for the fastest mode."""
    if not 0 < rate < 2:
        raise InvalidParameterError("auto step rate must lie in (0, 2)")
    return rate / ((1.0 - gamma) * float(np.max(lam)))


def _check_gamma(gamma):
    if not 0 < gamma < 1:
        raise InvalidParameterError(f"gamma must lie in the open interval (0, 1), got {gamma}")


def build_observer(model, lift, gamma=0.85, dt_eff="frame", auto_rate=1.0):
    """Observer for modes ``1 .. lift.m`` of ``model``.

    ``dt_eff`` is a step length, ``"frame"`` (the model's frame spacing, one
    observer step per frame) or ``"auto"`` (see :func:`auto_dt`). Raises
    :class:`StepTooLargeError` if any mode violates
    ``|1 + (1 - gamma) Lambda_ll dt_eff| < 1``.
    """
    _check_gamma(gamma)
    if not isinstance(lift, LiftOperator):
        raise InvalidInputError("lift must be a LiftOperator")
    m = lift.m
    if m + 1 > model.mu.size:
        raise InvalidModelError(f"lift uses {m} modes but the model holds {model.mu.size - 1}")
    modes = tuple(range(1, m + 1))
    lam = np.asarray(model.lam, dtype=float)[1 : m + 1]
    unusable = [l for l, v in zip(modes, lam) if not np.isfinite(v) or v <= 0]
    if unusable:
        raise InvalidModelError(
            f"modes {unusable} have no positive Fokker-Planck rate (mu <= 0 or mu == 1)"
        )
    if dt_eff is None or dt_eff == "frame":
        dt_eff = model.frame_dt
    elif dt_eff == "auto":
        dt_eff = auto_dt(lam, gamma, auto_rate)
    dt_eff = float(dt_eff)
    if not dt_eff > 0:
        raise InvalidParameterError(f"dt_eff must be > 0, got {dt_eff}")
    factors = np.abs(1.0 - (1.0 - gamma) * lam * dt_eff)
    if np.any(factors >= 1.0):
        worst = modes[int(np.argmax(factors))]
        raise StepTooLargeError(worst, max_stable_dt(lam, gamma), dt_eff)
    lam_diag = -lam
    kappa = gamma * lam_diag[:, None] * lift.alpha_pinv
    return ObserverModel(lam_diag, float(gamma), dt_eff, lift, kappa, modes)


def step(obs, psi_hat, z):
    """One observer update from state ``psi_hat`` with measurement ``z``."""
    psi_hat = np.asarray(psi_hat, dtype=float)
    z = np.asarray(z, dtype=float)
    if psi_hat.shape != (obs.m,) or z.shape != (obs.lift.n,):
        raise InvalidInputError(
            f"expected state ({obs.m},) and features ({obs.lift.n},), got {psi_hat.shape}, {z.shape}"
        )
    if not (np.all(np.isfinite(psi_hat)) and np.all(np.isfinite(z))):
        raise NumericError("non-finite observer input")
    u = invert(obs.lift, z)
    return obs.decay * psi_hat + obs.gamma * obs.lam_diag * u * obs.dt_eff


def substeps(obs, frame_dt):
    """Sub-steps per frame when ``dt_eff < frame_dt`` (measurement held)."""
    if frame_dt is None or not obs.dt_eff < frame_dt:
        return 1
    return max(1, math.ceil(frame_dt / obs.dt_eff - 1e-9))


def _frames(feats, obs):
    z = feats.frames if isinstance(feats, FeatureSeries) else np.asarray(feats, dtype=float)
    z = z.reshape(-1, obs.lift.n) if z.size else np.empty((0, obs.lift.n))
    if z.ndim != 2 or z.shape[1] != obs.lift.n:
        raise InvalidInputError(f"features must have dimension {obs.lift.n}")
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite feature values")
    return z


def _initial(obs, init, z):
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(obs.m), "zero"
        if init == "first-coordinate":
            if len(z) == 0:
                return np.zeros(obs.m), "zero"
            return invert(obs.lift, z[0]), "first-coordinate"
        raise InvalidParameterError(f"unknown init {init!r}")
    x = np.asarray(init, dtype=float).ravel()
    if x.shape != (obs.m,):
        raise InvalidInputError(f"initial state must have {obs.m} entries")
    return x, "given"


def run(obs, feats, init="zero", frame_dt=None):
    """Iterate the observer over every frame.

    ``init`` is ``"zero"``, ``"first-coordinate"`` (``alpha^+ z_0``) or an
    explicit state, e.g. the training coordinates of the first frame. When
    ``dt_eff`` is shorter than the frame spacing (``frame_dt``, taken from a
    FeatureSeries when given one), each frame is applied for
    ``ceil(frame_dt / dt_eff)`` sub-steps.
    """
    z = _frames(feats, obs)
    if frame_dt is None and isinstance(feats, FeatureSeries):
        frame_dt = feats.frame_dt
    k = substeps(obs, frame_dt)
    x, how = _initial(obs, init, z)
    u = invert(obs.lift, z) if len(z) else np.empty((0, obs.m))
    gain = obs.gamma * obs.lam_diag * obs.dt_eff
    a = obs.decay
    out = np.empty((len(z) + 1, obs.m))
    innov = np.empty(len(z))
    out[0] = x
    for i in range(len(z)):
        innov[i] = np.linalg.norm(z[i] - reconstruct(obs.lift, x))
        for _ in range(k):
            x = a * x + gain * u[i]
        out[i + 1] = x
    return ObserverTrajectory(out, innov, how, k)


def diffusion_filter(obs, feats, frame_dt=None):
    """Closed-form observer from zero initial state: an exponentially
    weighted sum of the transformed measurements ``alpha^+ z``,

        psi[n + 1] = sum_{i <= n} B^(n - i) G alpha^+ z[i],

    with per-frame decay ``B = A^k`` and gain ``G = sum_{j<k} A^j gamma Lambda dt``.
    Evaluated as an explicit sum, independent of :func:`run`.
    """
    z = _frames(feats, obs)
    if frame_dt is None and isinstance(feats, FeatureSeries):
        frame_dt = feats.frame_dt
    k = substeps(obs, frame_dt)
    a = obs.decay
    B = a**k
    G = np.sum(a[None, :] ** np.arange(k)[:, None], axis=0) * obs.gamma * obs.lam_diag * obs.dt_eff
    u = invert(obs.lift, z) if len(z) else np.empty((0, obs.m))
    n = len(z)
    out = np.zeros((n + 1, obs.m))
    for t in range(n):
        powers = B[None, :] ** np.arange(t, -1, -1)[:, None]  # B^(t - i), i = 0..t
        out[t + 1] = G * np.sum(powers * u[: t + 1], axis=0)
    innov = np.array([np.linalg.norm(z[i] - reconstruct(obs.lift, out[i])) for i in range(n)])
    return ObserverTrajectory(out, innov, "zero", k)


def extend_observer(obs, new_feats, state, frame_dt=None):
    """Continue the recursion from ``state`` (the last trained estimate)
    across new frames with the frozen dynamics and lift."""
    return run(obs, new_feats, init=np.asarray(state, dtype=float), frame_dt=frame_dt)


def nystrom_extend(model, kernel_row, m=None):
    """``psi_l(new) = (1 / mu_l) sum_j W(new, j) psi_l(j)`` for ``l = 1..m``.

    ``kernel_row`` holds row-normalised affinities of one new point (1-D) or
    several (2-D) to the training frames.
    """
    m = model.m if m is None else m
    if m is None or not 1 <= m < model.mu.size:
        raise InvalidParameterError(f"m must lie in [1, {model.mu.size - 1}]")
    mu = model.mu[1 : m + 1]
    if np.any(mu <= 0):
        raise InvalidModelError("Nystrom extension needs mu > 0 for every selected mode")
    row = np.asarray(kernel_row, dtype=float)
    if row.shape[-1] != model.psi.shape[0]:
        raise InvalidInputError(
            f"kernel row has {row.shape[-1]} entries, expected {model.psi.shape[0]}"
        )
    return (row @ model.psi[:, 1 : m + 1]) / mu
