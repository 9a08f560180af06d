"""Seeded simulators for Langevin-type latent processes and their sensors.

Every simulator is an explicit Euler-Maruyama recursion

    theta[i+1] = theta[i] - grad_U(theta[i]) * dt + sqrt(2 * dt / beta) * xi[i]

with independent standard normal ``xi`` per coordinate, drawn from the
Box-Muller stream of :mod:`difobs.rng`. There are no reflecting boundaries:
a state that leaves the finite range raises :class:`SimulationDivergedError`.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import rng as _rng
from .errors import InvalidParameterError, SimulationDivergedError

SPHERE_MEAN = (math.pi / 2, math.pi / 10)
# Sensor positions on the unit sphere around the potential minimum; the
# original geometry is only shown graphically, these are our choice.
DEFAULT_SENSORS = (
    (0.70710678, 0.70710678, 0.0),
    (1.0, 0.0, 0.0),
    (0.80901699, 0.58778525, 0.3),
)


@dataclass(frozen=True)
class StateTrajectory:
    dt: float
    states: np.ndarray  # (N, d)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.states, dtype=float))
        if s.shape[0] == 1 and np.ndim(self.states) == 1:
            s = s.T
        object.__setattr__(self, "states", s)
        if not self.dt > 0:
            raise InvalidParameterError("dt must be > 0")
        if s.shape[0] < 1 or s.shape[1] < 1:
            raise InvalidParameterError("trajectory needs at least one state of dimension >= 1")

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def times(self):
        return np.arange(len(self)) * self.dt

    def __len__(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class ObservationSeries:
    dt: float
    samples: np.ndarray  # (N, n)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 1:
            s = s[:, None]
        object.__setattr__(self, "samples", s)
        if not self.dt > 0:
            raise InvalidParameterError("dt must be > 0")
        if s.shape[1] < 1:
            raise InvalidParameterError("observations need dimension >= 1")

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def times(self):
        return np.arange(len(self)) * self.dt

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class SimConfig:
    """Common simulation settings. ``steps`` counts Euler updates, so a run
    returns ``steps + 1`` states including the initial one."""

    seed: int = 0
    beta: float = 1.0
    dt: float = 0.1
    steps: int = 1000
    initial_state: tuple = None
    noise_rate: float = 0.0
    sensors: tuple = field(default=DEFAULT_SENSORS)

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidParameterError(f"steps must be an integer >= 1, got {self.steps}")
        if not self.beta > 0:
            raise InvalidParameterError(f"beta must be > 0, got {self.beta}")
        if self.noise_rate < 0:
            raise InvalidParameterError(f"noise_rate must be >= 0, got {self.noise_rate}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must fit in 64 unsigned bits")


def _noise_scale(beta, dt):
    return 0.0 if math.isinf(beta) else math.sqrt(2.0 * dt / beta)


def simulate_langevin(grad_potential, cfg, initial_state=None):
    """Euler-Maruyama integration of the overdamped Langevin equation.

    Parameters
    ----------
    grad_potential : callable
        Maps a state vector ``(d,)`` to the gradient of the potential.
    cfg : SimConfig
        ``cfg.initial_state`` (or ``initial_state``) fixes ``theta[0]``.

    Returns
    -------
    StateTrajectory with ``cfg.steps + 1`` states.
    """
    theta0 = initial_state if initial_state is not None else cfg.initial_state
    if theta0 is None:
        raise InvalidParameterError("an initial state is required")
    theta = np.array(theta0, dtype=float).ravel()
    d = theta.size
    scale = _noise_scale(cfg.beta, cfg.dt)
    out = np.empty((cfg.steps + 1, d))
    out[0] = theta
    if scale > 0:
        noise = scale * _rng.standard_normal(_rng.make_rng(cfg.seed, _rng.STATE), (cfg.steps, d))
    for i in range(cfg.steps):
        step = theta - np.asarray(grad_potential(theta), dtype=float) * cfg.dt
        if scale > 0:
            step = step + noise[i]
        if not np.all(np.isfinite(step)):
            raise SimulationDivergedError(i + 1)
        theta = step
        out[i + 1] = theta
    return StateTrajectory(cfg.dt, out)


def ou_gradient(k, mu):
    mu = np.asarray(mu, dtype=float)
    return lambda theta: k * (theta - mu)


def simulate_ou(k, mu, sigma, cfg):
    """Ornstein-Uhlenbeck process ``d theta = k (mu - theta) dt + sigma dw``.

    The constant diffusion maps onto the Langevin temperature as
    ``beta = 2 / sigma**2`` (``sigma = 0`` gives the deterministic relaxation).
    """
    if not k > 0:
        raise InvalidParameterError(f"OU rate k must be > 0, got {k}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    beta = math.inf if sigma == 0 else 2.0 / sigma**2
    return simulate_langevin(ou_gradient(k, mu), replace(cfg, beta=beta))


def sphere_positions(states):
    th1, th2 = states[:, 0], states[:, 1]
    return np.column_stack(
        [np.cos(th2) * np.sin(th1), np.sin(th2) * np.sin(th1), np.cos(th1)]
    )


def sphere_beta(b):
    return math.inf if b == 0 else 2.0 / b**2


def simulate_sphere_toy(c, b, cfg):
    """Angles on the sphere under a parabolic potential, and the 3-D positions.

    ``theta_1`` (elevation) relaxes to pi/2 and ``theta_2`` (azimuth) to pi/10
    at drift rate ``c`` with diffusion ``b``. The initial state defaults to the
    potential minimum.
    """
    if b < 0:
        raise InvalidParameterError(f"diffusion b must be >= 0, got {b}")
    if c < 0:
        raise InvalidParameterError(f"drift rate c must be >= 0, got {c}")
    init = cfg.initial_state if cfg.initial_state is not None else SPHERE_MEAN
    traj = simulate_langevin(
        ou_gradient(c, SPHERE_MEAN), replace(cfg, beta=sphere_beta(b), initial_state=tuple(init))
    )
    return traj, ObservationSeries(cfg.dt, sphere_positions(traj.states))


def sensor_rates(positions, sensors):
    x = np.asarray(positions, dtype=float)
    s = np.asarray(sensors, dtype=float)
    return np.exp(-np.linalg.norm(x[:, None, :] - s[None, :, :], axis=2))


def poisson_sensor_observe(positions, sensors=DEFAULT_SENSORS, noise_rate=0.0, seed=0):
    """Spike counts of distance-driven Poisson sensors plus Poisson clutter.

    ``z_j = Pois(exp(-|s_j - x|)) + Pois(noise_rate)``, integer valued.
    """
    if noise_rate < 0:
        raise InvalidParameterError(f"noise_rate must be >= 0, got {noise_rate}")
    x = positions.samples if isinstance(positions, ObservationSeries) else np.asarray(positions)
    dt = positions.dt if isinstance(positions, ObservationSeries) else 1.0
    rates = sensor_rates(x, sensors)
    gen = _rng.make_rng(seed, _rng.SENSOR)
    y = _rng.poisson(gen, rates)
    v = _rng.poisson(gen, np.full(rates.shape, float(noise_rate)))
    return ObservationSeries(dt, (y + v).astype(float))


def circle_positions(states):
    th = states[:, 0]
    return np.column_stack([np.cos(th), np.sin(th)])


def simulate_circle_toy(cfg):
    """``d theta = -theta dt + sqrt(2/beta) dw`` observed as ``(cos, sin)``.

    With the default ``beta = 1`` the backward Fokker-Planck operator has the
    Hermite spectrum ``0, -1, -2, ...``.
    """
    init = cfg.initial_state if cfg.initial_state is not None else (0.0,)
    traj = simulate_langevin(ou_gradient(1.0, 0.0), replace(cfg, initial_state=tuple(init)))
    return traj, ObservationSeries(cfg.dt, circle_positions(traj.states))


@dataclass(frozen=True)
class BurstSample:
    anchors: StateTrajectory  # retained trajectory states
    observations: np.ndarray  # (n_points, n) measurement at each anchor
    bursts: np.ndarray  # (n_points, burst_len, n) one-step propagations
    burst_dt: float
    beta: float

    def __len__(self):
        return len(self.anchors)

    def pairs(self):
        return list(zip(self.anchors.states, self.bursts))

    @property
    def step_variance(self):
        """Per-coordinate variance ``2 dt / beta`` of one burst step."""
        return 0.0 if math.isinf(self.beta) else 2.0 * self.burst_dt / self.beta


_TOYS = {
    "circle": (lambda **kw: (ou_gradient(1.0, 0.0), None, (0.0,)), circle_positions),
    "sphere": (
        lambda c=0.024, b=0.005, **kw: (ou_gradient(c, SPHERE_MEAN), sphere_beta(b), SPHERE_MEAN),
        sphere_positions,
    ),
}


def burst_sample(cfg, burst_len, n_points, toy="circle", stride=1, burst_dt=None, **params):
    """Retain ``n_points`` states spaced ``stride`` steps apart and, from each,
    run ``burst_len`` independent one-step propagations.

    The bursts sample the local measurement covariance at the anchor, which
    is ``2 dt / beta * J J^T`` to first order in ``dt``.
    """
    if burst_len < 2:
        raise InvalidParameterError(f"burst_len must be >= 2, got {burst_len}")
    if n_points < 1 or stride < 1:
        raise InvalidParameterError("n_points and stride must be >= 1")
    if toy not in _TOYS:
        raise InvalidParameterError(f"unknown toy {toy!r}; choose from {sorted(_TOYS)}")
    make, measure = _TOYS[toy]
    grad, beta, default_init = make(**params)
    beta = cfg.beta if beta is None else beta
    init = cfg.initial_state if cfg.initial_state is not None else default_init
    run_cfg = replace(cfg, beta=beta, steps=max(1, (n_points - 1) * stride), initial_state=tuple(init))
    traj = simulate_langevin(grad, run_cfg)
    anchors = traj.states[:: stride][:n_points]
    h = burst_dt if burst_dt is not None else cfg.dt
    scale = _noise_scale(beta, h)
    d = anchors.shape[1]
    drift = np.array([np.asarray(grad(a), dtype=float) for a in anchors])
    base = anchors - drift * h
    moved = np.repeat(base[:, None, :], burst_len, axis=1)
    if scale > 0:
        gen = _rng.make_rng(cfg.seed, _rng.BURST)
        moved = moved + scale * _rng.standard_normal(gen, (n_points, burst_len, d))
    bursts = measure(moved.reshape(-1, d)).reshape(n_points, burst_len, -1)
    return BurstSample(
        anchors=StateTrajectory(cfg.dt * stride, anchors),
        observations=measure(anchors),
        bursts=bursts,
        burst_dt=h,
        beta=beta,
    )


@dataclass(frozen=True)
class FrameBurstSample:
    states: StateTrajectory  # the simulated trajectory
    frames: np.ndarray  # (n_frames, frame_len, n) measurements per frame
    bursts: np.ndarray  # (n_frames, burst_len, frame_len, n) re-simulated frames
    latent_variance: float

    def __len__(self):
        return self.frames.shape[0]


def frame_bursts(cfg, frame_len, n_frames, burst_len, toy="circle", **params):
    """Consecutive measurement frames plus, for each frame, ``burst_len``
    independent re-simulations of that frame from its first state.

    ``latent_variance`` is the variance of a frame's mean latent state
    across bursts, ``(2 dt / beta) sum_k ((L - k) / L)^2``, to first order
    in ``dt``; dividing burst covariances by it puts distances in latent units.
    """
    if burst_len < 2:
        raise InvalidParameterError(f"burst_len must be >= 2, got {burst_len}")
    if frame_len < 1 or n_frames < 1:
        raise InvalidParameterError("frame_len and n_frames must be >= 1")
    if toy not in _TOYS:
        raise InvalidParameterError(f"unknown toy {toy!r}; choose from {sorted(_TOYS)}")
    make, measure = _TOYS[toy]
    grad, beta, default_init = make(**params)
    beta = cfg.beta if beta is None else beta
    init = cfg.initial_state if cfg.initial_state is not None else default_init
    run_cfg = replace(cfg, beta=beta, steps=n_frames * frame_len - 1, initial_state=tuple(init))
    traj = simulate_langevin(grad, run_cfg)
    d = traj.dim
    frames = measure(traj.states).reshape(n_frames, frame_len, -1)
    anchors = traj.states[::frame_len][:n_frames]
    scale = _noise_scale(beta, cfg.dt)
    paths = np.empty((n_frames, burst_len, frame_len, d))
    x = np.repeat(anchors[:, None, :], burst_len, axis=1)
    paths[:, :, 0] = x
    gen = _rng.make_rng(cfg.seed, _rng.BURST)
    for k in range(1, frame_len):
        x = x - np.asarray(grad(x), dtype=float) * cfg.dt  # the toy gradients broadcast
        if scale > 0:
            x = x + scale * _rng.standard_normal(gen, x.shape)
        paths[:, :, k] = x
    if not np.all(np.isfinite(paths)):
        raise SimulationDivergedError(-1, "burst re-simulation diverged")
    bursts = measure(paths.reshape(-1, d)).reshape(n_frames, burst_len, frame_len, -1)
    weights = (frame_len - np.arange(1, frame_len)) / frame_len
    var = 0.0 if scale == 0 else 2.0 * cfg.dt / beta * float(np.sum(weights**2))
    return FrameBurstSample(traj, frames, bursts, var)


def synth_tones(rate=44100, seconds=4.0, notes=(440.0, 523.25, 659.25, 440.0), seed=0, noise=0.01):
    """Piecewise-constant tone sequence with a few harmonics and faint noise,
    a stand-in for real recordings."""
    n = int(round(rate * seconds))
    t = np.arange(n) / rate
    seg = np.minimum((t / seconds * len(notes)).astype(int), len(notes) - 1)
    f = np.asarray(notes, dtype=float)[seg]
    phase = 2 * np.pi * np.cumsum(f) / rate
    x = 0.5 * np.sin(phase) + 0.2 * np.sin(2 * phase) + 0.1 * np.sin(3 * phase)
    if noise > 0:
        x = x + noise * _rng.standard_normal(_rng.make_rng(seed, _rng.AUX), (n,))
    return x / np.max(np.abs(x)) * 0.9
