import numpy as np
import pytest

from difobs import datagen, features, lift, observer, spectral


def random_psd(rng, n, rank=None):
    a = rng.standard_normal((n, rank or n))
    return a @ a.T


@pytest.fixture(scope="session")
def sphere_feats():
    """Small sphere-toy histogram run: 120 frames of 30 samples."""
    cfg = datagen.SimConfig(seed=3, dt=0.1, steps=120 * 30 - 1)
    _, pos = datagen.simulate_sphere_toy(0.024, 0.005, cfg)
    obs = datagen.poisson_sensor_observe(pos, noise_rate=0.1, seed=3)
    return features.histogram_features(obs, 30, bins=6)


@pytest.fixture(scope="session")
def trained(sphere_feats):
    covs = features.local_covariances(sphere_feats, "window", 20)
    model, op = spectral.fit_diffusion(sphere_feats, covs, 1.0, 1.0, count=12, dimension=3)
    lf = lift.fit_lift(sphere_feats, spectral.embedding(model))
    obs = observer.build_observer(model, lf, 0.85)
    return {"feats": sphere_feats, "covs": covs, "model": model, "op": op, "lift": lf, "obs": obs}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
