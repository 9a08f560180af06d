import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from difobs import lift
from difobs.errors import DegenerateLiftError, InvalidInputError


def orthonormal(n, m, seed=0):
    """Mean-zero orthonormal columns."""
    a = np.random.default_rng(seed).standard_normal((n, m))
    a -= a.mean(axis=0)
    q, _ = np.linalg.qr(a)
    return q


def test_single_eigenvector():
    psi = orthonormal(40, 3)
    lf = lift.fit_lift(psi[:, :1], psi[:, :1])
    np.testing.assert_allclose(lf.alpha, [[1.0]], atol=1e-12)


def test_single_eigenvector_row():
    psi = orthonormal(40, 3)
    with pytest.raises(DegenerateLiftError):
        lift.fit_lift(psi[:, :1], psi)  # n = 1 < m = 3 cannot be full rank
    z = np.column_stack([psi[:, 0], psi[:, 1], psi[:, 2]])
    lf = lift.fit_lift(z, psi)
    np.testing.assert_allclose(lf.alpha[0], [1.0, 0.0, 0.0], atol=1e-12)


def test_planted_model():
    psi = orthonormal(60, 3, seed=1)
    c = np.random.default_rng(2).standard_normal((3, 5))
    z = psi @ c + np.arange(5.0)
    lf = lift.fit_lift(z, psi)
    np.testing.assert_allclose(lf.alpha, c.T, atol=1e-10)
    np.testing.assert_allclose(lf.mean, np.arange(5.0), atol=1e-12)
    for i in range(0, 60, 7):
        np.testing.assert_allclose(lift.reconstruct(lf, psi[i]), z[i], atol=1e-10)
        np.testing.assert_allclose(lift.invert(lf, z[i]), psi[i], atol=1e-10)


def test_scaling():
    psi = orthonormal(30, 2)
    z = np.random.default_rng(3).standard_normal((30, 4))
    a, b = lift.fit_lift(z, psi), lift.fit_lift(2 * z, psi)
    np.testing.assert_allclose(b.alpha, 2 * a.alpha, atol=1e-12)
    np.testing.assert_allclose(b.alpha_pinv, a.alpha_pinv / 2, atol=1e-12)


def test_pinv_identity_and_projection():
    rng = np.random.default_rng(4)
    psi = orthonormal(50, 3, seed=4)
    z = rng.standard_normal((50, 6))
    lf = lift.fit_lift(z, psi)
    np.testing.assert_allclose(lf.alpha_pinv @ lf.alpha, np.eye(3), atol=1e-8)
    x = rng.standard_normal(6)
    r = (x + lf.mean) - lift.reconstruct(lf, lift.invert(lf, x + lf.mean))
    np.testing.assert_allclose(lf.alpha.T @ r, 0.0, atol=1e-8)


def test_orthogonal_complement_inverts_to_zero():
    psi = orthonormal(50, 2, seed=5)
    z = np.random.default_rng(5).standard_normal((50, 4))
    lf = lift.fit_lift(z, psi)
    q, _ = np.linalg.qr(lf.alpha, mode="complete")
    v = q[:, 2]
    np.testing.assert_allclose(lift.invert(lf, lf.mean + v), 0.0, atol=1e-8)


def test_zero_coordinates_reconstruct_mean():
    psi = orthonormal(20, 2)
    z = np.random.default_rng(6).standard_normal((20, 3))
    lf = lift.fit_lift(z, psi)
    np.testing.assert_allclose(lift.reconstruct(lf, np.zeros(2)), lf.mean)
    raw = lift.fit_lift(z, psi, center=False)
    np.testing.assert_array_equal(lift.reconstruct(raw, np.zeros(2)), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_invert_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    psi = orthonormal(30, 2, seed=seed)
    lf = lift.fit_lift(rng.standard_normal((30, 4)), psi, center=False)
    z1, z2 = rng.standard_normal(4), rng.standard_normal(4)
    np.testing.assert_allclose(
        lift.invert(lf, a * z1 + b * z2), a * lift.invert(lf, z1) + b * lift.invert(lf, z2), atol=1e-10
    )


def test_degenerate_names_columns():
    psi = orthonormal(30, 3)
    z = np.column_stack([psi[:, 0], psi[:, 2]]) @ np.random.default_rng(0).standard_normal((2, 5))
    with pytest.raises(DegenerateLiftError) as info:
        lift.fit_lift(z, psi)
    assert info.value.columns == [2]
    assert info.value.rank == 2


def test_shape_errors():
    with pytest.raises(InvalidInputError):
        lift.fit_lift(np.zeros((10, 2)), np.zeros((9, 2)))


def test_weighted_variant():
    psi = orthonormal(40, 2)
    z = np.random.default_rng(7).standard_normal((40, 3))
    w = np.linspace(0.5, 1.5, 40)
    lf = lift.fit_lift(z, psi, weights=w)
    np.testing.assert_allclose(lf.alpha, ((z - z.mean(0)) * w[:, None]).T @ psi, atol=1e-12)


def test_error_non_increasing_in_m(trained):
    from difobs import spectral

    feats = trained["feats"].frames
    model = trained["model"]
    errs = []
    for m in range(1, 6):
        lf = lift.fit_lift(feats, spectral.embedding(model, m))
        recon = np.array([lift.reconstruct(lf, lift.invert(lf, z)) for z in feats])
        errs.append(np.linalg.norm(feats - recon))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))


def test_noiseless_sphere_beyond_gap_beats_m1():
    from difobs import datagen, features, spectral

    cfg = datagen.SimConfig(seed=0, dt=0.1, steps=399)
    bs = datagen.burst_sample(cfg, 30, 400, toy="sphere", c=0.024, b=0.05)
    covs = features.local_covariances(bs.observations, "bursts", bursts=bs.bursts, rank_policy="fixed:2",
                                      scale=bs.step_variance)
    model, _ = spectral.fit_diffusion(bs.observations, covs, 1.0, count=12)
    z = bs.observations

    def rel_err(m):
        psi = spectral.embedding(model, m)
        lf = lift.fit_lift(z, psi)
        return np.linalg.norm(z - lf.mean - psi @ lf.alpha.T) / np.linalg.norm(z)

    assert rel_err(max(model.m, 2) + 1) < rel_err(1)
