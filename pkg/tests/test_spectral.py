import numpy as np
import pytest

from difobs import kernel, spectral
from difobs.errors import InvalidInputError, InvalidParameterError
from difobs.kernel import AffinityOperator


def op_from_K(K, eps=1.0):
    K = np.asarray(K, float)
    D = K.sum(axis=1)
    return AffinityOperator(K, D, K / D[:, None], eps)


def random_op(rng, n=10):
    x = rng.standard_normal((n, 2))
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    return kernel.affinity(d, kernel.select_epsilon(d))


def test_uniform_three():
    m = spectral.diffusion_eigs(kernel.affinity(np.zeros((3, 3)), 1.0))
    np.testing.assert_allclose(m.mu, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(m.psi[:, 0], 1.0, atol=1e-12)


def test_two_by_two():
    op = op_from_K([[1.8, 0.2], [0.2, 0.8]])
    np.testing.assert_allclose(op.W, [[0.9, 0.1], [0.2, 0.8]], atol=1e-15)
    m = spectral.diffusion_eigs(op)
    np.testing.assert_allclose(m.mu, [1.0, 0.7], atol=1e-12)
    np.testing.assert_allclose(m.psi[:, 1], np.array([-1.0, 2.0]) / np.sqrt(5), atol=1e-12)


def test_disconnected_blocks():
    K = np.zeros((4, 4))
    K[:2, :2] = 1
    K[2:, 2:] = 1
    m = spectral.diffusion_eigs(op_from_K(K))
    np.testing.assert_allclose(m.mu[:2], [1, 1], atol=1e-12)


def test_invariants_on_random_kernels():
    rng = np.random.default_rng(0)
    for _ in range(5):
        op = random_op(rng, 30)
        m = spectral.diffusion_eigs(op)
        assert abs(m.mu[0] - 1) < 1e-10
        np.testing.assert_allclose(m.psi[:, 0], 1.0, rtol=1e-8)
        assert abs(m.lam[0]) < 1e-8
        assert np.all(np.diff(m.mu) <= 0)
        assert np.all((m.mu > -1) & (m.mu <= 1 + 1e-12))
        rest = m.psi[:, 1:]
        np.testing.assert_allclose(np.linalg.norm(rest, axis=0), 1.0, atol=1e-12)
        top = rest[np.argmax(np.abs(rest), axis=0), np.arange(rest.shape[1])]
        assert np.all(top > 0)
        res = np.linalg.norm(op.W @ m.psi - m.psi * m.mu, axis=0)
        assert np.all(res <= 1e-8)


def test_matches_dense_nonsymmetric_solver():
    rng = np.random.default_rng(1)
    for _ in range(20):
        op = random_op(rng, 10)
        ours = spectral.diffusion_eigs(op).mu
        brute = np.sort(np.linalg.eig(op.W)[0].real)[::-1]
        np.testing.assert_allclose(ours, brute, atol=1e-8)


def test_count_subset():
    op = random_op(np.random.default_rng(2), 20)
    full = spectral.diffusion_eigs(op)
    part = spectral.diffusion_eigs(op, 5)
    np.testing.assert_allclose(part.mu, full.mu[:5], atol=1e-12)
    np.testing.assert_allclose(part.psi, full.psi[:, :5], atol=1e-8)


def test_deterministic_signs():
    op = random_op(np.random.default_rng(3), 25)
    a, b = spectral.diffusion_eigs(op), spectral.diffusion_eigs(op)
    assert a.psi.tobytes() == b.psi.tobytes()


def test_fp_eigenvalues():
    eps, beta = 0.3, 2.0
    lam = spectral.fp_eigenvalues([1.0, np.exp(-beta * eps / 2), 0.0, -0.2], eps, beta)
    assert lam[0] == 0
    assert lam[1] == pytest.approx(1.0)
    assert np.isnan(lam[2]) and np.isnan(lam[3])


def test_select_dimension():
    # largest drop among nontrivial eigenvalues is mu_2 -> mu_3 (0.88 -> 0.3)
    assert spectral.select_dimension([1, 0.9, 0.88, 0.3, 0.28]) == 2
    assert spectral.select_dimension([1, 0.9, 0.88, 0.3, 0.28], 2) == 2
    assert spectral.select_dimension(0.9 ** np.arange(30)) == 1
    with pytest.raises(InvalidParameterError):
        spectral.select_dimension([1, 0.5, 0.2], 3)
    with pytest.raises(InvalidInputError):
        spectral.select_dimension([1, 0.5])


def test_embedding_columns():
    m = spectral.with_dimension(spectral.diffusion_eigs(random_op(np.random.default_rng(4), 12)), 3)
    e = spectral.embedding(m)
    np.testing.assert_array_equal(e, m.psi[:, 1:4])
    np.testing.assert_array_equal(spectral.embedding(m, 1)[:, 0], m.psi[:, 1])
    with pytest.raises(InvalidParameterError):
        spectral.embedding(m, 12)


def test_duplicate_frames_coincide():
    x = np.random.default_rng(5).standard_normal((12, 2))
    x[7] = x[3]
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    m = spectral.diffusion_eigs(kernel.affinity(d, kernel.select_epsilon(d)), 6)
    np.testing.assert_allclose(m.psi[7], m.psi[3], atol=1e-8)


def test_permutation_permutes_rows():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((15, 2))
    perm = rng.permutation(15)

    def fit(pts):
        d = ((pts[:, None] - pts[None]) ** 2).sum(-1)
        return spectral.diffusion_eigs(kernel.affinity(d, kernel.select_epsilon(d)), 5)

    a, b = fit(x), fit(x[perm])
    np.testing.assert_allclose(b.mu, a.mu, atol=1e-12)
    for l in range(1, 5):
        col_a, col_b = a.psi[perm, l], b.psi[:, l]
        s = np.sign(col_a @ col_b)
        np.testing.assert_allclose(col_b, s * col_a, atol=1e-8)


def test_fit_diffusion_sets_dimension(trained):
    model = trained["model"]
    assert model.m == 3
    assert model.frame_dt == trained["feats"].frame_dt
