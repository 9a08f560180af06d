import numpy as np
import pytest

from difobs import io
from difobs.errors import InvalidInputError, InvalidModelError
from difobs.modelfile import TrainedModel, load_model, save_model


def _tm(trained):
    settings = {"cov_mode": "window", "cov_window": 20, "rank_policy": "relative:0.001", "gamma": 0.85}
    return TrainedModel(trained["model"], trained["lift"], trained["feats"], trained["covs"], trained["op"].D, settings)


def test_roundtrip(tmp_path, trained):
    p = tmp_path / "m.dob"
    save_model(p, _tm(trained))
    tm = load_model(p)
    np.testing.assert_array_equal(tm.diffusion.psi, trained["model"].psi)
    np.testing.assert_array_equal(tm.diffusion.mu, trained["model"].mu)
    np.testing.assert_array_equal(tm.lift.alpha_pinv, trained["lift"].alpha_pinv)
    np.testing.assert_array_equal(tm.covs.pinvs, trained["covs"].pinvs)
    assert tm.diffusion.eps == trained["model"].eps
    assert tm.diffusion.m == trained["model"].m
    assert tm.settings["gamma"] == 0.85


def test_header_contents(tmp_path, trained):
    p = tmp_path / "m.dob"
    save_model(p, _tm(trained))
    blocks, meta = io.read_dobs(p)
    assert meta["model_version"] == 1
    assert len(meta["provenance"]["features_sha256"]) == 64
    np.testing.assert_array_equal(blocks["lambda_diag"], -trained["model"].lam[1:4])
    assert {"alpha", "alpha_pinv", "feature_mean", "mu", "lam", "psi"} <= set(blocks)


def test_bytes_deterministic(tmp_path, trained):
    save_model(tmp_path / "a.dob", _tm(trained))
    save_model(tmp_path / "b.dob", _tm(trained))
    assert (tmp_path / "a.dob").read_bytes() == (tmp_path / "b.dob").read_bytes()


def test_rejects_unknown_model_version(tmp_path, trained):
    p = tmp_path / "m.dob"
    save_model(p, _tm(trained))
    p.write_bytes(p.read_bytes().replace(b'"model_version":1', b'"model_version":7'))
    with pytest.raises(InvalidModelError, match="version"):
        load_model(p)


def test_rejects_other_dobs(tmp_path):
    p = tmp_path / "x.dob"
    io.write_dobs(p, {"a": [1.0]}, {"kind": "something-else"})
    with pytest.raises(InvalidModelError):
        load_model(p)


def test_rejects_tampered_features(tmp_path, trained):
    p = tmp_path / "m.dob"
    save_model(p, _tm(trained))
    blocks, meta = io.read_dobs(p)
    blocks["features"][0, 0] += 1
    io.write_dobs(p, blocks, meta)
    with pytest.raises(InvalidModelError, match="hash"):
        load_model(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "nope.dob")


def test_truncated(tmp_path, trained):
    p = tmp_path / "m.dob"
    save_model(p, _tm(trained))
    p.write_bytes(p.read_bytes()[:-100])
    with pytest.raises(InvalidInputError, match="truncated"):
        load_model(p)
