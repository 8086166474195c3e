import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

import oracles
from combsteer.comb import default_model, simulate_cm, two_mode_squeezed_model
from combsteer.estimators import CombCovarianceTransformer, SteeringTransformer
from combsteer.exceptions import DimensionError, UnphysicalStateError
from combsteer.gaussian import Bipartition, two_mode_squeezed_vacuum
from combsteer.steering import steering


def test_params_and_clone():
    est = SteeringTransformer(mode="pairs", n_jobs=2)
    assert est.get_params() == {
        "mode": "pairs", "partitions": None, "n_jobs": 2, "check_physical": True,
    }
    twin = clone(est.set_params(mode="full"))
    assert twin.get_params()["mode"] == "full" and twin is not est


def test_steering_features_of_tmsv():
    X = np.stack([two_mode_squeezed_vacuum(r).matrix for r in (0.1, 0.5, 1.0)])
    est = SteeringTransformer().fit(X)
    assert list(est.get_feature_names_out()) == ["(0)->(1)", "(1)->(0)"]
    F = est.transform(X)
    want = [oracles.tmsv_value(r) for r in (0.1, 0.5, 1.0)]
    np.testing.assert_allclose(F, np.column_stack([want, want]), atol=1e-12)


def test_explicit_partitions_and_single_state():
    cm = simulate_cm(default_model(4))
    est = SteeringTransformer(partitions=[([2, 3], [0, 1]), Bipartition([0], [1])])
    F = est.fit_transform(cm)
    assert F.shape == (1, 2) and F[0, 0] > 0


def test_transform_checks():
    X = two_mode_squeezed_vacuum(0.5).matrix[None]
    est = SteeringTransformer().fit(X)
    with pytest.raises(DimensionError):
        est.transform(np.eye(6)[None])
    with pytest.raises(UnphysicalStateError):
        est.transform(0.5 * np.eye(4)[None])
    loose = SteeringTransformer(check_physical=False).fit(0.5 * np.eye(4)[None])
    assert loose.transform(0.5 * np.eye(4)[None]).shape == (1, 2)


def test_comb_pipeline():
    model = default_model()
    pipe = make_pipeline(
        CombCovarianceTransformer(model, n_pixels=4),
        SteeringTransformer(partitions=[([2, 3], [0, 1])]),
    )
    X = np.vstack([model.squeezing_db, np.asarray(model.squeezing_db) * 0.5])
    F = pipe.fit_transform(X)
    assert F.shape == (2, 1)
    direct = simulate_cm(model.with_pixels(4))
    assert F[0, 0] == pytest.approx(steering(direct, Bipartition([2, 3], [0, 1])).value, abs=1e-12)
    assert F[1, 0] < F[0, 0]


def test_comb_transformer_shapes():
    est = CombCovarianceTransformer(two_mode_squeezed_model(0.5), flatten=True).fit()
    out = est.transform([[-4.0, 4.0]])
    assert out.shape == (1, 16)
    default = CombCovarianceTransformer().fit()
    assert default.n_features_in_ == 8
    with pytest.raises(DimensionError):
        default.transform(np.zeros((1, 3)))
