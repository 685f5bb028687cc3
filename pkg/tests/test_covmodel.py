import numpy as np
import pytest
from hypothesis import given, strategies as st

from tvkron.covmodel import (DataMatrix, KroneckerSumModel, SpatialTrajectory, TemporalCovariance,
                             assemble_sigma, validate_model)
from tvkron.graphgen import gen_ar1

from conftest import random_spd
from oracles import sigma_elementwise


def small_model(rng, m=3, n=2):
    a = TemporalCovariance(random_spd(rng, m))
    bs = np.stack([random_spd(rng, n) for _ in range(m)])
    return KroneckerSumModel(a, SpatialTrajectory(bs))


def test_assemble_matches_elementwise(rng):
    model = small_model(rng, 4, 3)
    np.testing.assert_allclose(assemble_sigma(model),
                               sigma_elementwise(model.a.matrix, model.b.matrices), atol=1e-14)


def test_assemble_size_guard(rng):
    model = KroneckerSumModel(gen_ar1(100, 0.5), SpatialTrajectory.constant(np.eye(50), 100))
    with pytest.raises(ValueError, match="size guard"):
        assemble_sigma(model)


def test_mismatched_m_rejected():
    with pytest.raises(ValueError, match="m=3"):
        KroneckerSumModel(gen_ar1(3, 0.1), SpatialTrajectory.constant(np.eye(2), 4))


def test_trace_default_and_mismatch(rng):
    model = small_model(rng)
    assert model.trace_a == pytest.approx(np.trace(model.a.matrix))
    bad = KroneckerSumModel(model.a, model.b, trace_a=model.trace_a * 1.01)
    rep = validate_model(bad)
    assert not rep.ok and any("trace_a" in p for p in rep)


def test_validate_flags_indefinite_b(rng):
    model = small_model(rng)
    mats = model.b.matrices.copy()
    mats[1] = np.diag([1.0, -0.5])
    rep = validate_model(KroneckerSumModel(model.a, SpatialTrajectory(mats)))
    assert any("B(2/m) not positive definite" in p for p in rep)


def test_validate_clean_model(rng):
    assert validate_model(small_model(rng)).ok


def test_arrays_are_frozen(rng):
    model = small_model(rng)
    with pytest.raises(ValueError):
        model.a.matrix[0, 0] = 5.0


def test_trajectory_interpolation():
    mats = np.stack([np.eye(2) * k for k in (1.0, 2.0, 3.0, 4.0)])
    traj = SpatialTrajectory(mats)
    np.testing.assert_allclose(traj.at(0.5), 2 * np.eye(2))
    np.testing.assert_allclose(traj.at(0.625), 2.5 * np.eye(2))
    np.testing.assert_allclose(traj.at(0.0), np.eye(2))


finite = st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)


@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=1, max_size=5))
def test_csv_roundtrip_exact(rows):
    x = DataMatrix(np.array(rows))
    back = DataMatrix.from_csv(x.to_csv())
    assert np.array_equal(back.values, x.values)


def test_csv_errors_name_line_and_column():
    with pytest.raises(ValueError, match="line 2, column 3"):
        DataMatrix.from_csv("1,2,3\n4,5,x\n")
    with pytest.raises(ValueError, match="line 2: expected 3 fields"):
        DataMatrix.from_csv("1,2,3\n4,5\n")
    with pytest.raises(ValueError, match="empty"):
        DataMatrix.from_csv("\n")


def test_nonfinite_data_rejected():
    with pytest.raises(ValueError, match="row 1, column 2"):
        DataMatrix(np.array([[1.0, np.nan]]))
