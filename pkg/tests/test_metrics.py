import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlstm.metrics import evaluate


def test_perfect_forecast():
    r = evaluate([100.0, 250.0], [100.0, 250.0])
    assert (r.mape, r.mae, r.mse_plain, r.mse_relative, r.n) == (0, 0, 0, 0, 2)


def test_single_point_arithmetic():
    r = evaluate([100.0], [90.0])
    assert r.mape == pytest.approx(0.1)
    assert r.mae == pytest.approx(10)
    assert r.mse_plain == pytest.approx(100)
    assert r.mse_relative == pytest.approx(0.01)


def test_errors():
    with pytest.raises(ValueError, match="length"):
        evaluate([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        evaluate([], [])
    with pytest.raises(ValueError, match="index 1"):
        evaluate([3.0, 0.0], [3.0, 1.0])


values = st.lists(st.floats(1.0, 1e4), min_size=1, max_size=30)


@settings(max_examples=100)
@given(values, st.integers(0, 2**31), st.floats(0.01, 100.0))
def test_scale_and_permutation(y, seed, c):
    rng = np.random.default_rng(seed)
    y = np.array(y)
    yhat = y * rng.uniform(0.8, 1.2, size=y.size)
    base = evaluate(y, yhat)
    perm = rng.permutation(y.size)
    p = evaluate(y[perm], yhat[perm])
    assert p.mape == pytest.approx(base.mape, rel=1e-12)
    assert p.mae == pytest.approx(base.mae, rel=1e-12)
    s = evaluate(c * y, c * yhat)
    assert s.mape == pytest.approx(base.mape, rel=1e-12, abs=1e-12)
    assert s.mse_relative == pytest.approx(base.mse_relative, rel=1e-12, abs=1e-12)
    assert s.mae == pytest.approx(c * base.mae, rel=1e-9)
    assert s.mse_plain == pytest.approx(c * c * base.mse_plain, rel=1e-9)
