from ebtrack.operations.utils import print_matrix_summary, get_matrix_stats, assert_expected_shape
import numpy as np
import xarray as xr
import pytest, logging


@pytest.fixture
def masked_matrix():
    X = np.arange(12, dtype=float).reshape(4, 3)
    W = np.ones_like(X)
    W[0, 0] = 0
    W[3, 2] = 0
    return X, W


def test_matrix_stats_skip_masked_cells(masked_matrix):
    X, W = masked_matrix
    stats = get_matrix_stats(X, W)
    assert stats['min'] == 1.0
    assert stats['max'] == 10.0
    assert stats['mean'] == pytest.approx(np.mean(X[W == 1]))


def test_matrix_stats_without_mask(masked_matrix):
    X, _ = masked_matrix
    assert get_matrix_stats(X) == {'min': 0.0, 'mean': 5.5, 'max': 11.0}


def test_matrix_stats_of_fully_masked_matrix(masked_matrix):
    X, _ = masked_matrix
    stats = get_matrix_stats(X, np.zeros_like(X))
    assert all(np.isnan(v) for v in stats.values())


def test_matrix_stats_for_dataarray(masked_matrix):
    X, W = masked_matrix
    da = xr.DataArray(X, dims=['row', 'feature'])
    assert get_matrix_stats(da, W) == get_matrix_stats(X, W)


def test_print_matrix_summary(masked_matrix, caplog):
    X, W = masked_matrix
    with caplog.at_level(logging.INFO, logger='ebtrack'):
        print_matrix_summary(X, name='features', mask=W)
    assert caplog.records
    for record in caplog.records:
        assert record.levelname == "INFO"
    assert '<features> (2 masked cells)' in caplog.text
    assert 'shape: (4, 3)' in caplog.text


def test_expected_shape_validates(masked_matrix):
    X, _ = masked_matrix
    assert assert_expected_shape('X', X, (4, 3)) == (4, 3)
    assert assert_expected_shape('X', X, (None, 3)) == (4, 3)


def test_expected_shape_raises_for_wrong_length(masked_matrix):
    X, _ = masked_matrix
    with pytest.raises(ValueError, match='dimension 1 is 3 instead of 5'):
        assert_expected_shape('X', X, (4, 5))


def test_expected_shape_raises_for_wrong_rank(masked_matrix):
    X, _ = masked_matrix
    with pytest.raises(ValueError, match='2 dimensions'):
        assert_expected_shape('X', X[0], (None, None))
