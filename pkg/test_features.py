"""
Tests for digraph feature extraction and scaling.
"""

import numpy as np
import pytest

from conftest import make_log, random_strokes
from core.errors import InsufficientData, MalformedLine
from core.features import (
    STD_FLOOR,
    DigraphFeatures,
    FeatureMatrix,
    Scaler,
    apply_scaler,
    extract_features,
    fit_scaler,
    load_features_csv,
    parse_features_csv,
    serialize_features_csv,
)


def grid_strokes(rng, n):
    """Strokes on a 1/8 ms grid, so every difference is exact in float64."""
    press = np.cumsum(rng.integers(40, 2000, n)) / 8.0
    release = press + rng.integers(80, 2400, n) / 8.0
    return list(zip(press.tolist(), release.tolist()))


def test_simple_digraph():
    features = extract_features(make_log([(100.0, 180.0), (230.0, 300.0)]))
    assert len(features) == 1
    assert features[0] == DigraphFeatures(hold_ms=80.0, ud_ms=50.0, dd_ms=130.0, uu_ms=120.0)


def test_rollover_gives_negative_ud(rollover_log):
    assert extract_features(rollover_log)[0] == DigraphFeatures(70.0, -20.0, 50.0, 50.0)


@pytest.mark.parametrize("strokes", [[], [(0.0, 10.0)]])
def test_fewer_than_two_strokes_gives_no_rows(strokes):
    features = extract_features(make_log(strokes))
    assert len(features) == 0
    assert features.values.shape == (0, 4)


def test_feature_identities_on_random_logs(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        log = make_log(grid_strokes(rng, n))
        values = extract_features(log).values
        hold, ud, dd, uu = values.T
        assert len(values) == n - 1
        assert np.array_equal(dd, hold + ud)
        assert (dd >= 0).all()

        shift = float(rng.integers(0, 80000)) / 8.0
        press, release = log.stroke_times()
        moved = make_log(zip((press + shift).tolist(), (release + shift).tolist()))
        assert np.array_equal(extract_features(moved).values, values)


def test_identity_holds_closely_for_millisecond_decimals(rng):
    for _ in range(100):
        values = extract_features(make_log(random_strokes(rng, 25))).values
        np.testing.assert_allclose(values[:, 2], values[:, 0] + values[:, 1], rtol=0, atol=1e-9)


def test_fit_scaler_population_std():
    train = FeatureMatrix([[1.0, 0.0, 5.0, 2.0], [3.0, 0.0, 5.0, 4.0]])
    scaler = fit_scaler(train)
    assert scaler.mean == (2.0, 0.0, 5.0, 3.0)
    assert scaler.std == (1.0, STD_FLOOR, STD_FLOOR, 1.0)


def test_fit_scaler_needs_two_rows():
    with pytest.raises(InsufficientData):
        fit_scaler(FeatureMatrix([[1.0, 2.0, 3.0, 4.0]]))


def test_scaled_training_features_are_standardized(rng):
    train = extract_features(make_log(random_strokes(rng, 300)))
    scaled = apply_scaler(train, fit_scaler(train)).values
    np.testing.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(scaled.std(axis=0), 1.0, atol=1e-9)


def test_identity_scaler_leaves_values():
    matrix = FeatureMatrix([[80.0, 50.0, 130.0, 120.0]])
    assert apply_scaler(matrix, Scaler.identity()) == matrix


def test_matrix_is_read_only_copy():
    source = np.array([[1.0, 2.0, 3.0, 4.0]])
    matrix = FeatureMatrix(source)
    source[0, 0] = 99.0
    assert matrix.values[0, 0] == 1.0
    assert source.flags.writeable
    with pytest.raises(ValueError):
        matrix.values[0, 0] = 5.0


def test_matrix_rejects_wrong_width():
    with pytest.raises(ValueError):
        FeatureMatrix([[1.0, 2.0, 3.0]])


def test_concat_keeps_segment_order():
    a = FeatureMatrix([[1.0, 1.0, 2.0, 2.0]])
    b = FeatureMatrix([[3.0, 3.0, 6.0, 6.0], [4.0, 4.0, 8.0, 8.0]])
    joined = FeatureMatrix.concat([a, b])
    assert [row.hold_ms for row in joined] == [1.0, 3.0, 4.0]
    assert len(FeatureMatrix.concat([])) == 0


def test_csv_dump_round_trip(rng):
    features = extract_features(make_log(grid_strokes(rng, 50)))
    text = serialize_features_csv(features)
    assert text.splitlines()[0] == "hold_ms,ud_ms,dd_ms,uu_ms"
    assert parse_features_csv(text) == features


def test_csv_dump_loads_from_file(rng, tmp_path):
    features = extract_features(make_log(grid_strokes(rng, 30)))
    path = tmp_path / "features.csv"
    path.write_text(serialize_features_csv(features), encoding="utf-8")
    assert load_features_csv(path) == features
    assert load_features_csv(str(path)) == features


def test_csv_dump_formats_six_decimals():
    text = serialize_features_csv(FeatureMatrix([[80.0, -20.5, 59.5, 50.0]]))
    assert text == "hold_ms,ud_ms,dd_ms,uu_ms\n80.000000,-20.500000,59.500000,50.000000\n"


@pytest.mark.parametrize("text", [
    "",
    "hold,ud,dd,uu\n1,2,3,4\n",
    "hold_ms,ud_ms,dd_ms,uu_ms\n1,2,3\n",
    "hold_ms,ud_ms,dd_ms,uu_ms\n1,2,x,4\n",
])
def test_csv_parse_errors(text):
    with pytest.raises(MalformedLine):
        parse_features_csv(text)
