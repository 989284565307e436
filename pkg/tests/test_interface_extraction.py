import math

import numpy as np
import pandas as pd
import pytest

from segflow.domain_grid import ScalarField
from segflow.errors import NotFoundError, UsageError
from segflow.interface_extraction import (
    ParabolicPoint,
    band_volume,
    interface_position_1d,
    lipschitz_ratio_scan,
    parabolic_distance,
    random_sample_pairs,
    signed_two_phase,
    support_labels,
    write_interface_csv,
    zero_crossing_1d,
)


def test_two_phase_labels_have_one_band_at_the_middle(line_grid, two_phase_data):
    labels = support_labels(two_phase_data)
    band = np.flatnonzero(labels.interior_band)
    # x = 0.5 is zero in both tents, so it carries label 0
    assert line_grid.axis(0)[band].tolist() == pytest.approx([0.5])
    assert labels.labels[1] == 1 and labels.labels[-2] == 2
    assert labels.labels[0] == 0 and labels.labels[-1] == 0
    assert band_volume(labels) == pytest.approx(0.02)


def test_threshold_removes_small_values(line_grid, two_phase_data):
    labels = support_labels(two_phase_data, threshold=1.0)
    peak = np.max([g.values for g in two_phase_data], axis=0)
    assert np.all(labels.owner[peak < 1.0] == 0)
    with pytest.raises(UsageError):
        support_labels(two_phase_data, threshold=-1.0)


def test_regions_partition_the_owned_nodes(square_grid):
    x, y = square_grid.coordinates()
    left = ScalarField(square_grid, np.where(x < 0.5, x * (0.5 - x), 0.0))
    right = ScalarField(square_grid, np.where(x > 0.5, (x - 0.5) * (1 - x), 0.0))
    labels = support_labels([left, right])
    assert not np.any(labels.region(1) & labels.region(2))
    assert np.all(x[labels.region(1)] < 0.5)
    frame = labels.to_frame()
    assert list(frame.columns) == ["t", "node", "x", "y", "label"]
    assert len(frame) == int(labels.interior_band.sum())


def test_signed_field_crosses_zero_at_the_interface(two_phase_data):
    signed = signed_two_phase(two_phase_data, 0, 1)
    assert signed.values[10] > 0 and signed.values[40] < 0
    assert interface_position_1d(two_phase_data, 0, 1) == pytest.approx(0.5)
    with pytest.raises(UsageError):
        signed_two_phase(two_phase_data, 1, 1)


def test_zero_crossing_interpolates_between_nodes(line_grid):
    x = line_grid.axis(0)
    assert zero_crossing_1d(ScalarField(line_grid, 0.31 - x)) == pytest.approx(0.31)
    with pytest.raises(NotFoundError):
        zero_crossing_1d(ScalarField(line_grid, 1.0 + x))


def test_zero_crossing_through_a_run_of_zeros(line_grid):
    x = line_grid.axis(0)
    values = np.where(x < 0.4, 1.0, np.where(x > 0.6, -1.0, 0.0))
    assert zero_crossing_1d(ScalarField(line_grid, values)) == pytest.approx(0.5)


def test_zero_crossing_is_one_dimensional(square_grid):
    with pytest.raises(UsageError):
        zero_crossing_1d(ScalarField.zeros(square_grid))


def test_parabolic_distance_mixes_time_and_space():
    p = ParabolicPoint(x=(0.0, 0.0), t=1.0)
    q = ParabolicPoint(x=(3.0, 4.0), t=0.0)
    assert parabolic_distance(p, q) == pytest.approx(math.sqrt(26.0))
    assert ParabolicPoint(x=0.5, t=0.0).x == (0.5,)


def test_sample_pairs_are_interior_distinct_and_seeded(square_grid):
    pairs = random_sample_pairs(square_grid, 100, seed=7)
    assert pairs.shape == (100, 2)
    assert np.all(pairs[:, 0] != pairs[:, 1])
    assert np.all(square_grid.interior_mask.ravel()[pairs])
    assert np.array_equal(pairs, random_sample_pairs(square_grid, 100, seed=7))


def test_lipschitz_ratio_of_a_linear_field(line_grid):
    x = line_grid.axis(0)
    field = ScalarField(line_grid, 3.0 * x)
    pairs = random_sample_pairs(line_grid, 50)
    assert lipschitz_ratio_scan([field], pairs) == pytest.approx(3.0)
    with pytest.raises(UsageError):
        lipschitz_ratio_scan([field], [[0, 5]])


def test_write_interface_csv(tmp_path, two_phase_data):
    path = write_interface_csv(tmp_path / "interface.csv", [support_labels(two_phase_data)])
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "node", "x", "label"]
    assert frame["x"].tolist() == pytest.approx([0.5])
