import math

import numpy as np
import pytest

from margin_maxer import (
    Dataset,
    DatasetError,
    ParseError,
    SyntheticSpec,
    load_csv,
    make_ball_cap,
    make_sphere_cap,
    make_toy,
    save_csv,
)

GAMMA = math.sin(math.pi / 100)


class TestDataset:
    def test_fields_and_signed_points(self):
        ds = make_toy(0.5)
        assert ds.n == 3 and ds.d == 2
        s = math.sqrt(0.75)
        np.testing.assert_allclose(ds.points[0], [0.5, s])
        np.testing.assert_allclose(ds.points[1], [0.5, -s])
        np.testing.assert_allclose(ds.points[2], [-0.5, -s])
        np.testing.assert_array_equal(ds.labels, [1.0, 1.0, -1.0])
        # label-signed third point duplicates the first
        np.testing.assert_array_equal(ds.signed_points[2], ds.signed_points[0])

    def test_immutable(self):
        ds = make_toy(0.3)
        with pytest.raises(ValueError):
            ds.points[0, 0] = 2.0

    def test_label_domain(self):
        with pytest.raises(DatasetError, match="labels"):
            Dataset(np.eye(2) * 0.5, np.array([1.0, 0.0]))

    def test_norm_bound(self):
        with pytest.raises(DatasetError, match="norms"):
            Dataset(np.array([[1.5, 0.0]]), np.array([1.0]))

    def test_shape_checks(self):
        with pytest.raises(DatasetError):
            Dataset(np.zeros((2, 2, 1)), np.array([1.0, -1.0]))
        with pytest.raises(DatasetError):
            Dataset(np.zeros((2, 2)), np.array([1.0]))


class TestToy:
    def test_unit_norms(self):
        for g in (0.1, 0.5, 0.9):
            ds = make_toy(g)
            np.testing.assert_allclose(np.linalg.norm(ds.points, axis=1), 1.0, atol=1e-15)

    def test_margin_of_axis_direction(self):
        ds = make_toy(0.5)
        margins = ds.signed_points @ np.array([1.0, 0.0])
        assert margins.min() == pytest.approx(0.5, abs=1e-15)

    def test_domain(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(DatasetError):
                make_toy(bad)

    def test_mean_signed_point_off_axis(self):
        # the support mean has a nonzero second coordinate, unlike gamma * e1
        g = 0.5
        ds = make_toy(g)
        mean = ds.signed_points.mean(axis=0)
        target = np.array([g, 0.0]) * 1.0
        assert mean[0] == pytest.approx(g, abs=1e-15)
        assert abs(mean[1] - target[1]) > 0.2


class TestSphereCap:
    def test_pins_and_margin(self):
        spec = SyntheticSpec("sphere-cap", GAMMA, 100, 7)
        ds = make_sphere_cap(spec)
        s = math.sqrt(1 - GAMMA**2)
        np.testing.assert_allclose(ds.points[0], [GAMMA, s], atol=0)
        np.testing.assert_allclose(ds.points[1], [-GAMMA, s], atol=0)
        margins = ds.signed_points @ np.array([1.0, 0.0])
        assert margins.min() == pytest.approx(GAMMA, abs=1e-15)
        assert margins[0] == pytest.approx(GAMMA, abs=1e-15)
        assert margins[1] == pytest.approx(GAMMA, abs=1e-15)

    def test_on_circle_and_in_cap(self):
        ds = make_sphere_cap(SyntheticSpec("sphere-cap", 0.2, 64, 3))
        np.testing.assert_allclose(np.linalg.norm(ds.points, axis=1), 1.0, atol=1e-12)
        assert np.all(np.abs(ds.points[:, 0]) >= 0.2 - 1e-12)
        np.testing.assert_array_equal(ds.labels, np.sign(ds.points[:, 0]))

    def test_deterministic(self):
        a = make_sphere_cap(SyntheticSpec("sphere-cap", 0.3, 50, 11))
        b = make_sphere_cap(SyntheticSpec("sphere-cap", 0.3, 50, 11))
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_seeds_share_pins_only(self):
        a = make_sphere_cap(SyntheticSpec("sphere-cap", 0.3, 50, 1))
        b = make_sphere_cap(SyntheticSpec("sphere-cap", 0.3, 50, 2))
        np.testing.assert_array_equal(a.points[:2], b.points[:2])
        assert not np.array_equal(a.points[2:], b.points[2:])

    def test_n_too_small(self):
        with pytest.raises(DatasetError):
            SyntheticSpec("sphere-cap", 0.3, 1, 0)


class TestBallCap:
    def test_separable_with_known_margin(self):
        ds = make_ball_cap(SyntheticSpec("ball-cap", GAMMA, 100, 7))
        margins = ds.signed_points @ np.array([1.0, 0.0])
        assert margins.min() == pytest.approx(GAMMA, abs=1e-15)
        assert np.all(np.linalg.norm(ds.points, axis=1) <= 1 + 1e-12)

    def test_pins_only_when_n_two(self):
        ds = make_ball_cap(SyntheticSpec("ball-cap", 0.4, 2, 0))
        assert ds.n == 2
        s = math.sqrt(1 - 0.16)
        np.testing.assert_allclose(ds.points, [[0.4, s], [-0.4, s]], atol=0)

    def test_deterministic(self):
        a = make_ball_cap(SyntheticSpec("ball-cap", 0.1, 40, 5))
        b = make_ball_cap(SyntheticSpec("ball-cap", 0.1, 40, 5))
        np.testing.assert_array_equal(a.points, b.points)


class TestSpecValidation:
    def test_gamma_domain(self):
        with pytest.raises(DatasetError):
            SyntheticSpec("sphere-cap", 1.5, 10, 0)

    def test_toy_forces_three_points(self):
        with pytest.raises(DatasetError):
            SyntheticSpec("toy", 0.5, 4, 0)

    def test_unknown_family(self):
        with pytest.raises(DatasetError):
            SyntheticSpec("cube", 0.5, 10, 0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        ds = make_toy(0.5)
        path = tmp_path / "toy.csv"
        save_csv(ds, path)
        back = load_csv(path)
        np.testing.assert_allclose(back.points, ds.points, rtol=0, atol=1e-15)
        np.testing.assert_array_equal(back.labels, ds.labels)

    def test_round_trip_random(self, tmp_path):
        ds = make_ball_cap(SyntheticSpec("ball-cap", 0.2, 30, 9))
        path = tmp_path / "ball.csv"
        save_csv(ds, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.points, ds.points)

    def test_bad_label_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,y\n0.1,0.2,1\n0.3,0.1,0\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv(path)

    def test_mixed_dimension_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,y\n0.1,0.2,1\n0.3,1\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv(path)

    def test_unparseable_field_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1,y\nzap,0.2,1\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path)

    def test_norm_violation_lists_rows(self, tmp_path):
        path = tmp_path / "big.csv"
        path.write_text("x0,x1,y\n0.1,0.2,1\n3,4,-1\n")
        with pytest.raises(DatasetError, match=r"\[3\]"):
            load_csv(path)

    def test_rescale_flag(self, tmp_path):
        path = tmp_path / "big.csv"
        path.write_text("x0,x1,y\n0.1,0.2,1\n3,4,-1\n")
        ds = load_csv(path, rescale=True)
        assert np.linalg.norm(ds.points, axis=1).max() == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(ds.points[0], [0.1 / 5, 0.2 / 5])

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0.1,0.2,1\n")
        with pytest.raises(ParseError, match="row 1"):
            load_csv(path)
