import io

import numpy as np
import pytest

from qinact import (Dataset, ModelConfig, SurvivalRecord, dump_csv,
                    load_dataset, validate)
from qinact.errors import (DimensionMismatch, EmptyDataset, MissingColumn,
                           ParseError)


def _load(text, time_col="time", status_col="status", covariate_cols=("z",)):
    return load_dataset(io.BytesIO(text.encode()), time_col, status_col,
                        covariate_cols)


class TestLoad:
    def test_two_row_csv(self):
        data = _load("time,status,z\n1.0,1,0\n2.5,0,1")
        assert data.n == 2
        assert data.p == 1
        assert data.records == (
            SurvivalRecord(1.0, 1, (0.0,)),
            SurvivalRecord(2.5, 0, (1.0,)),
        )

    def test_bad_status_reports_row_and_token(self):
        text = "time,status,z\n1,1,0\n2,0,0\n3,2,0\n"
        with pytest.raises(ParseError) as err:
            _load(text)
        assert err.value.row == 3
        assert err.value.col == "status"
        assert err.value.token == "2"

    def test_b04_shaped_csv(self):
        # continuous covariates pre-scaled by 0.01 before loading
        rows = ["time,status,node,age,size"]
        rng = np.random.default_rng(0)
        for _ in range(12):
            rows.append(
                f"{rng.uniform(1, 25):.3f},{rng.integers(0, 2)},"
                f"{rng.integers(0, 2)},{0.01 * rng.integers(25, 80):.2f},"
                f"{0.01 * rng.integers(5, 120):.2f}"
            )
        data = load_dataset(io.BytesIO("\n".join(rows).encode()), "time",
                            "status", ["node", "age", "size"])
        assert data.p == 3
        assert data.n == 12

    def test_missing_column(self):
        with pytest.raises(MissingColumn) as err:
            _load("time,status\n1,1", covariate_cols=["z"])
        assert err.value.name == "z"

    def test_empty_data(self):
        with pytest.raises(EmptyDataset):
            _load("time,status,z\n")

    def test_short_row(self):
        with pytest.raises(DimensionMismatch):
            _load("time,status,z\n1,1\n")

    def test_non_numeric_cell(self):
        with pytest.raises(ParseError) as err:
            _load("time,status,z\n1,1,x\n")
        assert err.value.col == "z"

    def test_missing_value_is_hard_error(self):
        with pytest.raises(ParseError):
            _load("time,status,z\n1,1,\n")

    def test_accepts_path(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("time,status,z\n1.0,1,0\n2.0,0,1\n")
        assert load_dataset(f, "time", "status", ["z"]).n == 2

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        times = rng.uniform(0, 20, 25)
        times[3] = 1.0 / 3.0
        times[4] = 1e-17
        status = rng.integers(0, 2, 25).astype(np.int8)
        z = rng.normal(size=(25, 2))
        data = Dataset.from_arrays(times, status, z, ("a", "b"))
        text = dump_csv(data)
        again = load_dataset(io.BytesIO(text.encode()), "time", "status",
                             ["a", "b"])
        assert again == data


class TestDataset:
    def test_record_invariants(self):
        with pytest.raises(ValueError):
            SurvivalRecord(-1.0, 1, ())
        with pytest.raises(ValueError):
            SurvivalRecord(float("nan"), 1, ())
        with pytest.raises(ValueError):
            SurvivalRecord(1.0, 2, ())
        with pytest.raises(ValueError):
            SurvivalRecord(1.0, 1, (float("inf"),))

    def test_mixed_dimension_rejected(self):
        records = [SurvivalRecord(1.0, 1, (0.0,)), SurvivalRecord(2.0, 0, ())]
        with pytest.raises(DimensionMismatch):
            Dataset(records, ["z"])

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            Dataset.from_arrays(np.ones(3), np.ones(3, dtype=int),
                                np.zeros((3, 2)), ("z", "z"))

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            Dataset([], [])

    def test_arrays_immutable(self):
        data = Dataset.from_arrays(np.ones(3), np.ones(3, dtype=int),
                                   np.zeros((3, 1)), ("z",))
        with pytest.raises(ValueError):
            data.times[0] = 2.0

    def test_truncate_censoring_clamps_only_censored(self):
        data = Dataset.from_arrays(
            np.array([1.0, 8.0, 9.0]), np.array([1, 1, 0]),
            np.zeros((3, 0)), ())
        out = data.truncate_censoring(5.0)
        assert list(out.times) == [1.0, 8.0, 5.0]
        assert list(out.status) == [1, 1, 0]


class TestValidate:
    def test_counts_events_before_t0(self):
        data = Dataset.from_arrays(np.array([1.0, 2.0, 3.0]),
                                   np.array([1, 1, 1]), np.zeros((3, 0)), ())
        report = validate(data, ModelConfig(t0=2.5, quantile=0.5))
        assert report.events_before_t0 == 2
        assert report.censoring_proportion == 0.0
        assert not report.tail_censored

    def test_all_censored_flags_insufficient(self):
        data = Dataset.from_arrays(np.array([1.0, 2.0, 3.0]),
                                   np.array([0, 0, 0]), np.zeros((3, 0)), ())
        report = validate(data, ModelConfig(t0=2.5, quantile=0.5))
        assert report.events_before_t0 == 0
        assert report.insufficient_events
        assert report.tail_censored

    def test_pure(self):
        data = Dataset.from_arrays(np.array([1.0, 2.0, 5.0]),
                                   np.array([1, 0, 1]), np.zeros((3, 0)), ())
        config = ModelConfig(t0=4.0, quantile=0.25)
        assert validate(data, config) == validate(data, config)

    def test_strict_inequality_at_t0(self):
        data = Dataset.from_arrays(np.array([2.5, 1.0, 2.0]),
                                   np.array([1, 1, 1]), np.zeros((3, 0)), ())
        report = validate(data, ModelConfig(t0=2.5, quantile=0.5))
        assert report.events_before_t0 == 2

    def test_simulated_censoring_proportion_in_band(self):
        # Monte-Carlo oracle via the simulate module at a 30% target
        from qinact.simulate import (WeibullPHSpec, calibrate_censoring_interval,
                                     generate_weibull_ph)
        spec = WeibullPHSpec(group_sizes=(200, 200))
        a, b = calibrate_censoring_interval(spec, 0.30)
        rng = np.random.default_rng(11)
        times, z = generate_weibull_ph(spec, rng)
        c = rng.uniform(a, b, spec.n)
        data = Dataset.from_arrays(np.minimum(times, c),
                                   (times <= c).astype(np.int8),
                                   z[:, None], ("group",))
        report = validate(data, ModelConfig(t0=15.0, quantile=0.5))
        assert 0.25 <= report.censoring_proportion <= 0.35


class TestModelConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(t0=-1.0, quantile=0.5),
        dict(t0=15.0, quantile=0.0),
        dict(t0=15.0, quantile=1.0),
        dict(t0=15.0, quantile=0.5, truncation_bound=-2.0),
        dict(t0=15.0, quantile=0.5, min_events=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelConfig(**kwargs)
