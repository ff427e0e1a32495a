import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratdr.datagen import DataGenConfig, gen_dataset
from stratdr.domain import Dataset, EstimateReport, read_dataset, validate_dataset, write_dataset


@pytest.fixture(scope="module")
def ds():
    return gen_dataset(DataGenConfig.default(200, 3, alpha=0.5, seed=11))


def test_valid_dataset_has_no_violations(ds):
    assert validate_dataset(ds) == []


def test_all_treated_is_flagged():
    bad = Dataset(y=np.zeros(4), t=np.ones(4), x=np.zeros((4, 2)))
    assert "t: no control units" in validate_dataset(bad)


def test_nan_outcome_names_field_and_index(ds):
    y = ds.y.copy()
    y[3] = np.nan
    v = validate_dataset(Dataset(y=y, t=ds.t, x=ds.x))
    assert any(msg.startswith("y:") and "index 3" in msg for msg in v)


_BAD = {
    "y": [np.nan, np.inf, -np.inf],
    "x": [np.nan, np.inf, -np.inf],
    "t": [np.nan, 0.5, 2.0, -1.0],
    "oracle": [0.5, 1.0, 1e3],
}


@settings(max_examples=60, deadline=None)
@given(data=st.data(), index=st.integers(0, 199))
def test_single_corruption_is_detected(ds, data, index):
    field = data.draw(st.sampled_from(sorted(_BAD)))
    value = data.draw(st.sampled_from(_BAD[field]))
    y, t, x = ds.y.copy(), ds.t.copy(), ds.x.copy()
    if field == "y":
        y[index] = value
    elif field == "t":
        t[index] = value
    elif field == "x":
        x[index, index % x.shape[1]] = value
    else:
        # observed outcome no longer matches the potential outcomes
        y[index] += value
    assert validate_dataset(Dataset(y=y, t=t, x=x, oracle=ds.oracle)) != []


def test_lengths_checked():
    bad = Dataset(y=np.zeros(3), t=np.array([0, 1]), x=np.zeros((3, 1)))
    assert any(msg.startswith("t: length") for msg in validate_dataset(bad))


def test_csv_roundtrip_bit_exact(ds, tmp_path):
    p = tmp_path / "d.csv"
    write_dataset(ds, p)
    back = read_dataset(p)
    assert back.y.tobytes() == ds.y.tobytes()
    assert back.x.tobytes() == ds.x.tobytes()
    assert np.array_equal(back.t, ds.t)
    assert back.oracle.y1.tobytes() == ds.oracle.y1.tobytes()
    assert back.oracle.s_true.s.tobytes() == ds.oracle.s_true.s.tobytes()
    assert back.oracle.params.to_dict() == ds.oracle.params.to_dict()
    assert p.read_text().splitlines()[0] == "y,t,x1,x2,x3"


def test_observed_projection_drops_oracle(ds):
    ob = ds.observed
    assert not hasattr(ob, "oracle")
    assert ob.n == ds.n and ob.d == ds.d


def test_types_are_immutable(ds):
    with pytest.raises(ValueError):
        ds.y[0] = 1.0


def test_report_json_fields():
    r = EstimateReport(1.0, 0.1, 0.8, 1.2, np.array([1.0, 1.0]), 3, True, "SDR")
    assert set(r.to_dict()) >= {"method", "tau_hat", "std_error", "ci_low", "ci_high",
                                "iterations", "converged"}
