"""CSV and JSON round trips for emission records.

The CSV writer emits 17 significant digits, so a write/read cycle must
reproduce every float bit for bit. That exactness is what lets the CLI
determinism checks compare whole files bytewise.
"""

from __future__ import annotations

import numpy as np
import pytest

from superburst.records import EmissionRecord, read_csv, read_json, write_json


def _full_record(rng, n=37):
    t = np.linspace(0.0, 5.0, n)
    mk = lambda: rng.uniform(0.0, 3.0, n)
    return EmissionRecord(
        times=t,
        channel_rates={"f": mk(), "g": mk(), "h": mk()},
        directional={"x": mk(), "y": mk()},
        populations={"e": mk(), "f": mk()},
        stderr={"R_total": mk(), "R_dir_x": mk()},
        meta={"solver": "test"},
    )


def test_csv_round_trip_is_bit_exact(tmp_path):
    rec = _full_record(np.random.default_rng(5))
    path = tmp_path / "rec.csv"
    rec.write_csv(path)
    back = read_csv(path)
    assert np.array_equal(back.times, rec.times)
    for label in rec.channel_rates:
        assert np.array_equal(back.channel_rates[label], rec.channel_rates[label])
    for label in rec.directional:
        assert np.array_equal(back.directional[label], rec.directional[label])
    for label in rec.populations:
        assert np.array_equal(back.populations[label], rec.populations[label])
    for key in rec.stderr:
        assert np.array_equal(back.stderr[key], rec.stderr[key])
    assert np.array_equal(back.total_rate, rec.total_rate)


def test_csv_header_layout(tmp_path):
    """stderr twins sit immediately after the column they describe."""
    rec = _full_record(np.random.default_rng(6))
    path = tmp_path / "rec.csv"
    rec.write_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header == [
        "t_gamma0", "R_total", "R_total_stderr", "R_f", "R_g", "R_h",
        "R_dir_x", "R_dir_x_stderr", "R_dir_y", "pop_e", "pop_f",
    ]


def test_csv_round_trip_minimal_record(tmp_path):
    t = np.linspace(0.0, 2.0, 9)
    rec = EmissionRecord(times=t, channel_rates={"g": np.exp(-t)})
    path = tmp_path / "min.csv"
    rec.write_csv(path)
    back = read_csv(path)
    assert back.channels == ("g",)
    assert back.directional == {} and back.populations == {} and back.stderr == {}
    assert np.array_equal(back.channel_rates["g"], np.exp(-t))


def test_total_rate_sums_channels():
    t = np.linspace(0.0, 1.0, 4)
    rec = EmissionRecord(times=t,
                         channel_rates={"f": 2.0 * t, "g": 1.0 - t})
    assert np.array_equal(rec.total_rate, 2.0 * t + (1.0 - t))


def test_record_validates_column_shapes():
    t = np.linspace(0.0, 1.0, 8)
    with pytest.raises(ValueError, match="'f'"):
        EmissionRecord(times=t, channel_rates={"f": np.zeros(7)})
    with pytest.raises(ValueError, match="1-d"):
        EmissionRecord(times=t.reshape(2, 4), channel_rates={"f": np.zeros(8)})
    with pytest.raises(ValueError, match="1-d"):
        EmissionRecord(times=np.empty(0), channel_rates={})


def test_json_round_trip_converts_numpy_types(tmp_path):
    path = tmp_path / "summary.json"
    obj = {
        "peak": np.float64(3.25),
        "n_atoms": np.int64(49),
        "shares": {"f": 0.7, "g": np.float32(0.2)},
        "grid": np.array([0.0, 0.5, 1.0]),
    }
    write_json(obj, path)
    back = read_json(path)
    assert back["peak"] == 3.25
    assert back["n_atoms"] == 49
    assert back["grid"] == [0.0, 0.5, 1.0]
    assert back["shares"]["g"] == pytest.approx(0.2, rel=1e-6)
    # keys are sorted so reruns produce identical bytes
    text = path.read_text()
    assert text.index('"grid"') < text.index('"n_atoms"') < text.index('"peak"')


def test_json_rejects_unknown_types(tmp_path):
    with pytest.raises(TypeError, match="not JSON serializable"):
        write_json({"bad": {1, 2}}, tmp_path / "bad.json")
