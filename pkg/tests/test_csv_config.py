"""CSV round-trips and the key = value config layer."""

import numpy as np
import pytest

from randloc.config import echo_lines, parse_file, resolve, run_name
from randloc.csvio import (
    format_value,
    read_density,
    read_table,
    read_trajectory,
    write_density,
    write_table,
    write_trajectory,
)
from randloc.errors import ConfigError
from randloc.udist import UGrid, exponential_density


def test_format_value_types():
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(np.int64(7)) == "7"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value("adopt") == "adopt"


def test_table_round_trip_is_bit_exact(tmp_path):
    rng = np.random.Generator(np.random.Philox(key=3))
    x = rng.random(64)
    y = np.exp(-37.0 * rng.random(64))  # spans many magnitudes
    path = tmp_path / "t.csv"
    write_table(path, {"x": x, "y": y}, meta={"seed": 3, "note": "probe"})
    cols, meta = read_table(path)
    assert np.array_equal(cols["x"], x)  # %.17g preserves every float64 bit
    assert np.array_equal(cols["y"], y)
    assert meta == {"seed": "3", "note": "probe"}


def test_meta_lines_are_sorted(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, {"x": np.arange(3.0)}, meta={"zeta": 1, "alpha": 2, "mid": 3})
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# alpha = 2", "# mid = 3", "# zeta = 1"]
    assert lines[3] == "x"


def test_write_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError, match="lengths differ"):
        write_table(tmp_path / "t.csv", {"a": np.arange(3.0), "b": np.arange(4.0)})


def test_read_requires_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# only = meta\n")
    with pytest.raises(ValueError, match="no header"):
        read_table(path)


def test_density_round_trip(tmp_path):
    d = exponential_density(UGrid.from_spacing(12.0, 0.05))
    path = tmp_path / "p.csv"
    write_density(path, d, meta={"kind": "exp"})
    back, meta = read_density(path)
    assert back.grid == d.grid
    assert np.array_equal(back.values, d.values)
    assert meta["kind"] == "exp"


def test_density_reader_validates_columns(tmp_path):
    path = tmp_path / "bad.csv"
    write_table(path, {"u": np.array([0.0, 1.0]), "q": np.array([1.0, 2.0])})
    with pytest.raises(ValueError, match="expected columns"):
        read_density(path)
    path2 = tmp_path / "bad2.csv"
    write_table(path2, {"u": np.array([0.0, 1.0, 3.0]), "p": np.ones(3)})
    with pytest.raises(ValueError, match="uniformly spaced"):
        read_density(path2)


def test_trajectory_round_trip(tmp_path):
    taus = np.linspace(0.0, 5.0, 11)
    g = 1.0 / (1.0 + np.exp(-taus))
    path = tmp_path / "g.csv"
    write_trajectory(path, taus, g)
    t2, g2, _ = read_trajectory(path)
    assert np.array_equal(t2, taus)
    assert np.array_equal(g2, g)
    with pytest.raises(ValueError, match="expected columns"):
        read_trajectory(path, names=("tau", "fraction"))


def test_parse_file_basics(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\n g0 = 0.01 \ntau_end=5\n")
    assert parse_file(path) == {"g0": "0.01", "tau_end": "5"}


@pytest.mark.parametrize(
    "text,msg",
    [
        ("g0 0.01\n", "key = value"),
        ("= 3\n", "empty key"),
        ("a = 1\na = 2\n", "duplicate"),
    ],
)
def test_parse_file_rejects_malformed(tmp_path, text, msg):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match=msg):
        parse_file(path)


def test_parse_file_missing_path():
    with pytest.raises(ConfigError, match="cannot read"):
        parse_file("/nonexistent/run.cfg")


def test_resolve_defaults_and_overrides(tmp_path):
    cfg = resolve("gamma")
    assert cfg["g0"] == 0.01 and cfg["method"] == "ode"
    path = tmp_path / "run.cfg"
    path.write_text("g0 = 0.5\n")
    cfg = resolve("gamma", path, {"tau_end": "7"})
    assert cfg["g0"] == 0.5
    assert cfg["tau_end"] == 7.0


def test_resolve_rejects_unknown_and_untyped():
    with pytest.raises(ConfigError, match="unknown subcommand"):
        resolve("diffuse")
    with pytest.raises(ConfigError, match="unknown config keys"):
        resolve("gamma", None, {"gee0": "0.1"})
    with pytest.raises(ConfigError, match="cannot parse"):
        resolve("gamma", None, {"g0": "fast"})
    with pytest.raises(ConfigError, match="not one of"):
        resolve("gamma", None, {"method": "euler"})


def test_resolve_tuple_kinds():
    cfg = resolve("mc-steady", None, {"seeds": "1, 2,3", "snapshot_taus": "0.5,1.5"})
    assert cfg["seeds"] == (1, 2, 3)
    assert cfg["snapshot_taus"] == (0.5, 1.5)


def test_echo_lines_sorted_and_typed():
    lines = echo_lines({"b": 0.5, "a": (1, 2), "c": "ue"})
    assert lines == ["a = 1,2", "b = 0.5", "c = ue"]


def test_run_name_stability():
    cfg1 = resolve("steady")
    cfg2 = resolve("steady", None, {"h": "0.01"})  # equals the default
    assert run_name(cfg1) == run_name(cfg2)
    assert len(run_name(cfg1)) == 12
    assert run_name(cfg1) != run_name(resolve("steady", None, {"h": "0.02"}))
    assert run_name(resolve("steady", None, {"name": "mine"})) == "mine"
