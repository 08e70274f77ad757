import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mstdoa.errors import ConfigurationError, ScenarioFileError
from mstdoa.scenario_io import (
    load_preset,
    load_scenario,
    parse_scenario,
    read_snapshots,
    scenario_to_dict,
    write_snapshots,
)
from mstdoa.synthesis import SourceKind, generate_snapshots, reference_scenario

GOOD = """\
array:
  num_sensors: 5
  spacing_wavelengths: 0.5
noise:
  snr_db: 20
sources:
  - kind: SST
    theta: 20
    phi: 20
    pols: [[50, 10]]
  - kind: DST
    theta: 60
    phi: 60
    pols: [[20, 50], [70, -40]]
"""


def test_parse_matches_builtin():
    sc, sweep = parse_scenario(GOOD)
    ref = reference_scenario(20)
    assert sweep == {}
    assert sc.sources == ref.sources and sc.geometry == ref.geometry
    assert sc.noise_power == pytest.approx(ref.noise_power)


def test_preset():
    sc, sweep = load_preset("paper-fig23")
    assert [s.kind for s in sc.sources] == [SourceKind.SST, SourceKind.DST]
    assert sweep == {"snr_db": [0, 5, 10, 15, 20, 25, 30], "trials": 200,
                     "snapshots": 100, "grid_step": 0.1, "seed": 0}
    with pytest.raises(ConfigurationError):
        load_preset("nope")


def test_power_db_and_noise_power():
    text = GOOD.replace("snr_db: 20", "power_db: -10").replace("pols: [[50, 10]]",
                                                               "pols: [[50, 10]]\n    power_db: 3")
    sc, _ = parse_scenario(text)
    assert sc.noise_power == pytest.approx(0.1)
    assert sc.sources[0].power == pytest.approx(10 ** 0.3)


@pytest.mark.parametrize("old,new,field,line", [
    ("theta: 60", "theta: sixty", "sources[1].theta", 12),
    ("theta: 20", "theta: 95", "sources[0].theta", 8),
    ("kind: DST", "kind: TST", "sources[1].kind", 11),
    ("pols: [[20, 50], [70, -40]]", "pols: [[20, 50]]", "sources[1].pols", 14),
    ("pols: [[50, 10]]", "pols: [[50]]", "sources[0].pols[0]", 10),
    ("num_sensors: 5", "num_sensors: 2.5", "array.num_sensors", 2),
    ("num_sensors: 5", "num_sensors: 0", "array", 1),
])
def test_malformed_field_reports_location(old, new, field, line):
    with pytest.raises(ScenarioFileError) as exc:
        parse_scenario(GOOD.replace(old, new))
    assert exc.value.field == field
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_missing_field():
    with pytest.raises(ScenarioFileError) as exc:
        parse_scenario(GOOD.replace("    phi: 20\n", ""))
    assert exc.value.field == "sources[0].phi"
    assert exc.value.line == 7


def test_invalid_yaml():
    with pytest.raises(ScenarioFileError) as exc:
        parse_scenario("array: [unclosed\n")
    assert exc.value.line is not None


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioFileError):
        load_scenario(tmp_path / "missing.yaml")


def test_dict_roundtrip(tmp_path):
    import yaml
    sc = reference_scenario(20)
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(scenario_to_dict(sc)))
    back, _ = load_scenario(path)
    assert back.sources == sc.sources
    assert back.noise_power == pytest.approx(sc.noise_power)


@pytest.mark.parametrize("suffix", [".csv", ".bin"])
def test_snapshot_roundtrip(tmp_path, suffix):
    y = generate_snapshots(reference_scenario(20), 37, 9)
    path = tmp_path / f"y{suffix}"
    write_snapshots(path, y)
    np.testing.assert_array_equal(read_snapshots(path), y)


complex_arrays = arrays(np.complex128, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                        elements=st.complex_numbers(max_magnitude=1e300, allow_nan=False,
                                                    allow_infinity=False))


@settings(max_examples=40, deadline=None)
@given(complex_arrays)
def test_csv_roundtrip_exact(tmp_path_factory, y):
    path = tmp_path_factory.mktemp("rt") / "y.csv"
    write_snapshots(path, y)
    np.testing.assert_array_equal(read_snapshots(path), y)


def test_bad_snapshot_files(tmp_path):
    with pytest.raises(ConfigurationError):
        write_snapshots(tmp_path / "y.txt", np.zeros((2, 2)))
    (tmp_path / "bad.bin").write_bytes(b"garbage")
    with pytest.raises(ConfigurationError):
        read_snapshots(tmp_path / "bad.bin")
    (tmp_path / "bad.csv").write_text("1,2,3\n")
    with pytest.raises(ConfigurationError):
        read_snapshots(tmp_path / "bad.csv")
