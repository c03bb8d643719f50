import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from leosec.config import (
    ConfigError,
    ExperimentConfig,
    dbm_to_watt,
    parse_config,
    sweep_values,
    watt_to_dbm,
)


def test_empty_is_default():
    assert parse_config("") == ExperimentConfig()
    assert parse_config("# only a comment\n\n") == ExperimentConfig()


def test_defaults_cover_reference_setup():
    cfg = ExperimentConfig()
    assert cfg.radio.frequency == 12e9
    assert cfg.constellation.altitude == 550e3
    assert cfg.constellation.earth_radius == 6371e3
    assert cfg.constellation.inclination == pytest.approx(math.radians(50))
    assert (cfg.array.side, cfg.array.d_min) == (3.0, 0.5)
    assert cfg.radio.p_max == pytest.approx(10.0)
    assert cfg.radio.c_min == 0.01 and cfg.radio.path_loss_exponent == 2.0
    assert cfg.solver.mu == 0.05
    assert (cfg.solver.population, cfg.solver.scale_factor, cfg.solver.crossover_rate) == (50, 0.9, 0.9)
    assert (cfg.constellation.planes, cfg.constellation.sats_per_plane, cfg.grid.slots, cfg.array.elements) == (6, 8, 8, 4)


def test_power_and_noise_conversion():
    cfg = parse_config("[radio]\npower_dbm = 40\nnoise_dbm = -148\n")
    assert cfg.radio.p_max == pytest.approx(10.0, rel=1e-12)
    assert cfg.radio.noise_power == pytest.approx(1.5848931924611e-18, rel=1e-12)


def test_unit_suffixes():
    cfg = parse_config(
        "[constellation]\naltitude = 600 km\ninclination = 0.9 rad\n"
        "[radio]\nfrequency = 20 ghz\np_max = 2 w\n"
        "[grid]\ngs_latitude = -30 deg\n"
        "[array]\nside = 4 lambda\n"
    )
    assert cfg.constellation.altitude == 600e3
    assert cfg.constellation.inclination == 0.9
    assert cfg.radio.frequency == 20e9 and cfg.radio.p_max == 2.0
    assert cfg.grid.gs_latitude == pytest.approx(-math.pi / 6)
    assert cfg.array.side == 4.0


@pytest.mark.parametrize("text,line", [
    ("[radio]\nbogus = 1\n", 2),
    ("[radio]\n\np_max = 40 km\n", 3),
    ("[array]\nelements = 0\n", 2),
    ("[array]\nelements = 2.5\n", 2),
    ("[grid]\nascending_only = maybe\n", 2),
    ("[nowhere]\n", 1),
    ("[radio]\np_max = 30\np_max = 40\n", 3),
    ("[radio]\npower_dbm = 30 w\n", 2),
    ("[grid]\ngs_latitude = 95\n", 2),
    ("p_max = 3\n", 1),
    ("[radio]\np_max 3\n", 2),
    ("[solver]\nvariants = sca, pso\n", 2),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")


def test_cross_field_checks():
    with pytest.raises(ConfigError):
        parse_config("[array]\nside = 0.4\n")
    with pytest.raises(ConfigError):
        parse_config("[solver]\ntrust_initial = 2\n")


def test_sweep_block():
    cfg = parse_config("[sweep]\nparameter = radio.power_dbm\nvalues = 30, 35, 40\n")
    assert sweep_values(cfg) == pytest.approx([1.0, dbm_to_watt(35), 10.0])
    with pytest.raises(ConfigError) as exc:
        parse_config("[sweep]\nparameter = radio.power_dbm\nvalues = 30, x\n")
    assert exc.value.line == 3
    with pytest.raises(ConfigError):
        parse_config("[sweep]\nparameter = output.directory\nvalues = a\n")


def test_with_value_validates():
    cfg = ExperimentConfig().with_value("array.elements", 9)
    assert cfg.array.elements == 9
    with pytest.raises(ConfigError):
        ExperimentConfig().with_value("array.d_min", 5.0)
    with pytest.raises(ConfigError):
        ExperimentConfig().with_value("radio.nothing", 1)


@given(st.floats(-200, 100))
def test_dbm_roundtrip(dbm):
    assert watt_to_dbm(dbm_to_watt(dbm)) == pytest.approx(dbm, abs=1e-9)
