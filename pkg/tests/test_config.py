import math
import textwrap
from pathlib import Path

import pytest

from dfsion.config import ConfigError, load_config, parse_config


def cfg(text):
    return parse_config(textwrap.dedent(text), "test.yaml")


def test_defaults_and_empty_document():
    c = parse_config("")
    assert c.scenario == "cnot-demo" and c.profile.name == "paper"
    assert c.initial.amplitudes == {"0101": 1.0}


def test_full_document():
    c = cfg("""
        scenario: exchange
        profile: paper-square
        profile_overrides:
          eta: 0.02
          mode_signs: [1, 1, -1, -1]
        fock_dim: 6
        initial:
          labels: {"10": 1, "01": [0, 1]}
          thermal_nbar: 0.5
        track: ["10", "01"]
        wrappers: ideal
        model: effective
        seed: 7
        noise:
          addressing_error: 0.05
          dephasing: {distribution: gaussian, width: 0.2, scope: pair}
        output: {dir: results, prefix: run1}
        integrator: {substeps_per_mode_period: 12, scheme: cf4}
        sweep: {axis: eta, values: [0.01, 0.02]}
    """)
    assert c.profile.ramp_time == 0 and c.profile.eta == 0.02 and c.profile.fock_dim == 6
    assert c.profile.mode_signs == (1, 1, -1, -1)
    assert c.initial.amplitudes == {"10": 1.0, "01": 1j}
    assert c.initial.thermal_nbar == 0.5
    assert c.track == ["10", "01"] and c.wrappers == "ideal" and c.model == "effective"
    assert c.dephasing == {"distribution": "gaussian", "width": 0.2, "scope": "pair"}
    assert c.addressing_error == 0.05 and c.substeps == 12 and c.scheme == "cf4"
    assert str(c.out_dir) == "results" and c.prefix == "run1"
    assert c.sweep_axis == "eta" and c.sweep_values == [0.01, 0.02]


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario: cnot-demo\nbogus: 1\n", 2, "unknown key"),
    ("scenario: teleport\n", 1, "scenario must be one of"),
    ("profile_overrides:\n  eta: -0.1\n", 2, "eta"),
    ("profile_overrides:\n  rabi: fast\n", 2, "rabi must be float"),
    ("initial:\n  labels: {\"0102\": 1}\n", 2, "invalid qubit label"),
    ("initial:\n  labels: 0101\n", 2, "must be quoted"),
    ("initial: {labels: \"01\", fock: -1}\n", 1, "fock"),
    ("noise:\n  dephasing: {distribution: uniform}\n", 2, "seed is required"),
    ("noise:\n  addressing_error: 0.5\n", 2, "addressing_error"),
    ("integrator:\n  scheme: rk4\n", 2, "integrator.scheme"),
    ("fock_dim: 0\n", 1, "fock_dim"),
    ("schedule: missing.json\n", 1, "does not exist"),
    ("scenario: [unclosed\n", 2, "invalid YAML"),
    ("- a\n- b\n", 1, "mapping"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "bad.yaml")
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"bad.yaml:{line}:")


def test_fixed_dephasing_needs_no_seed():
    c = cfg(f"""
        scenario: dfs-memory
        noise:
          dephasing: {{distribution: fixed, width: {math.pi}}}
    """)
    assert c.seed is None and c.dephasing["distribution"] == "fixed"


def test_load_config_resolves_schedule_relative_to_file(tmp_path):
    (tmp_path / "s.json").write_text("{}", encoding="utf-8")
    p = tmp_path / "c.yaml"
    p.write_text("schedule: s.json\n", encoding="utf-8")
    assert load_config(p).schedule_path == tmp_path / "s.json"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.yaml")),
                         ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    c = load_config(path)
    assert c.source == str(path)
