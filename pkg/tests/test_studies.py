import json
import math
from pathlib import Path
from typing import Any

import pytest
import yaml
from bloch_rates import StudyError, config_from_dict, load_config
from bloch_rates._studies.fit import at_least, fallback_passes, fit_loglog, within_band
from bloch_rates._studies.run import run_study
from bloch_rates._util.pydantic_util import model_dump
from pydantic import ValidationError

from tests.conftest import two_level_config


def three_level_pauli_config(**sections: Any) -> dict[str, Any]:
    e = math.exp(-1.0)
    data: dict[str, Any] = {
        "system": {
            "omega": [0.0, 1.0, 2.0],
            "gamma": [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
            "V": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
            "W": [[0.0, e, 0.0], [1.0, 0.0, e], [0.0, 1.0, 0.0]],
            "temperature": 1.0,
        },
        "field": {
            "freq": [1.0],
            "modes": [{"alpha": [1], "value": 1.0}, {"alpha": [-1], "value": 1.0}],
        },
        "scaling": {"eps": [0.4, 0.2, 0.1], "mu": 0.0},
    }
    data.update(sections)
    return data


def test_rates_study():
    cfg = config_from_dict(two_level_config(scaling={"eps": [0.4, 0.2, 0.1], "mu": 0.25}))
    output = run_study(cfg, "rates")
    result = output.result
    assert result.passed
    assert result.study == "rates"
    assert len(result.table) == 6
    row = next(r for r in result.table if r["eps"] == 0.1 and r["k"] == 2 and r["n"] == 1)
    assert row["dominant"] == pytest.approx(2.0 * 0.1**-0.25)
    assert row["A"] == pytest.approx(2.0)
    cell = result.details["cells"][0]
    assert cell["resonances"] == {"1,2": [[1]], "2,1": [[-1]]}
    assert cell["regime"]["row"] == "0 <= mu/p < 1"


def test_rates_study_is_deterministic():
    cfg = config_from_dict(two_level_config(scaling={"eps": [0.4, 0.2, 0.1], "mu": 0.25}))
    first = model_dump(run_study(cfg, "rates").result)
    second = model_dump(run_study(cfg, "rates").result)
    assert first == second
    assert "bloch_rates" in first["metadata"]


def test_simulate_bloch_writes_artifacts(tmp_path: Path):
    cfg = config_from_dict(two_level_config(solver={"T_final": 0.2}))
    output = run_study(cfg, "simulate-bloch", tmp_path)
    assert output.passed
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["study"] == "simulate-bloch"
    assert result["checks"] == {"conservation": True}
    assert result["config"]["experiment"] == "simulate-bloch"
    series = (tmp_path / "series.csv").read_text().splitlines()
    assert series[0].startswith("eps,snapshots,max_coherence_l1")
    assert len(series) == 4
    trajectory = (tmp_path / "trajectory_eps_0.4.csv").read_text().splitlines()
    assert trajectory[0] == "t,rho_1,rho_2,coherence_l1,trace,herm_residual"
    written = yaml.safe_load((tmp_path / "config.yaml").read_text())
    assert written["experiment"] == "simulate-bloch"
    assert written["scaling"]["eps"] == [0.4, 0.2, 0.1]


def test_simulate_rate_on_family():
    cfg = config_from_dict(
        {
            "family": {"rule": {"energies": "rydberg"}, "N": 4},
            "field": {
                "freq": [0.75],
                "modes": [{"alpha": [1], "value": 1.0}, {"alpha": [-1], "value": 1.0}],
            },
            "scaling": {"eps": [0.2, 0.1], "mu": 0.25},
            "simulate": {"rate": "dominant", "T": 1.0, "steps": 50},
        }
    )
    output = run_study(cfg, "simulate-rate")
    assert output.passed
    assert output.result.channel == "dominant"
    assert set(output.result.checks) == {"conservation", "positivity"}
    table = output.tables["trajectory_eps_0.1"]
    assert table.header == ["t", "rho_1", "rho_2", "rho_3", "rho_4"]
    assert len(table.rows) == 51
    # levels 3 and 4 are not resonant and never move
    assert table.rows[-1][3] == pytest.approx(table.rows[0][3])


def test_simulate_rate_limit_system():
    cfg = config_from_dict(
        two_level_config(
            scaling={"eps": [0.2, 0.1], "mu": 0.25},
            simulate={"rate": "limit", "T": 1.0, "steps": 50},
        )
    )
    output = run_study(cfg, "simulate-rate")
    assert output.result.checks == {}
    assert output.passed
    assert all(row["gap"] == pytest.approx(4.0) for row in output.result.table)


def test_equilibrium_study_reaches_gibbs_state():
    cfg = config_from_dict(
        three_level_pauli_config(equilibrium={"rate": "W", "T": 200.0, "steps": 200})
    )
    output = run_study(cfg, "equilibrium")
    assert output.passed
    assert "gibbs" in output.result.checks
    assert output.tables["trajectory"].header == ["t", "rho_1", "rho_2", "rho_3"]


def test_equilibrium_study_without_temperature():
    cfg = config_from_dict(
        two_level_config(
            scaling={"eps": [0.2, 0.1], "mu": 0.25},
            equilibrium={"T": 50.0, "steps": 100},
        )
    )
    output = run_study(cfg, "equilibrium")
    assert output.passed
    assert "gibbs" not in output.result.checks
    assert output.result.notes
    for row in output.result.table:
        assert row["endpoint_distance"] < 1e-6
        assert row["uniform_spread"] < 1e-12


def test_equilibrium_study_follows_limit_system():
    # levels 1-2 form one kernel block; W moves mass between it and level 3
    cfg = config_from_dict(
        {
            "system": {
                "omega": [0.0, 1.0, 5.0],
                "gamma": [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
                "V": [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
                "W": [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.25, 0.0]],
            },
            "field": two_level_config()["field"],
            "scaling": {"eps": [0.2, 0.1], "mu": 0.25},
            "initial": {"populations": [1.0, 0.0, 0.0]},
            "equilibrium": {"T": 60.0, "steps": 60},
        }
    )
    output = run_study(cfg, "equilibrium")
    assert output.passed, output.result.checks
    assert output.result.channel == "limit"
    assert any("kernel blocks span several levels" in note for note in output.result.notes)
    for row in output.result.table:
        assert row["kernel_blocks"] == 2
        assert row["endpoint_distance"] < 1e-8
    final = output.tables["trajectory"].rows[-1][1:]
    assert final == pytest.approx([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], abs=1e-8)

    # W alone never reaches level 1
    plain = run_study(cfg.model_copy(update={"equilibrium": cfg.equilibrium.model_copy(update={"rate": "W"})}), "equilibrium")
    assert plain.passed
    assert plain.tables["trajectory"].rows[-1][1] == pytest.approx(1.0)


def test_timelayer_study():
    cfg = config_from_dict(
        two_level_config(
            scaling={"eps": [0.4, 0.2, 0.1], "mu": 0.25},
            timelayer={"T": 2.0, "steps": 1000},
        )
    )
    output = run_study(cfg, "timelayer")
    result = output.result
    assert result.passed
    assert result.fit is not None
    assert result.fit.slope == pytest.approx(-0.25, abs=1e-4)
    assert result.expected == pytest.approx(-0.25)
    assert any("plateau slope not checked" in note for note in result.notes)
    norms = output.tables["norms"]
    assert norms.header == ["eps", "t", "norm"]
    assert len(norms.rows) == 3 * 1001
    assert [row["T"] for row in result.table] == [2.0, 2.0, 2.0]


TWO_PAIR_CONFIG = Path(__file__).parent.parent / "configs" / "two_pair_timelayer.yaml"


@pytest.mark.parametrize(
    "mu,p,row,sigma",
    [
        (0.2, 0.4, "0 <= mu/p < 1", 0.2),
        (0.3, 0.3, "mu/p = 1", 0.3),
        (0.45, 0.3, "1 < mu/p < 2", 0.15),
        (0.3, 0.1, "2 <= mu/p", 0.3),
    ],
)
def test_timelayer_study_on_every_regime_row(mu: float, p: float, row: str, sigma: float):
    data = yaml.safe_load(TWO_PAIR_CONFIG.read_text())
    data["scaling"].update(mu=mu, p=p)
    output = run_study(config_from_dict(data), "timelayer")
    result = output.result
    assert result.checks, result.notes
    assert all(result.checks.values()), result.checks
    assert result.notes[0] == f"regime row: {row}"
    assert result.fit is not None
    assert result.fit.slope == pytest.approx(-sigma, abs=0.2)
    assert "plateau_slope" in result.checks
    for cell in result.table:
        assert 1.0 <= cell["rate_ratio"] <= 3.0


def test_average_oracle_study():
    cfg = config_from_dict(
        two_level_config(
            scaling={"eps": [0.2], "mu": 0.0},
            average_oracle={"S_grid": [100.0, 200.0, 400.0]},
        )
    )
    output = run_study(cfg, "average-oracle")
    rows = output.result.table
    assert len(rows) == 3
    for row in rows:
        assert (row["S"] / (2 * math.pi)) == pytest.approx(round(row["S"] / (2 * math.pi)))
    residuals = [row["residual"] for row in rows]
    assert residuals[0] > residuals[1] > residuals[2]


def test_average_oracle_residual_falls_like_inverse_window():
    cfg = config_from_dict(two_level_config(scaling={"eps": [0.2, 0.1], "mu": 0.0}))
    result = run_study(cfg, "average-oracle").result
    assert result.passed, result.checks
    assert result.checks["slope_eps=0.2"] and result.checks["slope_eps=0.1"]
    assert result.fit is not None
    assert result.fit.slope == pytest.approx(-1.0, abs=0.3)
    assert [row["S"] for row in result.table][-1] > 1900.0


def test_convergence_study_structure():
    cfg = config_from_dict(two_level_config(solver={"T_final": 0.2}))
    output = run_study(cfg, "converge")
    result = output.result
    assert result.channel == "coherence"
    assert result.expected == pytest.approx(1.0)
    assert result.tolerance == pytest.approx(0.15)
    assert len(result.table) == 3
    assert all(row["error"] > 0 for row in result.table)
    assert result.checks["conservation"]


def test_convergence_study_needs_three_points():
    cfg = config_from_dict(two_level_config(scaling={"eps": [0.2, 0.1], "mu": 0.0}))
    with pytest.raises(StudyError):
        run_study(cfg, "converge")


def test_dioph_suite():
    cfg = config_from_dict(
        two_level_config(
            dioph_suite={
                "genericity": {"n_samples": 500, "c_grid": [1e-2, 1e-1], "B_max": 3}
            }
        )
    )
    output = run_study(cfg, "dioph")
    result = output.result
    assert "mu = 0: no perturbed scan" in result.notes
    assert "genericity_monotone" in result.checks
    assert result.checks["speed"]
    genericity = output.tables["genericity"]
    assert len(genericity.rows) == 2
    again = run_study(cfg, "dioph")
    assert again.tables["genericity"] == genericity


def test_dioph_suite_perturbed_scan():
    cfg = config_from_dict(
        two_level_config(
            system={
                "omega": [0.0, 1.0],
                "delta": [0.0, 1.0],
                "gamma": [[0.0, 1.0], [1.0, 0.0]],
                "V": [[0.0, 1.0], [1.0, 0.0]],
            },
            scaling={"eps": [1.0, 0.5, 0.1], "mu": 0.25},
            dioph_suite={"genericity": None},
        )
    )
    output = run_study(cfg, "dioph")
    rows = output.result.table
    assert [row["eps"] for row in rows] == [1.0, 0.5, 0.1]
    assert rows[0]["violations"] > 0
    assert rows[-1]["violations"] == 0
    assert output.result.checks["violations_shrink"]
    assert output.result.checks["empty_below_threshold"]
    assert "genericity" not in output.tables


def test_run_study_without_selection():
    cfg = config_from_dict(two_level_config())
    with pytest.raises(StudyError):
        run_study(cfg)


def test_experiment_config_validation():
    with pytest.raises(ValidationError):
        config_from_dict(two_level_config(family={"N": 3}))
    with pytest.raises(ValidationError):
        config_from_dict(two_level_config(scaling={"eps": [0.1, 0.2], "mu": 0.0}))
    with pytest.raises(ValidationError):
        config_from_dict(two_level_config(scaling={"eps": [0.1], "mu": 0.5}))
    with pytest.raises(ValidationError):
        config_from_dict(two_level_config(initial={"populations": [1.0]}))


def test_initial_populations_default_to_level_one():
    cfg = config_from_dict(two_level_config())
    assert cfg.initial_populations().values.tolist() == [1.0, 0.0]


def test_fit_loglog_recovers_power():
    fit = fit_loglog([1.0, 0.1, 0.01], [2.0, 0.2, 0.02])
    assert fit.slope == pytest.approx(1.0)
    assert fit.points == 3
    with pytest.raises(StudyError):
        fit_loglog([1.0, 0.1], [1.0, 0.1])
    with pytest.raises(StudyError):
        fit_loglog([1.0, 0.1, 0.01], [1.0, 0.0, 0.1])


def test_fallback_criterion():
    eps = [0.4, 0.2, 0.1]
    assert fallback_passes(eps, [0.4, 0.2, 0.1], 1.0)
    assert not fallback_passes(eps, [0.4, 0.3, 0.35], 1.0)
    # endpoint exponent 2 lies outside [0.5, 1.5]
    assert not fallback_passes(eps, [0.16, 0.04, 0.01], 1.0)
    assert fallback_passes(eps, [0.16, 0.04, 0.01], 1.0, bound_only=True)
    assert not fallback_passes(eps, [0.4, 0.35, 0.3], 1.0, bound_only=True)


def test_order_at_least_criterion():
    fit = fit_loglog([0.4, 0.2, 0.1], [0.16, 0.04, 0.01])
    assert at_least(fit, 0.5, 0.2)
    assert not within_band(fit, 0.5, 0.2)
    assert not at_least(fit, 2.5, 0.2)
    assert not at_least(None, 0.5, 0.2)


CONFIG_DIR = Path(__file__).parent.parent / "configs"


@pytest.mark.slow
@pytest.mark.parametrize("mu", [0.0, 0.25])
def test_coherence_order_is_two_sided(mu: float):
    data = yaml.safe_load((CONFIG_DIR / "two_level.yaml").read_text())
    data["scaling"]["mu"] = mu
    result = run_study(config_from_dict(data), "converge").result
    assert result.checks == {"exponent": True, "conservation": True}
    assert result.fit is not None
    assert result.fit.slope == pytest.approx(1.0 - mu, abs=0.15)
    assert not any("fallback" in note for note in result.notes)


@pytest.mark.slow
def test_dominant_rate_error_on_leaking_level():
    result = run_study(load_config(CONFIG_DIR / "three_level_leak.yaml"), "converge").result
    assert result.passed, result.notes
    assert result.expected == pytest.approx(1.0 / 3.0)
    assert result.fit is not None
    assert result.fit.slope == pytest.approx(1.0 / 3.0, abs=0.2)


@pytest.mark.slow
def test_averaged_rate_error_order_at_least_bound():
    cfg = config_from_dict(
        two_level_config(
            scaling={"eps": [0.2, 0.1, 0.05, 0.025], "mu": 0.25},
            converge={"channel": "d_vs_rhod1"},
        )
    )
    result = run_study(cfg, "converge").result
    assert result.passed, result.notes
    assert result.expected == pytest.approx(0.5)
    assert result.fit is not None
    assert result.fit.slope >= 0.3
    assert any("order at least" in note for note in result.notes)
