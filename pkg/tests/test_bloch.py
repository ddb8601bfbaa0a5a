import math
from pathlib import Path

import numpy as np
import pytest
from bloch_rates import (
    DensityMatrix,
    IntegrationError,
    LevelSystem,
    QuasiPeriodicField,
    RateMatrix,
    SolverConfig,
    conservation_diagnostics,
    evolve_sharp,
    integrate_bloch,
    sharpen,
    well_prepared_state,
    write_trajectory_csv,
)
from bloch_rates._bloch.diagnostics import coherence_norm_series, trajectory_rows
from bloch_rates._bloch.solver import bloch_rhs

from tests.conftest import scaling, three_level_pauli, two_level, unit_cosine


def test_rhs_pauli_flow_without_field():
    system = two_level(W=[[0.0, 0.0], [1.0, 0.0]])
    rho = well_prepared_state([0.0, 1.0])
    drho = bloch_rhs(system, QuasiPeriodicField.zero(), scaling(0.5), 0.0, rho)
    np.testing.assert_allclose(np.diag(drho.entries), [1.0, -1.0])


def test_rhs_coupling_creates_coherence():
    system = two_level()
    rho = well_prepared_state([1.0, 0.0])
    drho = bloch_rhs(system, unit_cosine(), scaling(0.5), 0.0, rho)
    # i eps^-1 phi(0) [V, rho] with phi(0) = 2
    expected = 1j * 2.0 / 0.5 * (system.V_matrix @ rho.entries - rho.entries @ system.V_matrix)
    np.testing.assert_allclose(drho.entries, expected)


def test_rhs_dimension_mismatch():
    with pytest.raises(ValueError):
        bloch_rhs(two_level(), unit_cosine(), scaling(0.5), 0.0, well_prepared_state([1.0, 0.0, 0.0]))


def test_free_coherence_decays_exactly():
    system = two_level(gamma=1.0).replace(V=[[0.0, 0.0], [0.0, 0.0]])
    rho0 = DensityMatrix(np.array([[0.5, 0.1], [0.1, 0.5]], dtype=complex))
    eps = 0.5
    traj = integrate_bloch(system, unit_cosine(), scaling(eps, mu=0.25), rho0, SolverConfig(T_final=0.2))
    expected = 0.1 * math.exp(-(eps ** (0.25 - 2.0)) * 0.2)
    assert abs(traj.final.entries[0, 1]) == pytest.approx(expected, rel=1e-10)
    np.testing.assert_allclose(traj.populations()[-1], [0.5, 0.5])


def test_pauli_only_populations_follow_rate_equation():
    system = three_level_pauli()
    rho0 = well_prepared_state([1.0, 0.0, 0.0])
    traj = integrate_bloch(system, unit_cosine(), scaling(0.5), rho0, SolverConfig(T_final=1.0))
    expected = evolve_sharp(sharpen(RateMatrix(system.W_matrix)), [1.0, 0.0, 0.0], 1.0)
    np.testing.assert_allclose(traj.populations()[-1], expected, atol=1e-8)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(1.0)


def test_two_level_conservation():
    rho0 = well_prepared_state([1.0, 0.0])
    traj = integrate_bloch(
        two_level(), unit_cosine(), scaling(0.3), rho0, SolverConfig(T_final=0.5)
    )
    report = conservation_diagnostics(traj)
    assert report.passed(1e-8)
    assert report.trace_drift < 1e-10
    assert np.all(traj.coherence_l1 >= -1e-14)
    # population moves towards level 2 under the resonant field
    assert traj.populations()[-1, 1] > 0.0


def test_snapshot_stride():
    rho0 = well_prepared_state([1.0, 0.0])
    cfg = SolverConfig(T_final=0.105, h0=0.1, snapshot_stride=5)
    traj = integrate_bloch(two_level(), unit_cosine(), scaling(0.5), rho0, cfg)
    # h = 0.1 * 0.25 / 3 gives 13 steps: snapshots at 0, 5, 10 and 13
    assert len(traj) == 4
    assert np.all(np.diff(traj.times) > 0)


def test_max_steps_is_enforced():
    rho0 = well_prepared_state([1.0, 0.0])
    with pytest.raises(IntegrationError):
        integrate_bloch(
            two_level(), unit_cosine(), scaling(0.1), rho0, SolverConfig(T_final=1.0, max_steps=10)
        )


def test_trajectory_rows_and_csv(tmp_path: Path):
    rho0 = well_prepared_state([1.0, 0.0])
    traj = integrate_bloch(
        two_level(), unit_cosine(), scaling(0.5), rho0, SolverConfig(T_final=0.05)
    )
    header, rows = trajectory_rows(traj)
    assert header == ["t", "rho_1", "rho_2", "coherence_l1", "trace", "herm_residual"]
    assert len(rows) == len(traj)
    series = coherence_norm_series(traj)
    assert series[0] == (0.0, 0.0)
    target = write_trajectory_csv(traj, tmp_path / "traj.csv")
    lines = target.read_text().splitlines()
    assert lines[0] == ",".join(header)
    assert len(lines) == len(traj) + 1


def random_system(rng: np.random.Generator, N: int) -> LevelSystem:
    omega = np.sort(rng.uniform(0.0, 3.0, size=N))
    gamma = np.triu(rng.uniform(1.0, 2.0, size=(N, N)), k=1)
    V = np.triu(rng.uniform(-1.0, 1.0, size=(N, N)), k=1)
    W = rng.uniform(0.0, 0.3, size=(N, N)) * (1.0 - np.eye(N))
    return LevelSystem.from_arrays(omega=omega, gamma=gamma + gamma.T, V=V + V.T, W=W)


def test_conservation_on_random_systems(rng: np.random.Generator):
    for _ in range(20):
        N = int(rng.integers(2, 5))
        system = random_system(rng, N)
        rho0 = well_prepared_state(rng.dirichlet(np.full(N, 2.0)))
        traj = integrate_bloch(
            system, unit_cosine(), scaling(0.5, mu=0.25), rho0, SolverConfig(T_final=1.0)
        )
        report = conservation_diagnostics(traj)
        assert report.passed(1e-8), report
        assert traj.times[-1] == pytest.approx(1.0)


def test_step_halving_shows_fourth_order():
    rho0 = well_prepared_state([1.0, 0.0])
    s = scaling(0.5, mu=0.25)

    def final(h0: float) -> np.ndarray:
        cfg = SolverConfig(T_final=0.49, h0=h0)
        return integrate_bloch(two_level(), unit_cosine(), s, rho0, cfg).final.entries

    reference = final(0.05)
    coarse = np.max(np.abs(final(0.4) - reference))
    fine = np.max(np.abs(final(0.2) - reference))
    assert coarse > 0
    assert coarse / fine >= 10.0
