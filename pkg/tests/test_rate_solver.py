import math

import numpy as np
import pytest
from bloch_rates import (
    KernelError,
    LevelSystem,
    NoLayerError,
    QuasiPeriodicField,
    RateMatrix,
    RegimeError,
    build_projectors,
    check_gap_bound,
    equilibrium_state,
    integrate_rate,
    integrate_rate_oscillating,
    kernel_blocks,
    limit_system,
    lumped_rate,
    psi_averaged,
    regime_classify,
    solve_layered,
    spectral_gap_c,
    thermodynamic_equilibrium,
    timelayer_analysis,
)
from bloch_rates._model.system import pauli_rates
from bloch_rates._rate_solver.integrate import integrate_generator
from bloch_rates._rate_solver.layers import full_generator, nonpolarized_norms

from tests.conftest import scaling, three_level_pauli, two_level, unit_cosine

SWAP = RateMatrix([[0.0, 1.0], [1.0, 0.0]])
ZERO2 = RateMatrix.zeros(2)
# mu/p < 1: projector onto Ker A# & Ker B0#
BELOW_ONE = regime_classify(0.25, 1.0, finite_N=True, W_zero=True)
# mu/p > 2: projector onto Ker A#
ABOVE_TWO = regime_classify(0.45, 0.2, finite_N=True, W_zero=True)


def block_pair(first: tuple[int, int], second: tuple[int, int], N: int = 4) -> tuple[RateMatrix, RateMatrix]:
    A = np.zeros((N, N))
    B = np.zeros((N, N))
    A[first] = A[first[::-1]] = 1.0
    B[second] = B[second[::-1]] = 1.0
    return RateMatrix(A), RateMatrix(B)


def random_symmetric(rng: np.random.Generator, N: int) -> RateMatrix:
    values = rng.uniform(0.1, 2.0, size=(N, N)) * (rng.uniform(size=(N, N)) < 0.5)
    table = np.triu(values, k=1)
    return RateMatrix(table + table.T)


def test_integrate_zero_rate_is_constant():
    traj = integrate_rate(ZERO2, [0.3, 0.7], 2.0, 10)
    assert len(traj) == 11
    np.testing.assert_allclose(traj.populations, np.tile([0.3, 0.7], (11, 1)))


def test_integrate_symmetric_pair_closed_form():
    traj = integrate_rate(SWAP, [1.0, 0.0], 2.0, 40)
    expected = np.stack(
        [(1 + np.exp(-2 * traj.times)) / 2, (1 - np.exp(-2 * traj.times)) / 2], axis=1
    )
    np.testing.assert_allclose(traj.populations, expected, atol=1e-12)
    assert traj.total_drift() < 1e-12
    assert traj.min_population() >= -1e-12


def test_integrate_pauli_reaches_gibbs_state():
    system = three_level_pauli()
    traj = integrate_rate(RateMatrix(system.W_matrix), [1.0, 0.0, 0.0], 200.0, 200)
    gibbs = thermodynamic_equilibrium(system.omega_vector, 1.0)
    np.testing.assert_allclose(traj.final, gibbs.values, atol=1e-10)
    assert traj.total_drift() < 1e-10


def test_integrate_converges_to_equilibrium_state_per_block(rng: np.random.Generator):
    for _ in range(5):
        A = random_symmetric(rng, 6)
        y0 = rng.uniform(size=6)
        traj = integrate_rate(A, y0, 5000.0, 200)
        np.testing.assert_allclose(traj.final, equilibrium_state(A, y0).values, atol=1e-8)


def test_integrate_validates_grid():
    with pytest.raises(ValueError):
        integrate_rate(SWAP, [1.0, 0.0], 0.0, 10)
    with pytest.raises(ValueError):
        integrate_rate(SWAP, [1.0, 0.0], 1.0, 0)
    with pytest.raises(ValueError):
        integrate_rate(SWAP, [1.0, 0.0, 0.0], 1.0, 10)


def test_oscillating_rate_tracks_averaged_rate():
    system = two_level()
    field = unit_cosine()
    s = scaling(0.05, mu=0.0)
    y0 = [1.0, 0.0]
    oscillating = integrate_rate_oscillating(system, field, s, y0, T=0.5, snapshots=50)
    averaged = integrate_rate(psi_averaged(system, field, s), y0, 0.5, 50)
    assert oscillating.total_drift() < 1e-10
    np.testing.assert_allclose(oscillating.final, averaged.final, atol=0.05)


def test_oscillating_rate_validates_arguments():
    with pytest.raises(ValueError):
        integrate_rate_oscillating(two_level(), unit_cosine(), scaling(0.1), [1.0, 0.0], 1.0, steps_per_period=2)
    with pytest.raises(ValueError):
        integrate_rate_oscillating(two_level(), unit_cosine(), scaling(0.1), [1.0], 1.0)


def test_projector_without_rates_is_identity():
    proj = build_projectors(ZERO2, ZERO2, BELOW_ONE)
    np.testing.assert_allclose(proj.kernel_projector, np.eye(2))
    assert proj.decoupled == (1, 2)
    proj = build_projectors(ZERO2, ZERO2, BELOW_ONE, W=SWAP)
    np.testing.assert_allclose(proj.Pi, np.eye(2))
    assert proj.decoupled == ()


def test_projector_onto_symmetric_pair_kernel():
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE)
    np.testing.assert_allclose(proj.Pi, [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)
    residuals = proj.residuals(SWAP, ZERO2)
    assert max(residuals.values()) < 1e-10


def test_projector_on_disjoint_blocks():
    A, B0 = block_pair((0, 1), (2, 3))
    proj = build_projectors(A, B0, BELOW_ONE)
    expected = np.zeros((4, 4))
    expected[:2, :2] = 0.5
    expected[2:, 2:] = 0.5
    np.testing.assert_allclose(proj.Pi, expected, atol=1e-12)
    assert max(proj.residuals(A, B0).values()) < 1e-10
    assert proj.uses_B0

    only_A = build_projectors(A, B0, ABOVE_TWO)
    assert np.trace(only_A.Pi) == pytest.approx(3.0)
    assert not only_A.uses_B0
    assert max(only_A.residuals(A).values()) < 1e-10


def test_projector_requires_symmetric_tables():
    lopsided = RateMatrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        build_projectors(lopsided, ZERO2, BELOW_ONE)
    with pytest.raises(ValueError):
        build_projectors(SWAP, RateMatrix.zeros(3), BELOW_ONE)


def test_projector_rank_instability():
    A = RateMatrix([[0.0, 1.0, 0.0], [1.0, 0.0, 1e-11], [0.0, 1e-11, 0.0]])
    with pytest.raises(KernelError):
        build_projectors(A, RateMatrix.zeros(3), BELOW_ONE)


def test_spectral_gap_examples():
    assert spectral_gap_c(SWAP, ZERO2, build_projectors(SWAP, ZERO2, BELOW_ONE)) == pytest.approx(2.0)
    assert spectral_gap_c(ZERO2, SWAP, build_projectors(ZERO2, SWAP, BELOW_ONE)) == pytest.approx(2.0)
    assert spectral_gap_c(ZERO2, ZERO2, build_projectors(ZERO2, ZERO2, BELOW_ONE)) == math.inf


@pytest.mark.parametrize("mu,p", [(0.25, 1.0), (0.3, 0.2)])
def test_gap_bound_on_random_pairs(rng: np.random.Generator, mu: float, p: float):
    regime = regime_classify(mu, p, finite_N=True, W_zero=True)
    for _ in range(50):
        A = random_symmetric(rng, 5)
        B0 = random_symmetric(rng, 5)
        proj = build_projectors(A, B0, regime)
        rows = check_gap_bound(A, B0, proj, mu, regime.nu, [1.0, 0.5, 0.1, 0.01])
        assert all(row.passed for row in rows)


def test_gap_bound_without_layer():
    proj = build_projectors(ZERO2, ZERO2, BELOW_ONE)
    rows = check_gap_bound(ZERO2, ZERO2, proj, 0.25, 0.25, [0.1])
    assert rows[0].passed
    assert rows[0].max_eigenvalue is None


def test_timelayer_matches_exact_gap():
    eps = 0.1
    s = scaling(eps, mu=0.25)
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE)
    traj = integrate_rate(full_generator(SWAP, ZERO2, ZERO2, s), [1.0, 0.0], 5.0, 2000)
    gap = spectral_gap_c(SWAP, ZERO2, proj)
    fit = timelayer_analysis(traj, proj, s, BELOW_ONE, gap=gap)
    assert fit.decay_detected
    assert fit.rate == pytest.approx(2.0 * eps**-0.25, rel=1e-6)
    assert fit.rate_ratio == pytest.approx(1.0, rel=1e-6)
    assert fit.points >= 3
    assert fit.layer_duration is not None and fit.layer_duration > 0


def test_timelayer_on_polarized_data():
    s = scaling(0.1, mu=0.25)
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE)
    traj = integrate_rate(full_generator(SWAP, ZERO2, ZERO2, s), [0.5, 0.5], 1.0, 100)
    assert np.max(nonpolarized_norms(traj, proj)) < 1e-12
    fit = timelayer_analysis(traj, proj, s, BELOW_ONE)
    assert not fit.decay_detected


def test_timelayer_subtracts_relaxation_floor():
    # W pushes the pair off the uniform state, so the norm settles on a floor
    eps = 0.1
    s = scaling(eps, mu=0.25)
    W = RateMatrix([[0.0, 0.4], [1.0, 0.0]])
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE, W=W)
    traj = integrate_rate(full_generator(SWAP, ZERO2, W, s), [1.0, 0.0], 5.0, 2000)
    fit = timelayer_analysis(traj, proj, s, BELOW_ONE, gap=spectral_gap_c(SWAP, ZERO2, proj))
    assert fit.plateau > 0.01
    assert fit.decay_detected
    assert fit.rate == pytest.approx(2.0 * eps**-0.25 + 1.4, rel=1e-2)
    assert fit.points > 100


def test_timelayer_without_decay():
    s = scaling(0.1, mu=0.25)
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE)
    traj = integrate_rate(full_generator(SWAP, ZERO2, ZERO2, s), [1.0, 0.0], 1e-3, 10)
    with pytest.raises(NoLayerError):
        timelayer_analysis(traj, proj, s, BELOW_ONE)


def test_limit_system_vanishes_on_symmetric_pair():
    W = RateMatrix([[0.0, 0.4], [1.0, 0.0]])
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE, W=W)
    generator = limit_system(proj, W)
    np.testing.assert_allclose(generator, np.zeros((2, 2)), atol=1e-12)
    z = integrate_generator(generator, [0.5, 0.5], 3.0, 30)
    np.testing.assert_allclose(z.populations, np.full((31, 2), 0.5), atol=1e-12)


def test_limit_system_keeps_pauli_flow_between_kernel_blocks():
    A, _ = block_pair((0, 1), (2, 3))
    W = RateMatrix(pauli_rates([0.0, 0.0, 1.0, 1.0], 1.0, [[0, 0, 1, 0], [0, 0, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]]))
    proj = build_projectors(A, RateMatrix.zeros(4), ABOVE_TWO, W=W)
    generator = limit_system(proj, W)
    P = proj.kernel_projector
    np.testing.assert_allclose(generator, P @ generator @ P, atol=1e-12)
    assert np.any(np.abs(generator) > 1e-6)
    np.testing.assert_allclose(generator.sum(axis=0), 0.0, atol=1e-12)


def test_kernel_blocks_and_lumped_rate():
    A, B0 = block_pair((0, 1), (2, 3))
    W = RateMatrix([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.25, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
    proj = build_projectors(A, B0, ABOVE_TWO, W=W)
    blocks = kernel_blocks(A, B0, proj)
    assert blocks == [[0, 1], [2], [3]]
    assert kernel_blocks(A, B0, build_projectors(A, B0, BELOW_ONE, W=W)) == [[0, 1], [2, 3]]
    lumped = lumped_rate(W, blocks)
    np.testing.assert_allclose(lumped.entries, [[0.0, 0.5, 0.0], [0.25, 0.0, 0.0], [0.0, 0.0, 0.0]])

    # the limit system moves block masses with the lumped rate
    generator = limit_system(proj, W)
    z = integrate_generator(generator, [0.5, 0.5, 0.0, 0.0], 40.0, 40)
    masses = [z.final[:2].sum(), z.final[2], z.final[3]]
    np.testing.assert_allclose(masses, equilibrium_state(lumped, [1.0, 0.0, 0.0]).values, atol=1e-10)
    np.testing.assert_allclose(masses, [1.0 / 3.0, 2.0 / 3.0, 0.0], atol=1e-10)
    assert z.final[0] == pytest.approx(z.final[1], abs=1e-12)


def test_limit_system_rejects_remainder_outside_mu_equal_2p():
    proj = build_projectors(SWAP, ZERO2, BELOW_ONE)
    with pytest.raises(RegimeError):
        limit_system(proj, ZERO2, psi0_nonsing=SWAP, regime=BELOW_ONE)
    at_two = regime_classify(0.4, 0.2, finite_N=True, W_zero=True)
    generator = limit_system(build_projectors(ZERO2, ZERO2, at_two), ZERO2, SWAP, at_two)
    np.testing.assert_allclose(generator, [[-1.0, 1.0], [1.0, -1.0]])


def test_solve_layered_on_polarized_data():
    system = two_level()
    solution = solve_layered(system, unit_cosine(), scaling(0.1, mu=0.25), [0.5, 0.5], 1.0, steps=50)
    assert solution.sup_error < 1e-12
    np.testing.assert_allclose(solution.full.populations, solution.limit.populations, atol=1e-12)
    assert solution.gap == pytest.approx(4.0)


def three_level_with_pauli() -> LevelSystem:
    omega = [0.0, 1.0, 3.0]
    gamma = np.ones((3, 3)) - np.eye(3)
    return LevelSystem.from_arrays(
        omega=omega,
        gamma=gamma,
        V=[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        W=pauli_rates(omega, 1.0, gamma * 0.5),
        temperature=1.0,
    )


def test_solve_layered_error_shrinks_with_eps():
    system = three_level_with_pauli()
    field = QuasiPeriodicField.cosine(1.0, 1.0)
    eps_grid = [1e-2, 1e-3, 1e-4]
    errors = [
        solve_layered(system, field, scaling(eps, mu=0.25), [1.0, 0.0, 0.0], 2.0, steps=4000).sup_error
        for eps in eps_grid
    ]
    assert errors[0] > errors[1] > errors[2]
    slope = np.polyfit(np.log(eps_grid), np.log(errors), 1)[0]
    assert slope == pytest.approx(0.25, abs=0.15)
