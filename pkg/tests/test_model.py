import math

import numpy as np
import pytest
from bloch_rates import (
    LevelFamily,
    LevelSystem,
    Populations,
    QuasiPeriodicField,
    Scaling,
    field_value,
    pauli_rates,
    validate_system,
    well_prepared_state,
)
from pydantic import ValidationError

from tests.conftest import three_level_pauli, two_level, unit_cosine


def test_two_level_system_is_valid():
    report = validate_system(two_level())
    assert report.valid
    assert report.violations == []
    assert report.hermiticity_residual == 0.0


def test_zero_gamma_violates_floor():
    report = validate_system(two_level(gamma=0.0))
    assert not report.valid
    assert any(v.startswith("gamma floor") for v in report.violations)


def test_explicit_gamma_floor():
    report = validate_system(two_level(gamma=0.5), gamma_floor=1.0)
    assert any(v.startswith("gamma floor") for v in report.violations)


def test_asymmetric_gamma():
    system = LevelSystem.from_arrays(
        omega=[0.0, 1.0],
        gamma=[[0.0, 1.0], [2.0, 0.0]],
        V=[[0.0, 1.0], [1.0, 0.0]],
    )
    report = validate_system(system)
    assert any(v.startswith("gamma symmetry") for v in report.violations)


def test_non_hermitian_coupling():
    system = LevelSystem.from_arrays(
        omega=[0.0, 1.0],
        gamma=[[0.0, 1.0], [1.0, 0.0]],
        V=[[0.0, 1.0j], [1.0j, 0.0]],
    )
    report = validate_system(system)
    assert any(v.startswith("V hermiticity") for v in report.violations)


def test_negative_pauli_rate():
    report = validate_system(two_level(W=[[0.0, -0.1], [0.0, 0.0]]))
    assert any(v.startswith("W sign") for v in report.violations)


def test_pauli_diagonal():
    report = validate_system(two_level(W=[[1.0, 0.0], [0.0, 0.0]]))
    assert any(v.startswith("W diagonal") for v in report.violations)


def test_three_level_pauli_is_microreversible():
    report = validate_system(three_level_pauli())
    assert report.valid
    assert report.microreversibility_residual is not None
    assert report.microreversibility_residual < 1e-12


def test_swapped_pauli_rates_break_microreversibility():
    system = three_level_pauli()
    swapped = system.replace(W=system.W_matrix.T.tolist())
    report = validate_system(swapped)
    assert any(v.startswith("microreversibility") for v in report.violations)


def test_pauli_rates_satisfy_microreversibility():
    omega = [0.0, 0.75, 2.0]
    base = np.ones((3, 3))
    W = pauli_rates(omega, 0.5, base)
    assert np.all(np.diag(W) == 0.0)
    system = LevelSystem.from_arrays(
        omega=omega,
        gamma=np.ones((3, 3)) - np.eye(3),
        V=np.zeros((3, 3)),
        W=W,
        temperature=0.5,
    )
    assert validate_system(system).valid


def test_pauli_rates_reject_bad_base():
    with pytest.raises(ValueError):
        pauli_rates([0.0, 1.0], 1.0, [[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        pauli_rates([0.0, 1.0], 0.0, [[0.0, 1.0], [1.0, 0.0]])


def test_shape_mismatch_is_rejected():
    with pytest.raises(ValidationError):
        LevelSystem.from_arrays(
            omega=[0.0, 1.0, 2.0],
            gamma=[[0.0, 1.0], [1.0, 0.0]],
            V=[[0.0, 1.0], [1.0, 0.0]],
        )


def test_non_finite_energy_is_rejected():
    with pytest.raises(ValidationError):
        LevelSystem.from_arrays(
            omega=[0.0, math.inf],
            gamma=[[0.0, 1.0], [1.0, 0.0]],
            V=[[0.0, 1.0], [1.0, 0.0]],
        )


def test_complex_couplings_parse_from_strings_and_pairs():
    system = LevelSystem(
        omega=(0.0, 1.0),
        gamma=((0.0, 1.0), (1.0, 0.0)),
        V=((0, "1+2j"), ([1.0, -2.0], 0)),
    )
    assert system.V_matrix[0, 1] == 1 + 2j
    assert system.V_matrix[1, 0] == 1 - 2j
    assert validate_system(system).valid


def test_omega_diff_orientation():
    diff = two_level().omega_diff()
    assert diff[0, 1] == -1.0
    assert diff[1, 0] == 1.0


def test_cosine_field_values():
    field = unit_cosine()
    assert field_value(field, 0.0) == pytest.approx(2.0)
    assert field_value(field, math.pi) == pytest.approx(-2.0)
    assert field.period() == pytest.approx(2 * math.pi)
    assert field.support_bound == 1


def test_two_frequency_field():
    field = QuasiPeriodicField.from_coefficients(
        [1.0, math.sqrt(2.0)],
        {(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.5, (0, -1): 0.5},
    )
    assert field_value(field, 0.0) == pytest.approx(2.0)
    assert field.period() is None
    t = 0.7
    expected = math.cos(t) + math.cos(math.sqrt(2.0) * t)
    assert field_value(field, t) == pytest.approx(expected)


def test_zero_field():
    field = QuasiPeriodicField.zero(2)
    assert field.is_zero()
    assert field.support_bound == 0
    assert field_value(field, 1.3) == 0.0


def test_non_real_field_is_rejected():
    with pytest.raises(ValidationError):
        QuasiPeriodicField.from_coefficients([1.0], {(1,): 1.0, (-1,): 2.0})


def test_field_multi_index_length_is_checked():
    with pytest.raises(ValidationError):
        QuasiPeriodicField.from_coefficients([1.0], {(1, 0): 1.0, (-1, 0): 1.0})


def test_field_weight():
    field = QuasiPeriodicField.from_coefficients([1.0], {(1,): 1j, (-1,): -1j})
    assert field.weight((1,)) == pytest.approx(1.0)
    assert field.weight((2,)) == 0.0


def test_scaling_exponents():
    assert Scaling(eps=0.1, mu=0.25, p=0.5).ratio == pytest.approx(0.5)
    assert Scaling(eps=0.1, mu=0.25, p=0.5).nu == pytest.approx(0.25)
    assert Scaling(eps=0.1, mu=0.3, p=0.2).nu == pytest.approx(0.1)
    with pytest.raises(ValidationError):
        Scaling(eps=0.0, mu=0.1)
    with pytest.raises(ValidationError):
        Scaling(eps=0.5, mu=0.5)


def test_populations_reject_negative_values():
    with pytest.raises(ValueError):
        Populations.of([0.5, -0.1])


def test_well_prepared_state():
    rho = well_prepared_state([0.25, 0.75])
    assert rho.trace == pytest.approx(1.0)
    assert rho.coherence_norm() == 0.0
    assert rho.is_hermitian()
    np.testing.assert_allclose(rho.diagonal, [0.25, 0.75])


def test_rydberg_family():
    family = LevelFamily(energies="rydberg", coupling=1.0, decay=0.5)
    system = family.build(4)
    assert system.N == 4
    np.testing.assert_allclose(system.omega_vector, [0.0, 0.75, 1 - 1 / 9, 1 - 1 / 16])
    V = np.abs(system.V_matrix)
    assert V[0, 1] == pytest.approx(1.0)
    assert V[1, 2] == pytest.approx(0.25)
    assert V[0, 2] == 0.0
    assert validate_system(system).valid


def test_family_pauli_table_is_microreversible():
    family = LevelFamily(energies="ladder", pauli=1.0, temperature=2.0)
    system = family.build(5)
    W = family.pauli_table(5)
    assert W[1, 0] > 0 and W[0, 1] > 0
    assert validate_system(system).valid


def test_family_populations():
    pops = LevelFamily(population_decay=0.5).populations(3)
    np.testing.assert_allclose(pops.values, [0.5, 0.25, 0.125])
    with pytest.raises(ValueError):
        LevelFamily().build(0)
