import numpy as np
import pytest
import scipy.linalg

from drivendicke.model import (
    ModelParams, SpaceConfig, build_dicke_hamiltonian, build_drive_operator,
)
from drivendicke.floquet import (
    propagate_period, floquet_states, static_basis, fold,
)


def make_parts(g=0.2, drive=0.05, cutoff=4, n_emitters=1):
    params = ModelParams(n_emitters=n_emitters, g=g, drive_amplitude=drive)
    space = SpaceConfig(photon_cutoff=cutoff, n_emitters=n_emitters)
    h = build_dicke_hamiltonian(params, space)
    v = build_drive_operator(params, space)
    return params, h, v


def test_fold_maps_into_half_open_zone():
    omega = 1.0
    energies = np.array([0.0, 0.5, -0.5, 0.51, -0.51, 3.25, -3.25])
    folded = fold(energies, omega)
    assert np.all(folded > -0.5 - 1e-15)
    assert np.all(folded <= 0.5 + 1e-15)
    # each fold differs from the input by an integer multiple of omega
    shifts = (energies - folded) / omega
    assert np.allclose(shifts, np.round(shifts), atol=1e-12)
    # boundary convention: +omega/2 kept, -omega/2 wrapped up
    assert fold(0.5, 1.0) == pytest.approx(0.5)
    assert fold(-0.5, 1.0) == pytest.approx(0.5)


def test_monodromy_matches_expm_for_static_hamiltonian():
    """With zero drive the one-period propagator is exp(-i H T)."""
    params, h, v = make_parts(drive=0.0)
    t_d = 2.0 * np.pi / params.omega_d
    props = propagate_period(h, v, params.omega_d, n_steps=64, order=4)
    expected = scipy.linalg.expm(-1j * h * t_d)
    assert np.max(np.abs(props[-1] - expected)) < 1e-12


def test_propagator_unitarity_and_count():
    params, h, v = make_parts()
    props = propagate_period(h, v, params.omega_d, n_steps=32, order=4)
    assert len(props) == 33  # identity at t=0 plus one entry per substep
    u = props[-1]
    assert np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) < 1e-12
    assert np.allclose(props[0], np.eye(u.shape[0]), atol=0.0)


def test_commutator_free_step_is_fourth_order():
    """Halving the step shrinks the endpoint error by about 2^4."""
    params, h, v = make_parts(g=0.3, drive=0.4)
    ref = propagate_period(h, v, params.omega_d, n_steps=2048, order=4)[-1]
    err = []
    for n_steps in (32, 64):
        u = propagate_period(h, v, params.omega_d, n_steps=n_steps, order=4)[-1]
        err.append(np.max(np.abs(u - ref)))
    ratio = err[0] / err[1]
    assert ratio > 10.0, f"expected ~16x error reduction, got {ratio:.2f}"


def test_static_basis_energies_and_single_mode():
    params, h, v = make_parts(drive=0.0)
    basis = static_basis(h, params.omega0)
    assert not basis.driven
    assert np.allclose(np.sort(basis.quasienergies),
                       np.linalg.eigvalsh(h), atol=1e-12)
    assert basis.fourier_coeffs.shape[1] == 1
    assert np.allclose(basis.completeness, 1.0, atol=1e-12)


def test_driven_path_reproduces_static_quasienergies():
    """Zero-amplitude drive through the Floquet machinery folds the statics."""
    params, h, v = make_parts(drive=0.0)
    props = propagate_period(h, v, params.omega_d, n_steps=128, order=4)
    basis = floquet_states(props, params.omega_d, nu_max=20)
    expected = np.sort(fold(np.linalg.eigvalsh(h), params.omega_d))
    assert np.allclose(np.sort(basis.quasienergies), expected, atol=1e-8)


def test_periodic_part_orthonormal_at_t0():
    params, h, v = make_parts()
    props = propagate_period(h, v, params.omega_d, n_steps=128, order=4)
    basis = floquet_states(props, params.omega_d, nu_max=20)
    overlaps = basis.phi0 @ basis.phi0.conj().T
    assert np.max(np.abs(overlaps - np.eye(overlaps.shape[0]))) < 1e-10


def test_fourier_sum_reconstructs_phi0():
    """sum_nu coeff_n(nu) equals phi_n(0) once the mode window is adequate."""
    params, h, v = make_parts()
    props = propagate_period(h, v, params.omega_d, n_steps=128, order=4)
    basis = floquet_states(props, params.omega_d, nu_max=20)
    recon = basis.fourier_coeffs.sum(axis=1)
    assert np.max(np.abs(recon - basis.phi0)) < 1e-8


def test_fourier_sum_tracks_midperiod_propagation():
    """phi_n(T/2) from the mode sum agrees with direct propagation."""
    params, h, v = make_parts()
    n_steps = 128
    props = propagate_period(h, v, params.omega_d, n_steps=n_steps, order=4)
    basis = floquet_states(props, params.omega_d, nu_max=24)
    t = 0.5 * basis.period
    u_half = props[n_steps // 2]
    recon = basis.states_at(t)
    direct = (np.exp(1j * basis.quasienergies[:, None] * t)
              * (u_half @ basis.phi0.T).T)
    assert np.max(np.abs(recon - direct)) < 1e-7


def test_truncated_mode_window_raises():
    """A window too small to hold the micromotion must refuse to continue."""
    params, h, v = make_parts(g=0.4, drive=1.5)
    props = propagate_period(h, v, params.omega_d, n_steps=256, order=4)
    with pytest.raises(ValueError, match="nu_max"):
        floquet_states(props, params.omega_d, nu_max=1)
