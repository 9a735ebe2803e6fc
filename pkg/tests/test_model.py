import numpy as np
import pytest

from drivendicke.model import (
    ModelParams, SpaceConfig, build_annihilation, build_emitter_lowering,
    build_dicke_hamiltonian, build_drive_operator, build_coupling_channels,
    is_hermitian, spectrum, check_density_matrix, partial_trace_cavity,
    partial_trace_emitters, emitter_product_state, embed_emitter_state,
)


def random_density(dim, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def test_hamiltonian_hand_expansion_two_level_cavity():
    """N=1, photon_cutoff=1: compare against the 4x4 matrix written by hand.

    Basis ordering (cavity outer, emitter inner): |0g>, |0e>, |1g>, |1e>.
    H = wc a'a + wx s+s- + g (a + a') (s- + s+).
    """
    params = ModelParams(n_emitters=1, omega_c=1.3, omega_x=0.8, g=0.25)
    space = SpaceConfig(photon_cutoff=1, n_emitters=1)
    wc, wx, g = 1.3, 0.8, 0.25
    expected = np.array([
        [0.0, 0.0, 0.0, g],
        [0.0, wx, g, 0.0],
        [0.0, g, wc, 0.0],
        [g, 0.0, 0.0, wc + wx],
    ])
    h = build_dicke_hamiltonian(params, space)
    assert np.allclose(h, expected, atol=1e-13, rtol=0.0)


def test_annihilation_ladder_action():
    space = SpaceConfig(photon_cutoff=3, n_emitters=1)
    a = build_annihilation(space)
    # a |n, s> = sqrt(n) |n-1, s>
    dim = 2 * (3 + 1)
    for n in range(1, 4):
        for s in range(2):
            vec = np.zeros(dim)
            vec[2 * n + s] = 1.0
            out = a @ vec
            expected = np.zeros(dim)
            expected[2 * (n - 1) + s] = np.sqrt(n)
            assert np.allclose(out, expected, atol=1e-13)


def test_number_commutator_on_kept_states():
    """[a, a+] = 1 away from the truncation edge."""
    space = SpaceConfig(photon_cutoff=5, n_emitters=1)
    a = build_annihilation(space)
    comm = a @ a.conj().T - a.conj().T @ a
    # exact identity on Fock states 0..cutoff-1, defect -cutoff at the edge
    diag = np.diag(comm).real
    assert np.allclose(diag[: 2 * 5], 1.0, atol=1e-13)
    assert np.allclose(diag[2 * 5:], -5.0, atol=1e-13)
    assert np.allclose(comm - np.diag(np.diag(comm)), 0.0, atol=1e-13)


def test_hermiticity_suite():
    params = ModelParams(n_emitters=2, g=0.2, drive_amplitude=0.05)
    space = SpaceConfig(photon_cutoff=4, n_emitters=2)
    assert is_hermitian(build_dicke_hamiltonian(params, space), tol=1e-13)
    assert is_hermitian(build_drive_operator(params, space), tol=1e-13)
    for ch in build_coupling_channels(space):
        assert is_hermitian(ch, tol=1e-13)


def test_uncoupled_spectrum_is_the_ladder():
    """g=0 energies are n*wc + m*wx exactly (criterion-level tolerance)."""
    wc, wx = 1.0, 0.85
    params = ModelParams(n_emitters=2, omega_c=wc, omega_x=wx, g=0.0)
    space = SpaceConfig(photon_cutoff=6, n_emitters=2)
    h = build_dicke_hamiltonian(params, space)
    energies = spectrum(h)
    ladder = sorted(n * wc + m * wx
                    for n in range(7) for m in (0, 1, 1, 2))
    assert np.allclose(energies, ladder, atol=1e-12, rtol=0.0)


def test_drive_operator_is_quadrature_scaled():
    params = ModelParams(n_emitters=1, drive_amplitude=0.3)
    space = SpaceConfig(photon_cutoff=3, n_emitters=1)
    a = build_annihilation(space)
    assert np.allclose(build_drive_operator(params, space),
                       0.3 * (a + a.conj().T), atol=1e-13)


def test_coupling_channels_shapes_and_count():
    space = SpaceConfig(photon_cutoff=2, n_emitters=2)
    channels = build_coupling_channels(space)
    assert len(channels) == 1 + 2
    for ch in channels:
        assert ch.shape == (space.dim, space.dim)


def test_partial_trace_inverts_embedding():
    space = SpaceConfig(photon_cutoff=3, n_emitters=2)
    rho_e = random_density(4, seed=5)
    rho = embed_emitter_state(rho_e, space)
    assert np.allclose(partial_trace_cavity(rho, space), rho_e, atol=1e-13)
    rho_c = partial_trace_emitters(rho, space)
    vac = np.zeros((4, 4))
    vac[0, 0] = 1.0
    assert np.allclose(rho_c, vac, atol=1e-13)


def test_partial_trace_preserves_trace_and_hermiticity():
    space = SpaceConfig(photon_cutoff=2, n_emitters=2)
    rho = random_density(space.dim, seed=9)
    for reduced in (partial_trace_cavity(rho, space),
                    partial_trace_emitters(rho, space)):
        assert abs(np.trace(reduced) - 1.0) < 1e-12
        assert np.allclose(reduced, reduced.conj().T, atol=1e-12)


def test_partial_trace_splits_product_states():
    space = SpaceConfig(photon_cutoff=2, n_emitters=1)
    rho_c = random_density(3, seed=1)
    rho_e = random_density(2, seed=2)
    rho = np.kron(rho_c, rho_e)
    assert np.allclose(partial_trace_emitters(rho, space), rho_c, atol=1e-13)
    assert np.allclose(partial_trace_cavity(rho, space), rho_e, atol=1e-13)


def test_emitter_product_state_ordering():
    """Single-emitter kets combine with emitter 1 as the outermost factor."""
    space = SpaceConfig(photon_cutoff=1, n_emitters=2)
    g = np.array([1.0, 0.0])
    e = np.array([0.0, 1.0])
    vec = emitter_product_state(space, [g, e])
    expected = np.kron(g, e)
    assert np.allclose(vec, expected, atol=1e-14)


def test_check_density_matrix_rejects_bad_states():
    good = np.diag([0.5, 0.5]).astype(complex)
    check_density_matrix(good)
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.5, -0.5]).astype(complex))
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.3], [0.1, 0.5]]))


def test_spectrum_sorted_and_stable():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(12, 12))
    h = a + a.T
    energies = spectrum(h)
    assert np.all(np.diff(energies) >= -1e-12)
    assert np.allclose(energies, np.linalg.eigvalsh(h), atol=1e-12)
