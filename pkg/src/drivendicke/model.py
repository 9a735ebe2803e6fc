"""Truncated Hilbert space and operators for few two-level emitters in a cavity.

Conventions
-----------
* hbar = 1.  All frequencies and energies are given in units of the reference
  frequency omega0 (so omega0 = 1.0 in typical use).
* Joint basis ordering: the cavity Fock index is the slow (outer) index and
  the emitter bits are fast (inner).  The joint index of |n_photon, s_1..s_N>
  is  n_photon * 2**N + sum_j s_j * 2**(N-j),  with s_j = 0 for the emitter
  ground state |g> and s_j = 1 for the excited state |e>.  Equivalently every
  joint operator is  kron(cavity_op, emitter_1_op, ..., emitter_N_op).
* The cavity Fock space is truncated at photon_cutoff, i.e. it keeps the
  number states 0..photon_cutoff (photon_cutoff + 1 levels).
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

# Single global ordering convention, see module docstring.  All tensor
# constructions below must go through _embed() so this stays consistent.
BASIS_ORDERING = "cavity-outer, emitter-bits-inner"


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the driven emitter-cavity system.

    All frequencies are angular frequencies in units of omega0.  The default
    configuration is the fully resonant one, omega_c = omega_x = omega_d.
    """

    n_emitters: int = 1
    omega_c: float = 1.0
    omega_x: float = 1.0
    omega_d: float = 1.0
    omega0: float = 1.0
    g: float = 0.1
    drive_amplitude: float = 0.0

    def __post_init__(self):
        if self.n_emitters < 1:
            raise ValueError("n_emitters must be >= 1")
        for name in ("omega_c", "omega_x", "omega_d", "omega0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.g < 0.0:
            raise ValueError("g must be >= 0")
        if self.drive_amplitude < 0.0:
            raise ValueError("drive_amplitude must be >= 0")

    @property
    def drive_period(self):
        return 2.0 * np.pi / self.omega_d


@dataclass(frozen=True)
class SpaceConfig:
    """Truncation of the joint Hilbert space."""

    photon_cutoff: int
    n_emitters: int

    def __post_init__(self):
        if self.photon_cutoff < 1:
            raise ValueError("photon_cutoff must be >= 1")
        if self.n_emitters < 1:
            raise ValueError("n_emitters must be >= 1")

    @property
    def cavity_dim(self):
        return self.photon_cutoff + 1

    @property
    def emitter_dim(self):
        return 2 ** self.n_emitters

    @property
    def dim(self):
        return self.cavity_dim * self.emitter_dim


# Two-level operators in the basis (|g>, |e>).
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T


def _fock_lowering(n_levels):
    """Annihilation operator on a Fock space with n_levels number states."""
    a = np.zeros((n_levels, n_levels), dtype=complex)
    for n in range(1, n_levels):
        a[n - 1, n] = np.sqrt(n)
    return a


def _embed(space, cavity_op=None, emitter_ops=None):
    """kron() chain in the global ordering; None factors become identities.

    emitter_ops is a dict {j: 2x2 array} with 1-based emitter labels.
    """
    factors = [np.eye(space.cavity_dim, dtype=complex) if cavity_op is None
               else np.asarray(cavity_op, dtype=complex)]
    emitter_ops = emitter_ops or {}
    eye2 = np.eye(2, dtype=complex)
    for j in range(1, space.n_emitters + 1):
        factors.append(np.asarray(emitter_ops.get(j, eye2), dtype=complex))
    return reduce(np.kron, factors)


def build_annihilation(space):
    """Cavity annihilation operator a on the joint space."""
    return _embed(space, cavity_op=_fock_lowering(space.cavity_dim))


def build_emitter_lowering(space, j):
    """Lowering operator sigma_minus of emitter j (1-based) on the joint space."""
    if not 1 <= j <= space.n_emitters:
        raise ValueError(f"emitter index {j} out of range 1..{space.n_emitters}")
    return _embed(space, emitter_ops={j: SIGMA_MINUS})


def build_dicke_hamiltonian(params, space):
    """Static emitter-cavity Hamiltonian with rotating and counter-rotating coupling.

    H = omega_c a^dag a + omega_x sum_j sigma_+^j sigma_-^j
        + g (a + a^dag) sum_j (sigma_-^j + sigma_+^j)

    Parameters
    ----------
    params : ModelParams
    space : SpaceConfig
        Must match params.n_emitters.

    Returns
    -------
    (dim, dim) complex Hermitian array.
    """
    if space.n_emitters != params.n_emitters:
        raise ValueError("space.n_emitters does not match params.n_emitters")
    a = build_annihilation(space)
    h = params.omega_c * (a.conj().T @ a)
    x_pos = a + a.conj().T
    flip_sum = np.zeros_like(h)
    for j in range(1, space.n_emitters + 1):
        sm = build_emitter_lowering(space, j)
        h = h + params.omega_x * (sm.conj().T @ sm)
        flip_sum = flip_sum + sm + sm.conj().T
    h = h + params.g * (x_pos @ flip_sum)
    return h


def build_drive_operator(params, space):
    """Time-independent drive factor Omega (a + a^dag).

    The full drive term is this matrix times cos(omega_d t).
    """
    a = build_annihilation(space)
    return params.drive_amplitude * (a + a.conj().T)


def build_coupling_channels(space):
    """Hermitian system operators coupling to the baths, cavity channel first.

    Returns the list [X_cavity, X_emitter_1, ..., X_emitter_N] with
    X_cavity = -i (a - a^dag) and X_emitter_j = -i (sigma_-^j - sigma_+^j).
    """
    a = build_annihilation(space)
    channels = [-1j * (a - a.conj().T)]
    for j in range(1, space.n_emitters + 1):
        sm = build_emitter_lowering(space, j)
        channels.append(-1j * (sm - sm.conj().T))
    return channels


def is_hermitian(matrix, tol=1e-12):
    matrix = np.asarray(matrix)
    scale = max(1.0, np.abs(matrix).max())
    return np.abs(matrix - matrix.conj().T).max() <= tol * scale


def spectrum(hamiltonian, tol=1e-12):
    """Eigenvalues of a Hermitian operator, ascending.

    Rejects non-Hermitian input instead of silently symmetrizing.
    """
    if not is_hermitian(hamiltonian, tol):
        raise ValueError("spectrum() requires a Hermitian matrix")
    return np.linalg.eigvalsh(hamiltonian)


def check_density_matrix(rho, tol=1e-10):
    """Raise ValueError unless rho is Hermitian, unit-trace and positive."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol or abs(np.trace(rho).imag) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def partial_trace_cavity(rho, space):
    """Trace out the cavity, returning the reduced emitter density matrix."""
    rho = np.asarray(rho)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"expected shape {(space.dim, space.dim)}, got {rho.shape}")
    nc, ne = space.cavity_dim, space.emitter_dim
    blocks = rho.reshape(nc, ne, nc, ne)
    return np.einsum("kikj->ij", blocks)


def partial_trace_emitters(rho, space):
    """Trace out all emitters, returning the reduced cavity density matrix.

    With the cavity-outer ordering this is a trace over contiguous blocks.
    """
    rho = np.asarray(rho)
    if rho.shape != (space.dim, space.dim):
        raise ValueError(f"expected shape {(space.dim, space.dim)}, got {rho.shape}")
    nc, ne = space.cavity_dim, space.emitter_dim
    blocks = rho.reshape(nc, ne, nc, ne)
    return np.einsum("ikjk->ij", blocks)


def emitter_product_state(space, single_emitter_states):
    """Joint emitter state vector from a list of per-emitter 2-vectors."""
    if len(single_emitter_states) != space.n_emitters:
        raise ValueError("need one 2-vector per emitter")
    vec = np.array([1.0], dtype=complex)
    for s in single_emitter_states:
        s = np.asarray(s, dtype=complex).reshape(2)
        vec = np.kron(vec, s)
    return vec


def embed_emitter_state(rho_emitters, space, cavity_state=None):
    """Joint density matrix rho_cavity (x) rho_emitters.

    cavity_state defaults to the Fock vacuum.  Accepts either a cavity
    density matrix or a cavity state vector.
    """
    rho_emitters = np.asarray(rho_emitters, dtype=complex)
    if rho_emitters.shape != (space.emitter_dim, space.emitter_dim):
        raise ValueError("emitter state has wrong dimension")
    if cavity_state is None:
        rho_c = np.zeros((space.cavity_dim, space.cavity_dim), dtype=complex)
        rho_c[0, 0] = 1.0
    else:
        cavity_state = np.asarray(cavity_state, dtype=complex)
        if cavity_state.ndim == 1:
            rho_c = np.outer(cavity_state, cavity_state.conj())
        else:
            rho_c = cavity_state
    return np.kron(rho_c, rho_emitters)
