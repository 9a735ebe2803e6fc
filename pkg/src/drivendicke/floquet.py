"""Floquet states of the periodically driven emitter-cavity system.

The time-dependent Hamiltonian is H(t) = H_static + drive_factor * cos(omega_d t)
with period T = 2 pi / omega_d.  Floquet states are obtained from the
eigendecomposition of the one-period propagator U(T, 0):

    U(T, 0) v_n = exp(-i eps_n T) v_n

with quasienergies eps_n folded into (-omega_d/2, omega_d/2].  The periodic
parts are sampled along the period, |phi_n(t_i)> = exp(+i eps_n t_i) U(t_i, 0) v_n,
and turned into Fourier coefficient vectors by a discrete Fourier transform,

    |phi_n(t)> = sum_nu exp(-i nu omega_d t) |coeff_n(nu)>,   |nu| <= nu_max.

The propagator itself is built stepwise from commutator-free exponentials
(midpoint rule at order 2, two-exponential Gauss scheme at order 4).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from . import model

DEGENERACY_TOL = 1e-8  # quasienergy collisions below this (times omega ref) are flagged

# Gauss-Legendre nodes and weights of the fourth-order two-exponential scheme.
_CF4_NODE_1 = 0.5 - np.sqrt(3.0) / 6.0
_CF4_NODE_2 = 0.5 + np.sqrt(3.0) / 6.0
_CF4_A1 = 0.25 - np.sqrt(3.0) / 6.0
_CF4_A2 = 0.25 + np.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class FloquetBasis:
    """Floquet (or static) eigenbasis with Fourier-resolved periodic parts.

    Attributes
    ----------
    omega_ref : float
        Frequency defining the period used downstream: the drive frequency
        for a driven basis, the reference frequency omega0 for a static one.
    driven : bool
        False means the basis came from diagonalizing the static Hamiltonian;
        quasienergies then holds the true (unfolded) energies and only the
        nu = 0 Fourier coefficient is populated.
    quasienergies : (dim,) float array
        Folded quasienergies in (-omega_ref/2, omega_ref/2] if driven.
    phi0 : (dim, dim) complex array
        Row n is the exact periodic-state vector phi_n(0) (the monodromy
        eigenvector), orthonormal to machine precision.
    fourier_coeffs : (dim, 2*nu_max+1, dim) complex array
        fourier_coeffs[n, nu + nu_max, :] is the coefficient vector of mode nu.
    completeness : (dim,) float array
        Retained Fourier weight per state; 1 minus the truncated tail.
    """

    omega_ref: float
    driven: bool
    quasienergies: np.ndarray
    phi0: np.ndarray
    fourier_coeffs: np.ndarray
    nu_max: int
    completeness: np.ndarray
    degenerate: bool = False
    warnings: tuple = field(default_factory=tuple)

    @property
    def period(self):
        return 2.0 * np.pi / self.omega_ref

    @property
    def n_states(self):
        return self.quasienergies.shape[0]

    @property
    def modes(self):
        return np.arange(-self.nu_max, self.nu_max + 1)

    def states_at(self, t):
        """Periodic parts phi_n(t) as rows, from the truncated Fourier sum."""
        phases = np.exp(-1j * self.modes * self.omega_ref * t)
        return np.einsum("l,nla->na", phases, self.fourier_coeffs)


def _expm_hermitian(h, prefactor):
    """exp(prefactor * h) for Hermitian h via eigendecomposition."""
    evals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(prefactor * evals)) @ vecs.conj().T


def propagate_period(h_static, drive_factor, omega_d, n_steps, order=4):
    """Stepwise propagators U(t_i, 0) over one drive period.

    Parameters
    ----------
    h_static : (dim, dim) Hermitian array
    drive_factor : (dim, dim) Hermitian array
        Multiplies cos(omega_d t); pass zeros for an undriven propagation.
    n_steps : int
        Number of substeps, a power of two and >= 32 so the later discrete
        Fourier transform can reuse the samples directly.
    order : {2, 4}
        2 uses one midpoint exponential per substep, 4 the two-exponential
        commutator-free Gauss scheme.

    Returns
    -------
    (n_steps + 1, dim, dim) complex array, entry i holding U(i*T/n_steps, 0).
    """
    h_static = np.asarray(h_static, dtype=complex)
    drive_factor = np.asarray(drive_factor, dtype=complex)
    if not model.is_hermitian(h_static) or not model.is_hermitian(drive_factor):
        raise ValueError("propagate_period() requires Hermitian input matrices")
    if n_steps < 32 or n_steps & (n_steps - 1):
        raise ValueError("n_steps must be a power of two and >= 32")
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    dim = h_static.shape[0]
    period = 2.0 * np.pi / omega_d
    dt = period / n_steps

    props = np.empty((n_steps + 1, dim, dim), dtype=complex)
    props[0] = np.eye(dim, dtype=complex)
    u = props[0]
    for i in range(n_steps):
        t0 = i * dt
        if order == 2:
            h_mid = h_static + np.cos(omega_d * (t0 + 0.5 * dt)) * drive_factor
            step = _expm_hermitian(h_mid, -1j * dt)
        else:
            c1 = np.cos(omega_d * (t0 + _CF4_NODE_1 * dt))
            c2 = np.cos(omega_d * (t0 + _CF4_NODE_2 * dt))
            h_a = h_static * (_CF4_A2 + _CF4_A1) + (_CF4_A2 * c1 + _CF4_A1 * c2) * drive_factor
            h_b = h_static * (_CF4_A1 + _CF4_A2) + (_CF4_A1 * c1 + _CF4_A2 * c2) * drive_factor
            step = _expm_hermitian(h_b, -1j * dt) @ _expm_hermitian(h_a, -1j * dt)
        u = step @ u
        if not np.all(np.isfinite(u)):
            raise ValueError(f"propagator became non-finite at substep {i + 1}")
        props[i + 1] = u
    return props


def fold(energy, omega):
    """Fold an energy into the first zone (-omega/2, omega/2]."""
    eps = np.mod(np.asarray(energy, dtype=float) + 0.5 * omega, omega) - 0.5 * omega
    return np.where(eps <= -0.5 * omega, eps + omega, eps)


def floquet_states(propagators, omega_d, nu_max):
    """FloquetBasis from sampled one-period propagators.

    propagators must be the output of propagate_period(); its substep count
    has to satisfy n_steps >= 2 * (2 * nu_max + 1) so the retained Fourier
    window is safely below the sampling limit.
    """
    propagators = np.asarray(propagators)
    n_steps = propagators.shape[0] - 1
    dim = propagators.shape[1]
    if nu_max < 0:
        raise ValueError("nu_max must be >= 0")
    if n_steps < 2 * (2 * nu_max + 1):
        raise ValueError(
            f"n_steps = {n_steps} too small for nu_max = {nu_max}; "
            f"need n_steps >= {2 * (2 * nu_max + 1)}")
    period = 2.0 * np.pi / omega_d
    monodromy = propagators[n_steps]

    unitarity = np.abs(monodromy.conj().T @ monodromy - np.eye(dim)).max()
    if unitarity > 1e-6:
        raise ValueError(f"one-period propagator not unitary (deviation {unitarity:.2e})")

    # Schur of a normal matrix: eigenvalues on the diagonal, exactly
    # orthonormal eigenvector columns, also inside degenerate clusters.
    t_mat, z_mat = schur(monodromy, output="complex")
    eigvals = np.diag(t_mat)
    if np.abs(np.abs(eigvals) - 1.0).max() > 1e-6:
        raise ValueError("monodromy eigenvalue off the unit circle beyond 1e-6")

    eps = -np.angle(eigvals) / period
    # fold the boundary case arg = pi from -omega_d/2 to +omega_d/2
    eps = np.where(eps <= -0.5 * omega_d, eps + omega_d, eps)
    order = np.argsort(eps, kind="stable")
    eps = eps[order]
    vecs = z_mat[:, order]

    warnings = []
    gaps = np.diff(np.concatenate([eps, [eps[0] + omega_d]]))
    degenerate = bool(gaps.min() < DEGENERACY_TOL * omega_d)
    if degenerate:
        warnings.append("quasienergy degeneracy below 1e-8 of the zone width")

    # phi_n(t_i) = exp(+i eps_n t_i) U(t_i, 0) v_n, sampled over one period
    t_samples = np.arange(n_steps) * (period / n_steps)
    samples = np.einsum("tab,bn->tna", propagators[:n_steps], vecs)
    samples = samples * np.exp(1j * np.outer(t_samples, eps))[:, :, None]

    # coeff(nu) = (1/n) sum_i exp(+i nu omega_d t_i) phi(t_i), an inverse DFT
    coeffs_all = np.fft.ifft(samples, axis=0)
    mode_idx = np.mod(np.arange(-nu_max, nu_max + 1), n_steps)
    coeffs = np.transpose(coeffs_all[mode_idx], (1, 0, 2))

    completeness = np.einsum("nla,nla->n", coeffs.conj(), coeffs).real
    if completeness.min() < 1.0 - 1e-6:
        raise ValueError(
            f"Fourier window nu_max = {nu_max} keeps only "
            f"{completeness.min():.9f} of the worst state; increase nu_max")
    recon0 = coeffs.sum(axis=1)
    gram_dev = np.abs(recon0.conj() @ recon0.T - np.eye(dim)).max()
    if gram_dev > 1e-8:
        warnings.append(f"reconstructed t=0 Gram deviation {gram_dev:.2e} exceeds 1e-8")

    return FloquetBasis(
        omega_ref=omega_d,
        driven=True,
        quasienergies=eps,
        phi0=vecs.T.copy(),
        fourier_coeffs=coeffs,
        nu_max=nu_max,
        completeness=completeness,
        degenerate=degenerate,
        warnings=tuple(warnings),
    )


def static_basis(h_static, omega_ref):
    """Eigenbasis of the undriven Hamiltonian packaged as a FloquetBasis.

    quasienergies holds the true (unfolded) energies; downstream transition
    frequencies are then plain energy differences with no sideband index.
    omega_ref sets the reference period used for time grids.
    """
    h_static = np.asarray(h_static, dtype=complex)
    if not model.is_hermitian(h_static):
        raise ValueError("static_basis() requires a Hermitian matrix")
    energies, vecs = np.linalg.eigh(h_static)
    dim = energies.shape[0]
    coeffs = vecs.T[:, None, :].astype(complex)
    gaps = np.diff(energies)
    degenerate = bool(dim > 1 and gaps.min() < DEGENERACY_TOL * max(1.0, omega_ref))
    warnings = ("energy degeneracy below 1e-8",) if degenerate else ()
    return FloquetBasis(
        omega_ref=omega_ref,
        driven=False,
        quasienergies=energies,
        phi0=vecs.T.copy(),
        fourier_coeffs=coeffs,
        nu_max=0,
        completeness=np.ones(dim),
        degenerate=degenerate,
        warnings=warnings,
    )
