"""Time evolution in the Floquet frame and lab-frame reconstruction.

In the basis of Floquet states the secular master equation splits into a
classical rate equation for the populations, p(t) = expm(W t) p(0), and an
independent exponential decay for every coherence,
rho_mn(t) = exp(-Z[m, n] t) rho_mn(0).  The lab-frame state is

    rho(t) = sum_{m,n} rho_mn(t) exp(-i (eps_m - eps_n) t) |phi_m(t)><phi_n(t)|

with the periodic parts phi_n(t) from the truncated Fourier sum of the basis.
"""

import warnings as _warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import dissipator as _dissipator
from . import floquet as _floquet
from . import model as _model


class ConvergenceFailure(RuntimeError):
    """A requested result did not pass its convergence diagnostics."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid t_i = i * dt, i = 0..n_points-1."""

    dt: float
    n_points: int
    points_per_period: int

    def __post_init__(self):
        if self.dt <= 0.0 or self.n_points < 2:
            raise ValueError("TimeGrid needs dt > 0 and at least two points")

    @property
    def times(self):
        return np.arange(self.n_points) * self.dt

    @property
    def t_max(self):
        return (self.n_points - 1) * self.dt

    def halved(self):
        """Same horizon at twice the sampling rate."""
        return TimeGrid(dt=0.5 * self.dt,
                        n_points=2 * (self.n_points - 1) + 1,
                        points_per_period=2 * self.points_per_period)


def decay_gap(w_matrix, z_matrix=None):
    """Slowest nonzero relaxation rate of the dissipative dynamics (inf if none).

    Considers the rate-matrix spectrum and, when z_matrix is given, the
    off-diagonal coherence decay rates Re Z, whichever relaxes slower.
    """
    evals = np.linalg.eigvals(w_matrix)
    rates = -evals.real
    if z_matrix is not None:
        off = ~np.eye(z_matrix.shape[0], dtype=bool)
        rates = np.concatenate([rates, z_matrix.real[off]])
    scale = max(rates.max(initial=0.0), 1e-300)
    rates = rates[rates > 1e-10 * scale]
    return float(rates.min()) if rates.size else np.inf


def build_time_grid(system, dt_per_period=32, t_max_factor=50.0, cap_periods=5000):
    """Default sampling grid: dt = period/dt_per_period, horizon 50/gap.

    The gap combines population and coherence relaxation; the factor 50
    leaves the last decade of the horizon with under about one percent of an
    exponentially decaying signal.  The horizon is capped at cap_periods
    drive periods (reference periods of omega0 for an undriven system).
    """
    period = system.basis.period
    dt = period / dt_per_period
    gap = decay_gap(system.w, system.z)
    t_max = cap_periods * period
    if np.isfinite(gap) and gap > 0.0:
        t_max = min(t_max_factor / gap, t_max)
    n_points = int(np.ceil(t_max / dt)) + 1
    return TimeGrid(dt=dt, n_points=n_points, points_per_period=dt_per_period)


@dataclass(frozen=True)
class FloquetDensity:
    """Density matrix in the Floquet basis, optionally with a trajectory.

    rho0 is the full matrix at t = 0.  After evolve() the diagonal trajectory
    is stored on the grid; coherences are reconstructed on demand from their
    closed-form decay.
    """

    rho0: np.ndarray
    w_matrix: np.ndarray = None
    z_matrix: np.ndarray = None
    times: np.ndarray = None
    populations: np.ndarray = None
    warnings: tuple = ()


def project_initial(rho_lab, basis, validate=True):
    """Express a lab-frame density matrix in the Floquet basis at t = 0."""
    rho_lab = np.asarray(rho_lab, dtype=complex)
    if validate:
        _model.check_density_matrix(rho_lab, tol=1e-8)
    if rho_lab.shape[0] != basis.n_states:
        raise ValueError("density matrix dimension does not match the basis")
    rho_f = basis.phi0.conj() @ rho_lab @ basis.phi0.T
    return FloquetDensity(rho0=rho_f)


def _population_trajectory(p0, w_matrix, times):
    """p(t_i) = expm(W t_i) p(0) row-stacked; fast path for uniform grids."""
    n_t = times.shape[0]
    out = np.empty((n_t, p0.shape[0]))
    out[0] = p0.real
    if n_t == 1:
        return out
    diffs = np.diff(times)
    if np.allclose(diffs, diffs[0], rtol=1e-9, atol=0.0):
        step = expm(w_matrix * diffs[0])
        cur = p0.real.copy()
        for i in range(1, n_t):
            cur = step @ cur
            out[i] = cur
    else:
        for i in range(1, n_t):
            out[i] = expm(w_matrix * times[i]) @ p0.real
    return out


def evolve(fd, w_matrix, z_matrix, times):
    """Populate the diagonal trajectory of fd along the given times.

    times must be ascending and start at 0.  Small negative populations from
    round-off are clipped at -1e-9; anything below -1e-7 raises.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be ascending and start at 0")
    pops = _population_trajectory(np.diag(fd.rho0), w_matrix, times)
    notes = []
    low = pops.min()
    if low < -1e-7:
        raise ValueError(
            f"negative population {low:.3e} beyond tolerance; "
            "shorten the horizon or refine the rate matrix")
    if low < -1e-9:
        notes.append(f"populations clipped at {low:.3e}")
    pops = np.clip(pops, 0.0, None)
    return replace(fd, w_matrix=w_matrix, z_matrix=z_matrix, times=times,
                   populations=pops, warnings=fd.warnings + tuple(notes))


def _populations_at(fd, t):
    if fd.times is not None:
        idx = np.searchsorted(fd.times, t)
        for j in (idx - 1, idx):
            if 0 <= j < fd.times.shape[0] and abs(fd.times[j] - t) <= 1e-9 * max(1.0, t):
                return fd.populations[j]
    if fd.w_matrix is None:
        raise ValueError("no trajectory available; call evolve() first")
    return expm(fd.w_matrix * t) @ np.diag(fd.rho0).real


def reconstruct(fd, basis, t):
    """Lab-frame density matrix at time t from the stored Floquet-frame data."""
    if fd.z_matrix is None:
        raise ValueError("no coherence coefficients stored; call evolve() first")
    eps = basis.quasienergies
    p_t = _populations_at(fd, t)
    decay = np.exp(-(fd.z_matrix + 1j * (eps[:, None] - eps[None, :])) * t)
    mat = fd.rho0 * decay
    np.fill_diagonal(mat, p_t)
    phi_cols = basis.states_at(t).T
    return phi_cols @ mat @ phi_cols.conj().T


def steady_state(w_matrix, tol=1e-9):
    """Stationary population vector, the normalized null vector of W.

    Raises if the null space is not one-dimensional.  Entries in [-1e-10, 0)
    are clipped to zero before renormalization.
    """
    w_matrix = np.asarray(w_matrix, dtype=float)
    _u, svals, vh = np.linalg.svd(w_matrix)
    scale = max(svals[0], 1e-300)
    null_idx = np.nonzero(svals <= tol * scale)[0]
    if null_idx.size == 0:
        raise ValueError("rate matrix has no null vector at the given tolerance")
    if null_idx.size > 1:
        raise ValueError(
            "stationary state not unique: near-zero singular values "
            + ", ".join(f"{svals[i]:.3e}" for i in null_idx))
    p = vh[-1]
    if p.sum() < 0.0:
        p = -p
    if p.min() < -1e-10:
        raise ValueError(f"null vector has negative entry {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def stationary_cavity_state(basis, p_ss, space, z_matrix=None):
    """Stroboscopic stationary cavity state sum_n p_n Tr_emitters |phi_n(0)><phi_n(0)|.

    If z_matrix is supplied, a warning is issued when some coherence does not
    decay (Re Z <= 0 off the diagonal), meaning the stroboscopic limit is not
    unique.
    """
    p_ss = np.asarray(p_ss, dtype=float)
    if p_ss.shape[0] != basis.n_states:
        raise ValueError("population vector does not match the basis")
    if z_matrix is not None:
        re_z = z_matrix.real + np.eye(z_matrix.shape[0])
        if re_z.min() <= 0.0:
            _warnings.warn("some coherences do not decay; stroboscopic "
                           "stationary state may not be unique")
    mats = basis.phi0.reshape(basis.n_states, space.cavity_dim, space.emitter_dim)
    rho_c = np.einsum("n,nca,nda->cd", p_ss, mats, mats.conj())
    return rho_c


@dataclass(frozen=True)
class PreparedSystem:
    """Everything needed to run trajectories: basis plus assembled generator."""

    params: _model.ModelParams
    space: _model.SpaceConfig
    spectral: _dissipator.SpectralModel
    basis: _floquet.FloquetBasis
    dissipator: _dissipator.DissipatorData

    @property
    def w(self):
        return self.dissipator.rate_matrix

    @property
    def z(self):
        return self.dissipator.coherence_coeffs


def default_n_steps(nu_max):
    """Smallest admissible power of two for the period discretization."""
    need = max(32, 2 * (2 * nu_max + 1))
    n = 32
    while n < need:
        n *= 2
    return n


def prepare_system(params, space, spectral, nu_max=24, n_steps=None, order=4,
                   use_driven_path=None):
    """Build the Floquet basis and the secular generator for one parameter point.

    With zero drive amplitude the static eigenbasis is used (exact route);
    use_driven_path can force the Floquet machinery instead, which is useful
    for cross-validating the two routes.
    """
    if space.n_emitters != params.n_emitters:
        raise ValueError("space does not match params")
    h_static = _model.build_dicke_hamiltonian(params, space)
    driven = params.drive_amplitude > 0.0 if use_driven_path is None else use_driven_path
    if driven:
        if n_steps is None:
            n_steps = default_n_steps(nu_max)
        drive_factor = _model.build_drive_operator(params, space)
        props = _floquet.propagate_period(h_static, drive_factor, params.omega_d,
                                          n_steps, order=order)
        basis = _floquet.floquet_states(props, params.omega_d, nu_max)
    else:
        basis = _floquet.static_basis(h_static, params.omega0)
    channels = _model.build_coupling_channels(space)
    diss = _dissipator.build_dissipator(basis, channels, spectral)
    return PreparedSystem(params=params, space=space, spectral=spectral,
                          basis=basis, dissipator=diss)
