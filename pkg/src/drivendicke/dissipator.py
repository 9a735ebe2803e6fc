"""Bath spectral functions and the secular master-equation generator.

The system couples to independent Ohmic baths through one Hermitian channel
per subsystem (cavity first, then each emitter).  In the Floquet basis the
populations obey a classical rate equation

    d p_n / dt = sum_k W[n, k] p_k,

with gain rates summed over sideband index nu,

    W[n, k] = sum_channels sum_nu chi(omega_{k,n,nu}) |X_{n,k,nu}|^2,   n != k,

where omega_{m,n,nu} = eps_m - eps_n + nu * omega_d and the transition tables

    X_{m,n,nu} = sum_mu <coeff_m(mu - nu)| X |coeff_n(mu)>

come from the Fourier-resolved Floquet states (out-of-window coefficients count
as zero).  Coherences decay independently, rho_mn(t) = exp(-Z[m, n] t) rho_mn(0),
with

    Z[m, n] = 1/2 sum_{k,nu} [chi + i xi](omega_{m,k,nu}) |X_{k,m,nu}|^2
            + 1/2 sum_{k,nu} [chi - i xi](omega_{n,k,nu}) |X_{k,n,nu}|^2
            - sum_nu chi(nu omega_d) X_{m,m,nu} conj(X_{n,n,nu}),

assembled per channel and summed.  The conjugate sign on the second xi term
keeps Z[m, n] = conj(Z[n, m]) so that Hermiticity of the density matrix is
preserved; with the Lamb shift disabled (the default) xi vanishes anyway.

For a static basis (no drive) the same formulas apply with nu restricted to 0
and omega_{m,n,0} given by true energy differences.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

TAIL_WARN_FRACTION = 1e-6


@dataclass(frozen=True)
class SpectralModel:
    """Ohmic bath with strength gamma: gamma(omega) = gamma * omega / omega0.

    Both baths (cavity and emitter channels) share the same temperature.
    The Lamb-shift function xi is only evaluated when lamb_shift_enabled is
    set; it requires a principal-value integral cut off at omega_cut.
    """

    gamma: float
    omega0: float = 1.0
    temperature: float = 0.0
    lamb_shift_enabled: bool = False
    omega_cut: float = 10.0
    pv_points: int = 2000

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.omega0 <= 0.0:
            raise ValueError("omega0 must be positive")
        if self.temperature < 0.0:
            raise ValueError("temperature must be >= 0")
        if self.omega_cut <= 0.0:
            raise ValueError("omega_cut must be positive")
        if self.pv_points < 16:
            raise ValueError("pv_points must be >= 16")


def gamma_fn(omega, spectral):
    """Ohmic rate gamma(omega) for omega > 0."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0.0):
        raise ValueError("gamma_fn is defined for positive frequencies only")
    out = spectral.gamma * omega / spectral.omega0
    return out if out.ndim else float(out)


def thermal_occupation(omega, temperature):
    """Bose factor n(omega, T) for omega > 0, elementwise."""
    omega = np.asarray(omega, dtype=float)
    if temperature == 0.0:
        return np.zeros_like(omega)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(omega / temperature)


def chi(omega, spectral):
    """Full bath rate function.

    chi(omega) = gamma(omega) [n(omega, T) + 1]    for omega > 0  (emission)
    chi(omega) = gamma(-omega) n(-omega, T)        for omega < 0  (absorption)
    chi(0)     = gamma * T / omega0                (analytic limit)

    Satisfies detailed balance chi(-omega) = exp(-omega/T) chi(omega).
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)
    out = np.zeros(omega.shape, dtype=float)
    g0 = spectral.gamma / spectral.omega0
    pos = omega > 0.0
    neg = omega < 0.0
    out[pos] = g0 * omega[pos] * (thermal_occupation(omega[pos], spectral.temperature) + 1.0)
    if spectral.temperature > 0.0:
        out[neg] = g0 * (-omega[neg]) * thermal_occupation(-omega[neg], spectral.temperature)
        out[~(pos | neg)] = g0 * spectral.temperature
    return float(out[0]) if scalar else out.reshape(np.shape(omega))


def _gamma_extended(omega, spectral):
    # analytic extension of the Ohmic law to omega <= 0, used inside the
    # principal-value integrand only
    return spectral.gamma * np.asarray(omega, dtype=float) / spectral.omega0


def reservoir_shift(omega, spectral):
    """Re Gamma(omega + i0+) for omega > 0 as a principal-value quadrature.

    Normalization choice: Gamma(omega) = (1/pi) P int_0^cut gamma(w') / (omega - w') dw'.
    The integrable singularity is subtracted analytically,

        P int gamma(w')/(omega - w') dw'
            = int [gamma(w') - gamma(omega)] / (omega - w') dw'
              + gamma(omega) ln(omega / (cut - omega)),

    and the remaining regular integrand is evaluated with the trapezoid rule
    on pv_points cells.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega <= 0.0):
        raise ValueError("reservoir_shift requires positive frequencies")
    cut = spectral.omega_cut
    n_cells = spectral.pv_points
    h = cut / n_cells
    if np.any(omega > cut - h):
        raise ValueError(
            "transition frequency within one quadrature cell of omega_cut; "
            "increase omega_cut")
    grid = np.linspace(0.0, cut, n_cells + 1)
    gam_grid = _gamma_extended(grid, spectral)
    gam_w = _gamma_extended(omega, spectral)
    # numerical slope of gamma at omega fills the removable singularity
    delta = 1e-3 * h
    slope = (_gamma_extended(omega + delta, spectral)
             - _gamma_extended(omega - delta, spectral)) / (2.0 * delta)
    diff = omega[:, None] - grid[None, :]
    near = np.abs(diff) < 1e-12 * max(cut, 1.0)
    safe = np.where(near, 1.0, diff)
    integrand = (gam_grid[None, :] - gam_w[:, None]) / safe
    integrand = np.where(near, -slope[:, None], integrand)
    regular = np.trapezoid(integrand, grid, axis=1)
    singular = gam_w * np.log(omega / (cut - omega))
    return (regular + singular) / np.pi


def xi(omega, spectral):
    """Lamb-shift function, zero unless spectral.lamb_shift_enabled.

    xi(omega) = Re Gamma(omega) [n(omega, T) + 1]   for omega > 0
    xi(omega) = Re Gamma(-omega) n(-omega, T)       for omega < 0
    xi(0)     = 0 (the Ohmic zero-frequency shift has no finite limit at
                T > 0; excluding it only changes an overall phase convention)
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)
    out = np.zeros(omega.shape, dtype=float)
    if spectral.lamb_shift_enabled:
        pos = omega > 0.0
        neg = omega < 0.0
        if np.any(pos):
            out[pos] = reservoir_shift(omega[pos], spectral) * (
                thermal_occupation(omega[pos], spectral.temperature) + 1.0)
        if np.any(neg) and spectral.temperature > 0.0:
            out[neg] = reservoir_shift(-omega[neg], spectral) * thermal_occupation(
                -omega[neg], spectral.temperature)
    return float(out[0]) if scalar else out.reshape(np.shape(omega))


def transition_elements(basis, x_op):
    """Sideband-resolved matrix elements of x_op between Floquet states.

    Returns a (dim, dim, 2*nu_max+1) array with
    table[m, n, nu + nu_max] = sum_mu <coeff_m(mu - nu)| x_op |coeff_n(mu)>,
    where mu runs over the retained window and out-of-range indices count as
    zero vectors.  Implemented as a zero-padded FFT correlation along the
    mode axis, which realizes exactly that truncated sum.
    """
    x_op = np.asarray(x_op, dtype=complex)
    coeffs = basis.fourier_coeffs
    n_states, n_modes, dim = coeffs.shape
    if x_op.shape != (dim, dim):
        raise ValueError("operator dimension does not match the basis")
    if n_modes == 1:
        table = np.einsum("ma,ab,nb->mn", coeffs[:, 0].conj(), x_op, coeffs[:, 0])
        return table[:, :, None]
    applied = np.einsum("ab,nlb->nla", x_op, coeffs)
    n_fft = scipy.fft.next_fast_len(2 * n_modes - 1)
    f_hat = np.fft.fft(coeffs, n=n_fft, axis=1)
    a_hat = np.fft.fft(applied, n=n_fft, axis=1)
    # batched over the FFT axis: corr[m, n, q] = sum_a conj(Fh[m,q,a]) Ah[n,q,a]
    corr_hat = np.matmul(f_hat.conj().transpose(1, 0, 2), a_hat.transpose(1, 2, 0))
    corr = np.fft.ifft(corr_hat, axis=0)
    idx = np.mod(np.arange(-basis.nu_max, basis.nu_max + 1), n_fft)
    return corr[idx].transpose(1, 2, 0)


def _frequency_table(basis):
    """omega[m, n, l] = eps_m - eps_n + nu_l * omega_ref (nu_l = 0 if static)."""
    eps = basis.quasienergies
    if basis.driven:
        nu = basis.modes * basis.omega_ref
    else:
        nu = np.zeros(1)
    return eps[:, None, None] - eps[None, :, None] + nu[None, None, :]


def _rate_from_tables(basis, tables, spectral):
    om = _frequency_table(basis)
    chi_om = chi(om, spectral)
    abs2 = np.zeros(tables[0].shape, dtype=float)
    for tab in tables:
        abs2 += np.abs(tab) ** 2
    gain = np.einsum("knl,nkl->nk", chi_om, abs2)
    np.fill_diagonal(gain, 0.0)
    w = gain.copy()
    w[np.diag_indices_from(w)] = -gain.sum(axis=0)
    return w


def _coherence_from_tables(basis, tables, spectral):
    om = _frequency_table(basis)
    bracket = chi(om, spectral) + 1j * xi(om, spectral)
    if basis.driven:
        chi_nu = chi(basis.modes * basis.omega_ref, spectral)
    else:
        chi_nu = np.atleast_1d(chi(0.0, spectral))
    dim = tables[0].shape[0]
    z = np.zeros((dim, dim), dtype=complex)
    for tab in tables:
        abs2 = np.abs(tab) ** 2
        a_vec = np.einsum("mkl,kml->m", bracket, abs2)
        diag = np.einsum("mml->ml", tab)
        cross = np.einsum("l,ml,nl->mn", chi_nu, diag, diag.conj())
        z += 0.5 * (a_vec[:, None] + a_vec.conj()[None, :]) - cross
    np.fill_diagonal(z, 0.0)
    return z


def rate_matrix(basis, channels, spectral):
    """Population rate matrix W; columns sum to zero, off-diagonal >= 0."""
    tables = [transition_elements(basis, x) for x in channels]
    return _rate_from_tables(basis, tables, spectral)


def coherence_coeffs(basis, channels, spectral):
    """Coherence decay coefficients Z with Z[m, n] = conj(Z[n, m]), zero diagonal."""
    tables = [transition_elements(basis, x) for x in channels]
    return _coherence_from_tables(basis, tables, spectral)


@dataclass(frozen=True)
class DissipatorData:
    """Assembled secular generator: transition tables, W and Z."""

    x_tables: tuple
    rate_matrix: np.ndarray
    coherence_coeffs: np.ndarray
    tail_fractions: tuple
    warnings: tuple = field(default_factory=tuple)


def build_dissipator(basis, channels, spectral):
    """Compute transition tables once and assemble W and Z from them.

    Attaches diagnostics: per-channel weight fraction sitting on the edge
    sidebands |nu| = nu_max (warning above 1e-6) and the dimension of the
    null space of W (warning if the stationary state is not unique).
    """
    tables = [transition_elements(basis, x) for x in channels]
    warnings = []
    tails = []
    for i, tab in enumerate(tables):
        total = float(np.sum(np.abs(tab) ** 2))
        if basis.nu_max == 0 or total == 0.0:
            tails.append(0.0)
            continue
        edge = float(np.sum(np.abs(tab[:, :, 0]) ** 2) + np.sum(np.abs(tab[:, :, -1]) ** 2))
        frac = edge / total
        tails.append(frac)
        if frac > TAIL_WARN_FRACTION:
            warnings.append(
                f"channel {i}: sideband tail fraction {frac:.2e} exceeds 1e-6; "
                "consider a larger nu_max")
    w = _rate_from_tables(basis, tables, spectral)
    z = _coherence_from_tables(basis, tables, spectral)
    svals = np.linalg.svd(w, compute_uv=False)
    null_dim = int(np.sum(svals <= 1e-12 * max(svals.max(), 1e-300)))
    if null_dim > 1:
        warnings.append(f"rate matrix has a {null_dim}-dimensional null space")
    return DissipatorData(
        x_tables=tuple(tables),
        rate_matrix=w,
        coherence_coeffs=z,
        tail_fractions=tuple(tails),
        warnings=tuple(warnings),
    )
