"""Mean-field dynamics of the driven emitter-cavity system.

In the frame rotating with the drive (rotating-wave approximation) the
variables alpha = <a>, beta_j = <sigma_minus_j>, zeta_j = <sigma_z_j> obey

    d alpha  = -(kappa + i d_c) alpha - i g sum_j beta_j - i drive/2
    d beta_j = -i d_x beta_j + i g alpha zeta_j
    d zeta_j = -4 g Im(alpha* beta_j)

which conserve each pseudospin length 4|beta_j|^2 + zeta_j^2 and the total
C = 4|sum beta|^2 + (sum zeta)^2.  On resonance the normal branch has
alpha = 0, sum beta = -drive/(2g), sum zeta = sqrt(C - (drive/g)^2); it
disappears at the critical amplitude g*sqrt(C), beyond which the field is
bimodal (zeta_j = 0).
"""

from dataclasses import dataclass

import numpy as np

# conservation drift beyond this aborts a trajectory
DRIFT_TOL = 1e-6


@dataclass(frozen=True)
class SemiclassicalParams:
    n_emitters: int
    g: float
    drive_amplitude: float
    kappa: float
    delta_c: float = 0.0
    delta_x: float = 0.0

    def __post_init__(self):
        if self.n_emitters < 1:
            raise ValueError("n_emitters must be >= 1")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be > 0")
        if self.g < 0.0 or self.drive_amplitude < 0.0:
            raise ValueError("g and drive_amplitude must be >= 0")


@dataclass(frozen=True)
class SemiclassicalState:
    alpha: complex
    beta: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        zeta = np.atleast_1d(np.asarray(self.zeta, dtype=float))
        if beta.shape != zeta.shape:
            raise ValueError("beta and zeta must have one entry per emitter")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "zeta", zeta)

    @property
    def lengths(self):
        """Per-emitter pseudospin lengths 4|beta_j|^2 + zeta_j^2."""
        return 4.0 * np.abs(self.beta) ** 2 + self.zeta ** 2

    @property
    def total_c(self):
        """Total pseudospin length C = 4|sum beta|^2 + (sum zeta)^2."""
        return float(4.0 * abs(self.beta.sum()) ** 2 + self.zeta.sum() ** 2)


def rhs(state, params):
    """Time derivatives (d_alpha, d_beta, d_zeta) of the mean-field equations."""
    alpha = state.alpha
    beta = state.beta
    zeta = state.zeta
    d_alpha, d_beta, d_zeta = _rhs_parts(alpha, beta, zeta, params)
    return d_alpha, d_beta, d_zeta


def _rhs_parts(alpha, beta, zeta, p):
    d_alpha = (-(p.kappa + 1j * p.delta_c) * alpha
               - 1j * p.g * beta.sum() - 0.5j * p.drive_amplitude)
    d_beta = -1j * p.delta_x * beta + 1j * p.g * alpha * zeta
    d_zeta = -4.0 * p.g * np.imag(np.conj(alpha) * beta)
    return d_alpha, d_beta, d_zeta


@dataclass(frozen=True)
class SemiclassicalTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray          # (n_times, n_emitters)
    zeta: np.ndarray
    total_c: np.ndarray
    max_length_drift: float
    max_c_drift: float


def integrate(state0, params, t_end, dt, store_every=1):
    """Fixed-step RK4 integration with conservation monitoring.

    The step must satisfy dt <= 0.05 / max(kappa, g, drive); conservation of
    the pseudospin lengths and of C is checked every step and a drift beyond
    1e-6 aborts with advice to reduce dt.
    """
    scale = max(params.kappa, params.g, params.drive_amplitude)
    if scale > 0.0 and dt > 0.05 / scale:
        raise ValueError(f"dt = {dt} too large; need dt <= {0.05 / scale:.3e}")
    if t_end <= 0.0 or dt <= 0.0:
        raise ValueError("t_end and dt must be > 0")
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    n_emitters = state0.beta.shape[0]
    if n_emitters != params.n_emitters:
        raise ValueError("state size does not match params.n_emitters")

    lengths0 = state0.lengths
    c0 = state0.total_c

    alpha = complex(state0.alpha)
    beta = state0.beta.copy()
    zeta = state0.zeta.copy()

    stored = [(0.0, alpha, beta.copy(), zeta.copy(), c0)]
    max_len_drift = 0.0
    max_c_drift = 0.0
    for step in range(1, n_steps + 1):
        ka1, kb1, kz1 = _rhs_parts(alpha, beta, zeta, params)
        ka2, kb2, kz2 = _rhs_parts(alpha + 0.5 * dt * ka1, beta + 0.5 * dt * kb1,
                                   zeta + 0.5 * dt * kz1, params)
        ka3, kb3, kz3 = _rhs_parts(alpha + 0.5 * dt * ka2, beta + 0.5 * dt * kb2,
                                   zeta + 0.5 * dt * kz2, params)
        ka4, kb4, kz4 = _rhs_parts(alpha + dt * ka3, beta + dt * kb3,
                                   zeta + dt * kz3, params)
        alpha = alpha + (dt / 6.0) * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        beta = beta + (dt / 6.0) * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
        zeta = zeta + (dt / 6.0) * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4)

        lengths = 4.0 * np.abs(beta) ** 2 + zeta ** 2
        c_val = float(4.0 * abs(beta.sum()) ** 2 + zeta.sum() ** 2)
        len_drift = float(np.abs(lengths - lengths0).max())
        c_drift = abs(c_val - c0)
        max_len_drift = max(max_len_drift, len_drift)
        max_c_drift = max(max_c_drift, c_drift)
        if max(len_drift, c_drift) > DRIFT_TOL:
            raise RuntimeError(
                f"conservation drift {max(len_drift, c_drift):.3e} at step "
                f"{step} exceeds {DRIFT_TOL}; reduce dt")
        if step % store_every == 0 or step == n_steps:
            stored.append((step * dt, alpha, beta.copy(), zeta.copy(), c_val))

    times = np.array([s[0] for s in stored])
    return SemiclassicalTrajectory(
        times=times,
        alpha=np.array([s[1] for s in stored]),
        beta=np.array([s[2] for s in stored]),
        zeta=np.array([s[3] for s in stored]),
        total_c=np.array([s[4] for s in stored]),
        max_length_drift=max_len_drift,
        max_c_drift=max_c_drift)


def c_ladder(n_emitters):
    """Allowed total pseudospin values C = N^2, (N-2)^2, ..., down to 0 or 1."""
    return tuple(float((n_emitters - 2 * k) ** 2)
                 for k in range(n_emitters // 2 + 1))


@dataclass(frozen=True)
class BranchResult:
    """Stationary branch sums at alpha = 0, or the bimodal-phase marker."""

    c_value: float
    sum_beta: complex = None
    sum_zeta: float = None
    bimodal: bool = False


def steady_branch(c_value, params):
    """Normal-phase branch (alpha=0) for total pseudospin C, on resonance.

    Returns the bimodal marker when (drive/g)^2 > C, where the alpha = 0
    branch ceases to exist and the field becomes bimodal (zeta = 0).
    """
    if c_value not in c_ladder(params.n_emitters):
        raise ValueError(
            f"C = {c_value} invalid; allowed: {c_ladder(params.n_emitters)}")
    if params.g <= 0.0:
        raise ValueError("steady_branch needs g > 0")
    ratio_sq = (params.drive_amplitude / params.g) ** 2
    if ratio_sq > c_value:
        return BranchResult(c_value=c_value, bimodal=True)
    return BranchResult(c_value=c_value,
                        sum_beta=-params.drive_amplitude / (2.0 * params.g),
                        sum_zeta=float(np.sqrt(c_value - ratio_sq)),
                        bimodal=False)


def branch_state(params):
    """Equally distributed normal-branch state for maximal C = N^2."""
    n = params.n_emitters
    branch = steady_branch(float(n ** 2), params)
    if branch.bimodal:
        raise ValueError("drive exceeds the critical amplitude; no normal branch")
    return SemiclassicalState(alpha=0.0,
                              beta=np.full(n, branch.sum_beta / n, dtype=complex),
                              zeta=np.full(n, branch.sum_zeta / n))


def critical_amplitude(c_value, g):
    """Drive amplitude g*sqrt(C) where the normal branch terminates."""
    if c_value < 0.0:
        raise ValueError("C must be >= 0")
    return float(g * np.sqrt(c_value))
