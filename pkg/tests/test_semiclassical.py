import numpy as np
import pytest

from drivendicke.semiclassical import (
    SemiclassicalParams, SemiclassicalState, rhs, integrate, c_ladder,
    steady_branch, branch_state, critical_amplitude,
)


def test_c_ladder_values():
    assert c_ladder(1) == (1.0,)
    assert c_ladder(2) == (4.0, 0.0)
    assert c_ladder(3) == (9.0, 1.0)
    assert c_ladder(4) == (16.0, 4.0, 0.0)


def test_critical_amplitudes_exact():
    g = 0.37
    assert critical_amplitude(1.0, g) == g
    assert critical_amplitude(4.0, g) == 2.0 * g
    assert critical_amplitude(0.0, g) == 0.0


def test_steady_branch_sums():
    params = SemiclassicalParams(n_emitters=2, g=0.1, drive_amplitude=0.08,
                                 kappa=0.01)
    branch = steady_branch(4.0, params)
    assert not branch.bimodal
    assert branch.sum_beta == pytest.approx(-0.4, abs=1e-15)
    assert branch.sum_zeta == pytest.approx(np.sqrt(4.0 - 0.64), abs=1e-12)


def test_steady_branch_bimodal_marker():
    params = SemiclassicalParams(n_emitters=1, g=0.01, drive_amplitude=0.02,
                                 kappa=0.01)
    branch = steady_branch(1.0, params)
    assert branch.bimodal
    assert branch.sum_beta is None
    with pytest.raises(ValueError, match="critical"):
        branch_state(params)


def test_steady_branch_rejects_off_ladder_c():
    params = SemiclassicalParams(n_emitters=2, g=0.1, drive_amplitude=0.01,
                                 kappa=0.01)
    with pytest.raises(ValueError, match="allowed"):
        steady_branch(2.0, params)


def test_branch_state_is_fixed_point():
    """rhs must vanish on the normal branch to 1e-12."""
    params = SemiclassicalParams(n_emitters=3, g=0.1, drive_amplitude=0.05,
                                 kappa=0.01)
    state = branch_state(params)
    d_alpha, d_beta, d_zeta = rhs(state, params)
    assert abs(d_alpha) < 1e-12
    assert np.max(np.abs(d_beta)) < 1e-12
    assert np.max(np.abs(d_zeta)) < 1e-12


def test_decoupled_cavity_closed_form():
    """g = 0: alpha(t) = (a0 - a_ss) e^{-(kappa + i dc) t} + a_ss with
    a_ss = -i drive / (2 (kappa + i dc)); beta rotates freely, zeta frozen.
    """
    kappa, dc, dx, drive = 0.1, 0.3, -0.2, 0.2
    params = SemiclassicalParams(n_emitters=1, g=0.0, drive_amplitude=drive,
                                 kappa=kappa, delta_c=dc, delta_x=dx)
    a0 = 0.4 + 0.2j
    b0 = 0.1 - 0.05j
    z0 = np.sqrt(1.0 - 4.0 * abs(b0) ** 2)
    state0 = SemiclassicalState(alpha=a0, beta=np.array([b0]),
                                zeta=np.array([z0]))
    t_end = 20.0
    traj = integrate(state0, params, t_end=t_end, dt=0.01, store_every=10)
    lam = kappa + 1j * dc
    a_ss = -0.5j * drive / lam
    expected_alpha = (a0 - a_ss) * np.exp(-lam * traj.times) + a_ss
    expected_beta = b0 * np.exp(-1j * dx * traj.times)
    assert np.max(np.abs(traj.alpha - expected_alpha)) < 1e-8
    assert np.max(np.abs(traj.beta[:, 0] - expected_beta)) < 1e-8
    assert np.max(np.abs(traj.zeta - z0)) < 1e-12


def test_integration_is_fourth_order():
    params = SemiclassicalParams(n_emitters=1, g=0.1, drive_amplitude=0.1,
                                 kappa=0.05)
    state0 = SemiclassicalState(alpha=1.5 + 0.8j, beta=np.array([0.2 + 0.3j]),
                                zeta=np.array([np.sqrt(1.0 - 4.0 * 0.13)]))
    ref = integrate(state0, params, t_end=50.0, dt=0.0125).alpha[-1]
    errs = []
    for dt in (0.4, 0.2):
        got = integrate(state0, params, t_end=50.0, dt=dt).alpha[-1]
        errs.append(abs(got - ref))
    assert errs[0] / errs[1] > 10.0


def test_conservation_on_perturbed_branch():
    params = SemiclassicalParams(n_emitters=1, g=0.1, drive_amplitude=0.05,
                                 kappa=0.01)
    base = branch_state(params)
    state0 = SemiclassicalState(alpha=base.alpha + 0.02,
                                beta=base.beta * np.exp(0.1j),
                                zeta=base.zeta)
    traj = integrate(state0, params, t_end=500.0, dt=0.01, store_every=50)
    assert traj.max_length_drift < 1e-10
    assert traj.max_c_drift < 1e-10
    # C stored along the trajectory stays put too
    assert np.max(np.abs(traj.total_c - traj.total_c[0])) < 1e-10


def test_step_size_precondition():
    params = SemiclassicalParams(n_emitters=1, g=0.5, drive_amplitude=0.0,
                                 kappa=0.01)
    state0 = SemiclassicalState(alpha=0.0, beta=np.array([0.0 + 0.0j]),
                                zeta=np.array([1.0]))
    with pytest.raises(ValueError, match="dt"):
        integrate(state0, params, t_end=1.0, dt=0.5)


def test_state_validation():
    with pytest.raises(ValueError):
        SemiclassicalState(alpha=0.0, beta=np.zeros(2, dtype=complex),
                           zeta=np.zeros(3))
    with pytest.raises(ValueError):
        SemiclassicalParams(n_emitters=0, g=0.1, drive_amplitude=0.0, kappa=0.01)
    with pytest.raises(ValueError):
        SemiclassicalParams(n_emitters=1, g=0.1, drive_amplitude=0.0, kappa=0.0)
