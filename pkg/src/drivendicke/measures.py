"""Distinguishability measures, non-Markovianity, and the cavity Husimi function.

Non-Markovianity is quantified as the summed trace-distance backflow of the
reduced emitter dynamics,

    N = max over initial pairs of  sum_{dD > 0} [D(t_{i+1}) - D(t_i)],

with D(t) the trace distance between the reduced emitter states grown from
the two initial states (each paired with the cavity vacuum).  The canonical
candidate pair uses the single-emitter states (|e> +- |g>)/sqrt(2), tensored
over emitters.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import dynamics as _dynamics
from . import model as _model


def trace_distance(rho1, rho2):
    """Trace distance 0.5 * ||rho1 - rho2||_1 for Hermitian matrices.

    The difference is sign-canonicalized before diagonalization so the result
    is bitwise symmetric under swapping the arguments.
    """
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape or rho1.ndim != 2 or rho1.shape[0] != rho1.shape[1]:
        raise ValueError("trace_distance needs two square matrices of equal shape")
    for rho in (rho1, rho2):
        if not _model.is_hermitian(rho, tol=1e-8):
            raise ValueError("trace_distance inputs must be Hermitian")
    delta = rho1 - rho2
    delta = 0.5 * (delta + delta.conj().T)
    flat = delta.ravel()
    nz = np.flatnonzero(flat != 0.0)
    if nz.size == 0:
        return 0.0
    lead = flat[nz[0]]
    if lead.real < 0.0 or (lead.real == 0.0 and lead.imag < 0.0):
        delta = -delta
    return 0.5 * float(np.abs(np.linalg.eigvalsh(delta)).sum())


@dataclass(frozen=True)
class StatePair:
    """Pair of emitter density matrices used as initial distinguishable states."""

    rho1: np.ndarray
    rho2: np.ndarray
    kind: str
    seed: int = None
    extrapolated: bool = False


def canonical_pair(n_emitters):
    """The superposition pair (|e> +- |g>)/sqrt(2) per emitter, tensored.

    For one and two emitters this is the pair maximizing the trace-distance
    backflow; beyond two it is the tensor-power generalization and is marked
    extrapolated.
    """
    if n_emitters < 1:
        raise ValueError("n_emitters must be >= 1")
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)   # (|g>, |e>) components
    minus = np.array([-1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    v1 = np.array([1.0], dtype=complex)
    v2 = np.array([1.0], dtype=complex)
    for _ in range(n_emitters):
        v1 = np.kron(v1, plus)
        v2 = np.kron(v2, minus)
    return StatePair(rho1=np.outer(v1, v1.conj()), rho2=np.outer(v2, v2.conj()),
                     kind="canonical", seed=None, extrapolated=n_emitters > 2)


def random_pure_pair(n_emitters, seed):
    """Two independent Haar-random pure emitter states from one seeded stream."""
    if n_emitters < 1:
        raise ValueError("n_emitters must be >= 1")
    rng = np.random.default_rng(seed)
    dim = 2 ** n_emitters
    vecs = []
    for _ in range(2):
        z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        vecs.append(z / np.linalg.norm(z))
    return StatePair(rho1=np.outer(vecs[0], vecs[0].conj()),
                     rho2=np.outer(vecs[1], vecs[1].conj()),
                     kind="random", seed=seed)


def _batched_trace_distance_2x2(mats):
    """0.5 * ||.||_1 of a (..., 2, 2) stack of Hermitian matrices, closed form."""
    a = mats[..., 0, 0].real
    d = mats[..., 1, 1].real
    off = mats[..., 0, 1]
    tr = a + d
    det = a * d - (off.real ** 2 + off.imag ** 2)
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    return 0.5 * np.where(det >= 0.0, np.abs(tr), disc)


def _distance_trajectories(system, deltas0, grid, reduce_to="emitters", chunk=512):
    """Trace-distance trajectories for a batch of initial state differences.

    deltas0 holds Hermitian, traceless Floquet-frame differences, one slice
    per pair.  The periodic parts repeat after one period, so the lab-frame
    map is precomputed at the grid offsets within a single period.
    """
    basis = system.basis
    space = system.space
    dim = basis.n_states
    eps = basis.quasienergies
    g_mat = system.z + 1j * (eps[:, None] - eps[None, :])
    np.fill_diagonal(g_mat, 0.0)

    deltas0 = np.asarray(deltas0, dtype=complex)
    n_pairs = deltas0.shape[0]
    dpop0 = np.einsum("bii->bi", deltas0).real.copy()
    doff = deltas0.copy()
    doff[:, np.arange(dim), np.arange(dim)] = 0.0

    times = grid.times
    n_t = grid.n_points
    n_off = grid.points_per_period if basis.driven else 1
    # chunks aligned with whole periods keep the offset gather simple
    chunk = max(n_off, (chunk // n_off) * n_off)

    ne = space.emitter_dim
    if reduce_to == "emitters":
        k_full = np.empty((n_off, dim * dim, ne * ne), dtype=complex)
        k_diag = np.empty((n_off, dim, ne * ne), dtype=complex)
        for j in range(n_off):
            s_rows = basis.states_at(j * grid.dt)
            s_resh = s_rows.reshape(dim, space.cavity_dim, ne)
            kj = np.einsum("mca,ncb->mnab", s_resh, s_resh.conj())
            k_full[j] = kj.reshape(dim * dim, ne * ne)
            k_diag[j] = np.einsum("nnab->nab", kj).reshape(dim, ne * ne)
        out_dim = ne
    elif reduce_to is None:
        phi_cols = np.empty((n_off, dim, dim), dtype=complex)
        for j in range(n_off):
            phi_cols[j] = basis.states_at(j * grid.dt).T
        out_dim = dim
    else:
        raise ValueError("reduce_to must be 'emitters' or None")

    e_step = expm(system.w * grid.dt)
    dist = np.empty((n_pairs, n_t))
    cur = dpop0.T.copy()
    start = 0
    while start < n_t:
        stop = min(start + chunk, n_t)
        nt_c = stop - start
        pop = np.empty((nt_c, dim, n_pairs))
        for k in range(nt_c):
            pop[k] = cur
            cur = e_step @ cur
        t_c = times[start:stop]
        cfac = np.exp(-g_mat[None, :, :] * t_c[:, None, None])
        off_idx = (np.arange(start, stop)) % n_off
        if reduce_to == "emitters":
            k_c = k_full[off_idx]
            kd_c = k_diag[off_idx]
            for b in range(n_pairs):
                m_flat = (cfac * doff[b]).reshape(nt_c, 1, dim * dim)
                red = np.matmul(m_flat, k_c)[:, 0, :]
                red += np.matmul(pop[:, None, :, b], kd_c)[:, 0, :]
                red = red.reshape(nt_c, ne, ne)
                red = 0.5 * (red + red.conj().transpose(0, 2, 1))
                if ne == 2:
                    dist[b, start:stop] = _batched_trace_distance_2x2(red)
                else:
                    evs = np.linalg.eigvalsh(red)
                    dist[b, start:stop] = 0.5 * np.abs(evs).sum(axis=-1)
        else:
            p_c = phi_cols[off_idx]
            for b in range(n_pairs):
                mat = cfac * doff[b]
                np.einsum("tii->ti", mat)[...] = pop[:, :, b]
                full = p_c @ mat @ p_c.conj().transpose(0, 2, 1)
                full = 0.5 * (full + full.conj().transpose(0, 2, 1))
                evs = np.linalg.eigvalsh(full)
                dist[b, start:stop] = 0.5 * np.abs(evs).sum(axis=-1)
        start = stop
    return dist


@dataclass(frozen=True)
class NonMarkovResult:
    """Backflow measure for one initial pair, with convergence diagnostics."""

    value: float
    pair: StatePair
    times: np.ndarray = None
    distances: np.ndarray = None
    halving_delta: float = None
    tail_fraction: float = 0.0
    converged: bool = True
    warnings: tuple = ()


def _positive_increments(distances, times):
    incs = np.diff(distances)
    pos = incs[incs > 0.0].sum()
    t_max = times[-1]
    tail_mask = (incs > 0.0) & (times[1:] > 0.1 * t_max)
    tail = incs[tail_mask].sum()
    fraction = float(tail / pos) if pos > 0.0 else 0.0
    return float(pos), fraction


def _convergence_verdict(value, halving_delta, tail_fraction):
    # values at the numerical-noise floor count as converged zeros
    floor = 1e-9
    if abs(value) <= floor:
        return halving_delta is None or halving_delta <= floor
    ok = tail_fraction <= 0.01
    if halving_delta is not None:
        ok = ok and halving_delta <= 0.02 * abs(value)
    return ok


def _pair_deltas(pairs, system):
    deltas = np.empty((len(pairs), system.basis.n_states, system.basis.n_states),
                      dtype=complex)
    for i, pair in enumerate(pairs):
        tot1 = _model.embed_emitter_state(pair.rho1, system.space)
        tot2 = _model.embed_emitter_state(pair.rho2, system.space)
        f1 = _dynamics.project_initial(tot1, system.basis, validate=False)
        f2 = _dynamics.project_initial(tot2, system.basis, validate=False)
        deltas[i] = f1.rho0 - f2.rho0
    return deltas


def nonmarkovianity(pair, system, grid=None, check_convergence=True):
    """Summed trace-distance backflow of the reduced emitter dynamics.

    Both pair members start with the cavity in the vacuum.  One grid-halving
    rerun and the late-horizon contribution serve as convergence diagnostics.
    """
    for rho in (pair.rho1, pair.rho2):
        if rho.shape[0] != system.space.emitter_dim:
            raise ValueError("pair dimension does not match the emitter space")
        _model.check_density_matrix(rho, tol=1e-8)
    if grid is None:
        grid = _dynamics.build_time_grid(system)
    deltas = _pair_deltas([pair], system)
    distances = _distance_trajectories(system, deltas, grid)[0]
    value, tail_fraction = _positive_increments(distances, grid.times)
    halving_delta = None
    if check_convergence:
        fine = grid.halved()
        dist_fine = _distance_trajectories(system, deltas, fine)[0]
        value_fine, _ = _positive_increments(dist_fine, fine.times)
        halving_delta = abs(value - value_fine)
    converged = _convergence_verdict(value, halving_delta, tail_fraction)
    notes = () if converged else ("non-Markovianity diagnostics exceeded tolerance",)
    return NonMarkovResult(value=value, pair=pair, times=grid.times,
                           distances=distances, halving_delta=halving_delta,
                           tail_fraction=tail_fraction, converged=converged,
                           warnings=notes)


@dataclass(frozen=True)
class MaximizeResult:
    """Best pair and the full sample table from a non-Markovianity search."""

    best: NonMarkovResult
    table: tuple           # rows (kind, seed, value, converged)
    values: np.ndarray


def maximize_nonmarkovianity(system, n_samples=200, seed=0, grid=None,
                             check_convergence=True):
    """Evaluate the canonical pair plus n_samples seeded random pairs.

    All pairs share one batched trajectory evaluation.  Returns the maximum
    (ties resolved in favor of the canonical pair, which comes first) along
    with the per-pair table for export.
    """
    pairs = [canonical_pair(system.params.n_emitters)]
    pairs += [random_pure_pair(system.params.n_emitters, seed + i)
              for i in range(n_samples)]
    if grid is None:
        grid = _dynamics.build_time_grid(system)
    deltas = _pair_deltas(pairs, system)
    dist = _distance_trajectories(system, deltas, grid)
    values = np.empty(len(pairs))
    tails = np.empty(len(pairs))
    for i in range(len(pairs)):
        values[i], tails[i] = _positive_increments(dist[i], grid.times)
    halving = [None] * len(pairs)
    if check_convergence:
        fine = grid.halved()
        dist_fine = _distance_trajectories(system, deltas, fine)
        for i in range(len(pairs)):
            value_fine, _ = _positive_increments(dist_fine[i], fine.times)
            halving[i] = abs(values[i] - value_fine)
    results = []
    for i, pair in enumerate(pairs):
        conv = _convergence_verdict(values[i], halving[i], tails[i])
        results.append(NonMarkovResult(
            value=float(values[i]), pair=pair,
            halving_delta=halving[i], tail_fraction=float(tails[i]),
            converged=conv))
    best_idx = int(np.argmax(values))
    best = replace(results[best_idx], times=grid.times,
                   distances=dist[best_idx])
    table = tuple((r.pair.kind, r.pair.seed, r.value, r.converged) for r in results)
    return MaximizeResult(best=best, table=table, values=values)


@dataclass(frozen=True)
class DeltaNResult:
    """Drive-induced change of the maximized non-Markovianity."""

    value: float
    driven_value: float
    undriven_value: float
    noise: float
    converged: bool


def delta_n(system, n_samples=0, seed=0, grid=None, check_convergence=True):
    """|N(drive on) - N(drive off)| at otherwise identical parameters.

    system must be a driven PreparedSystem; the undriven twin is built
    internally through the static route.  noise reports the summed
    grid-halving deltas of the two maximized values.
    """
    if system.params.drive_amplitude <= 0.0:
        raise ValueError("delta_n needs a driven system")
    res_on = maximize_nonmarkovianity(system, n_samples=n_samples, seed=seed,
                                      grid=grid, check_convergence=check_convergence)
    params_off = replace(system.params, drive_amplitude=0.0)
    system_off = _dynamics.prepare_system(params_off, system.space, system.spectral)
    res_off = maximize_nonmarkovianity(system_off, n_samples=n_samples, seed=seed,
                                       grid=grid, check_convergence=check_convergence)
    noise = 0.0
    for res in (res_on, res_off):
        if res.best.halving_delta is not None:
            noise += res.best.halving_delta
    return DeltaNResult(value=abs(res_on.best.value - res_off.best.value),
                        driven_value=res_on.best.value,
                        undriven_value=res_off.best.value,
                        noise=noise,
                        converged=res_on.best.converged and res_off.best.converged)


@dataclass(frozen=True)
class AlphaGrid:
    """Rectangular grid in the complex plane for phase-space functions."""

    re_min: float
    re_max: float
    n_re: int
    im_min: float
    im_max: float
    n_im: int

    def __post_init__(self):
        if self.re_max <= self.re_min or self.im_max <= self.im_min:
            raise ValueError("grid extents must be increasing")
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def re_axis(self):
        return np.linspace(self.re_min, self.re_max, self.n_re)

    @property
    def im_axis(self):
        return np.linspace(self.im_min, self.im_max, self.n_im)


@dataclass(frozen=True)
class HusimiField:
    """Husimi function samples Q[i_im, i_re] with truncation-health flags."""

    re_axis: np.ndarray
    im_axis: np.ndarray
    q: np.ndarray
    trunc_ok: np.ndarray
    norm_estimate: float
    warnings: tuple = ()


def husimi(rho_cavity, grid):
    """Q(alpha) = <alpha|rho|alpha> with Fock-truncated coherent states.

    trunc_ok marks points with |alpha|^2 <= photon_cutoff / 2, where the
    truncated coherent state still carries essentially all its weight.
    """
    rho_cavity = np.asarray(rho_cavity, dtype=complex)
    _model.check_density_matrix(rho_cavity, tol=1e-8)
    n_fock = rho_cavity.shape[0]
    alphas = (grid.re_axis[None, :] + 1j * grid.im_axis[:, None]).ravel()
    coh = np.empty((alphas.size, n_fock), dtype=complex)
    coh[:, 0] = np.exp(-0.5 * np.abs(alphas) ** 2)
    for n in range(1, n_fock):
        coh[:, n] = coh[:, n - 1] * alphas / np.sqrt(n)
    q = np.einsum("pa,ab,pb->p", coh.conj(), rho_cavity, coh).real
    if q.min() < -1e-10:
        raise ValueError(f"Husimi function negative ({q.min():.3e}); state not positive")
    q = np.clip(q, 0.0, None)
    q = q.reshape(grid.n_im, grid.n_re)
    trunc_ok = (np.abs(alphas) ** 2 <= 0.5 * (n_fock - 1)).reshape(q.shape)
    d_re = grid.re_axis[1] - grid.re_axis[0]
    d_im = grid.im_axis[1] - grid.im_axis[0]
    norm = float(q.sum() * d_re * d_im / np.pi)
    notes = ()
    if not trunc_ok.all():
        notes = (f"{int((~trunc_ok).sum())} grid points beyond the truncation "
                 "health bound |alpha|^2 <= photon_cutoff/2",)
    return HusimiField(re_axis=grid.re_axis, im_axis=grid.im_axis, q=q,
                       trunc_ok=trunc_ok, norm_estimate=norm, warnings=notes)


def detect_modes(field, rel_threshold=0.05):
    """Local maxima of the Husimi field above rel_threshold * max(Q).

    Candidate cells at least as large as all eight neighbors are merged when
    adjacent (plateaus count once); each merged component contributes one
    mode at its strongest cell.  Returns (re, im, q) triples sorted by
    descending Q.
    """
    q = field.q
    peak = q.max()
    if peak <= 0.0:
        return []
    padded = np.pad(q, 1, constant_values=-np.inf)
    neighbor_max = np.full_like(q, -np.inf)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            view = padded[1 + di:1 + di + q.shape[0], 1 + dj:1 + dj + q.shape[1]]
            neighbor_max = np.maximum(neighbor_max, view)
    cand = (q >= neighbor_max) & (q > rel_threshold * peak)
    coords = list(zip(*np.nonzero(cand)))
    seen = set()
    modes = []
    cand_set = set(coords)
    for cell in coords:
        if cell in seen:
            continue
        stack = [cell]
        component = []
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            component.append(cur)
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    nxt = (cur[0] + di, cur[1] + dj)
                    if nxt in cand_set and nxt not in seen:
                        stack.append(nxt)
        best = max(component, key=lambda c: q[c])
        modes.append((float(field.re_axis[best[1]]), float(field.im_axis[best[0]]),
                      float(q[best])))
    modes.sort(key=lambda m: -m[2])
    return modes
