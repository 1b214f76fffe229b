"""Lindblad dynamics of the squeezed Kerr oscillator.

The generator is

    L rho = -i [H, rho] + kappa1 (1 + n_th) D[a] rho + kappa1 n_th D[a^dag] rho
            + kappa_phi D[a^dag a] rho,

with ``D[c] rho = c rho c^dag - {c^dag c, rho}/2``.  Superoperators act on
column-stacked density matrices, ``vec(A X B) = (B^T kron A) vec(X)``.

Every jump operator changes photon number by at most one and every
Hamiltonian term conserves parity, so the generator never mixes Fock
elements ``rho_mn`` with ``m + n`` even and odd.  The odd block contains all
even/odd coherences, which is where the cat-qubit ``X`` observable lives,
and lifetime runs only propagate that block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize, stats
from scipy.integrate import solve_ivp

from .errors import (
    ConventionError,
    EigsolverError,
    FitError,
    ShapeError,
    SizeError,
    ToleranceError,
)
from .fock import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    annihilation,
    cat_basis,
    coherent,
)
from .spectrum import SKParams, build_hamiltonian, default_space, diagonalize

__all__ = [
    "DissipationParams",
    "EffLindbladResult",
    "ExpFit",
    "Trajectory",
    "choose_gamma",
    "coherent_lifetime",
    "eff_lindbladian",
    "evolve",
    "fit_exponential",
    "lindbladian_apply",
    "lindbladian_spectrum_full",
    "superoperator",
]

FULL_SPECTRUM_MAX_DIM = 40


@dataclass(frozen=True)
class DissipationParams:
    """Dissipation channels and quasi-static detuning noise.

    Attributes:
        kappa1: single-photon loss rate.
        n_th: thermal occupation of the bath.
        kappa_phi: white-noise dephasing rate.
        sigma_delta: standard deviation of the quasi-static detuning.
        n_samples: detuning draws used when ``sigma_delta > 0``.
        seed: seed of the stratified detuning draws.
    """

    kappa1: float = 0.0
    n_th: float = 0.0
    kappa_phi: float = 0.0
    sigma_delta: float = 0.0
    n_samples: int = 33
    seed: int = 0

    def __post_init__(self):
        for name in ("kappa1", "n_th", "kappa_phi", "sigma_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def collapse_operators(self, space: HilbertSpace) -> list[tuple[float, np.ndarray]]:
        """``(rate, operator)`` pairs with non-zero rate."""
        a = annihilation(space).matrix
        ops = [
            (self.kappa1 * (1.0 + self.n_th), a),
            (self.kappa1 * self.n_th, a.conj().T),
            (self.kappa_phi, a.conj().T @ a),
        ]
        return [(r, c) for r, c in ops if r > 0]

    def detuning_samples(self, delta0: float) -> np.ndarray:
        """Stratified Gaussian draws ``delta0 + sigma * Phi^-1((k + U_k)/n)``."""
        if self.sigma_delta == 0.0:
            return np.array([delta0])
        rng = np.random.default_rng(self.seed)
        n = self.n_samples
        u = (np.arange(n) + rng.random(n)) / n
        return delta0 + self.sigma_delta * stats.norm.ppf(u)


# -- generators -----------------------------------------------------------------

def _as_array(rho, dim: int | None = None) -> np.ndarray:
    m = rho.matrix if isinstance(rho, (DensityMatrix, Operator)) else np.asarray(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or (dim is not None and m.shape[0] != dim):
        raise ShapeError(f"expected a ({dim}, {dim}) matrix, got {m.shape}")
    return m


def lindbladian_apply(rho, H, diss: DissipationParams) -> np.ndarray:
    """Time derivative ``L rho`` as a dense matrix.

    Raises:
        ShapeError: if ``rho`` and ``H`` have different shapes.
    """
    Hm = _as_array(H)
    r = _as_array(rho, Hm.shape[0])
    out = -1j * (Hm @ r - r @ Hm)
    for rate, c in diss.collapse_operators(HilbertSpace(Hm.shape[0])):
        cd = c.conj().T
        cdc = cd @ c
        out += rate * (c @ r @ cd - 0.5 * (cdc @ r + r @ cdc))
    return out


def superoperator(H, diss: DissipationParams, sparse: bool = False):
    """Matrix of the generator on column-stacked density matrices."""
    Hm = _as_array(H)
    dim = Hm.shape[0]
    lib = sp if sparse else np
    eye = sp.identity(dim, format="csr") if sparse else np.eye(dim)
    Hs = sp.csr_matrix(Hm) if sparse else Hm
    L = -1j * (lib.kron(eye, Hs) - lib.kron(Hs.T, eye))
    for rate, c in diss.collapse_operators(HilbertSpace(dim)):
        c = sp.csr_matrix(c) if sparse else c
        cdc = c.conj().T @ c
        L = L + rate * (lib.kron(c.conj(), c) - 0.5 * lib.kron(eye, cdc)
                        - 0.5 * lib.kron(cdc.T, eye))
    return L.tocsr() if sparse else L


def parity_block_indices(dim: int, odd: bool) -> np.ndarray:
    """Column-stacked indices of ``rho_mn`` with ``m + n`` odd (or even)."""
    m, n = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    flat = (m + n).flatten(order="F") % 2
    return np.nonzero(flat == (1 if odd else 0))[0]


def _block(L: sp.csr_matrix, idx: np.ndarray) -> sp.csr_matrix:
    return L[idx][:, idx].tocsr()


# -- fitting --------------------------------------------------------------------

@dataclass(frozen=True)
class ExpFit:
    """``amplitude * exp(-t / T) + offset`` with relative RMS ``residual``."""

    amplitude: float
    T: float
    offset: float
    residual: float

    def __call__(self, t):
        return self.amplitude * np.exp(-np.asarray(t) / self.T) + self.offset


def fit_exponential(times, values, offset: bool = True) -> ExpFit:
    """Least-squares fit of ``A exp(-t/T) + C``.

    A log-linear fit supplies the starting point and Levenberg-Marquardt
    refines it.  ``residual`` is the RMS misfit divided by ``|A|``.

    Raises:
        FitError: for fewer than 8 points, flat data or a failed fit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values)
    if np.iscomplexobj(y):
        if np.abs(y.imag).max() > 1e-9 * max(np.abs(y).max(), 1e-300):
            raise FitError("values must be real")
        y = y.real
    y = y.astype(float)
    if t.size < 8 or t.size != y.size:
        raise FitError("need at least 8 (time, value) pairs")
    span = np.ptp(y)
    if span <= 1e-12 * max(np.abs(y).max(), 1e-300) or span == 0.0:
        raise FitError("data are constant; decay time is not identifiable")

    # log-linear start on the part of the curve that is clearly above the tail
    c0 = y[-1] if offset else 0.0
    z = y - c0
    sign = 1.0 if z[0] >= 0 else -1.0
    z = sign * z
    mask = z > 0.05 * z[0]
    if mask.sum() >= 2:
        slope, icept = np.polyfit(t[mask], np.log(z[mask]), 1)
    else:
        slope, icept = -1.0 / max(np.ptp(t), 1e-300), math.log(max(z[0], 1e-300))
    T0 = -1.0 / slope if slope < 0 else np.ptp(t)
    A0 = sign * math.exp(icept)

    # fit in scaled variables: A/yscale, log(T/tscale), C/yscale
    tscale = max(np.ptp(t), 1e-300)
    yscale = max(np.abs(y).max(), 1e-300)

    def resid(q):
        C = q[2] if offset else 0.0
        return q[0] * np.exp(-t / (tscale * np.exp(q[1]))) + C - y / yscale

    q0 = [A0 / yscale, math.log(T0 / tscale)] + ([c0 / yscale] if offset else [])
    try:
        sol = optimize.least_squares(resid, q0, method="lm", xtol=1e-14, ftol=1e-14,
                                     gtol=1e-14, max_nfev=20000)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"fit failed: {exc}") from exc
    if not sol.success:
        raise FitError(f"fit did not converge: {sol.message}")
    A = sol.x[0] * yscale
    T = tscale * math.exp(sol.x[1])
    C = sol.x[2] * yscale if offset else 0.0
    if A == 0.0 or not np.isfinite(T):
        raise FitError("fitted amplitude vanished")
    rms = math.sqrt(np.mean((sol.fun * yscale) ** 2))
    return ExpFit(float(A), float(T), float(C), float(rms / abs(A)))


# -- time evolution -------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Time series of expectation values and an optional exponential fit."""

    times: np.ndarray
    observables: Mapping[str, np.ndarray]
    fit: ExpFit | None = None
    final: np.ndarray | None = field(default=None, repr=False)
    states: list | None = field(default=None, repr=False)
    meta: Mapping = field(default_factory=dict)

    @property
    def T(self) -> float | None:
        return None if self.fit is None else self.fit.T


def _check_state(r: np.ndarray, t: float, trace_tol: float) -> None:
    tr = np.trace(r).real
    if abs(tr - 1.0) > trace_tol:
        raise ToleranceError(f"trace drifted to {tr:.12g} at t={t:.6g}")
    herm = np.abs(r - r.conj().T).max()
    if herm > 1e-8:
        raise ToleranceError(f"Hermiticity drift {herm:.3g} at t={t:.6g}")
    lam = np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min()
    if lam < -1e-6:
        raise ToleranceError(f"negative eigenvalue {lam:.3g} at t={t:.6g}")


def evolve(rho0, H, diss: DissipationParams, t_grid, observables: Mapping | None = None,
           method: str = "DOP853", rtol: float = 1e-8, atol: float = 1e-10,
           store_states: bool = False, trace_tol: float = 1e-6) -> Trajectory:
    """Integrate the master equation and record expectation values.

    Args:
        rho0: initial DensityMatrix, Ket or matrix.
        H: Hamiltonian (Operator or matrix).
        diss: dissipation channels.
        t_grid: increasing output times starting at the initial time.
        observables: name -> Operator or matrix.  ``trace`` and ``purity``
            are always recorded.
        method: any :func:`scipy.integrate.solve_ivp` explicit method, or
            ``"propagator"`` to step with the exact matrix exponential of
            the superoperator (uniform grids only).

    Raises:
        ToleranceError: on trace drift above ``trace_tol``, Hermiticity drift
            above 1e-8 or eigenvalues below -1e-6.
    """
    Hm = _as_array(H)
    dim = Hm.shape[0]
    if hasattr(rho0, "dm"):
        rho0 = rho0.dm()
    r0 = np.array(_as_array(rho0, dim), dtype=complex)
    t = np.asarray(t_grid, dtype=float)
    obs = {k: _as_array(v, dim) for k, v in (observables or {}).items()}

    if method == "propagator":
        dt = np.diff(t)
        if dt.size and np.ptp(dt) > 1e-9 * dt.max():
            raise ValueError("the propagator method needs a uniform time grid")
        L = superoperator(Hm, diss)
        P = sla.expm(L * dt[0]) if dt.size else np.eye(dim * dim)
        vecs = [r0.flatten(order="F")]
        for _ in range(t.size - 1):
            vecs.append(P @ vecs[-1])
        states = [v.reshape(dim, dim, order="F") for v in vecs]
    else:
        def rhs(_t, y):
            return lindbladian_apply(y.reshape(dim, dim), Hm, diss).reshape(-1)

        sol = solve_ivp(rhs, (t[0], t[-1]), r0.reshape(-1), method=method, t_eval=t,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise ToleranceError(f"integrator failed: {sol.message}")
        states = [sol.y[:, k].reshape(dim, dim) for k in range(t.size)]

    series = {"trace": [], "purity": []}
    series.update({k: [] for k in obs})
    for tk, r in zip(t, states):
        _check_state(r, tk, trace_tol)
        series["trace"].append(np.trace(r).real)
        series["purity"].append(np.real(np.vdot(r, r)))
        for k, o in obs.items():
            series[k].append(np.trace(o @ r))
    out = {k: np.asarray(v) for k, v in series.items()}
    for k in obs:
        if np.abs(out[k].imag).max() < 1e-10:
            out[k] = out[k].real
    return Trajectory(t, out, None, states[-1], states if store_states else None)


# -- lifetime runs --------------------------------------------------------------

def _lifetime_setup(params: SKParams, space: HilbertSpace):
    """Initial state and X observable for the lifetime run."""
    dim = space.dim
    if params.eps2 == 0.0:
        psi = np.zeros(dim, dtype=complex)
        psi[:2] = 1.0 / math.sqrt(2.0)
        X = np.zeros((dim, dim))
        X[0, 1] = X[1, 0] = 1.0
        return np.outer(psi, psi.conj()), X, 0.0
    alpha = math.sqrt(params.well_alpha2)
    psi = coherent(space, alpha).amplitudes
    b = cat_basis(space, alpha)
    cp, cm = b.even.amplitudes, b.odd.amplitudes
    X = np.outer(cp, cm.conj()) + np.outer(cm, cp.conj())
    return np.outer(psi, psi.conj()), X, alpha


def _slowest_rate(Lodd: sp.csr_matrix) -> float:
    try:
        vals = spla.eigs(Lodd.tocsc(), k=min(4, Lodd.shape[0] - 2), sigma=0.0,
                         which="LM", return_eigenvectors=False)
    except (spla.ArpackNoConvergence, RuntimeError) as exc:
        raise EigsolverError(f"shift-invert eigensolver failed: {exc}") from exc
    return float(np.min(-vals.real))


def coherent_lifetime(params: SKParams, diss: DissipationParams,
                      space: HilbertSpace | None = None, t_max: float | None = None,
                      n_points: int = 60, max_residual: float = 0.05) -> Trajectory:
    """Phase-flip time ``T_X`` of a coherent state held by the squeezing drive.

    The initial state is the coherent state at the top of one well
    (``alpha^2 = (eps2 - Delta/2)/K``) and the observable is the cat-qubit
    ``X``.  For ``eps2 = 0`` the state ``(|0> + |1>)/sqrt 2`` and the
    coherence ``2 Re rho_01`` are used instead.  Only the parity-odd block of
    the generator is propagated, with its exact matrix exponential on a
    uniform grid of ``n_points`` times.  Without an explicit ``t_max`` the
    window is five times an estimate of ``T_X`` (slowest eigenvalue of the
    block, or the 1/e time of the averaged signal), refined once after the
    first fit.  Quasi-static detuning noise is averaged over stratified
    Gaussian draws.

    Raises:
        FitError: if the exponential fit misfit exceeds ``max_residual``.
    """
    space = space or default_space(params)
    dim = space.dim
    rho0, X, _ = _lifetime_setup(params, space)
    odd = parity_block_indices(dim, odd=True)
    v0 = rho0.flatten(order="F")[odd]
    xvec = X.T.flatten(order="F")[odd]

    deltas = diss.detuning_samples(params.delta)
    blocks = [_block(superoperator(build_hamiltonian(params.replace(delta=float(d)), space).matrix,
                                   diss, sparse=True), odd) for d in deltas]

    def run(tmax):
        times = np.linspace(0.0, tmax, n_points)
        dt = times[1] - times[0]
        acc = np.zeros(n_points)
        for Lb in blocks:
            P = sla.expm(Lb.toarray() * dt)
            v = v0.copy()
            for k in range(n_points):
                acc[k] += np.real(xvec @ v)
                v = P @ v
        return times, acc / len(blocks)

    def efold(times, sig):
        below = np.nonzero(np.abs(sig) < abs(sig[0]) / math.e)[0]
        return None if below.size == 0 else times[below[0]]

    explicit = t_max is not None
    if not explicit:
        t_max = 5.0 / np.mean([_slowest_rate(Lb) for Lb in blocks])
    times, sig = run(t_max)
    if not explicit:
        te = efold(times, sig)
        if te is not None and te < 0.5 * t_max / 5.0:
            t_max = 5.0 * te
            times, sig = run(t_max)
    fit = fit_exponential(times, sig)
    if not explicit and not 0.7 < fit.T * 5.0 / t_max < 1.4:
        t_max = 5.0 * fit.T
        times, sig = run(t_max)
        fit = fit_exponential(times, sig)
    if fit.residual > max_residual:
        raise FitError(f"exponential misfit {fit.residual:.3g} exceeds {max_residual}")
    meta = {"dim": dim, "n_samples": len(deltas), "t_max": t_max}
    return Trajectory(times, {"X": sig}, fit, meta=meta)


# -- spectra --------------------------------------------------------------------

@dataclass(frozen=True)
class LindbladSpectrum:
    """Eigenvalues of the full generator, split by parity block."""

    eigenvalues: np.ndarray
    even: np.ndarray
    odd: np.ndarray
    zero_mode: complex
    slowest: complex

    @property
    def T_X(self) -> float:
        return -1.0 / self.slowest.real


def lindbladian_spectrum_full(params: SKParams, diss: DissipationParams,
                              space: HilbertSpace | None = None) -> LindbladSpectrum:
    """Dense eigen-decomposition of the full generator.

    The two parity blocks are diagonalised separately.  ``slowest`` is the
    eigenvalue with the smallest non-zero decay rate.

    Raises:
        SizeError: if ``dim`` exceeds 40.
    """
    space = space or default_space(params)
    if space.dim > FULL_SPECTRUM_MAX_DIM:
        raise SizeError(f"dim {space.dim} exceeds the dense cap {FULL_SPECTRUM_MAX_DIM}")
    H = build_hamiltonian(params, space).matrix
    L = superoperator(H, diss, sparse=True)
    out = {}
    for name, odd in (("even", False), ("odd", True)):
        blk = _block(L, parity_block_indices(space.dim, odd)).toarray()
        try:
            out[name] = sla.eigvals(blk)
        except sla.LinAlgError as exc:
            raise EigsolverError(str(exc)) from exc
    allv = np.concatenate([out["even"], out["odd"]])
    k0 = int(np.argmin(np.abs(allv)))
    zero = allv[k0]
    rest = np.delete(allv, k0)
    slowest = rest[int(np.argmin(-rest.real))]
    return LindbladSpectrum(allv, out["even"], out["odd"], complex(zero), complex(slowest))


@dataclass(frozen=True)
class EffLindbladResult:
    """Truncated generator on the in-manifold coherences of the first ``gamma`` pairs."""

    gamma: int
    delta_n: np.ndarray
    A_n: np.ndarray
    B: np.ndarray
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    T_X_gamma: float = 0.0


def eff_lindbladian(params: SKParams, diss: DissipationParams, gamma: int,
                    space: HilbertSpace | None = None,
                    include_hamiltonian: bool = True) -> EffLindbladResult:
    """Effective ``2 gamma x 2 gamma`` generator of the cat coherences.

    Basis order: ``|n+><n-|`` for ``n < gamma``, then ``|n-><n+|``.  With
    ``D = diag(i delta_n)``, ``A = diag(A_n)`` and ``B_mn`` as below,

        L = [[-D, 0], [0, D]]
            + kappa1 (1 + n_th) [[-A, B], [B, -A]]
            + kappa1 n_th [[-A - I, B^T], [B^T, -A - I]]

    where ``A_n = (<n+|n|n+> + <n-|n|n->)/2`` and
    ``B_mn = <m-|a|n+><n-|a^dag|m+>``.  ``include_hamiltonian=False`` drops
    the splitting block.  Only loss and gain enter; ``kappa_phi`` is ignored.

    Raises:
        ConventionError: if ``B`` comes out complex beyond 1e-8, which means
            the eigenvector phases are not real.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    res = diagonalize(params, space, n_levels=gamma)
    space = res.space
    a = annihilation(space).matrix
    n_op = a.conj().T @ a
    P = res.vectors[1]
    M = res.vectors[-1]
    if P.shape[1] < gamma or M.shape[1] < gamma:
        raise ValueError("space too small for the requested gamma")
    delta = res.delta_n[:gamma]
    A = 0.5 * (np.real(np.einsum("ij,ik,kj->j", P.conj(), n_op, P))
               + np.real(np.einsum("ij,ik,kj->j", M.conj(), n_op, M)))
    a_mp = M.conj().T @ a @ P              # <m-|a|n+>
    ad_nm = M.conj().T @ a.conj().T @ P    # <n-|a^dag|m+> at [n, m]
    B = a_mp * ad_nm.T
    if np.abs(B.imag).max() > 1e-8 * max(np.abs(B).max(), 1.0):
        raise ConventionError("B is complex: eigenvector phases are not real")
    B = B.real
    I = np.eye(gamma)
    Am = np.diag(A)
    k1, nth = diss.kappa1, diss.n_th
    LD = k1 * (1 + nth) * np.block([[-Am, B], [B, -Am]]) \
        + k1 * nth * np.block([[-Am - I, B.T], [B.T, -Am - I]])
    L = LD.astype(complex)
    if include_hamiltonian:
        D = np.diag(1j * delta)
        L = L + np.block([[-D, np.zeros_like(D)], [np.zeros_like(D), D]])
    vals = np.linalg.eigvals(L)
    slow = vals[int(np.argmin(-vals.real))]
    T = -1.0 / slow.real if slow.real < 0 else math.inf
    return EffLindbladResult(gamma, delta, A, B, L, vals, float(T))


def choose_gamma(params: SKParams, kappa1: float, space: HilbertSpace | None = None,
                 max_pairs: int = 20) -> int:
    """Number of leading pairs whose splitting is below ``kappa1``."""
    res = diagonalize(params, space, n_levels=max_pairs)
    small = np.abs(res.delta_n) < kappa1
    gamma = 0
    while gamma < small.size and small[gamma]:
        gamma += 1
    return max(gamma, 1)
