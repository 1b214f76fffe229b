"""Phase-space pictures of the squeezed Kerr oscillator.

Quadratures follow ``a = (x + i p)/sqrt(2)``.  The Weyl symbol of the
Hamiltonian (up to a constant) is

    H_W(x, p) = (K - Delta/2) r^2 - K/4 r^4 + eps2 (x^2 - p^2),   r^2 = x^2 + p^2,

and dropping the ``K r^2`` ordering correction gives the classical
Hamiltonian used for Liouville ensembles and the separatrix action.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import GridError, ToleranceError
from .fock import wigner_of
from .lindblad import DissipationParams, lindbladian_apply
from .spectrum import SKParams, classical_hamiltonian

__all__ = [
    "ClassicalEnsemble",
    "MetapotentialSurface",
    "flow_jacobian",
    "liouville_evolve",
    "metapotential",
    "moyal_rhs_check",
    "quantumness_budget",
    "sample_ensemble",
]


@dataclass(frozen=True)
class MetapotentialSurface:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(p), len(x))
    variant: str


def metapotential(params: SKParams, x, p, variant: str = "quantum") -> MetapotentialSurface:
    """Evaluate the Weyl-symbol (``quantum``) or ``classical`` Hamiltonian on a grid."""
    if variant not in ("quantum", "classical"):
        raise ValueError("variant must be 'quantum' or 'classical'")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    X, P = np.meshgrid(x, p)
    vals = classical_hamiltonian(params, X, P)
    if variant == "quantum":
        vals = vals + params.kerr * (X ** 2 + P ** 2)
    return MetapotentialSurface(x, p, vals, variant)


# -- classical Liouville flow -------------------------------------------------------

@dataclass(frozen=True)
class ClassicalEnsemble:
    """Equal-weight point particles in the ``(x, p)`` plane."""

    particles: np.ndarray  # shape (N, 2)

    def energies(self, params: SKParams) -> np.ndarray:
        return classical_hamiltonian(params, self.particles[:, 0], self.particles[:, 1])

    def second_moments(self) -> np.ndarray:
        q = self.particles
        return q.T @ q / q.shape[0]

    def anisotropy(self) -> float:
        """``(l_max - l_min)/(l_max + l_min)`` of the second-moment matrix about the origin."""
        w = np.linalg.eigvalsh(self.second_moments())
        return float((w[-1] - w[0]) / (w[-1] + w[0]))


def sample_ensemble(center, spread: float, n: int, seed: int = 0) -> ClassicalEnsemble:
    """Gaussian cloud of ``n`` particles around ``center`` with per-axis std ``spread``."""
    rng = np.random.default_rng(seed)
    pts = np.asarray(center, dtype=float)[None, :] + spread * rng.standard_normal((n, 2))
    return ClassicalEnsemble(pts)


def _velocity(params: SKParams, q: np.ndarray) -> np.ndarray:
    x, p = q[..., 0], q[..., 1]
    r2 = x * x + p * p
    d, K, e2 = params.delta, params.kerr, params.eps2
    dHdx = -d * x - K * r2 * x + 2.0 * e2 * x
    dHdp = -d * p - K * r2 * p - 2.0 * e2 * p
    return np.stack([dHdp, -dHdx], axis=-1)


def _rk4(params: SKParams, q: np.ndarray, dt: float) -> np.ndarray:
    k1 = _velocity(params, q)
    k2 = _velocity(params, q + 0.5 * dt * k1)
    k3 = _velocity(params, q + 0.5 * dt * k2)
    k4 = _velocity(params, q + dt * k3)
    return q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _max_rate(params: SKParams, q: np.ndarray) -> float:
    r2 = float(np.max(np.sum(q * q, axis=-1)))
    return abs(params.delta) + params.kerr * r2 + 2.0 * params.eps2 + 1e-300


def _propagate(params: SKParams, q: np.ndarray, t: float, steps_per_rad: int) -> np.ndarray:
    if t == 0.0:
        return q
    n = max(1, int(np.ceil(abs(t) * _max_rate(params, q) * steps_per_rad)))
    dt = t / n
    for _ in range(n):
        q = _rk4(params, q, dt)
    return q


def liouville_evolve(ensemble: ClassicalEnsemble, params: SKParams, t_grid,
                     steps_per_rad: int = 40, energy_rtol: float = 1e-5) -> list[ClassicalEnsemble]:
    """Conservative Hamiltonian flow of every particle, sampled on ``t_grid``.

    Hamilton's equations ``dx/dt = dH/dp, dp/dt = -dH/dx`` of the classical
    Hamiltonian are integrated with classical RK4 (the flow is not
    separable, so a leapfrog does not apply).  The step resolves the
    fastest local rotation with ``steps_per_rad`` steps per radian.

    Raises:
        ToleranceError: if any particle's energy drifts by more than
            ``energy_rtol`` of the ensemble energy scale.
    """
    t = np.asarray(t_grid, dtype=float)
    q = np.array(ensemble.particles, dtype=float)
    e0 = ensemble.energies(params)
    scale = max(np.max(np.abs(e0)), 1e-300)
    out = []
    t_prev = 0.0
    for tk in t:
        q = _propagate(params, q, tk - t_prev, steps_per_rad)
        t_prev = tk
        ens = ClassicalEnsemble(q.copy())
        drift = np.max(np.abs(ens.energies(params) - e0)) / scale
        if drift > energy_rtol:
            raise ToleranceError(f"energy drift {drift:.3g} at t={tk:.6g}")
        out.append(ens)
    return out


def flow_jacobian(params: SKParams, point, t: float, h: float = 1e-5,
                  steps_per_rad: int = 200) -> np.ndarray:
    """Central-difference Jacobian of the time-``t`` flow map at ``point``."""
    q0 = np.asarray(point, dtype=float)
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        pts = np.stack([q0 + e, q0 - e])
        fwd = np.empty_like(pts)
        # identical step count for both legs keeps the difference smooth
        n = max(1, int(np.ceil(abs(t) * _max_rate(params, pts) * steps_per_rad)))
        dt = t / n
        fwd[:] = pts
        for _ in range(n):
            fwd = _rk4(params, fwd, dt)
        J[:, j] = (fwd[0] - fwd[1]) / (2 * h)
    return J


# -- Wigner-flow cross-checks ----------------------------------------------------

def _spectral_derivative(f: np.ndarray, h: float, axis: int, order: int = 1) -> np.ndarray:
    n = f.shape[axis]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    mult = (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = n
    return np.real(np.fft.ifft(np.fft.fft(f, axis=axis) * mult.reshape(shape), axis=axis))


def _uniform_step(axis: np.ndarray) -> float:
    d = np.diff(axis)
    if d.size == 0 or np.ptp(d) > 1e-9 * abs(d.mean()):
        raise GridError("phase-space checks need a uniform grid")
    return float(d.mean())


def _check_coverage(W: np.ndarray, tol: float = 1e-6) -> None:
    edge = max(np.abs(W[0]).max(), np.abs(W[-1]).max(),
               np.abs(W[:, 0]).max(), np.abs(W[:, -1]).max())
    if edge > tol * np.abs(W).max():
        raise GridError("Wigner function does not vanish at the grid edge")


def moyal_rhs_check(rho, params: SKParams, diss: DissipationParams, x, p) -> float:
    """Compare the dissipative Wigner flow with its Fokker-Planck form.

    The left side is the Wigner function of ``L_D rho`` computed in
    operator space.  The right side is

        kappa1/2 (d_x(x W) + d_p(p W)) + kappa1 (1 + 2 n_th)/4 (d_x^2 + d_p^2) W

    evaluated with spectral derivatives of ``W[rho]``.  Only loss and
    thermal gain are covered; the Hamiltonian part is checked in operator
    space elsewhere.  ``params`` is accepted for interface symmetry and
    not used by the dissipative comparison.

    Returns:
        ``max |lhs - rhs| / (kappa1 max |W|)``.

    Raises:
        GridError: for non-uniform or coarse grids, or grids that clip W.
    """
    if diss.kappa_phi:
        raise ValueError("dephasing has no Fokker-Planck form; set kappa_phi = 0")
    if diss.kappa1 <= 0:
        raise ValueError("kappa1 must be positive")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    hx, hp = _uniform_step(x), _uniform_step(p)
    r = rho.matrix if hasattr(rho, "matrix") else np.asarray(rho)
    W = wigner_of(r, x, p).values
    _check_coverage(W)
    dim = r.shape[0]
    drho = lindbladian_apply(r, np.zeros((dim, dim)), diss)
    lhs = wigner_of(0.5 * (drho + drho.conj().T), x, p, check_grid=False).values
    X, P = np.meshgrid(x, p)
    k1 = diss.kappa1
    drift = _spectral_derivative(X * W, hx, axis=1) + _spectral_derivative(P * W, hp, axis=0)
    lap = _spectral_derivative(W, hx, axis=1, order=2) + _spectral_derivative(W, hp, axis=0, order=2)
    rhs = 0.5 * k1 * drift + 0.25 * k1 * (1.0 + 2.0 * diss.n_th) * lap
    return float(np.abs(lhs - rhs).max() / (k1 * np.abs(W).max()))


@dataclass(frozen=True)
class QuantumnessBudget:
    """Magnitudes of the two sides of the quantumness condition.

    ``moyal`` is the max-norm of the third-order Moyal correction to the
    Hamiltonian flow and ``diffusion`` the max-norm of the loss-induced
    diffusion term; ``ratio = moyal / diffusion``.
    """

    moyal: float
    diffusion: float

    @property
    def ratio(self) -> float:
        return self.moyal / self.diffusion if self.diffusion > 0 else np.inf


def quantumness_budget(params: SKParams, diss: DissipationParams, rho, x, p) -> QuantumnessBudget:
    """Estimate the third-order Moyal term against the diffusion term.

    The Moyal bracket of the quartic Hamiltonian truncates after the
    third-order term ``-(1/24) sum_k C(3,k) (-1)^k d_x^{3-k} d_p^k H
    d_p^{3-k} d_x^k W``.  Third derivatives of ``H`` come from the Kerr term
    alone and are evaluated analytically; derivatives of ``W`` spectrally.
    The diffusion side is ``kappa1 (1 + 2 n_th)/4 max |lap W|``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    hx, hp = _uniform_step(x), _uniform_step(p)
    r = rho.matrix if hasattr(rho, "matrix") else np.asarray(rho)
    W = wigner_of(r, x, p).values
    X, P = np.meshgrid(x, p)
    K = params.kerr
    # d_x^{3-k} d_p^k H for k = 0..3
    dH = [-6.0 * K * X, -2.0 * K * P, -2.0 * K * X, -6.0 * K * P]

    def dW(nx, np_):
        out = W
        if nx:
            out = _spectral_derivative(out, hx, axis=1, order=nx)
        if np_:
            out = _spectral_derivative(out, hp, axis=0, order=np_)
        return out

    term = np.zeros_like(W)
    for k in range(4):
        term += comb(3, k) * (-1) ** k * dH[k] * dW(k, 3 - k)
    moyal = np.abs(term).max() / 24.0
    lap = dW(2, 0) + dW(0, 2)
    diffusion = 0.25 * diss.kappa1 * (1.0 + 2.0 * diss.n_th) * np.abs(lap).max()
    return QuantumnessBudget(float(moyal), float(diffusion))
