"""Static effective Hamiltonian of a driven nonlinear oscillator.

The driven oscillator

    H(t) = w_o a^dag a + sum_m g_m/m (a + a^dag + Pi e^{-i w_d t} + c.c.)^m

is mapped, in the frame rotating at ``w_d/2``, onto the squeezed Kerr form
``-Delta n - K a^dag2 a^2 + eps2 a^dag2 + h.c.`` plus the higher-order
terms ``eps2' a^dag3 a``, ``lambda a^dag3 a^3`` and ``eps4 a^dag4``.
Coefficients are tabulated per perturbative order and per power of
``|Pi|^2`` so that every piece can be audited separately.

A brute-force Floquet propagation of the rotating-frame Hamiltonian is
included as an independent check of the perturbative coefficients.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, OrderError
from .fock import HilbertSpace, annihilation

__all__ = [
    "CircuitParams",
    "EffectiveCoefficients",
    "FloquetResult",
    "displacement_amplitude",
    "effective_coefficients",
    "floquet_quasienergies",
    "kerr_leading_order",
    "ncrit",
]


@dataclass(frozen=True)
class CircuitParams:
    """Bare circuit and drive parameters (angular frequencies).

    Attributes:
        omega_o: bare oscillator frequency.
        g3, g4, g5, g6: nonlinearities (the ``g_m/m`` convention).
        Omega_d: drive amplitude.
        omega_d: drive frequency; defaults to ``2 * omega_o``.
        omega_a: frequency entering the ``1/omega_a`` denominators;
            defaults to ``omega_o``.  It is taken as given, not solved for.
    """

    omega_o: float
    g3: float = 0.0
    g4: float = 0.0
    g5: float = 0.0
    g6: float = 0.0
    Omega_d: float = 0.0
    omega_d: float | None = None
    omega_a: float | None = None

    def __post_init__(self):
        if self.omega_o <= 0:
            raise ValueError("omega_o must be positive")
        if self.omega_d is None:
            object.__setattr__(self, "omega_d", 2.0 * self.omega_o)
        if self.omega_a is None:
            object.__setattr__(self, "omega_a", self.omega_o)
        for name in ("g3", "g4", "g5", "g6"):
            ratio = abs(getattr(self, name)) / self.omega_o
            if ratio >= 0.2:
                raise ValueError(f"|{name}|/omega_o = {ratio:.3g} is not perturbative")
            if ratio > 0.05:
                warnings.warn(f"|{name}|/omega_o = {ratio:.3g} exceeds 0.05",
                              stacklevel=2)
        if self.g3 != 0.0 and abs(self.delta) > 2.0 * abs(self.g3):
            warnings.warn("drive detuning is large compared with g3", stacklevel=2)

    @property
    def delta(self) -> float:
        """Detuning of the drive subharmonic from the bare frequency."""
        return 0.5 * self.omega_d - self.omega_o


@dataclass(frozen=True)
class EffectiveCoefficients:
    """Effective Hamiltonian coefficients, kept order by order.

    ``*_pieces`` map ``order -> {k: value}`` where ``k`` counts powers of
    ``|Pi|^2`` (for the squeezing terms ``k`` labels the two printed
    monomials instead).
    """

    Pi: complex
    order: int
    Delta_pieces: dict = field(default_factory=dict)
    K_pieces: dict = field(default_factory=dict)
    eps2_pieces: dict = field(default_factory=dict)
    eps2_prime: complex = 0.0
    lambda4: float = 0.0
    eps4: complex = 0.0

    @staticmethod
    def _sum(pieces: dict) -> dict:
        return {n: sum(p.values()) for n, p in pieces.items()}

    @property
    def Delta_by_order(self) -> dict:
        return self._sum(self.Delta_pieces)

    @property
    def K_by_order(self) -> dict:
        return self._sum(self.K_pieces)

    @property
    def eps2_by_order(self) -> dict:
        return self._sum(self.eps2_pieces)

    @property
    def total_Delta(self) -> float:
        return float(np.real(sum(self.Delta_by_order.values())))

    @property
    def total_K(self) -> float:
        return float(np.real(sum(self.K_by_order.values())))

    @property
    def total_eps2(self) -> complex:
        return complex(sum(self.eps2_by_order.values()))

    def sk_params(self):
        """Convert to :class:`kerrlab.spectrum.SKParams` (canonical eps2 phase).

        The squeezing phase is removed by the gauge ``a -> a e^{i phi/2}``,
        which rotates the optional terms accordingly.
        """
        from .spectrum import SKParams

        eps2 = self.total_eps2
        phase = np.exp(-1j * np.angle(eps2)) if eps2 != 0 else 1.0
        return SKParams(
            delta=self.total_Delta,
            kerr=self.total_K,
            eps2=abs(eps2),
            lam=self.lambda4,
            eps4=complex(self.eps4 * phase ** 2),
            eps2_prime=complex(self.eps2_prime * phase),
        )


def displacement_amplitude(params: CircuitParams) -> float:
    """Linear-response displacement ``Pi = 4 Omega_d / (3 omega_d)``."""
    if params.omega_d <= 0:
        raise ValueError("omega_d must be positive")
    return 4.0 * params.Omega_d / (3.0 * params.omega_d)


def effective_coefficients(params: CircuitParams, order: int = 2) -> EffectiveCoefficients:
    """Evaluate the tabulated effective-Hamiltonian coefficients up to ``order``.

    Args:
        params: circuit and drive parameters.
        order: highest perturbative order retained (1 to 4).

    Returns:
        EffectiveCoefficients with every order recorded separately.

    Raises:
        OrderError: if ``order`` is outside 1..4.
    """
    if order not in (1, 2, 3, 4):
        raise OrderError(f"order must be 1, 2, 3 or 4, got {order!r}")
    g3, g4, g5, g6 = params.g3, params.g4, params.g5, params.g6
    wa = params.omega_a
    Pi = displacement_amplitude(params)
    P2 = abs(Pi) ** 2

    Delta = {1: {0: params.delta}}
    K = {1: {0: 0.0}}
    eps2 = {1: {0: g3 * Pi}}
    eps2_prime = 0.0
    lam = 0.0
    eps4 = 0.0

    if order >= 2:
        # Lamb shift and AC Stark shift
        Delta[2] = {
            0: -(3 * g4 + 10 / 3 * g3 ** 2 / wa),
            1: -(6 * g4 + 9 / 2 * g3 ** 2 / wa) * P2,
        }
        K[2] = {0: -(3 * g4 / 2 + 5 / 3 * g3 ** 2 / wa)}
        eps2[2] = {0: 0.0}
    if order >= 3:
        Delta[3] = {0: 0.0}
        K[3] = {0: 0.0}
        # the first monomial is printed with |Pi|^2 Pi^*; kept verbatim
        eps2[3] = {
            0: (6 * g5 + 141 / 20 * g3 * g4 / wa) * P2 * np.conj(Pi),
            1: (6 * g5 + 63 / 8 * g3 * g4 / wa) * Pi,
        }
        eps2_prime = (4 * g5 + 21 / 4 * g3 * g4 / wa) * Pi
    if order >= 4:
        Delta[4] = {
            0: -(15 * g6 + 9 * g4 ** 2 / wa + 110 / 3 * g3 * g5 / wa
                 + 47 * g3 ** 2 * g4 / wa ** 2 - 6269 / 324 * g3 ** 4 / wa ** 3),
            1: -(60 * g6 + 54 / 5 * g4 ** 2 / wa + 116 * g3 * g5 / wa
                 + 671 / 10 * g3 ** 2 * g4 / wa ** 2
                 + 113 / 360 * g3 ** 4 / wa ** 3) * P2,
            2: -(30 * g6 - 9 / 2 * g4 ** 2 / wa + 322 / 5 * g3 * g5 / wa
                 + 15113 / 600 * g3 ** 2 * g4 / wa ** 2
                 - 297947 / 32400 * g3 ** 4 / wa ** 3) * P2 ** 2,
        }
        K[4] = {
            0: -(15 * g6 + 153 / 16 * g4 ** 2 / wa + 42 * g3 * g5 / wa
                 + 225 / 4 * g3 ** 2 * g4 / wa ** 2 + 805 / 36 * g3 ** 4 / wa ** 3),
            1: -(30 * g6 + 27 / 5 * g4 ** 2 / wa + 58 * g3 * g5 / wa
                 + 671 / 20 * g3 ** 2 * g4 / wa ** 2
                 + 113 / 720 * g3 ** 4 / wa ** 3) * P2,
        }
        lam = -(10 / 6 * g6 + 17 / 8 * g4 ** 2 / wa + 28 / 3 * g3 * g5 / wa
                + 25 / 2 * g3 ** 2 * g4 / wa ** 2 + 805 / 162 * g3 ** 4 / wa ** 3)
        # g3^2 g4 is printed over a single power of omega_a; we use omega_a^2
        # so that every term carries units of frequency
        eps4 = (5 / 2 * g6 + 33 / 8 * g4 ** 2 / wa - 1 / 15 * g3 * g5 / wa
                - 101 / 96 * g3 ** 2 * g4 / wa ** 2
                - 2009 / 1296 * g3 ** 4 / wa ** 3) * Pi ** 2

    return EffectiveCoefficients(
        Pi=Pi, order=order, Delta_pieces=Delta, K_pieces=K, eps2_pieces=eps2,
        eps2_prime=complex(eps2_prime), lambda4=float(lam), eps4=complex(eps4))


def kerr_leading_order(g3: float, g4: float, omega_a: float) -> float:
    """Leading-order Kerr ``-3 g4/2 + 10 g3^2 / (3 omega_a)``.

    The ``g3^2`` term differs in sign and factor from the order-2 coefficient
    in :func:`effective_coefficients` (``-(3 g4/2 + 5 g3^2/(3 omega_a))``).
    The undriven Floquet ladder agrees with this form to about 1%.  It is
    kept for comparison and not used elsewhere in the package.
    """
    return -1.5 * g4 + 10.0 * g3 ** 2 / (3.0 * omega_a)


def ncrit(M: float, p: float, phi_zps: float) -> float:
    """Maximum photon number before the expansion breaks down, ``15 M^2/(p phi)^2``."""
    if p <= 0 or phi_zps <= 0:
        raise ValueError("p and phi_zps must be positive")
    return 15.0 * M ** 2 / (p ** 2 * phi_zps ** 2)


# -- Floquet oracle -------------------------------------------------------

@dataclass(frozen=True)
class FloquetResult:
    """Quasienergies of the rotating-frame Floquet problem.

    Attributes:
        quasienergies: folded into ``(-w_d/4, w_d/4]`` relative to the state
            with the largest vacuum overlap, ordered by mean photon number.
        mean_photons: ``<n>`` of each Floquet state, same order.
        states: Floquet states as columns, same order.
        gaps: ``quasienergies[1:n_levels] - quasienergies[0]``.
        steps: number of integrator steps per period actually used.
    """

    quasienergies: np.ndarray
    mean_photons: np.ndarray
    states: np.ndarray
    gaps: np.ndarray
    steps: int


def _rotating_hamiltonian(params: CircuitParams, space: HilbertSpace):
    a = annihilation(space).matrix
    ad = a.conj().T
    n_op = ad @ a
    eye = np.eye(space.dim)
    Pi = displacement_amplitude(params)
    w = params.omega_d
    gs = [(3, params.g3), (4, params.g4), (5, params.g5), (6, params.g6)]
    gs = [(m, g) for m, g in gs if g != 0.0]

    def H(t: float) -> np.ndarray:
        ph = np.exp(-0.5j * w * t)
        xt = a * ph + ad * np.conj(ph) + (Pi * ph ** 2 + np.conj(Pi * ph ** 2)) * eye
        out = -params.delta * n_op
        power = xt @ xt
        for m in range(3, 7):
            power = power @ xt
            for mm, g in gs:
                if mm == m:
                    out = out + (g / m) * power
        return out

    return H


def _monodromy(H, period: float, steps: int, dim: int) -> np.ndarray:
    # fourth-order commutator-free Magnus integrator
    h = period / steps
    c1 = 0.5 - math.sqrt(3.0) / 6.0
    c2 = 0.5 + math.sqrt(3.0) / 6.0
    a1 = 0.25 - math.sqrt(3.0) / 6.0
    a2 = 0.25 + math.sqrt(3.0) / 6.0
    U = np.eye(dim, dtype=complex)
    for k in range(steps):
        t = k * h
        H1 = H(t + c1 * h)
        H2 = H(t + c2 * h)
        U = sla.expm(-1j * h * (a2 * H1 + a1 * H2)) @ U
        U = sla.expm(-1j * h * (a1 * H1 + a2 * H2)) @ U
    return U


def _analyse(U: np.ndarray, period: float, zone: float):
    vals, vecs = np.linalg.eig(U)
    eps = -np.angle(vals) / period
    dim = U.shape[0]
    nbar = np.real(np.einsum("ij,i,ij->j", vecs.conj(), np.arange(dim), vecs))
    nbar /= np.real(np.einsum("ij,ij->j", vecs.conj(), vecs))
    order = np.argsort(nbar)
    ref = int(np.argmax(np.abs(vecs[0, :])))
    rel = eps - eps[ref]
    rel = (rel + 0.5 * zone) % zone - 0.5 * zone
    return rel[order], nbar[order], vecs[:, order]


def floquet_quasienergies(params: CircuitParams, space: HilbertSpace, n_levels: int = 4,
                          steps: int = 256, rtol: float = 1e-3,
                          max_steps: int = 65536) -> FloquetResult:
    """Brute-force Floquet quasienergies of the rotating-frame Hamiltonian.

    The Hamiltonian ``-delta n + sum g_m/m (a e^{-i w t/2} + h.c. + Pi e^{-i w t}
    + c.c.)^m`` is propagated over one period ``4 pi / w_d`` and the monodromy
    operator is diagonalised.  The step count is doubled until the reported
    gaps move by less than ``rtol`` of themselves.

    Raises:
        ConvergenceError: if ``max_steps`` is reached without convergence.
    """
    period = 4.0 * math.pi / params.omega_d
    zone = 0.5 * params.omega_d
    H = _rotating_hamiltonian(params, space)
    prev = None
    while steps <= max_steps:
        U = _monodromy(H, period, steps, space.dim)
        qe, nbar, vecs = _analyse(U, period, zone)
        gaps = qe[1:n_levels] - qe[0]
        if prev is not None and len(prev) == len(gaps):
            scale = np.maximum(np.abs(gaps), 1e-300)
            if np.all(np.abs(gaps - prev) <= rtol * scale):
                return FloquetResult(qe, nbar, vecs, gaps, steps)
        prev = gaps
        steps *= 2
    raise ConvergenceError(
        f"Floquet gaps not converged to rtol={rtol} within {max_steps} steps")
