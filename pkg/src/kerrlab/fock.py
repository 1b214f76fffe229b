"""Truncated Fock-space linear algebra: operators, states and the cat-qubit basis.

Conventions used throughout the package:

* Fock states are indexed ``|0>, ..., |dim-1>``.
* Quadratures are ``a = (x + i p) / sqrt(2)`` with ``[x, p] = i``, so the
  Wigner function is normalised as ``int W dx dp = 1`` and bounded by
  ``|W| <= 1/pi``.  The complex-amplitude convention ``W(alpha)`` with
  ``d^2 alpha`` measure is larger by a factor 2 (bound ``2/pi``); use
  :data:`WIGNER_ALPHA_CONVENTION_FACTOR` to convert.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    DegenerateCatError,
    DimensionMismatchError,
    GridError,
    TruncationError,
)

#: multiply our W(x, p) by this to get W(alpha) normalised over d^2 alpha
WIGNER_ALPHA_CONVENTION_FACTOR = 2.0

_HERMITIAN_RTOL = 1e-12


def auto_dim(alpha2_max: float) -> int:
    """Fock truncation used when no explicit dimension is requested."""
    a = max(float(alpha2_max), 0.0)
    return int(math.ceil(a + 12.0 * math.sqrt(a + 1.0) + 15.0))


@dataclass(frozen=True)
class HilbertSpace:
    """Single bosonic mode truncated to ``dim`` Fock levels."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    def check(self, other: "HilbertSpace") -> None:
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"dimension mismatch: {self.dim} vs {other.dim}")


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex)
    out.setflags(write=False)
    return out


class Operator:
    """Dense operator on a :class:`HilbertSpace`.

    The matrix is stored read-only; arithmetic returns new operators.
    ``hermitian=True`` asks the constructor to verify the flag.
    """

    __slots__ = ("space", "matrix", "hermitian")

    def __init__(self, space: HilbertSpace, matrix, hermitian: bool = False):
        m = _frozen(matrix)
        if m.shape != (space.dim, space.dim):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match dim {space.dim}")
        if hermitian:
            scale = max(np.abs(m).max(), 1.0e-300)
            if np.abs(m - m.conj().T).max() >= _HERMITIAN_RTOL * scale:
                raise ValueError("operator flagged Hermitian is not Hermitian")
        self.space = space
        self.matrix = m
        self.hermitian = bool(hermitian)

    def __repr__(self):
        return f"Operator(dim={self.space.dim}, hermitian={self.hermitian})"

    def _other(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            self.space.check(other.space)
            return other.matrix
        raise TypeError(f"cannot combine Operator with {type(other).__name__}")

    def __add__(self, other):
        herm = self.hermitian and getattr(other, "hermitian", False)
        return Operator(self.space, self.matrix + self._other(other), herm)

    def __sub__(self, other):
        herm = self.hermitian and getattr(other, "hermitian", False)
        return Operator(self.space, self.matrix - self._other(other), herm)

    def __neg__(self):
        return Operator(self.space, -self.matrix, self.hermitian)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return self @ scalar
        scalar = complex(scalar)
        herm = self.hermitian and scalar.imag == 0.0
        return Operator(self.space, self.matrix * scalar, herm)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / complex(scalar))

    def __matmul__(self, other):
        if isinstance(other, Ket):
            self.space.check(other.space)
            return self.matrix @ other.amplitudes
        return Operator(self.space, self.matrix @ self._other(other))

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, self.hermitian)

    def commutator(self, other: "Operator") -> "Operator":
        b = self._other(other)
        return Operator(self.space, self.matrix @ b - b @ self.matrix)

    def expect(self, state) -> complex:
        """Expectation value in a :class:`Ket` or :class:`DensityMatrix`."""
        self.space.check(state.space)
        if isinstance(state, Ket):
            v = state.amplitudes
            return complex(np.vdot(v, self.matrix @ v))
        return complex(np.trace(self.matrix @ state.matrix))


class Ket:
    """Normalised pure state; amplitudes are renormalised on construction."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: HilbertSpace, amplitudes, normalize: bool = True):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.shape != (space.dim,):
            raise DimensionMismatchError(
                f"ket of length {v.size} does not match dim {space.dim}")
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("zero vector cannot be normalised")
        if normalize:
            v = v / norm
        elif abs(norm - 1.0) > 1e-10:
            raise ValueError(f"ket is not normalised (norm={norm})")
        v.setflags(write=False)
        self.space = space
        self.amplitudes = v

    def __repr__(self):
        return f"Ket(dim={self.space.dim})"

    def overlap(self, other: "Ket") -> complex:
        """``<self|other>``."""
        self.space.check(other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def dm(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.space, np.outer(v, v.conj()))


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    __slots__ = ("space", "matrix")

    def __init__(self, space: HilbertSpace, matrix, validate: bool = True):
        m = _frozen(matrix)
        if m.shape != (space.dim, space.dim):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match dim {space.dim}")
        if validate:
            if np.abs(m - m.conj().T).max() > 1e-10:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > 1e-8:
                raise ValueError(f"density matrix trace is {tr}, expected 1")
            lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
            if lam < -1e-8:
                raise ValueError(f"density matrix has eigenvalue {lam} < 0")
        self.space = space
        self.matrix = m

    def __repr__(self):
        return f"DensityMatrix(dim={self.space.dim})"

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


# -- elementary operators -------------------------------------------------

def annihilation(space: HilbertSpace) -> Operator:
    return Operator(space, np.diag(np.sqrt(np.arange(1, space.dim)), 1))


def creation(space: HilbertSpace) -> Operator:
    return annihilation(space).dag()


def number(space: HilbertSpace) -> Operator:
    return Operator(space, np.diag(np.arange(space.dim, dtype=float)), True)


def parity(space: HilbertSpace) -> Operator:
    signs = np.where(np.arange(space.dim) % 2 == 0, 1.0, -1.0)
    return Operator(space, np.diag(signs), True)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim), True)


def quadratures(space: HilbertSpace) -> tuple[Operator, Operator]:
    """Return ``(x, p)`` with ``a = (x + i p)/sqrt(2)``."""
    a = annihilation(space).matrix
    x = (a + a.conj().T) / np.sqrt(2.0)
    p = (a - a.conj().T) / (1j * np.sqrt(2.0))
    return Operator(space, x, True), Operator(space, p, True)


# -- states ---------------------------------------------------------------

def fock(space: HilbertSpace, n: int) -> Ket:
    if not 0 <= n < space.dim:
        raise ValueError(f"Fock index {n} outside 0..{space.dim - 1}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return Ket(space, v)


def _coherent_amplitudes(dim: int, alpha: complex) -> np.ndarray:
    n = np.arange(dim)
    # log-space to stay finite for large n
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.zeros(dim, dtype=complex)
    if alpha == 0:
        amp[0] = 1.0
        return amp
    mag = np.exp(n * np.log(abs(alpha)) - 0.5 * log_fact - 0.5 * abs(alpha) ** 2)
    return mag * np.exp(1j * np.angle(alpha) * n)


def coherent(space: HilbertSpace, alpha: complex) -> Ket:
    """Coherent state ``|alpha>`` truncated to the space and renormalised.

    Raises:
        TruncationError: if ``|alpha|^2 > dim/4``.
    """
    alpha = complex(alpha)
    if abs(alpha) ** 2 > space.dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.4g} exceeds dim/4 = {space.dim / 4:.4g}")
    return Ket(space, _coherent_amplitudes(space.dim, alpha))


def _cat_vector(dim: int, alpha: complex, sign: int) -> np.ndarray:
    amp = _coherent_amplitudes(dim, alpha)
    mask = (np.arange(dim) % 2 == 0) if sign > 0 else (np.arange(dim) % 2 == 1)
    return np.where(mask, amp, 0.0)


def cat(space: HilbertSpace, alpha: complex, parity: str = "even") -> Ket:
    """Parity cat ``N(|alpha> +- |-alpha>)``.

    Built from the parity-masked coherent amplitudes, so the result is
    exactly parity-pure.  The odd cat is rejected when its norm vanishes
    (``alpha -> 0``) instead of returning the Fock-1 limit.
    """
    alpha = complex(alpha)
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    if abs(alpha) ** 2 > space.dim / 4.0:
        raise TruncationError(
            f"|alpha|^2 = {abs(alpha) ** 2:.4g} exceeds dim/4 = {space.dim / 4:.4g}")
    v = _cat_vector(space.dim, alpha, +1 if parity == "even" else -1)
    if np.linalg.norm(v) < 1e-12:
        raise DegenerateCatError(
            f"{parity} cat has vanishing norm at alpha={alpha}")
    return Ket(space, v)


def cat_norm_ratio(alpha: complex) -> float:
    """``r = N+/N-`` for cats of amplitude ``alpha``; equals ``sqrt(tanh|alpha|^2)``."""
    x = abs(alpha) ** 2
    return math.sqrt(math.tanh(x)) if x > 0 else 0.0


@dataclass(frozen=True)
class CatQubitBasis:
    """The six cardinal states of the cat qubit at amplitude ``alpha``."""

    alpha: complex
    kets: dict = field(repr=False)
    norms: tuple[float, float]
    ratio: float

    @property
    def even(self) -> Ket:
        return self.kets["+Z"]

    @property
    def odd(self) -> Ket:
        return self.kets["-Z"]


def cat_basis(space: HilbertSpace, alpha: complex) -> CatQubitBasis:
    alpha = complex(alpha)
    plus = cat(space, alpha, "even").amplitudes
    minus = cat(space, alpha, "odd").amplitudes
    s = 1.0 / np.sqrt(2.0)
    kets = {
        "+Z": Ket(space, plus),
        "-Z": Ket(space, minus),
        "+X": Ket(space, s * (plus + minus)),
        "-X": Ket(space, s * (plus - minus)),
        "+Y": Ket(space, s * (plus + 1j * minus)),
        "-Y": Ket(space, s * (plus - 1j * minus)),
    }
    e = math.exp(-2.0 * abs(alpha) ** 2)
    n_plus = 1.0 / math.sqrt(2.0 * (1.0 + e))
    n_minus = 1.0 / math.sqrt(2.0 * (1.0 - e))
    return CatQubitBasis(alpha, kets, (n_plus, n_minus), n_plus / n_minus)


def cat_pauli(space: HilbertSpace, alpha: complex) -> tuple[Operator, Operator, Operator]:
    """Pauli operators of the cat qubit built from the even/odd cat dyads."""
    basis = cat_basis(space, alpha)
    cp = basis.even.amplitudes
    cm = basis.odd.amplitudes
    pm = np.outer(cp, cm.conj())
    mp = np.outer(cm, cp.conj())
    X = Operator(space, pm + mp, True)
    Y = Operator(space, -1j * pm + 1j * mp, True)
    Z = Operator(space, np.outer(cp, cp.conj()) - np.outer(cm, cm.conj()), True)
    return X, Y, Z


def project_to_qubit(op: Operator, basis: CatQubitBasis) -> dict[str, complex]:
    """Coefficients of ``P op P`` on ``{I, X, Y, Z}`` of the cat qubit."""
    cp = basis.even.amplitudes
    cm = basis.odd.amplitudes
    m = op.matrix
    mpp = np.vdot(cp, m @ cp)
    mmm = np.vdot(cm, m @ cm)
    mpm = np.vdot(cp, m @ cm)
    mmp = np.vdot(cm, m @ cp)
    return {
        "I": complex(0.5 * (mpp + mmm)),
        "X": complex(0.5 * (mpm + mmp)),
        "Y": complex(0.5j * (mpm - mmp)),
        "Z": complex(0.5 * (mpp - mmm)),
    }


# -- Wigner function ------------------------------------------------------

@dataclass(frozen=True)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(p), len(x))

    def integral(self) -> float:
        return float(trapezoid(trapezoid(self.values, self.x, axis=1), self.p))

    def to_alpha_convention(self) -> np.ndarray:
        return self.values * WIGNER_ALPHA_CONVENTION_FACTOR


def _as_matrix(state) -> tuple[HilbertSpace, np.ndarray]:
    if isinstance(state, Ket):
        v = state.amplitudes
        return state.space, np.outer(v, v.conj())
    if isinstance(state, (DensityMatrix, Operator)):
        return state.space, state.matrix
    m = np.asarray(state, dtype=complex)
    return HilbertSpace(m.shape[0]), m


def _finest_fringe(rho: np.ndarray) -> float:
    nbar = abs(np.real(np.sum(np.arange(rho.shape[0]) * np.diag(rho))))
    nbar /= max(abs(np.trace(rho)), 1e-300)
    return math.pi / math.sqrt(2.0 * nbar + 1.0)


def wigner_of(state, x: Sequence[float], p: Sequence[float],
              check_grid: bool = True) -> WignerGrid:
    """Wigner function on the grid ``x`` (columns) by ``p`` (rows).

    Each grid point is the expectation of the displaced parity operator,
    ``W(x, p) = Tr[rho D(beta) P D(beta)^dag] / pi`` with
    ``beta = (x + i p)/sqrt(2)``; the matrix elements of the displaced
    parity are generated by a three-term recurrence, O(dim^2) per point.

    ``state`` may be a Ket, a DensityMatrix, or any Hermitian Operator
    (the map is linear, which the phase-space checks rely on).

    Raises:
        GridError: if the grid spacing cannot resolve the finest
            interference fringe expected for the state's photon number.
    """
    space, rho = _as_matrix(state)
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if check_grid:
        period = _finest_fringe(rho)
        for axis in (x, p):
            if axis.size > 1 and np.max(np.diff(axis)) > period / 3.0:
                raise GridError(
                    f"grid spacing {np.max(np.diff(axis)):.3g} too coarse for "
                    f"fringe period {period:.3g}")
    X, P = np.meshgrid(x, p)
    beta = (X + 1j * P) / np.sqrt(2.0)
    dim = space.dim
    sq = np.sqrt(np.arange(dim, dtype=float))

    # w[n] holds the (m, n) displaced-parity element for the current row m
    w = [None] * dim
    w[0] = np.exp(-2.0 * np.abs(beta) ** 2) / np.pi
    W = np.real(rho[0, 0]) * np.real(w[0])
    for n in range(1, dim):
        w[n] = 2.0 * beta * w[n - 1] / sq[n]
        W = W + 2.0 * np.real(rho[0, n] * w[n])
    for m in range(1, dim):
        temp = w[m]
        w[m] = (2.0 * np.conj(beta) * temp - sq[m] * w[m - 1]) / sq[m]
        W = W + np.real(rho[m, m] * w[m])
        for n in range(m + 1, dim):
            nxt = (2.0 * beta * w[n - 1] - sq[m] * temp) / sq[n]
            temp = w[n]
            w[n] = nxt
            W = W + 2.0 * np.real(rho[m, n] * w[n])
    return WignerGrid(x, p, np.real(W))


# -- truncation audit -----------------------------------------------------

def check_truncation(compute: Callable[[int], np.ndarray], dim: int,
                     tol: float = 1e-6) -> np.ndarray:
    """Run ``compute(dim)`` and ``compute(2*dim)``; raise if they drift.

    Returns the result at ``dim``.
    """
    base = np.asarray(compute(dim), dtype=complex)
    fine = np.asarray(compute(2 * dim), dtype=complex)
    if base.shape != fine.shape:
        raise TruncationError("observable shape changed with truncation")
    scale = max(np.abs(fine).max(), 1.0)
    drift = np.abs(base - fine).max() / scale
    if drift > tol:
        raise TruncationError(
            f"observable drift {drift:.3g} between dim {dim} and {2 * dim}")
    return base
