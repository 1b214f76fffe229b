"""Parity-resolved spectrum of the squeezed Kerr oscillator.

The Hamiltonian is

    H = -Delta n - K a^dag2 a^2 + eps2 (a^dag2 + a^2)
        [- lam a^dag3 a^3 + (eps4 a^dag4 + eps2' a^dag3 a + h.c.)]

with ``K > 0``.  Every term conserves photon-number parity, so the even and
odd Fock blocks are diagonalised separately.  Because the Kerr term enters
with a negative sign the spectrum is bounded from above and the bound
(cat-like) states sit at the *top*.  Levels are therefore ordered by
decreasing energy: index ``n = 0`` of each parity is the highest level, and
gaps are reported as positive numbers ``E_0 - E_1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import (
    BelowThresholdError,
    EigsolverError,
    NoWellError,
    NotFoundError,
    TruncationError,
)
from .fock import HilbertSpace, Ket, Operator, auto_dim

__all__ = [
    "SKParams",
    "SpectrumResult",
    "bohr_count",
    "build_hamiltonian",
    "diagonalize",
    "excitation_gap",
    "kissing_points",
    "lemniscate_area",
    "nojump_wells",
    "splittings",
]


@dataclass(frozen=True)
class SKParams:
    """Static effective Hamiltonian parameters (angular frequencies).

    ``eps2`` is the canonical real, non-negative squeezing amplitude; any
    drive phase is removed beforehand by ``a -> a e^{i arg(eps2)/2}``.
    """

    delta: float
    kerr: float
    eps2: float
    lam: float = 0.0
    eps4: complex = 0.0
    eps2_prime: complex = 0.0

    def __post_init__(self):
        if not self.kerr > 0:
            raise ValueError(f"kerr must be positive, got {self.kerr}")
        if isinstance(self.eps2, complex) or self.eps2 < 0:
            raise ValueError("eps2 must be real and >= 0 (canonical phase)")

    @property
    def alpha2(self) -> float:
        """Nominal cat size ``eps2 / K``."""
        return self.eps2 / self.kerr

    @property
    def well_alpha2(self) -> float:
        """Photon number at the metapotential maxima, ``(eps2 - Delta/2)/K``."""
        return max((self.eps2 - 0.5 * self.delta) / self.kerr, 0.0)

    def replace(self, **changes) -> "SKParams":
        from dataclasses import replace
        return replace(self, **changes)


def default_space(params: SKParams) -> HilbertSpace:
    return HilbertSpace(auto_dim(max(params.alpha2, params.well_alpha2)))


def _check_truncation(params: SKParams, space: HilbertSpace) -> None:
    a2 = max(params.alpha2, params.well_alpha2)
    if a2 > 0 and space.dim < a2 + 5.0 * math.sqrt(a2) + 2.0:
        raise TruncationError(
            f"dim {space.dim} too small for |alpha|^2 = {a2:.3g}")


def _hamiltonian_matrix(params: SKParams, dim: int) -> np.ndarray:
    n = np.arange(dim, dtype=float)
    H = np.diag(-params.delta * n - params.kerr * n * (n - 1.0)).astype(complex)
    if params.lam:
        H -= np.diag(params.lam * n * (n - 1.0) * (n - 2.0))
    # <m+2| a^dag2 |m> = sqrt((m+1)(m+2))
    sq2 = np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
    up2 = np.diag(sq2, -2).astype(complex)
    H += params.eps2 * (up2 + up2.T)
    if params.eps2_prime:
        # a^dag3 a = a^dag2 n
        term = up2 @ np.diag(n)
        H += params.eps2_prime * term + np.conj(params.eps2_prime) * term.conj().T
    if params.eps4:
        sq4 = np.sqrt((n[:-4] + 1) * (n[:-4] + 2) * (n[:-4] + 3) * (n[:-4] + 4))
        up4 = np.diag(sq4, -4).astype(complex)
        H += params.eps4 * up4 + np.conj(params.eps4) * up4.T
    return H


def build_hamiltonian(params: SKParams, space: HilbertSpace | None = None) -> Operator:
    """Squeezed Kerr Hamiltonian on a truncated Fock space.

    Raises:
        TruncationError: if ``dim`` is too small for the cat size.
    """
    space = space or default_space(params)
    _check_truncation(params, space)
    return Operator(space, _hamiltonian_matrix(params, space.dim), hermitian=True)


@dataclass(frozen=True)
class SpectrumResult:
    """Parity-labelled eigenpairs, highest level first in each sector.

    Attributes:
        energies: ``{+1: array, -1: array}`` in decreasing order.
        vectors: ``{+1: (dim, n), -1: (dim, n)}`` full-space eigenvectors,
            phase-fixed so the largest-magnitude Fock coefficient is real
            and positive.
        pairs: ``(n, E_n^+, E_n^-, delta_n)`` with ``delta_n = E_n^+ - E_n^-``.
    """

    params: SKParams
    space: HilbertSpace
    energies: dict
    vectors: dict = field(repr=False)
    pairs: list = field(repr=False)

    @property
    def levels(self) -> list:
        """All levels as ``(energy, parity, index_in_parity)``, highest first."""
        out = [(float(e), s, i) for s in (+1, -1) for i, e in enumerate(self.energies[s])]
        return sorted(out, key=lambda t: -t[0])

    @property
    def delta_n(self) -> np.ndarray:
        return np.array([p[3] for p in self.pairs])

    def ket(self, n: int, parity: int) -> Ket:
        return Ket(self.space, self.vectors[parity][:, n])


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)[None, :]


def diagonalize(params: SKParams, space: HilbertSpace | None = None,
                n_levels: int | None = None) -> SpectrumResult:
    """Diagonalise the Hamiltonian separately in the two parity sectors.

    Args:
        params: Hamiltonian parameters.
        space: truncated space; chosen automatically when omitted.
        n_levels: keep only the top ``n_levels`` of each sector.

    Raises:
        EigsolverError: if LAPACK fails to converge.
    """
    space = space or default_space(params)
    _check_truncation(params, space)
    H = _hamiltonian_matrix(params, space.dim)
    energies, vectors = {}, {}
    for sign, start in ((+1, 0), (-1, 1)):
        idx = np.arange(start, space.dim, 2)
        block = H[np.ix_(idx, idx)]
        if np.allclose(block.imag, 0.0):
            block = block.real
        try:
            w, v = np.linalg.eigh(block)
        except np.linalg.LinAlgError as exc:
            raise EigsolverError(str(exc)) from exc
        w, v = w[::-1], v[:, ::-1]
        if n_levels is not None:
            w, v = w[:n_levels], v[:, :n_levels]
        full = np.zeros((space.dim, len(w)), dtype=complex)
        full[idx, :] = v
        energies[sign] = w
        vectors[sign] = _fix_phase(full)
    n_pairs = min(len(energies[1]), len(energies[-1]))
    pairs = [(n, float(energies[1][n]), float(energies[-1][n]),
              float(energies[1][n] - energies[-1][n])) for n in range(n_pairs)]
    return SpectrumResult(params, space, energies, vectors, pairs)


def splittings(params: SKParams, n_pairs: int, space: HilbertSpace | None = None) -> np.ndarray:
    """Signed tunnel splittings ``delta_n`` for the first ``n_pairs`` pairs."""
    return diagonalize(params, space, n_levels=n_pairs).delta_n[:n_pairs]


def excitation_gap(params: SKParams, space: HilbertSpace | None = None) -> tuple[float, float]:
    """Gap between the top two levels of each parity, averaged over parity.

    Returns:
        ``(gap, 4 K |alpha|^2)`` where the second value is the large-cat
        asymptote with ``|alpha|^2 = eps2/K``.
    """
    res = diagonalize(params, space, n_levels=2)
    gap = 0.5 * sum(res.energies[s][0] - res.energies[s][1] for s in (+1, -1))
    return float(gap), 4.0 * params.eps2


# -- semiclassical action ---------------------------------------------------

def bohr_count(params: SKParams) -> float:
    """Closed-form Bohr count ``eps2/(pi K) - Delta/(8K)``.

    The detuning coefficient is the conventional closed-form one; the exact
    action of the separatrix loop (:func:`lemniscate_area`) has slope
    ``-1/(4K)`` in ``Delta`` around ``Delta = 0`` instead, so the two agree
    only at ``Delta = 0``.
    """
    return params.eps2 / (math.pi * params.kerr) - params.delta / (8.0 * params.kerr)


def classical_hamiltonian(params: SKParams, x, p):
    """``-Delta/2 r^2 - K/4 r^4 + eps2 (x^2 - p^2)``."""
    r2 = np.asarray(x) ** 2 + np.asarray(p) ** 2
    return (-0.5 * params.delta * r2 - 0.25 * params.kerr * r2 ** 2
            + params.eps2 * (np.asarray(x) ** 2 - np.asarray(p) ** 2))


def lemniscate_area(params: SKParams, rtol: float = 1e-12) -> float:
    """Action of one lobe of the zero-energy separatrix, in units of 2 pi hbar.

    The lobe is star-shaped about the saddle at the origin, so the area is
    computed with Green's theorem in polar form, ``(1/2) int r(theta)^2
    dtheta``, where ``r(theta)`` is found by root bracketing on the classical
    Hamiltonian and the opening half-angle of the lobe by root finding on
    the quadratic part.

    Raises:
        NoWellError: if the zero-energy contour has no lobe
            (requires ``|Delta| < 2 eps2``).
    """
    d, K, e2 = params.delta, params.kerr, params.eps2
    if not (e2 > 0 and abs(d) < 2.0 * e2):
        raise NoWellError(
            f"no separatrix lobe for Delta={d:.4g}, eps2={e2:.4g} (need |Delta| < 2 eps2)")

    # the lobe opens where the quadratic form -Delta/2 + eps2 cos(2 theta) changes sign
    def opening(theta):
        return -0.5 * d + e2 * math.cos(2.0 * theta)

    theta0 = optimize.brentq(opening, 0.0, 0.5 * math.pi, xtol=1e-15, rtol=1e-15)
    r_max = math.sqrt(2.0 * (2.0 * e2 + abs(d)) / K) + 1.0

    def radius2(theta):
        c, s = math.cos(theta), math.sin(theta)
        f = lambda r: float(classical_hamiltonian(params, r * c, r * s))  # noqa: E731
        if f(1e-300 + 1e-12 * r_max) <= 0.0:
            return 0.0
        r = optimize.brentq(f, 1e-12 * r_max, r_max, xtol=1e-15, rtol=1e-15)
        return r * r

    half, _ = integrate.quad(radius2, 0.0, theta0, epsabs=0.0, epsrel=rtol, limit=200)
    area = 2.0 * 0.5 * half  # symmetric about theta = 0
    return area / (2.0 * math.pi)


# -- kissing points -----------------------------------------------------------

def _inflection(x: np.ndarray, y: np.ndarray) -> float | None:
    """Location of the steepest descent of ``y(x)`` via a shape-preserving spline."""
    spline = PchipInterpolator(x, y)
    d1 = spline.derivative(1)
    fine = np.linspace(x[0], x[-1], 40 * len(x))
    slope = d1(fine)
    k = int(np.argmin(slope))
    if k == 0 or k == len(fine) - 1:
        return None
    d2 = spline.derivative(2)
    lo, hi = fine[k - 1], fine[k + 1]
    if np.sign(d2(lo)) == np.sign(d2(hi)):
        return float(fine[k])
    return float(optimize.brentq(lambda t: float(d2(t)), lo, hi))


def kissing_points(sweep, template: SKParams, n_pairs: int,
                   space: HilbertSpace | None = None) -> list[tuple[int, float]]:
    """Kissing point of each excited pair along a sweep of ``eps2/K``.

    For pair ``n`` the splitting ``|delta_n|`` is interpolated against
    ``eps2/K`` with a shape-preserving cubic and the kissing point is the
    inflection, i.e. the point of maximal rate of approach.

    Args:
        sweep: increasing values of ``eps2/K`` (at least 8 per unit).
        template: supplies ``delta``, ``kerr`` and optional terms.
        n_pairs: pairs ``1..n_pairs`` are analysed (pair 0 is the ground pair).
        space: truncation; defaults to the one needed at the sweep end.

    Raises:
        NotFoundError: if a pair shows no inflection inside the sweep.
    """
    sweep = np.asarray(sweep, dtype=float)
    if sweep.size < 4 or np.any(np.diff(sweep) <= 0):
        raise ValueError("sweep must be increasing with at least 4 points")
    if (sweep.size - 1) / (sweep[-1] - sweep[0]) < 8.0:
        raise ValueError("sweep needs at least 8 points per unit of eps2/K")
    K = template.kerr
    if space is None:
        space = default_space(template.replace(eps2=sweep[-1] * K))
    table = np.array([
        np.abs(splittings(template.replace(eps2=s * K), n_pairs + 1, space))
        for s in sweep]) / K
    out = []
    for n in range(1, n_pairs + 1):
        loc = _inflection(sweep, table[:, n])
        if loc is None:
            raise NotFoundError(f"no kissing point for pair {n} in the sweep")
        out.append((n, loc))
    return out


# -- dissipative well positions ----------------------------------------------

def nojump_wells(params: SKParams, kappa1: float, kappa2: float = 0.0) -> tuple[float, float]:
    """Well position of the no-jump (non-Hermitian) Hamiltonian.

    With ``K~ = K + i kappa2/2`` returns ``(|alpha~|^2, sin 2 phi~)``:

        |alpha~|^2 = (-Delta K + kappa1 kappa2/4) / (2 |K~|^2)
                     + sqrt(|eps2/K~|^2 - ((K kappa1 - Delta kappa2)/(4 |K~|^2))^2)
        sin 2 phi~ = (K kappa1 - Delta kappa2) / (4 |eps2| |K~|)

    Raises:
        BelowThresholdError: if ``|eps2|^2 < (Delta^2 + kappa1^2/4)/4``.
    """
    d, K, e2 = params.delta, params.kerr, abs(params.eps2)
    if e2 ** 2 < 0.25 * (d ** 2 + 0.25 * kappa1 ** 2):
        raise BelowThresholdError("squeezing drive below the parametric threshold")
    Kt2 = K ** 2 + 0.25 * kappa2 ** 2
    num = K * kappa1 - d * kappa2
    rad = e2 ** 2 / Kt2 - (num / (4.0 * Kt2)) ** 2
    if rad < 0:
        raise BelowThresholdError("no real well position for these rates")
    alpha2 = (-d * K + 0.25 * kappa1 * kappa2) / (2.0 * Kt2) + math.sqrt(rad)
    sin2phi = num / (4.0 * e2 * math.sqrt(Kt2))
    return float(alpha2), float(sin2phi)
