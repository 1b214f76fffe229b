"""Protocol-level models for the cat qubit.

Covers the X-drive Rabi oscillation, the free-Kerr gate, readout SNR, a
telegraph model of repeated measurement records, and coherence summaries.
Rates and times share one unit system (Kerr units in the tests).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import least_squares

from .errors import FitError
from .fock import HilbertSpace, Ket, annihilation, cat_basis, cat_pauli, coherent, parity
from .lindblad import DissipationParams, ExpFit, Trajectory, evolve, fit_exponential
from .spectrum import SKParams, build_hamiltonian, default_space

__all__ = [
    "DampedCosineFit",
    "MeasurementRecord",
    "ReadoutParams",
    "ReadoutResult",
    "aqec_gain",
    "bloch_average_coherence",
    "cat_mean_photons",
    "cat_rabi_trace",
    "fit_damped_cosine",
    "free_kerr_evolve",
    "gaussian_overlap_fidelity",
    "rabi_frequency",
    "rabi_speed_limit",
    "readout_record_sim",
    "readout_snr",
    "snr_bracket",
    "weak_readout_ratio",
    "yz_lifetime_prediction",
]


# -- drive and photon-number helpers ------------------------------------------------

def cat_mean_photons(alpha2: float) -> float:
    """Photon number averaged over the even and odd cats, ``|a|^2 coth(2|a|^2)``.

    Tends to 1/2 as ``alpha2 -> 0``.
    """
    x = float(alpha2)
    if x < 1e-8:
        return 0.5 + 2.0 * x * x / 3.0
    return x / math.tanh(2.0 * x)


def rabi_frequency(eps_x: complex, alpha: complex) -> float:
    """Rabi rate of a linear drive ``eps_x a^dag + h.c.`` on the cat qubit.

    Uses ``Re(4 eps_x sqrt(nbar) e^{-i arg alpha})`` with ``nbar`` from
    :func:`cat_mean_photons`, which tends to ``Re(4 eps_x alpha*)`` for large
    cats.  For very small cats this overestimates the exact two-level value
    ``2|eps_x|`` by ``sqrt(2)``.
    """
    alpha = complex(alpha)
    phase = np.exp(-1j * np.angle(alpha)) if alpha != 0 else 1.0
    nbar = cat_mean_photons(abs(alpha) ** 2)
    return float(np.real(4.0 * complex(eps_x) * math.sqrt(nbar) * phase))


def rabi_speed_limit(params: SKParams, kappa2: float = 0.0) -> float:
    """Upper scale ``16 |alpha|^3 sqrt(K^2 + kappa2^2/4)`` for the Rabi rate."""
    a3 = params.well_alpha2 ** 1.5
    return 16.0 * a3 * math.hypot(params.kerr, 0.5 * kappa2)


def yz_lifetime_prediction(kappa1: float, alpha2: float) -> float:
    """``T1 / (2 nbar)`` with ``T1 = 1/kappa1`` and ``nbar`` the cat average."""
    return 1.0 / (2.0 * kappa1 * cat_mean_photons(alpha2))


# -- free Kerr evolution -------------------------------------------------------------

def free_kerr_evolve(alpha: complex, params: SKParams, t_grid, space: HilbertSpace | None = None,
                     diss: DissipationParams | None = None) -> Trajectory:
    """Evolve a coherent state under ``-K a^dag^2 a^2``.

    Without dissipation the number-basis phases ``exp(i K n(n-1) t)`` are
    applied exactly and ``states`` holds :class:`Ket` snapshots.  With
    dissipation the master equation is integrated and ``states`` holds
    density matrices.  Recorded observables are ``a`` and ``parity``.
    """
    if params.eps2 != 0 or params.delta != 0:
        raise ValueError("free Kerr evolution needs delta = eps2 = 0")
    if params.lam or params.eps4 or params.eps2_prime:
        raise ValueError("free Kerr evolution takes the pure Kerr Hamiltonian")
    t = np.asarray(t_grid, dtype=float)
    if space is None:
        from .fock import auto_dim
        space = HilbertSpace(auto_dim(abs(alpha) ** 2))
    psi0 = coherent(space, alpha)
    a = annihilation(space).matrix
    P = parity(space).matrix
    if diss is None or (diss.kappa1 == 0 and diss.kappa_phi == 0):
        n = np.arange(space.dim)
        kets = []
        ev_a, ev_p = [], []
        for tk in t:
            v = psi0.amplitudes * np.exp(1j * params.kerr * n * (n - 1) * tk)
            kets.append(Ket(space, v, normalize=False))
            ev_a.append(np.vdot(v, a @ v))
            ev_p.append(np.vdot(v, P @ v).real)
        obs = {"a": np.asarray(ev_a), "parity": np.asarray(ev_p)}
        return Trajectory(t, obs, None, kets[-1], kets, {"dim": space.dim})
    H = build_hamiltonian(params, space)
    traj = evolve(psi0, H, diss, t, {"a": a, "parity": P}, store_states=True)
    traj.meta["dim"] = space.dim
    return traj


# -- damped cosine fit -----------------------------------------------------------

@dataclass(frozen=True)
class DampedCosineFit:
    """``A exp(-t/T) cos(omega t + phi) + C`` with its rms residual."""

    amplitude: float
    T: float
    omega: float
    phi: float
    offset: float
    residual: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-t / self.T) * np.cos(self.omega * t + self.phi) + self.offset


def fit_damped_cosine(times, values) -> DampedCosineFit:
    """Least-squares damped cosine, initialised from the FFT peak.

    Raises:
        FitError: with fewer than 16 samples, flat data, or when the data
            contain less than one full oscillation.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 16:
        raise FitError("need at least 16 samples")
    span = t[-1] - t[0]
    dt = np.diff(t)
    if np.ptp(dt) > 1e-6 * dt.max():
        raise FitError("damped cosine fit expects a uniform grid")
    yc = y - y.mean()
    scale = np.abs(yc).max()
    if scale == 0:
        raise FitError("flat data")
    power = np.abs(np.fft.rfft(yc * np.hanning(y.size)))
    k = int(np.argmax(power))
    if k < 1:
        raise FitError("no oscillation resolved in the window")
    freqs = 2 * np.pi * np.fft.rfftfreq(y.size, d=dt[0])
    w0 = freqs[k]
    # sign of the first sample fixes the pi ambiguity of the phase guess
    phi0 = 0.0 if yc[0] >= 0 else np.pi
    t0 = t[0]

    def model(q, tt):
        A, logT, w, ph, C = q
        return A * np.exp(-(tt - t0) / np.exp(logT)) * np.cos(w * (tt - t0) + ph) + C

    q0 = [abs(yc[0]) or scale, math.log(span), w0, phi0, y.mean()]
    res = least_squares(lambda q: (model(q, t) - y) / scale, q0, method="lm")
    A, logT, w, ph, C = res.x
    if not res.success or A == 0:
        raise FitError("damped cosine fit did not converge")
    if w < 0:
        w, ph = -w, -ph
    if A < 0:
        A, ph = -A, ph + np.pi
    if w * span < 2 * np.pi:
        raise FitError("less than one oscillation in the window")
    ph = (ph - w * t0 + np.pi) % (2 * np.pi) - np.pi
    rms = float(np.sqrt(np.mean((model(res.x, t) - y) ** 2)))
    return DampedCosineFit(float(A), float(np.exp(logT)), float(w), float(ph), float(C), rms)


def cat_rabi_trace(params: SKParams, diss: DissipationParams, eps_x: complex, t_grid,
                   space: HilbertSpace | None = None, observable: str = "Y") -> tuple[Trajectory, DampedCosineFit]:
    """Rabi oscillation of a cat qubit under ``H_SK + eps_x a^dag + eps_x* a``.

    The qubit starts in ``|+Y>`` built from cats of size
    ``sqrt(well_alpha2)``; ``Y`` and ``Z`` are recorded and the chosen one is
    fitted with a damped cosine whose time constant is ``T_YZ``.

    Raises:
        ValueError: outside the stabilised regime or when the drive is
            within a factor 10 of the speed limit.
        FitError: when no oscillation can be fitted (e.g. ``eps_x = 0``).
    """
    if params.eps2 < params.kerr:
        raise ValueError("cat Rabi traces need eps2 >= K")
    alpha = math.sqrt(params.well_alpha2)
    omega = abs(rabi_frequency(eps_x, alpha))
    if omega * 10 > rabi_speed_limit(params):
        raise ValueError("drive too strong: within 10x of the speed limit")
    if space is None:
        space = default_space(params)
    a = annihilation(space).matrix
    ex = complex(eps_x)
    H = build_hamiltonian(params, space).matrix + ex * a.conj().T + np.conj(ex) * a
    basis = cat_basis(space, alpha)
    _, Y, Z = cat_pauli(space, alpha)
    traj = evolve(basis.kets["+Y"], H, diss, t_grid, {"Y": Y.matrix, "Z": Z.matrix},
                  method="propagator")
    fit = fit_damped_cosine(traj.times, traj.observables[observable])
    traj.meta.update(dim=space.dim, omega=fit.omega, T_YZ=fit.T)
    return traj, fit


# -- readout ---------------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutParams:
    """Frequency-conversion readout settings.

    Attributes:
        g_bs: complex beamsplitter rate.
        kappa_r: readout resonator linewidth.
        eta: measurement efficiency in (0, 1].
        tau: integration time of one measurement.
    """

    g_bs: complex
    kappa_r: float
    eta: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kappa_r <= 0:
            raise ValueError("kappa_r must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


def snr_bracket(x) -> np.ndarray:
    """``x - 4(1 - e^{-x/2}) + (1 - e^{-x})``, series below ``x = 0.1``.

    The closed form cancels to ``x^3/12`` at small ``x``, so the Taylor
    series ``sum_{k>=3} (-1)^k (4 2^-k - 1) x^k / k!`` is used there.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.1
    xs = x[small]
    ser = np.zeros_like(xs)
    for k in range(3, 12):
        ser += (-1) ** k * (4.0 * 2.0 ** -k - 1.0) * xs ** k / math.factorial(k)
    out[small] = ser
    xl = x[~small]
    out[~small] = xl + 4.0 * np.expm1(-xl / 2) - np.expm1(-xl)
    return out if out.ndim else out[()]


def readout_snr(ro: ReadoutParams, alpha: complex) -> float:
    """Power SNR ``32 eta (|g alpha| / kappa_r)^2 f(kappa_r tau)``."""
    amp = abs(ro.g_bs * alpha) / ro.kappa_r
    return float(32.0 * ro.eta * amp ** 2 * snr_bracket(ro.kappa_r * ro.tau))


def weak_readout_ratio(ro: ReadoutParams, kerr: float, alpha: complex, warn_above: float = 0.1) -> float:
    """``|g|^2 / (2 K |alpha| kappa_r)``; warns when above ``warn_above``."""
    r = abs(ro.g_bs) ** 2 / (2.0 * kerr * abs(alpha) * ro.kappa_r)
    if r > warn_above:
        warnings.warn(f"readout is not weak: ratio {r:.3g}", RuntimeWarning, stacklevel=2)
    return r


@dataclass(frozen=True)
class MeasurementRecord:
    """Repeated measurement records, one row per shot.

    ``I`` and ``Q`` are in units of the noise standard deviation;
    ``labels = sign(I - threshold)`` and ``truth`` holds the well occupied
    during each measurement.
    """

    I: np.ndarray
    Q: np.ndarray
    labels: np.ndarray
    truth: np.ndarray
    threshold: float = 0.0


@dataclass(frozen=True)
class ReadoutResult:
    record: MeasurementRecord
    snr: float
    fidelity: float
    fidelity_stderr: float
    fidelity_truth: float
    qndness: float
    qndness_stderr: float
    decay: ExpFit | None = None
    meta: dict = field(default_factory=dict)


_CHUNK = 8192


def readout_record_sim(T_X: float, ro: ReadoutParams, alpha: complex, n_shots: int,
                       n_repeats: int = 2, seed: int = 0, snr: float | None = None,
                       herald_sigma: float = 3.0) -> ReadoutResult:
    """Simulate back-to-back measurements of a flipping well occupation.

    The occupied well follows a symmetric telegraph process with flip rate
    ``1/(2 T_X)`` per direction.  Each measurement of length ``tau`` returns
    ``I ~ N(+-I0, 1)`` and ``Q ~ N(0, 1)`` with ``2 I0^2 = SNR``.

    Fidelity is ``1 - p(-|+) - p(+|-)``, where the first measurement heralds
    the state only when ``|I| > herald_sigma`` and the second is read with
    the fair threshold ``I = 0``.  QNDness is ``(P(+|+) + P(-|-))/2`` over
    all pairs of successive fair measurements.  With ``n_repeats >= 9`` the
    average ``I_k / I0`` of records heralded ``+`` is fitted with one
    exponential, whose time constant estimates ``T_X``.

    Shots are drawn in fixed chunks, each from its own stream spawned from
    ``seed``, so results do not depend on how the work is split.
    """
    if T_X <= 0:
        raise ValueError("T_X must be positive")
    if n_repeats < 2:
        raise ValueError("need at least two measurements per shot")
    if snr is None:
        snr = readout_snr(ro, alpha)
    I0 = math.sqrt(snr / 2.0)
    p_flip = 0.5 * (-math.expm1(-ro.tau / T_X)) if np.isfinite(T_X) else 0.0

    n_chunks = -(-n_shots // _CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    I_parts, Q_parts, truth_parts = [], [], []
    for c, ss in enumerate(streams):
        m = min(_CHUNK, n_shots - c * _CHUNK)
        rng = np.random.default_rng(ss)
        s0 = np.where(rng.random(m) < 0.5, 1, -1)
        flips = np.where(rng.random((m, n_repeats - 1)) < p_flip, -1, 1)
        truth = s0[:, None] * np.cumprod(np.concatenate([np.ones((m, 1), int), flips], axis=1), axis=1)
        I_parts.append(truth * I0 + rng.standard_normal((m, n_repeats)))
        Q_parts.append(rng.standard_normal((m, n_repeats)))
        truth_parts.append(truth)
    I = np.concatenate(I_parts)
    Q = np.concatenate(Q_parts)
    truth = np.concatenate(truth_parts)
    labels = np.where(I >= 0.0, 1, -1)
    record = MeasurementRecord(I, Q, labels, truth, 0.0)

    # heralded fidelity
    hp = I[:, 0] > herald_sigma
    hm = I[:, 0] < -herald_sigma
    n_p, n_m = int(hp.sum()), int(hm.sum())
    if n_p == 0 or n_m == 0:
        raise FitError("no shots passed the herald threshold")
    e_p = float(np.mean(labels[hp, 1] < 0))
    e_m = float(np.mean(labels[hm, 1] > 0))
    fid = 1.0 - e_p - e_m
    fid_se = math.sqrt(e_p * (1 - e_p) / n_p + e_m * (1 - e_m) / n_m)
    fid_truth = 1.0 - float(np.mean(labels[truth == 1] < 0)) - float(np.mean(labels[truth == -1] > 0))

    # fair QND over successive pairs
    first, second = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    sp, sm = first == 1, first == -1
    q_p = float(np.mean(second[sp] == 1))
    q_m = float(np.mean(second[sm] == -1))
    qnd = 0.5 * (q_p + q_m)
    qnd_se = 0.5 * math.sqrt(q_p * (1 - q_p) / sp.sum() + q_m * (1 - q_m) / sm.sum())

    decay = None
    if n_repeats >= 9 and np.isfinite(T_X):
        k = np.arange(1, n_repeats)
        avg = I[hp, 1:].mean(axis=0) / I0
        decay = fit_exponential(k * ro.tau, avg, offset=False)
    meta = {"seed": seed, "n_shots": n_shots, "n_repeats": n_repeats, "I0": I0, "p_flip": p_flip}
    return ReadoutResult(record, snr, fid, fid_se, fid_truth, qnd, qnd_se, decay, meta)


def gaussian_overlap_fidelity(snr: float) -> float:
    """``1 - 2 Phi(-sqrt(SNR/2))`` for two unit-variance Gaussians."""
    return float(1.0 - 2.0 * stats.norm.sf(math.sqrt(snr / 2.0)))


# -- coherence summaries ------------------------------------------------------------

def bloch_average_coherence(*lifetimes: float) -> float:
    """Mean of the six cardinal-state decay rates, ``(1/6) sum 1/T_i``."""
    if len(lifetimes) != 6:
        raise ValueError("expected six lifetimes (+X, -X, +Y, -Y, +Z, -Z)")
    T = np.asarray(lifetimes, dtype=float)
    if np.any(T <= 0):
        raise ValueError("lifetimes must be positive")
    return float(np.mean(1.0 / T))


def aqec_gain(gamma_fock: float, gamma_cat: float) -> float:
    """Error-correction gain ``gamma_Fock / gamma_cat``."""
    if gamma_cat <= 0:
        raise ValueError("gamma_cat must be positive")
    return gamma_fock / gamma_cat
