import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from kerrlab.errors import FitError
from kerrlab.fock import HilbertSpace, coherent
from kerrlab.lindblad import DissipationParams
from kerrlab.protocols import (
    ReadoutParams, aqec_gain, bloch_average_coherence, cat_mean_photons, cat_rabi_trace,
    fit_damped_cosine, free_kerr_evolve, gaussian_overlap_fidelity, rabi_frequency, rabi_speed_limit,
    readout_record_sim, readout_snr, snr_bracket, weak_readout_ratio, yz_lifetime_prediction,
)
from kerrlab.spectrum import SKParams


def bracket_series(x, terms=40):
    """Exact-rational Taylor coefficients of x - 4(1 - e^{-x/2}) + (1 - e^{-x})."""
    total = 0.0
    for k in range(3, terms):
        c = Fraction((-1) ** k) * (Fraction(4, 2 ** k) - 1) / math.factorial(k)
        total += float(c) * x ** k
    return total


# -- Rabi ------------------------------------------------------------------------------

def test_rabi_frequency_examples():
    assert rabi_frequency(0.0, 2.0) == 0.0
    assert rabi_frequency(0.1, 1e-6) == pytest.approx(4 * 0.1 / math.sqrt(2), rel=1e-9)
    a = 3.0
    assert rabi_frequency(0.1, a) == pytest.approx(4 * 0.1 * a, rel=1e-12)
    # phase of alpha enters through Re(eps_x alpha*)
    assert rabi_frequency(0.1j, 3.0j) == pytest.approx(4 * 0.1 * 3.0, rel=1e-12)
    assert rabi_frequency(0.1, 3.0j) == pytest.approx(0.0, abs=1e-12)


def test_rabi_frequency_is_continuous():
    a = np.sqrt(np.linspace(1e-10, 3e-8, 301))
    w = np.array([rabi_frequency(0.1, x) for x in a])
    assert np.abs(np.diff(w)).max() < 1e-9


def test_cat_mean_photons():
    a2 = 1.7
    r2 = math.tanh(a2)
    assert cat_mean_photons(a2) == pytest.approx(0.5 * a2 * (r2 + 1 / r2), rel=1e-12)
    assert cat_mean_photons(a2) == pytest.approx(a2 * (1 + math.exp(-4 * a2)) / (1 - math.exp(-4 * a2)))
    assert cat_mean_photons(0.0) == 0.5


def test_speed_limit_examples():
    p = SKParams(0.0, 1.0, 4.0)
    assert rabi_speed_limit(p) == pytest.approx(128.0)
    assert rabi_speed_limit(p, kappa2=2.0) == pytest.approx(128.0 * math.sqrt(2))
    assert rabi_speed_limit(SKParams(0.0, 1.0, 16.0)) == pytest.approx(8 * 128.0)


# -- free Kerr ----------------------------------------------------------------------------

def test_revival_at_pi_over_k():
    alpha = math.sqrt(6)
    sp = HilbertSpace(60)
    tr = free_kerr_evolve(alpha, SKParams(0.0, 1.0, 0.0), [0.0, math.pi], sp)
    f = abs(coherent(sp, alpha).overlap(tr.states[-1]))
    assert abs(f - 1.0) < 1e-8


def test_two_legged_cat_at_half_revival():
    alpha = math.sqrt(6)
    sp = HilbertSpace(60)
    psi = free_kerr_evolve(alpha, SKParams(0.0, 1.0, 0.0), [math.pi / 2], sp).states[-1]
    best = 0.0
    for phi in (math.pi / 2, -math.pi / 2):
        ref = coherent(sp, -1j * alpha).amplitudes + np.exp(1j * phi) * coherent(sp, 1j * alpha).amplitudes
        ref /= np.linalg.norm(ref)
        best = max(best, abs(np.vdot(ref, psi.amplitudes)))
    assert abs(best - 1.0) < 1e-8


def test_free_kerr_rejects_squeezing():
    with pytest.raises(ValueError):
        free_kerr_evolve(1.0, SKParams(0.0, 1.0, 1.0), [0.0])


def test_revival_contrast_drops_with_cat_size():
    diss = DissipationParams(kappa1=0.01, n_th=0.02)
    contrast = []
    for a2 in (1.0, 2.0, 4.0):
        a = math.sqrt(a2)
        sp = HilbertSpace(int(a2 + 8 * a + 14))
        tr = free_kerr_evolve(a, SKParams(0.0, 1.0, 0.0), np.linspace(0, math.pi, 9), sp, diss)
        # overlap with the loss-damped coherent state at the revival time
        ket = coherent(sp, a * math.exp(-0.5 * diss.kappa1 * math.pi)).amplitudes
        contrast.append(np.real(np.vdot(ket, tr.states[-1] @ ket)))
    assert contrast[0] > contrast[1] > contrast[2]


# -- damped cosine -------------------------------------------------------------------

def test_fit_damped_cosine_recovers_parameters(rng):
    t = np.linspace(0, 30, 300)
    y = 0.8 * np.exp(-t / 12) * np.cos(1.3 * t + 0.4) + 0.05 + 1e-4 * rng.standard_normal(t.size)
    f = fit_damped_cosine(t, y)
    assert f.omega == pytest.approx(1.3, rel=1e-4)
    assert f.T == pytest.approx(12, rel=1e-3)
    assert f.phi == pytest.approx(0.4, abs=1e-3)
    assert f.residual < 2e-4


def test_fit_damped_cosine_errors():
    t = np.linspace(0, 10, 100)
    with pytest.raises(FitError):
        fit_damped_cosine(t[:10], np.cos(t[:10]))
    with pytest.raises(FitError):
        fit_damped_cosine(t, np.ones_like(t))
    with pytest.raises(FitError):
        fit_damped_cosine(t, np.exp(-t / 3))


# -- cat Rabi --------------------------------------------------------------------------

def test_cat_rabi_frequency_at_six_photons():
    p = SKParams(0.0, 1.0, 6.0)
    eps_x = 0.02
    omega = rabi_frequency(eps_x, math.sqrt(6.0))
    t = np.linspace(0, 3 * 2 * math.pi / omega, 300)
    _, fit = cat_rabi_trace(p, DissipationParams(kappa1=0.005), eps_x, t, HilbertSpace(40))
    assert fit.omega == pytest.approx(omega, rel=0.02)


def test_cat_rabi_decay_at_five_photons():
    k1, a2 = 0.005, 5.0
    p = SKParams(0.0, 1.0, a2)
    T_pred = yz_lifetime_prediction(k1, a2)
    eps_x = 8 * math.pi / T_pred / (4 * math.sqrt(cat_mean_photons(a2)))
    t = np.linspace(0, 3 * T_pred, 400)
    traj, fit = cat_rabi_trace(p, DissipationParams(kappa1=k1), eps_x, t, HilbertSpace(int(a2 + 8 * math.sqrt(a2) + 14)))
    assert fit.T == pytest.approx(T_pred, rel=0.10)
    assert traj.meta["T_YZ"] == fit.T


def test_cat_rabi_guards():
    t = np.linspace(0, 50, 200)
    with pytest.raises(FitError):
        cat_rabi_trace(SKParams(0.0, 1.0, 2.0), DissipationParams(kappa1=0.01), 0.0, t, HilbertSpace(30))
    with pytest.raises(ValueError):
        cat_rabi_trace(SKParams(0.0, 1.0, 0.5), DissipationParams(), 0.01, t)
    with pytest.raises(ValueError):
        cat_rabi_trace(SKParams(0.0, 1.0, 2.0), DissipationParams(), 5.0, t)


def test_yz_lifetime_prediction():
    assert yz_lifetime_prediction(0.01, 5.0) == pytest.approx(1 / (0.02 * cat_mean_photons(5.0)))


# -- SNR --------------------------------------------------------------------------------

def test_snr_zero_time():
    assert readout_snr(ReadoutParams(1j, 1.0), 2.0) == 0.0


@pytest.mark.parametrize("x", [1e-4, 0.01, 0.05, 0.099, 0.1, 0.3, 1.0])
def test_bracket_matches_exact_series(x):
    assert snr_bracket(x) == pytest.approx(bracket_series(x), rel=1e-12)


def test_bracket_leading_laws_and_their_error():
    # next series term puts the cubic law -3x/8 off; the linear law misses the constant -3
    x = 0.05
    assert snr_bracket(x) / (x ** 3 / 12) - 1 == pytest.approx(-3 * x / 8, rel=0.02)
    assert snr_bracket(50.0) / 50.0 - 1 == pytest.approx(-3 / 50, rel=1e-9)
    assert snr_bracket(0.02) / (0.02 ** 3 / 12) == pytest.approx(1, abs=0.01)
    assert snr_bracket(500.0) / 500.0 == pytest.approx(1, abs=0.01)


def test_snr_prefactor():
    ro = ReadoutParams(0.3j, 2.0, eta=0.5, tau=5.0)
    amp2 = (0.3 * 1.5 / 2.0) ** 2
    assert readout_snr(ro, 1.5) == pytest.approx(32 * 0.5 * amp2 * float(snr_bracket(10.0)))


def test_readout_param_validation():
    with pytest.raises(ValueError):
        ReadoutParams(1.0, 0.0)
    with pytest.raises(ValueError):
        ReadoutParams(1.0, 1.0, eta=0.0)
    with pytest.raises(ValueError):
        ReadoutParams(1.0, 1.0, tau=-1.0)


def test_weak_readout_warning():
    ro = ReadoutParams(1j, 1.0)
    with pytest.warns(RuntimeWarning):
        assert weak_readout_ratio(ro, 1.0, 2.0) == pytest.approx(0.25)
    assert weak_readout_ratio(ReadoutParams(0.1j, 1.0), 1.0, 2.0) == pytest.approx(0.0025)


# -- readout records ------------------------------------------------------------------------

RO = ReadoutParams(1j, 1.0, tau=1.0)


def test_fidelity_matches_gaussian_overlap():
    r = readout_record_sim(math.inf, RO, 2.0, 100_000, snr=25.0, seed=7)
    ref = gaussian_overlap_fidelity(25.0)
    assert ref == pytest.approx(1 - 2 * stats.norm.cdf(-math.sqrt(12.5)))
    assert abs(r.fidelity - ref) < 3 * r.fidelity_stderr


def test_qndness_with_flips_only():
    T = 10.0
    r = readout_record_sim(T, RO, 2.0, 50_000, n_repeats=2, snr=400.0, seed=3)
    ref = (1 + math.exp(-RO.tau / T)) / 2
    assert abs(r.qndness - ref) < 4 * r.qndness_stderr


def test_conditioned_decay_recovers_lifetime():
    T = 40.0
    r = readout_record_sim(T, RO, 2.0, 40_000, n_repeats=40, snr=25.0, seed=11)
    assert r.decay.T == pytest.approx(T, rel=0.05)


def test_fidelity_monotone_in_snr():
    f = [readout_record_sim(30.0, RO, 2.0, 40_000, snr=s, seed=5).fidelity for s in (20, 30, 40, 60, 100)]
    assert np.all(np.diff(f) >= 0)


def test_readout_determinism_and_labels():
    a = readout_record_sim(20.0, RO, 2.0, 10_000, n_repeats=3, snr=16.0, seed=42)
    b = readout_record_sim(20.0, RO, 2.0, 10_000, n_repeats=3, snr=16.0, seed=42)
    assert np.array_equal(a.record.I, b.record.I)
    assert a.fidelity == b.fidelity
    rec = a.record
    assert np.array_equal(rec.labels, np.where(rec.I >= rec.threshold, 1, -1))
    assert rec.I.shape == rec.Q.shape == rec.truth.shape == (10_000, 3)


def test_readout_guards():
    with pytest.raises(ValueError):
        readout_record_sim(0.0, RO, 2.0, 100)
    with pytest.raises(ValueError):
        readout_record_sim(1.0, RO, 2.0, 100, n_repeats=1)
    with pytest.raises(FitError):
        readout_record_sim(1.0, RO, 2.0, 100, snr=1e-6)


# -- coherence summaries ----------------------------------------------------------------

def test_bloch_average_and_gain():
    assert bloch_average_coherence(*[5.0] * 6) == pytest.approx(0.2)
    assert bloch_average_coherence(1, 1, 2, 2, 4, 4) == pytest.approx((1 + 0.5 + 0.25) / 3)
    assert aqec_gain(0.3, 0.3) == 1.0
    with pytest.raises(ValueError):
        bloch_average_coherence(1, 2, 3)
    with pytest.raises(ValueError):
        bloch_average_coherence(1, 1, 1, 1, 1, 0)
    with pytest.raises(ValueError):
        aqec_gain(1.0, 0.0)
