import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import random_density_matrix
from kerrlab.errors import DegenerateCatError, DimensionMismatchError, GridError, TruncationError
from kerrlab.fock import (
    DensityMatrix, HilbertSpace, Ket, Operator, annihilation, auto_dim, cat, cat_basis,
    cat_norm_ratio, cat_pauli, check_truncation, coherent, creation, fock, identity, number,
    parity, project_to_qubit, quadratures, wigner_of,
)


# -- ladder operators -------------------------------------------------------------

def test_annihilation_dim2():
    np.testing.assert_array_equal(annihilation(HilbertSpace(2)).matrix, [[0, 1], [0, 0]])


def test_annihilation_dim3_entries():
    a = annihilation(HilbertSpace(3)).matrix
    expected = np.zeros((3, 3))
    expected[0, 1] = 1.0
    expected[1, 2] = math.sqrt(2.0)
    np.testing.assert_allclose(a, expected, atol=0)


def test_commutator_truncation_artifact(space40):
    a = annihilation(space40)
    c = a.commutator(creation(space40)).matrix
    np.testing.assert_allclose(np.diag(c)[:-1], 1.0, atol=1e-12)
    assert c[-1, -1] == pytest.approx(-39.0, abs=1e-12)
    np.testing.assert_allclose(c - np.diag(np.diag(c)), 0.0, atol=1e-12)


@pytest.mark.parametrize("dim", [2, 5, 17, 60])
def test_number_operator_is_exact_diagonal(dim):
    n = number(HilbertSpace(dim)).matrix
    np.testing.assert_array_equal(n, np.diag(np.arange(dim, dtype=float)))


@pytest.mark.parametrize("dim", [3, 8, 31])
def test_parity_commutes_exactly(dim):
    sp = HilbertSpace(dim)
    P = parity(sp)
    a = annihilation(sp)
    for op in (a @ a, a.dag() @ a.dag(), a.dag() @ a):
        assert np.array_equal(P.matrix @ op.matrix, op.matrix @ P.matrix)


def test_quadratures_are_hermitian_and_canonical(space40):
    x, p = quadratures(space40)
    assert x.hermitian and p.hermitian
    c = (x @ p - p @ x).matrix
    np.testing.assert_allclose(np.diag(c)[:-1], 1j, atol=1e-12)


def test_mixed_dimension_arithmetic_rejected():
    with pytest.raises(DimensionMismatchError):
        number(HilbertSpace(3)) + number(HilbertSpace(4))
    with pytest.raises(ValueError):
        HilbertSpace(1)


def test_hermitian_flag_is_validated():
    sp = HilbertSpace(3)
    with pytest.raises(ValueError):
        Operator(sp, annihilation(sp).matrix, hermitian=True)


def test_operator_matrix_is_read_only():
    a = annihilation(HilbertSpace(3))
    with pytest.raises(ValueError):
        a.matrix[0, 0] = 1.0


# -- states --------------------------------------------------------------------

def test_coherent_zero_is_vacuum(space40):
    np.testing.assert_allclose(coherent(space40, 0).amplitudes, fock(space40, 0).amplitudes)


def test_coherent_mean_photons(space40):
    psi = coherent(space40, 2.0)
    assert number(space40).expect(psi).real == pytest.approx(4.0, abs=1e-6)


def test_coherent_overlap():
    sp = HilbertSpace(40)
    ov = coherent(sp, -1.5).overlap(coherent(sp, 1.5))
    # |<-a|a>| = exp(-2|a|^2)
    assert abs(ov) == pytest.approx(math.exp(-2 * 1.5 ** 2), abs=1e-8)


def test_coherent_truncation_guard():
    with pytest.raises(TruncationError):
        coherent(HilbertSpace(16), 2.1)


def test_ket_normalised_and_density_matrix_checks(rng):
    sp = HilbertSpace(6)
    k = Ket(sp, rng.standard_normal(6) + 1j * rng.standard_normal(6))
    assert np.linalg.norm(k.amplitudes) == pytest.approx(1.0, abs=1e-12)
    rho = k.dm()
    assert rho.purity() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        DensityMatrix(sp, 2 * rho.matrix)
    with pytest.raises(ValueError):
        DensityMatrix(sp, np.diag([1.5, -0.5, 0, 0, 0, 0]))


def test_even_cat_small_alpha_is_vacuum(space40):
    np.testing.assert_allclose(np.abs(cat(space40, 1e-6).amplitudes), fock(space40, 0).amplitudes,
                               atol=1e-10)


def test_odd_cat_degenerate():
    with pytest.raises(DegenerateCatError):
        cat(HilbertSpace(10), 1e-14, "odd")


def test_cat_photon_number_uses_ratio(space40):
    # nbar_+ = r^2 |a|^2 with r^2 = tanh|a|^2
    r = cat_norm_ratio(2.0)
    nbar = number(space40).expect(cat(space40, 2.0, "even")).real
    assert nbar == pytest.approx(r ** 2 * 4.0, rel=1e-10)
    assert number(space40).expect(cat(space40, 2.0, "odd")).real == pytest.approx(4.0 / r ** 2, rel=1e-10)


@pytest.mark.parametrize("parity_name,sign", [("even", 1), ("odd", -1)])
def test_cat_parity(space40, parity_name, sign):
    assert parity(space40).expect(cat(space40, 1.7, parity_name)).real == pytest.approx(sign, abs=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
def test_cat_basis_invariants(alpha):
    sp = HilbertSpace(auto_dim(alpha ** 2))
    b = cat_basis(sp, alpha)
    assert abs(b.even.overlap(b.odd)) < 1e-10
    for k in b.kets.values():
        assert np.linalg.norm(k.amplitudes) == pytest.approx(1.0, abs=1e-10)
    e = math.exp(-2 * alpha ** 2)
    assert b.ratio == pytest.approx(math.sqrt((1 - e) / (1 + e)), abs=1e-10)
    assert cat_norm_ratio(alpha) == pytest.approx(b.ratio, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.4, 1.3, 2.0])
def test_cat_pauli_algebra(alpha):
    sp = HilbertSpace(40)
    X, Y, Z = cat_pauli(sp, alpha)
    b = cat_basis(sp, alpha)
    V = np.stack([b.even.amplitudes, b.odd.amplitudes], axis=1)

    def restrict(op):
        return V.conj().T @ op.matrix @ V

    x, y, z = restrict(X), restrict(Y), restrict(Z)
    eye = np.eye(2)
    for m in (x, y, z):
        np.testing.assert_allclose(m @ m, eye, atol=1e-10)
    np.testing.assert_allclose(x @ y, 1j * z, atol=1e-10)
    np.testing.assert_allclose(z, np.diag([1, -1]), atol=1e-10)


def test_projection_of_a_large_alpha():
    sp = HilbertSpace(60)
    alpha = 3.0
    r = cat_norm_ratio(alpha)
    c = project_to_qubit(annihilation(sp), cat_basis(sp, alpha))
    assert c["X"].real == pytest.approx(alpha * (r + 1 / r) / 2, abs=1e-9)


def test_projection_of_number():
    sp = HilbertSpace(40)
    alpha = 1.2
    r = cat_norm_ratio(alpha)
    c = project_to_qubit(number(sp), cat_basis(sp, alpha))
    assert c["I"].real == pytest.approx(alpha ** 2 * (r ** 2 + r ** -2) / 2, rel=1e-10)


def test_projection_of_a_small_alpha():
    sp = HilbertSpace(10)
    c = project_to_qubit(annihilation(sp), cat_basis(sp, 1e-3))
    assert c["X"] == pytest.approx(0.5, abs=1e-5)
    assert c["Y"] == pytest.approx(0.5j, abs=1e-5)
    assert abs(c["I"]) < 1e-8 and abs(c["Z"]) < 1e-8


# -- Wigner -------------------------------------------------------------------------

def test_vacuum_wigner_peak():
    W = wigner_of(fock(HilbertSpace(10), 0), [0.0], [0.0]).values
    assert W[0, 0] == pytest.approx(1 / math.pi, abs=1e-6)


def test_cat_wigner_matches_closed_form():
    # even cat, real alpha: N^2/pi [G(x-x0) + G(x+x0) + 2 exp(-x^2-p^2) cos(2 x0 p)]
    alpha = 2.0
    sp = HilbertSpace(50)
    g = np.linspace(-5, 5, 81)
    W = wigner_of(cat(sp, alpha, "even"), g, g).values
    X, P = np.meshgrid(g, g)
    x0 = math.sqrt(2) * alpha
    n2 = 1 / (2 * (1 + math.exp(-2 * alpha ** 2)))
    ref = n2 / math.pi * (np.exp(-(X - x0) ** 2 - P ** 2) + np.exp(-(X + x0) ** 2 - P ** 2)
                          + 2 * np.exp(-X ** 2 - P ** 2) * np.cos(2 * x0 * P))
    np.testing.assert_allclose(W, ref, atol=1e-10)


def test_wigner_matches_displaced_parity_brute_force(rng):
    dim = 8
    rho = random_density_matrix(dim, rng, rank=2)
    big = 60
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    P = np.diag((-1.0) ** np.arange(big))
    pts = [(0.3, -0.2), (1.1, 0.7), (-0.8, 1.5)]
    W = wigner_of(rho, [x for x, _ in pts], [p for _, p in pts], check_grid=False).values
    for j, (x, p) in enumerate(pts):
        b = (x + 1j * p) / math.sqrt(2)
        D = expm(b * a.conj().T - np.conj(b) * a)
        big_rho = np.zeros((big, big), dtype=complex)
        big_rho[:dim, :dim] = rho
        ref = np.real(np.trace(big_rho @ D @ P @ D.conj().T)) / math.pi
        assert W[j, j] == pytest.approx(ref, abs=1e-10)


def test_cat_fringe_period():
    # period along p is pi/sqrt(2 nbar) in the a = (x + i p)/sqrt2 scaling
    alpha = 2 * math.sqrt(2)
    sp = HilbertSpace(70)
    p = np.linspace(-2, 2, 801)
    W = wigner_of(cat(sp, alpha, "even"), [0.0], p).values[:, 0]
    peaks = p[1:-1][(W[1:-1] > W[:-2]) & (W[1:-1] > W[2:])]
    period = np.mean(np.diff(peaks))
    nbar = alpha ** 2
    assert period == pytest.approx(math.pi / math.sqrt(2 * nbar), rel=0.05)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), rank=st.integers(1, 4))
def test_wigner_normalisation_and_bound(seed, rank):
    r = np.random.default_rng(seed)
    rho = random_density_matrix(6, r, rank)
    g = np.linspace(-7, 7, 141)
    wg = wigner_of(rho, g, g)
    assert wg.integral() == pytest.approx(1.0, abs=1e-4)
    assert np.abs(wg.values).max() <= 1 / math.pi + 1e-6


def test_wigner_alpha_convention_factor():
    wg = wigner_of(fock(HilbertSpace(4), 1), [0.0], [0.0])
    assert wg.to_alpha_convention()[0, 0] == pytest.approx(-2 / math.pi, abs=1e-12)


def test_wigner_grid_too_coarse():
    sp = HilbertSpace(40)
    with pytest.raises(GridError):
        wigner_of(cat(sp, 2.5), np.linspace(-5, 5, 6), np.linspace(-5, 5, 6))


# -- truncation audit -----------------------------------------------------------

def test_check_truncation_detects_drift():
    def mean_n(dim):
        return [number(HilbertSpace(dim)).expect(coherent(HilbertSpace(dim), 1.0))]

    assert check_truncation(mean_n, 30)[0].real == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(TruncationError):
        check_truncation(lambda d: [float(d)], 10)


def test_auto_dim_heuristic():
    assert auto_dim(0) == 27
    assert auto_dim(8) == math.ceil(8 + 12 * 3 + 15)
    assert identity(HilbertSpace(auto_dim(8))).matrix.shape == (59, 59)
