import math

import numpy as np
import pytest

from carnot.errors import DegenerateFrameError, UnsupportedOperationError
from carnot.groups import CarnotGroup, free_step2, heisenberg
from carnot.kernels import (
    co_eigenfunction,
    group_convolve,
    heat_hat,
    heat_slice,
    invariant_hat,
    invariant_slice,
    invert_at,
    invert_to_grid,
    perturbed_hat,
    perturbed_slice,
    vertical_charfn,
)
from carnot.levy import AtomJumps, CompoundPoisson, LevyExponent, NormalDist

H1 = heisenberg(1)
PSI_GAUSS = LevyExponent(sigma=[[1.0]])
PSI_CP = LevyExponent(jumps=CompoundPoisson(3.0, NormalDist([0.0], [[1.0]])), m=1)


def test_heat_hat_value():
    # 1 / (2 sinh 0.5) with sinh 0.5 = 0.5210953...
    got = heat_hat(H1, 0.5, [0.0, 0.0], [1.0])
    assert got == pytest.approx(1.0 / (2 * math.pi) / (2 * math.sinh(0.5)), rel=1e-12)
    assert 1.0 / (2 * math.sinh(0.5)) == pytest.approx(0.9595174, abs=1e-6)


def test_heat_hat_small_lambda_limit():
    t = 0.7
    got = heat_hat(H1, t, [0.0, 0.0], [1e-9])
    assert got == pytest.approx((2 * math.pi) ** (-1) * (2 * t) ** (-1), rel=1e-7)


def test_heat_hat_scaling():
    # hat(t, z, lam, nu) = c^{2d} hat(c^2 t, c z, lam / c^2, nu / c)
    rng = np.random.default_rng(30)
    for G in (H1, free_step2(3)):
        for _ in range(10):
            t = float(rng.uniform(0.2, 2.0))
            c = float(rng.uniform(0.5, 2.0))
            lam = rng.normal(size=G.m)
            z = rng.normal(size=2 * G.d)
            nu = rng.normal(size=G.k)
            lhs = heat_hat(G, t, z, lam, nu)
            rhs = c ** (2 * G.d) * heat_hat(G, c * c * t, c * z, lam / c**2, nu / c)
            assert lhs == pytest.approx(rhs, rel=1e-11)


def test_heat_hat_rejects_degenerate():
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    A1 = np.block([[J, np.zeros((2, 2))], [np.zeros((2, 2)), np.zeros((2, 2))]])
    A2 = np.block([[np.zeros((2, 2)), np.zeros((2, 2))], [np.zeros((2, 2)), J]])
    G = CarnotGroup(4, 2, [A1, A2])
    with pytest.raises(DegenerateFrameError):
        heat_hat(G, 0.5, np.zeros(4), [1.0, 0.0])


def test_perturbed_hat_factor():
    z, lam, t = [0.3, -0.2], [1.0], 1.0
    base = heat_hat(H1, t, z, lam)
    assert perturbed_hat(H1, None, t, z, lam) == pytest.approx(base)
    got = perturbed_hat(H1, PSI_GAUSS, t, z, lam)
    assert got == pytest.approx(base * math.exp(-1.0), rel=1e-12)


def test_invariant_hat_factor():
    z, lam = [0.1, 0.4], [1.3]
    base = heat_hat(H1, 0.5, z, lam)
    assert invariant_hat(H1, None, z, lam) == pytest.approx(base)
    got = invariant_hat(H1, PSI_GAUSS, z, lam)
    assert got == pytest.approx(base * math.exp(-(1.3**2) / 4.0), rel=1e-12)
    # symmetric exponent keeps the hat real and positive
    got_cp = invariant_hat(H1, PSI_CP, z, lam)
    assert got_cp.imag == pytest.approx(0.0, abs=1e-14) and got_cp.real > 0


def test_invariant_hat_requires_log_moment():
    class HeavyTail(CompoundPoisson):
        in_N_log = False

    psi = LevyExponent(jumps=HeavyTail(1.0, NormalDist([0.0], [[1.0]])), m=1)
    with pytest.raises(UnsupportedOperationError):
        invariant_slice(H1, psi)
    with pytest.raises(UnsupportedOperationError):
        invariant_hat(H1, psi, [0.0, 0.0], [1.0])


@pytest.mark.parametrize("psi", [None, PSI_GAUSS])
def test_marginal_identity(psi):
    # integrate the inverted kernel over v and compare with the Euclidean
    # heat kernel of the horizontal Laplacian
    t = 0.5
    sl = heat_slice(H1, t) if psi is None else perturbed_slice(H1, psi, t)
    hx = np.linspace(-2.0, 2.0, 5)
    hy = np.linspace(-1.5, 1.5, 4)
    v = np.linspace(-9.0, 9.0, 241)
    grid = invert_to_grid(sl, [hx, hy, v], calibrate=False)
    marg = np.trapezoid(grid.values, v, axis=2)
    X, Y = np.meshgrid(hx, hy, indexing="ij")
    euclid = (4 * math.pi * t) ** (-1) * np.exp(-(X**2 + Y**2) / (4 * t))
    assert np.max(np.abs(marg - euclid)) < 1e-5


def test_mass_and_positivity_and_symmetry():
    sl = heat_slice(H1, 0.5)
    ax = [np.linspace(-4.5, 4.5, 41), np.linspace(-4.5, 4.5, 41), np.linspace(-5, 5, 41)]
    grid = invert_to_grid(sl, ax)
    assert abs(grid.mass() - 1.0) < 1e-3
    assert abs(1.0 / grid.meta["c_norm"] - 1.0) < 5e-3  # convention check
    assert grid.values.min() > -1e-8
    # even in v
    assert np.max(np.abs(grid.values - grid.values[:, :, ::-1])) < 1e-10


def test_charfn_consistency():
    sl = heat_slice(H1, 0.5)
    ax = [np.linspace(-6.5, 6.5, 66), np.linspace(-6.5, 6.5, 66), np.linspace(-8, 8, 81)]
    grid = invert_to_grid(sl, ax, calibrate=False)
    for lam in (0.5, 1.0):
        phases = np.exp(1j * lam * ax[2])[None, None, :]
        got = np.trapezoid(
            np.trapezoid(np.trapezoid(grid.values * phases, ax[2]), ax[1]), ax[0]
        )
        exact = vertical_charfn(H1, None, 0.5, lam)
        assert abs(got - exact) / abs(exact) < 1e-5


def test_space_time_scaling_realspace():
    rng = np.random.default_rng(31)
    sl1 = heat_slice(H1, 1.0)
    for _ in range(5):
        t = float(rng.uniform(0.3, 2.0))
        h = rng.normal(size=2)
        v = float(rng.normal())
        lhs = invert_at(heat_slice(H1, t), h, v)
        rhs = t ** (-(H1.n + 2 * H1.m) / 2) * invert_at(sl1, h / math.sqrt(t), v / t)
        assert lhs == pytest.approx(rhs, rel=1e-6)


def test_vertical_convolution_identity():
    # hat of (f *_v mu) = charfn(mu)(lam) * hat(f) for an atomic mu, with the
    # convolution executed in real space on the grid
    sl = heat_slice(H1, 0.5)
    v = np.linspace(-10, 10, 201)
    hx = np.array([0.0, 0.5])
    hy = np.array([0.0])
    grid = invert_to_grid(sl, [hx, hy, v], calibrate=False)
    shift = 0.5  # multiple of the v step (0.1)
    w1, w2 = 0.7, 0.3
    steps = int(round(shift / (v[1] - v[0])))
    conv = np.zeros_like(grid.values)
    conv[:, :, steps:] += w1 * grid.values[:, :, :-steps]
    conv[:, :, :-steps] += w2 * grid.values[:, :, steps:]
    for lam in (0.4, 1.1):
        phases = np.exp(1j * lam * v)[None, None, :]
        lhs = np.trapezoid(conv * phases, v, axis=2)
        charfn = w1 * np.exp(1j * lam * shift) + w2 * np.exp(-1j * lam * shift)
        rhs = charfn * np.trapezoid(grid.values * phases, v, axis=2)
        assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_vertical_charfn_perturbed():
    lam, t = 1.0, 1.0
    got = vertical_charfn(H1, PSI_CP, t, lam)
    expected = math.exp(3.0 * (math.exp(-0.5) - 1.0)) / math.cosh(1.0)
    assert got.real == pytest.approx(expected, rel=1e-12)
    assert got.imag == pytest.approx(0.0, abs=1e-14)


def test_inversion_rejects_general_group():
    G = free_step2(3)  # m = 3, lam-dependent frames
    with pytest.raises(UnsupportedOperationError):
        invert_to_grid(heat_slice(G, 0.5), [np.linspace(-1, 1, 3)] * 6)


def test_co_eigenfunction_beta_zero():
    ax = [np.linspace(-3, 3, 9), np.linspace(-3, 3, 9), np.linspace(-3, 3, 11)]
    J = co_eigenfunction(H1, None, [0], ax)
    assert np.allclose(J.values, 1.0)


def test_co_eigenfunction_antisymmetry():
    ax = [np.linspace(-3, 3, 13), np.linspace(-3, 3, 13), np.linspace(-3, 3, 25)]
    J = co_eigenfunction(H1, None, [1], ax)
    assert J.meta["masked"] == 0
    flipped = J.values[:, :, ::-1]
    assert np.max(np.abs(J.values + flipped)) < 1e-8


def test_co_eigenfunction_finite_difference():
    # Fourier-side vertical derivative against a centered finite difference
    ax = [np.linspace(-2, 2, 5), np.linspace(-2, 2, 5), np.linspace(-2, 2, 9)]
    psi = PSI_GAUSS
    J = co_eigenfunction(H1, psi, [1], ax)
    dens = J.meta["density"]
    sl = invariant_slice(H1, psi)
    sl.c_norm = dens.meta["c_norm"]
    eps = 1e-4
    rng = np.random.default_rng(32)
    for _ in range(10):
        i = rng.integers(0, 5)
        j = rng.integers(0, 5)
        k = rng.integers(2, 7)
        h = np.array([ax[0][i], ax[1][j]])
        v0 = ax[2][k]
        fd = (invert_at(sl, h, v0 + eps) - invert_at(sl, h, v0 - eps)) / (2 * eps)
        fourier_side = -J.values[i, j, k] * dens.values[i, j, k]
        assert fd == pytest.approx(fourier_side, rel=1e-5, abs=1e-12)


def test_group_convolution_semigroup_smoke():
    # coarse version of the kernel semigroup identity
    ax = [np.linspace(-4, 4, 27), np.linspace(-4, 4, 27), np.linspace(-3.5, 3.5, 29)]
    q1 = invert_to_grid(heat_slice(H1, 0.5), ax, calibrate=False)
    q2 = invert_to_grid(heat_slice(H1, 1.0), ax, calibrate=False)
    conv = group_convolve(H1, q1, q1)
    assert np.max(np.abs(conv.values - q2.values)) < 2e-3
