"""
Tests for the windowed eigensolver, the dense oracle and the dispersion
branches.
"""

import unittest
from unittest import mock

import numpy as np
import numpy.testing as nptest
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from edgespectra.assembly import Basis, assemble_full
from edgespectra.model import (LatticeVariant, ModelParams, WallSide, build_lattice,
                               sample_realization)
from edgespectra.spectral import (ARPACK_MAXITER, ConvergenceError, EnergyWindow, WindowLabel,
                                  dense_oracle, dispersion_branches, eigs_in_window,
                                  feynman_hellmann_residual, fiber_eigenpairs,
                                  fiber_window_spectrum, fix_phase)


class TestEnergyWindow(unittest.TestCase):

    def test_band_and_gap(self):
        p = ModelParams(B=2., L=8., V0=0.3)
        band = EnergyWindow.band(p)
        gap = EnergyWindow.gap(p)
        nptest.assert_allclose((band.lo, band.hi), (2.05, 2.3))
        nptest.assert_allclose((gap.lo, gap.hi), (3.7, 4.3))
        assert band.label is WindowLabel.BAND and gap.label is WindowLabel.GAP

    def test_empty_band_window(self):
        with nptest.assert_raises(ValueError):
            EnergyWindow.band(ModelParams(B=2., L=8., V0=0.))

    def test_invalid(self):
        with nptest.assert_raises(ValueError):
            EnergyWindow(1., 1.)


class TestDenseOracle(unittest.TestCase):

    def test_two_by_two(self):
        energies, vectors = dense_oracle(np.array([[2., 1.], [1., 2.]]))
        nptest.assert_allclose(energies, [1., 3.])
        nptest.assert_allclose(np.abs(vectors), np.full((2, 2), 1. / np.sqrt(2.)))

    def test_dimension_guard(self):
        with nptest.assert_raises(ValueError):
            dense_oracle(sp.identity(6001, format="csr"))

    def test_phase_convention(self):
        v = fix_phase(np.array([[0.1j, 0.], [-0.9j, 1.j]]))
        nptest.assert_allclose(v[1, 0], 0.9)
        nptest.assert_allclose(v[1, 1], 1.)


class TestWindowedSolver(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.params = ModelParams(B=2., L=8., V0=0.3, flux=0.25)
        cls.basis = Basis.for_params(cls.params, n_x=129, J=8)
        omega = sample_realization(4, build_lattice(LatticeVariant.GAP, 8.), cls.params.V0)
        cls.op = assemble_full(omega, cls.basis, cls.params)
        cls.window = EnergyWindow(2.1, 3.5)
        cls.records = eigs_in_window(cls.op, cls.window, tol=1e-9)

    def test_matches_dense_oracle(self):
        energies, _ = dense_oracle(self.op)
        inside = energies[(energies >= self.window.lo) & (energies <= self.window.hi)]
        assert len(self.records) == inside.size > 0
        nptest.assert_allclose([r.energy for r in self.records], inside, atol=1e-8)

    def test_residuals_and_norms(self):
        h = self.op.hamiltonian
        for r in self.records:
            assert r.residual <= 1e-9
            nptest.assert_allclose(np.linalg.norm(h @ r.vector - r.energy * r.vector),
                                   r.residual, atol=1e-12)
            nptest.assert_allclose(np.linalg.norm(r.vector), 1., atol=1e-12)

    def test_orthonormal(self):
        v = np.array([r.vector for r in self.records]).T
        gram = v.conj().T @ v
        assert np.max(np.abs(gram - np.eye(v.shape[1]))) <= 1e-8

    def test_sorted_and_phase_fixed(self):
        energies = [r.energy for r in self.records]
        assert energies == sorted(energies)
        for r in self.records:
            pivot = r.vector[np.argmax(np.abs(r.vector))]
            assert abs(pivot.imag) < 1e-14 and pivot.real > 0

    def test_empty_window(self):
        assert eigs_in_window(self.op, EnergyWindow(4. - 1e-15, 4.)) == []

    def test_window_above_ceiling(self):
        with nptest.assert_raises(ValueError):
            eigs_in_window(self.op, EnergyWindow(6., 7.))

    def test_arpack_is_bounded(self):
        n = self.op.hamiltonian.shape[0]
        stall = spla.ArpackNoConvergence("stalled", np.zeros(3), np.zeros((n, 3)))
        with mock.patch.object(spla, "eigsh", side_effect=stall) as eigsh:
            with pytest.raises(ConvergenceError) as err:
                eigs_in_window(self.op, self.window, tol=1e-9)
        kwargs = eigsh.call_args.kwargs
        assert 0. < kwargs["tol"] <= 1e-11
        assert kwargs["maxiter"] == ARPACK_MAXITER
        assert err.value.n_converged == 3


def test_zero_disorder_is_union_of_fibers(clean_params):
    basis = Basis.for_params(clean_params, n_x=129)
    op = assemble_full(None, basis, clean_params)
    window = EnergyWindow(2.05, 3.5)
    records = eigs_in_window(op, window, tol=1e-9)
    fibers = fiber_window_spectrum(basis, clean_params, op.walls, window)
    assert len(records) == len(fibers) > 0
    nptest.assert_allclose([r.energy for r in records], [s.energy for s in fibers],
                           atol=1e-10)


def test_degenerate_window_endpoints():
    params = ModelParams(B=2., L=8., V0=0., flux=0.)
    basis = Basis.for_params(params, n_x=129)
    op = assemble_full(None, basis, params)
    fibers = fiber_window_spectrum(basis, params, op.walls, EnergyWindow(2.05, 3.5))
    energies = np.array([s.energy for s in fibers])
    # left and right edge states coincide without flux
    assert np.min(np.diff(energies)) <= 1e-10
    window = EnergyWindow(energies[2] - 1e-9, energies[-3] + 1e-9)
    records = eigs_in_window(op, window, tol=1e-9)
    inside = energies[(energies >= window.lo) & (energies <= window.hi)]
    assert len(records) == inside.size
    nptest.assert_allclose([r.energy for r in records], inside, atol=1e-9)


def test_fiber_window_is_closed(clean_params, basis):
    window = EnergyWindow(2.05, 3.5)
    with mock.patch("edgespectra.spectral.eigh_tridiagonal",
                    wraps=eigh_tridiagonal) as solver:
        fiber_eigenpairs(0., basis, clean_params, (WallSide.LEFT, WallSide.RIGHT),
                         window=window)
    lo, hi = solver.call_args.kwargs["select_range"]
    assert lo < window.lo and lo == np.nextafter(window.lo, -np.inf)
    assert hi == window.hi


def test_flux_is_periodic():
    params = ModelParams(B=2., L=8., V0=0.3, flux=0.25)
    omega = sample_realization(4, build_lattice(LatticeVariant.GAP, 8.), params.V0)
    window = EnergyWindow(2.1, 3.5)
    spectra = []
    for flux in (0.25, 1.25):
        p = params.replace(flux=flux)
        op = assemble_full(omega, Basis.for_params(p, n_x=129), p)
        spectra.append([r.energy for r in eigs_in_window(op, window, tol=1e-9)])
    assert len(spectra[0]) == len(spectra[1]) > 0
    nptest.assert_allclose(spectra[0], spectra[1], atol=1e-7)


class TestDispersion(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.params = ModelParams(B=2., L=8., V0=0.3)
        cls.basis = Basis.for_params(cls.params, n_x=129)
        cls.left = dispersion_branches(WallSide.LEFT, cls.params, cls.basis, n_max=1)
        cls.right = dispersion_branches(WallSide.RIGHT, cls.params, cls.basis, n_max=1)

    def test_monotone(self):
        for branch in self.left + self.right:
            assert branch.monotone, branch.nonmonotone
        window = (self.left[0].energies > 2.) & (self.left[0].energies < 6.)
        assert np.all(np.diff(self.left[0].energies[window]) < 0)

    def test_current_sign(self):
        edge = self.left[0].energies > 2.5
        assert np.all(self.left[0].currents[edge] < 0)
        edge = self.right[0].energies > 2.5
        assert np.all(self.right[0].currents[edge] > 0)

    def test_mirror_symmetry(self):
        left = dispersion_branches(WallSide.LEFT, self.params, self.basis, refine_rounds=0)[0]
        right = dispersion_branches(WallSide.RIGHT, self.params, self.basis,
                                    refine_rounds=0)[0]
        nptest.assert_allclose(left.k, -right.k[::-1])
        nptest.assert_allclose(left.energies, right.energies[::-1], atol=1e-10)

    def test_feynman_hellmann(self):
        for branch in (self.left[0], self.right[0]):
            assert feynman_hellmann_residual(branch, self.params) <= 1e-4

    def test_samples_dense_enough(self):
        assert np.max(np.diff(self.left[0].k)) <= 1. / 8. + 1e-12


def test_asymptote_deep_in_interior():
    params = ModelParams(B=2., L=8., V0=0.3)
    basis = Basis.for_params(params, points_per_length=48)
    branch = dispersion_branches(WallSide.LEFT, params, basis, n_max=0)[0]
    assert branch.asymptote == 2.
    assert abs(branch.energies[-1] - params.B) < 1e-4


def test_edge_current_independent_of_L():
    energies = np.array([2.5, 3., 3.5])
    currents = []
    for L in (8., 12., 16.):
        params = ModelParams(B=2., L=L, V0=0.3)
        basis = Basis.for_params(params, points_per_length=16)
        k_range = (-params.B * (L / 2. + 2.), -params.B * (L / 2. - 3.))
        branch = dispersion_branches(WallSide.LEFT, params, basis, n_max=0,
                                     k_range=k_range)[0]
        order = np.argsort(branch.energies)
        currents.append(np.interp(energies, branch.energies[order],
                                  branch.currents[order]))
    currents = np.array(currents)
    assert np.all(np.abs(currents) >= 0.1 * np.sqrt(2.))
    nptest.assert_allclose(currents[1:], np.broadcast_to(currents[0], (2, 3)), rtol=0.05)
