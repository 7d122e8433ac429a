"""
Tests for currents, centroids, slice amplitudes and the state labels.
"""

import unittest

import numpy as np
import numpy.testing as nptest

from edgespectra.assembly import Basis, assemble_full
from edgespectra.model import ModelParams, WallSide
from edgespectra.observables import (ClassificationThresholds, Label, classify_state, current,
                                     fiber_current, min_slice_amplitude, x_centroid_and_spread)
from edgespectra.spectral import EnergyWindow, fiber_eigenpairs, fiber_window_spectrum


def _embed(fiber_vector, j_index, basis):
    psi = np.zeros(basis.dim, dtype=complex)
    psi[j_index * basis.n_x:(j_index + 1) * basis.n_x] = fiber_vector
    return psi


class TestThresholds(unittest.TestCase):

    def test_default(self):
        t = ClassificationThresholds.default(4.)
        nptest.assert_allclose((t.edge_min, t.bulk_max), (0.2, 2e-3))

    def test_invalid(self):
        with nptest.assert_raises(ValueError):
            ClassificationThresholds(1e-3, 0.1)
        with nptest.assert_raises(ValueError):
            ClassificationThresholds(0.1, 0.)

    def test_classify(self):
        t = ClassificationThresholds(0.1, 1e-3)
        assert classify_state(-0.8, t) is Label.EDGE_LEFT
        assert classify_state(0.8, t) is Label.EDGE_RIGHT
        assert classify_state(1e-7, t) is Label.BULK
        assert classify_state(0.01, t) is Label.AMBIGUOUS
        assert Label.EDGE_RIGHT.is_edge and not Label.BULK.is_edge


class TestCurrent(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(B=2., L=8., V0=0., flux=0.)
        self.basis = Basis.for_params(self.params, n_x=129, J=8)
        self.op = assemble_full(None, self.basis, self.params)

    def test_bulk_state_carries_no_current(self):
        _, vecs = fiber_eigenpairs(0., self.basis, self.params, self.op.walls, count=1)
        psi = _embed(vecs[:, 0], self.basis.J, self.basis)
        assert abs(current(psi, self.op.velocity)) <= 1e-8

    def test_phase_invariance(self):
        k = self.basis.k_modes[2]
        _, vecs = fiber_eigenpairs(k, self.basis, self.params, self.op.walls, count=1)
        psi = _embed(vecs[:, 0], 2, self.basis)
        nptest.assert_allclose(current(np.exp(0.7j) * psi, self.op), current(psi, self.op),
                               atol=1e-12)

    def test_not_normalised(self):
        psi = np.zeros(self.basis.dim)
        psi[0] = 2.
        with nptest.assert_raises(ValueError):
            current(psi, self.op.velocity)

    def test_embedded_matches_fiber_current(self):
        j_index = 3
        k = self.basis.k_modes[j_index]
        _, vecs = fiber_eigenpairs(k, self.basis, self.params, self.op.walls, count=2)
        for vec in vecs.T:
            psi = _embed(vec, j_index, self.basis)
            nptest.assert_allclose(current(psi, self.op.velocity),
                                   fiber_current(vec, k, self.basis, self.params), atol=1e-12)


class TestEdgeCurrents(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(B=2., L=8., V0=0., flux=0.)
        base = Basis.for_params(self.params, n_x=129, J=8)
        self.left = base.for_edge(self.params, WallSide.LEFT)
        self.right = base.for_edge(self.params, WallSide.RIGHT)

    def _ground(self, k, basis, side):
        energies, vecs = fiber_eigenpairs(k, basis, self.params, (side,), count=1)
        return energies[0], vecs[:, 0]

    def test_left_edge_current_is_slope(self):
        k, h = -7., 1e-4
        _, vec = self._ground(k, self.left, WallSide.LEFT)
        j = fiber_current(vec, k, self.left, self.params)
        e_plus, _ = self._ground(k + h, self.left, WallSide.LEFT)
        e_minus, _ = self._ground(k - h, self.left, WallSide.LEFT)
        assert j < 0
        nptest.assert_allclose(j, (e_plus - e_minus) / (2. * h), atol=1e-4)

    def test_right_wall_mirror(self):
        for k in (-7., -6.5, -5.):
            _, vl = self._ground(k, self.left, WallSide.LEFT)
            _, vr = self._ground(-k, self.right, WallSide.RIGHT)
            nptest.assert_allclose(fiber_current(vr, -k, self.right, self.params),
                                   -fiber_current(vl, k, self.left, self.params), atol=1e-8)


class TestPosition(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(B=2., L=8., V0=0., flux=0.)
        self.basis = Basis.for_params(self.params, n_x=129, J=8)

    def test_delta(self):
        psi = np.zeros(self.basis.dim)
        psi[5 * self.basis.n_x + 40] = 1.
        mean, spread = x_centroid_and_spread(psi, self.basis)
        nptest.assert_allclose(mean, self.basis.x[40])
        assert spread == 0.

    def test_symmetric_state(self):
        _, vecs = fiber_eigenpairs(0., self.basis, self.params, (WallSide.LEFT, WallSide.RIGHT),
                                   count=1)
        mean, spread = x_centroid_and_spread(vecs[:, 0], self.basis)
        assert abs(mean) <= 1e-10
        nptest.assert_allclose(spread, self.params.magnetic_length / np.sqrt(2.), rtol=1e-2)


class TestSliceAmplitude(unittest.TestCase):

    def setUp(self):
        self.params = ModelParams(B=2., L=8., V0=0., flux=0.)
        self.basis = Basis.for_params(self.params, n_x=129, J=8)
        _, vecs = fiber_eigenpairs(0., self.basis, self.params,
                                   (WallSide.LEFT, WallSide.RIGHT), count=1)
        self.profile = vecs[:, 0]

    def test_single_mode_equals_baseline(self):
        psi = _embed(self.profile, self.basis.J, self.basis)
        sl = min_slice_amplitude(psi, self.basis)
        nptest.assert_allclose(sl.min_slice, sl.baseline, rtol=1e-10)
        nptest.assert_allclose(sl.ratio, 1., rtol=1e-10)
        assert sl.dy_slice <= 1e-12

    def test_two_modes_cancel(self):
        n_x, j = self.basis.n_x, self.basis.J
        psi = np.zeros(self.basis.dim, dtype=complex)
        psi[j * n_x:(j + 1) * n_x] = self.profile / np.sqrt(2.)
        psi[(j + 1) * n_x:(j + 2) * n_x] = self.profile / np.sqrt(2.)
        sl = min_slice_amplitude(psi, self.basis)
        assert sl.min_slice <= 1e-6 * sl.baseline
        # relative phase of the two modes is pi at the witness
        dk = self.basis.k_modes[j + 1] - self.basis.k_modes[j]
        nptest.assert_allclose(np.cos(dk * sl.y_bar), -1., atol=1e-8)
        assert -self.basis.L / 2. <= sl.y_bar < self.basis.L / 2.

    def test_too_few_samples(self):
        psi = _embed(self.profile, self.basis.J, self.basis)
        with nptest.assert_raises(ValueError):
            min_slice_amplitude(psi, self.basis, y_samples=4 * self.basis.n_modes - 1)


def test_currents_cancel_in_symmetric_window():
    params = ModelParams(B=2., L=8., V0=0., flux=0.)
    basis = Basis.for_params(params, n_x=129)
    states = fiber_window_spectrum(basis, params, (WallSide.LEFT, WallSide.RIGHT),
                                   EnergyWindow(2.05, 3.5))
    assert len(states) > 0
    assert abs(sum(s.current for s in states)) <= 1e-8


def test_left_edge_state_sits_at_the_wall():
    params = ModelParams(B=2., L=8., V0=0., flux=0.)
    basis = Basis.for_params(params, n_x=129).for_edge(params, WallSide.LEFT)
    _, vecs = fiber_eigenpairs(-7., basis, params, (WallSide.LEFT,), count=1)
    mean, _ = x_centroid_and_spread(vecs[:, 0], basis)
    assert mean < -params.L / 2. + 3. / np.sqrt(params.B)
