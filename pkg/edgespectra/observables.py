'''
Physical diagnostics of eigenstates: current J = (psi, v_y psi), position
centroid, slice amplitude, and the edge/bulk classification built on them.
'''

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

_logger = logging.getLogger(__name__)

NORM_TOL = 1e-8
HERMITICITY_TOL = 1e-10


class Label(str, enum.Enum):
    EDGE_LEFT = "EdgeLeft"
    EDGE_RIGHT = "EdgeRight"
    BULK = "Bulk"
    AMBIGUOUS = "Ambiguous"

    @property
    def is_edge(self):
        return self in (Label.EDGE_LEFT, Label.EDGE_RIGHT)


@dataclass(frozen=True)
class ClassificationThresholds:
    """
    |J| >= edge_min gives an edge label, |J| <= bulk_max a bulk label.
    """
    edge_min: float
    bulk_max: float

    def __post_init__(self):
        if not 0 < self.bulk_max < self.edge_min:
            raise ValueError("Thresholds must satisfy 0 < bulk_max < edge_min "
                             "(bulk_max={}, edge_min={})!".format(self.bulk_max, self.edge_min))

    @classmethod
    def default(cls, B):
        """ edge_min = 0.1 sqrt(B), bulk_max = 1e-3 sqrt(B). """
        return cls(0.1 * math.sqrt(B), 1e-3 * math.sqrt(B))

    def to_dict(self):
        return {"edge_min": float(self.edge_min), "bulk_max": float(self.bulk_max)}


def _as_vector(psi):
    return np.asarray(getattr(psi, "vector", psi))


def current(psi, v):
    """
    Quantum mechanical current J = (psi, v psi).

    Parameters
    ----------
    psi : EigenRecord or numpy.ndarray
        normalised state.
    v : scipy.sparse matrix or AssembledOperator
        velocity operator (the operator's `velocity` is used if given an
        assembled operator).

    Returns
    -------
    float
    """
    vector = _as_vector(psi)
    v = getattr(v, "velocity", v)
    norm = np.linalg.norm(vector)
    if abs(norm - 1.) > NORM_TOL:
        raise ValueError("State is not normalised (norm={:.12g})!".format(norm))
    value = np.vdot(vector, v @ vector)
    if abs(value.imag) > HERMITICITY_TOL * max(1., abs(value.real)):
        raise ValueError("Current has an imaginary part {:.3e}; velocity operator is "
                         "not Hermitian!".format(value.imag))
    return float(value.real)


def fiber_current(vector, k, basis, params):
    """
    Current sum_i 2(k - 2*pi*flux/L - B x_i)|phi_i|^2 of a normalised fiber
    state, equal to dE/dk of its branch.
    """
    vector = np.asarray(vector)
    v = 2. * (k - params.flux_shift - params.B * basis.x)
    return float(np.sum(v * np.abs(vector) ** 2) / np.sum(np.abs(vector) ** 2))


def x_density(psi, basis):
    """ Probability per grid point, summed over the modes. """
    vector = _as_vector(psi)
    coeffs = basis.reshape(vector) if vector.size == basis.dim else vector[None, :]
    return np.sum(np.abs(coeffs) ** 2, axis=0)


def x_centroid_and_spread(psi, basis):
    """
    <x> and sqrt(<x^2> - <x>^2) of a normalised state; also accepts the
    n_x coefficients of a fiber state.
    """
    p = x_density(psi, basis)
    p = p / np.sum(p)
    x = basis.x
    mean = float(np.sum(p * x))
    var = float(np.sum(p * (x - mean) ** 2))
    return mean, math.sqrt(max(var, 0.))


@dataclass(frozen=True)
class SliceAmplitude:
    """
    min over y of max over x of |psi(x, y)|, its witness y_bar, the
    derivative max_x |d_y psi(x, y_bar)| and the single-mode baseline of
    equal norm.
    """
    min_slice: float
    y_bar: float
    dy_slice: float
    baseline: float

    @property
    def ratio(self):
        return self.min_slice / self.baseline if self.baseline > 0 else float("nan")


def min_slice_amplitude(psi, basis, y_samples=None):
    """
    Reconstructs psi(x_i, y) = sum_j c_{j,i} exp(i k_j y)/sqrt(L dx) and
    finds the y slice with the smallest maximal amplitude.

    Parameters
    ----------
    psi : EigenRecord or numpy.ndarray
        normalised state on `basis`.
    basis : Basis
        discretisation.
    y_samples : int, optional
        size of the coarse y grid, at least 4 (2J+1); defaults to that.

    Returns
    -------
    SliceAmplitude
    """
    min_samples = 4 * basis.n_modes
    if y_samples is None:
        y_samples = min_samples
    if y_samples < min_samples:
        raise ValueError("y_samples={} is below 4 (2J+1) = {}!".format(y_samples, min_samples))
    coeffs = basis.reshape(_as_vector(psi))
    k = basis.k_modes
    scale = 1. / math.sqrt(basis.L * basis.dx)

    def slice_max(y):
        phases = np.exp(1j * k * y)
        return scale * np.max(np.abs(phases @ coeffs))

    y = -basis.L / 2. + basis.L * np.arange(y_samples) / y_samples
    amplitude = scale * np.max(np.abs(np.exp(1j * np.outer(y, k)) @ coeffs), axis=1)
    i = int(np.argmin(amplitude))
    h = basis.L / y_samples
    res = minimize_scalar(slice_max, bounds=(y[i] - h, y[i] + h), method="bounded",
                          options={"xatol": 1e-10 * basis.L})
    if res.success and res.fun < amplitude[i]:
        y_bar, value = float(res.x), float(res.fun)
    else:
        y_bar, value = float(y[i]), float(amplitude[i])
    y_bar = float(np.mod(y_bar + basis.L / 2., basis.L) - basis.L / 2.)

    dy = scale * np.max(np.abs((1j * k * np.exp(1j * k * y_bar)) @ coeffs))
    baseline = scale * float(np.max(np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=0))))
    return SliceAmplitude(value, y_bar, float(dy), baseline)


def classify_state(current_value, thresholds):
    """
    Label of a state from its current alone; left-wall edge states carry
    negative current.
    """
    magnitude = abs(current_value)
    if magnitude >= thresholds.edge_min:
        return Label.EDGE_LEFT if current_value < 0 else Label.EDGE_RIGHT
    if magnitude <= thresholds.bulk_max:
        return Label.BULK
    return Label.AMBIGUOUS


@dataclass(frozen=True)
class StateDiagnostics:
    energy: float
    current: float
    x_centroid: float
    x_spread: float
    min_slice: float
    y_bar: float
    dy_slice: float
    baseline: float
    label: Label

    @property
    def slice_ratio(self):
        return self.min_slice / self.baseline if self.baseline > 0 else float("nan")

    def relabel(self, thresholds):
        return classify_state(self.current, thresholds)


def diagnose(record, op, thresholds, y_samples=None):
    """
    All diagnostics of one eigenpair of an assembled operator.
    """
    j = current(record, op.velocity)
    mean, spread = x_centroid_and_spread(record, op.basis)
    sl = min_slice_amplitude(record, op.basis, y_samples)
    return StateDiagnostics(float(record.energy), j, mean, spread, sl.min_slice, sl.y_bar,
                            sl.dy_slice, sl.baseline, classify_state(j, thresholds))


def diagnose_all(records, op, thresholds, y_samples=None):
    return [diagnose(r, op, thresholds, y_samples) for r in records]
