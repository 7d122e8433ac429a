'''
Eigenpairs of assembled operators inside energy windows, dispersion
branches of the single-wall fiber Hamiltonians and a dense oracle.
'''

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh, eigh_tridiagonal

from edgespectra.assembly import fiber_diagonals, normalize_walls
from edgespectra.model import WallSide
from edgespectra.observables import fiber_current

_logger = logging.getLogger(__name__)

# desk-scale guard of the dense oracle
DENSE_ORACLE_LIMIT = 6000
# below this dimension windowed solves go through the dense path
DENSE_PATH_LIMIT = 400
# eigenvalues closer than this form a degenerate cluster
DEGENERACY_TOL = 1e-10
# seed of the fixed ARPACK start vector
START_VECTOR_SEED = 0
# ARPACK iteration cap per solve
ARPACK_MAXITER = 3000


class ConvergenceError(RuntimeError):
    """
    Windowed solver failure; `n_converged` counts the usable pairs.
    """

    def __init__(self, message, n_converged=0):
        super(ConvergenceError, self).__init__(message)
        self.n_converged = n_converged


class WindowLabel(str, enum.Enum):
    BAND = "band_window"
    GAP = "gap_window"
    CUSTOM = "custom"


@dataclass(frozen=True)
class EnergyWindow:
    """
    Closed energy interval [lo, hi].
    """
    lo: float
    hi: float
    label: WindowLabel = WindowLabel.CUSTOM

    def __post_init__(self):
        object.__setattr__(self, "label", WindowLabel(self.label))
        if not self.lo < self.hi:
            raise ValueError("Window [{}, {}] is empty; lo < hi is required!".format(
                self.lo, self.hi))

    @classmethod
    def band(cls, params):
        """ Delta_eps = [B + eps, B + V0] inside the first Landau band. """
        lo, hi = params.band_window_bounds()
        return cls(lo, hi, WindowLabel.BAND)

    @classmethod
    def gap(cls, params):
        """ Delta = (2B - delta, 2B + delta) inside the first spectral gap. """
        lo, hi = params.gap_window_bounds()
        return cls(lo, hi, WindowLabel.GAP)

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self):
        return 0.5 * (self.hi - self.lo)

    def contains(self, energy):
        return (energy >= self.lo) & (energy <= self.hi)

    def to_dict(self):
        return {"lo": float(self.lo), "hi": float(self.hi), "label": self.label.value}


@dataclass(frozen=True, eq=False)
class EigenRecord:
    """
    One normalised eigenpair.

    Attributes
    ----------
    energy : float
    vector : numpy.ndarray
        coefficients over the basis, mode-major.
    residual : float
        ||H psi - E psi||.
    provenance : str
        operator label and window.
    """
    energy: float
    vector: np.ndarray
    residual: float
    provenance: str = ""


def fix_phase(vectors):
    """
    Makes the largest-magnitude coefficient of every column real positive.
    """
    vectors = np.array(vectors, dtype=complex, copy=True)
    if vectors.ndim == 1:
        return fix_phase(vectors[:, None])[:, 0]
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    scale = np.where(np.abs(pivots) > 0, np.conj(pivots) / np.abs(pivots), 1.)
    return vectors * scale[None, :]


def _start_vector(n):
    rng = np.random.Generator(np.random.PCG64(START_VECTOR_SEED))
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _rayleigh_ritz(h, vectors):
    """
    Orthonormalises `vectors` and diagonalises H on their span; clusters
    of degenerate eigenvalues come out jointly orthonormal.
    """
    q, _ = np.linalg.qr(vectors)
    projected = q.conj().T @ (h @ q)
    projected = 0.5 * (projected + projected.conj().T)
    energies, w = eigh(projected)
    return energies, q @ w


def _shift_invert_pairs(h, window, nev, max_nev, tol):
    n = h.shape[0]
    # Ritz tolerance; the residual check in eigs_in_window is the acceptance gate
    arpack_tol = min(1e-12, 0.01 * tol)
    sigma = window.mid
    lu = spla.splu((h - sigma * sp.identity(n, dtype=complex, format="csc")).tocsc())
    op_inv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    v0 = _start_vector(n)
    while True:
        k = min(nev, n - 2)
        try:
            vals, vecs = spla.eigsh(h, k=k, sigma=sigma, which="LM", OPinv=op_inv,
                                    v0=v0, tol=arpack_tol,
                                    maxiter=ARPACK_MAXITER)
        except spla.ArpackNoConvergence as err:
            raise ConvergenceError("ARPACK did not converge around {:.6g} with {} "
                                   "pairs".format(sigma, k), len(err.eigenvalues))
        # a partner degenerate with an endpoint eigenvalue does not bracket the window
        below = np.count_nonzero(vals < window.lo - DEGENERACY_TOL)
        above = np.count_nonzero(vals > window.hi + DEGENERACY_TOL)
        _logger.debug("shift-invert at %.6g: nev=%d, %d below, %d above", sigma, k,
                      below, above)
        if below >= 2 and above >= 2:
            return vals, vecs
        if k >= n - 2:
            return vals, vecs
        if 2 * nev > n // 2 and n <= DENSE_ORACLE_LIMIT:
            _logger.debug("window not exhausted with %d pairs, switching to the dense path", k)
            return None
        if k >= max_nev:
            inside = np.count_nonzero(window.contains(vals))
            raise ConvergenceError("Window [{:.6g}, {:.6g}] not exhausted with {} "
                                   "pairs".format(window.lo, window.hi, k), inside)
        nev *= 2


def eigs_in_window(op, window, tol=1e-9, nev=16, max_nev=4096):
    """
    All eigenpairs of an assembled operator inside a window.

    Shift-invert iteration at the window midpoint, doubling the number of
    requested pairs until at least two converged eigenvalues lie beyond each
    endpoint, followed by a Rayleigh-Ritz step on the converged subspace.

    Parameters
    ----------
    op : AssembledOperator
        operator to diagonalise.
    window : EnergyWindow
        energy interval.
    tol : float
        residual bound every returned pair must meet.
    nev : int
        initial number of requested pairs.
    max_nev : int
        give up beyond this many pairs.

    Returns
    -------
    list of EigenRecord
        sorted ascending.
    """
    if window.hi >= op.params.energy_ceiling:
        raise ValueError("Window top {} reaches the truncation ceiling {}!".format(
            window.hi, op.params.energy_ceiling))
    h = op.hamiltonian
    n = h.shape[0]
    if n <= DENSE_PATH_LIMIT:
        vals, vecs = eigh(h.toarray())
    else:
        pairs = _shift_invert_pairs(h, window, nev, max_nev, tol)
        if pairs is None:
            vals, vecs = eigh(h.toarray())
        else:
            vals, vecs = _rayleigh_ritz(h, pairs[1])

    touching = np.abs(vals - window.lo) <= tol
    touching |= np.abs(vals - window.hi) <= tol
    if np.any(touching):
        _logger.warning("%s: %d eigenvalue(s) within %.1e of the window endpoints",
                        op.label, np.count_nonzero(touching), tol)

    inside = np.nonzero(window.contains(vals))[0]
    vals = vals[inside]
    vecs = fix_phase(vecs[:, inside])
    vecs /= np.linalg.norm(vecs, axis=0)[None, :]
    residuals = np.linalg.norm(h @ vecs - vecs * vals[None, :], axis=0)
    bad = residuals > tol
    if np.any(bad):
        raise ConvergenceError("{} of {} pairs in window exceed the residual bound {:.1e} "
                               "(max {:.2e})".format(np.count_nonzero(bad), len(vals), tol,
                                                     residuals.max()),
                               int(np.count_nonzero(~bad)))
    provenance = "{}|{}".format(op.label, window.label.value)
    records = [EigenRecord(float(e), vecs[:, i], float(r), provenance)
               for i, (e, r) in enumerate(zip(vals, residuals))]
    _logger.debug("%s: %d eigenvalues in [%.6g, %.6g]", op.label, len(records),
                  window.lo, window.hi)
    return records


def dense_oracle(op):
    """
    Full Hermitian eigendecomposition.

    Parameters
    ----------
    op : AssembledOperator, scipy.sparse matrix or array_like
        operator (dimension <= 6000).

    Returns
    -------
    energies : numpy.ndarray
        sorted ascending.
    vectors : numpy.ndarray
        columns are the eigenvectors.
    """
    h = getattr(op, "hamiltonian", op)
    if sp.issparse(h):
        h = h.toarray()
    h = np.asarray(h)
    if h.shape[0] > DENSE_ORACLE_LIMIT:
        raise ValueError("Dimension {} exceeds the dense oracle limit of {}!".format(
            h.shape[0], DENSE_ORACLE_LIMIT))
    energies, vectors = eigh(h)
    return energies, fix_phase(vectors)


@dataclass(frozen=True, eq=False)
class FiberState:
    """
    Eigenpair of one fiber Hamiltonian (block-diagonal operators).
    """
    j: int
    k: float
    energy: float
    current: float
    vector: np.ndarray
    walls: tuple = ()


def fiber_eigenpairs(k, basis, params, walls, window=None, count=None):
    """
    Eigenpairs of one fiber, either those in `window` or the `count` lowest.
    """
    d, e = fiber_diagonals(k, basis, params, walls)
    if window is not None:
        # select="v" is half-open (lo, hi]; step lo down one ulp for the closed window
        lo = np.nextafter(window.lo, -np.inf)
        energies, vectors = eigh_tridiagonal(d, e, select="v", select_range=(lo, window.hi))
    else:
        energies, vectors = eigh_tridiagonal(d, e, select="i",
                                             select_range=(0, count - 1))
    return energies, vectors


def fiber_window_spectrum(basis, params, walls, window):
    """
    Union over the modes of the fiber eigenvalues inside `window`, each with
    its current; the spectrum of a zero-disorder operator.

    Returns
    -------
    list of FiberState
        sorted by energy.
    """
    walls = normalize_walls(walls)
    states = []
    for j, k in zip(basis.j_values, basis.k_modes):
        energies, vectors = fiber_eigenpairs(k, basis, params, walls, window=window)
        for energy, vec in zip(energies, vectors.T):
            if not window.contains(energy):
                continue
            current = fiber_current(vec, k, basis, params)
            states.append(FiberState(int(j), float(k), float(energy), current, vec, walls))
    states.sort(key=lambda s: s.energy)
    return states


@dataclass(frozen=True, eq=False)
class DispersionBranch:
    """
    Dispersion k -> E_{n,k} of a single-wall fiber Hamiltonian.

    Attributes
    ----------
    n : int
        band index.
    side : WallSide
        wall present.
    k : numpy.ndarray
        momentum samples.
    energies, currents : numpy.ndarray
    basis : Basis
        grid the branch was computed on.
    asymptote : float
        Landau level the branch approaches away from the wall.
    nonmonotone : list of tuple
        (k_a, k_b) segments violating the expected monotonicity.
    """
    n: int
    side: WallSide
    k: np.ndarray
    energies: np.ndarray
    currents: np.ndarray
    basis: object
    asymptote: float
    nonmonotone: list = field(default_factory=list)

    @property
    def monotone(self):
        return not self.nonmonotone


def _branch_samples(k_range, samples_per_unit):
    lo, hi = k_range
    step = 1. / samples_per_unit
    return step * np.arange(int(math.ceil(lo / step)), int(math.floor(hi / step)) + 1)


def _solve_samples(k_samples, basis, params, walls, n_max):
    energies = np.empty((len(k_samples), n_max + 1))
    currents = np.empty_like(energies)
    for s, k in enumerate(k_samples):
        vals, vecs = fiber_eigenpairs(k, basis, params, walls, count=n_max + 1)
        energies[s] = vals
        currents[s] = [fiber_current(v, k, basis, params) for v in vecs.T]
    return energies, currents


def dispersion_branches(side, params, basis, n_max=0, k_range=None, samples_per_unit=8,
                        refine_rounds=4, refine_step=None):
    """
    Dispersion branches of the pure edge Hamiltonian H_alpha^0.

    Parameters
    ----------
    side : WallSide or str
        wall kept; the other one is removed from the fiber potential.
    params : ModelParams
        physical parameters.
    basis : Basis
        reference grid; it is extended away from the wall as needed.
    n_max : int
        highest band index.
    k_range : tuple of float, optional
        momentum range; defaults to [-B L/2, B L/2].
    samples_per_unit : int
        uniform samples per unit of k (>= 8).
    refine_rounds : int
        rounds of midpoint insertion where energies jump by more than
        `refine_step` (default 0.1 B) between neighbours.

    Returns
    -------
    list of DispersionBranch
    """
    side = WallSide(side)
    if k_range is None:
        k_range = (-params.B * params.L / 2., params.B * params.L / 2.)
    if samples_per_unit < 8:
        raise ValueError("At least 8 samples per unit of k are required!")
    if refine_step is None:
        refine_step = 0.1 * params.B
    walls = (side,)
    edge_basis = basis.for_edge(params, side, k_extent=max(abs(k_range[0]), abs(k_range[1])))

    k = _branch_samples(k_range, samples_per_unit)
    energies, currents = _solve_samples(k, edge_basis, params, walls, n_max)
    for _ in range(refine_rounds):
        jumps = np.max(np.abs(np.diff(energies, axis=0)), axis=1)
        wide = np.nonzero(jumps > refine_step)[0]
        if wide.size == 0:
            break
        extra = 0.5 * (k[wide] + k[wide + 1])
        e_extra, c_extra = _solve_samples(extra, edge_basis, params, walls, n_max)
        k = np.concatenate([k, extra])
        order = np.argsort(k, kind="stable")
        k = k[order]
        energies = np.concatenate([energies, e_extra])[order]
        currents = np.concatenate([currents, c_extra])[order]

    # left-wall branches decrease, right-wall branches increase
    sign = -1. if side is WallSide.LEFT else 1.
    branches = []
    for n in range(n_max + 1):
        e_n = energies[:, n]
        level = (2 * n + 1) * params.B
        in_band = (e_n > level) & (e_n < level + 2. * params.B)
        steps = sign * np.diff(e_n)
        bad = np.nonzero(in_band[:-1] & in_band[1:] & ~(steps > 0))[0]
        segments = [(float(k[i]), float(k[i + 1])) for i in bad]
        if segments:
            _logger.warning("%s wall branch n=%d is not monotone on %d segment(s), "
                            "first at k=%.4g", side.value, n, len(segments), segments[0][0])
        branches.append(DispersionBranch(n, side, k.copy(), e_n.copy(),
                                         currents[:, n].copy(), edge_basis,
                                         (2 * n + 1) * params.B, segments))
    return branches


def feynman_hellmann_residual(branch, params, h=1e-4):
    """
    Largest deviation between the branch currents and the centred
    difference dE/dk at the interior samples.
    """
    walls = (branch.side,)
    count = branch.n + 1
    worst = 0.
    for k, current in zip(branch.k[1:-1], branch.currents[1:-1]):
        e_plus, _ = fiber_eigenpairs(k + h, branch.basis, params, walls, count=count)
        e_minus, _ = fiber_eigenpairs(k - h, branch.basis, params, walls, count=count)
        slope = (e_plus[branch.n] - e_minus[branch.n]) / (2. * h)
        worst = max(worst, abs(current - slope))
    return worst
