'''
Discrete Hamiltonian and velocity operator in the mixed representation:
Fourier modes k_j = 2*pi*j/L along the periodic direction, a uniform
finite-difference grid along the cylinder axis.

Vectors are stored mode-major: component (j, i) sits at j * n_x + i.
'''

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from edgespectra.model import WallSide, BUMP_RADIUS

_logger = logging.getLogger(__name__)

BOTH_WALLS = (WallSide.LEFT, WallSide.RIGHT)
# walls must exceed the energy ceiling by this factor at the grid edges
TRUNCATION_FACTOR = 10.
MIN_GRID_POINTS = 129
MIN_MODES = 16
# orbit centres stay this many magnetic lengths away from an open grid end
OPEN_END_CLEARANCE = 10.


class TruncationError(ValueError):
    pass


def default_mode_cutoff(params):
    """
    Default J: resolves the bump structure and represents the orbit
    centres of every edge state below the energy ceiling.
    """
    L, B = params.L, params.B
    bump = int(math.ceil(L * (4. / (2. * math.pi)) * 4.))
    orbits = int(math.ceil(L * B * (L / 2. + 4. * params.magnetic_length) / (2. * math.pi)))
    return max(bump, orbits)


def normalize_walls(walls):
    if walls is None:
        return ()
    return tuple(sorted(set(WallSide(w) for w in walls), key=lambda w: w.sign))


@dataclass(frozen=True)
class Basis:
    """
    Fourier x grid basis of L^2(R x [-L/2, L/2]).

    Attributes
    ----------
    x_min, x_max : float
        grid extent (Dirichlet ends).
    n_x : int
        number of grid points, >= 129.
    J : int
        mode cutoff; modes j = -J..J.
    L : float
        circumference.
    hard_box : bool
        True if the grid ends are meant as hard walls and the wall
        domination check is skipped.
    """
    x_min: float
    x_max: float
    n_x: int
    J: int
    L: float
    hard_box: bool = False

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("Grid extent [{}, {}] is empty!".format(self.x_min, self.x_max))
        if self.n_x < MIN_GRID_POINTS:
            raise ValueError("n_x={} is below the minimum of {}!".format(self.n_x,
                                                                        MIN_GRID_POINTS))
        if self.J < 0:
            raise ValueError("Mode cutoff J={} must be non-negative!".format(self.J))
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "J", int(self.J))

    @classmethod
    def for_params(cls, params, n_x=None, J=None, points_per_length=8):
        """
        Builds the default basis of a parameter set: walls reach
        10 x energy ceiling at the grid ends, spacing of a magnetic length
        divided by `points_per_length`.
        """
        target = TRUNCATION_FACTOR * params.energy_ceiling
        margin_l = params.wall_left.depth_for(target) + 0.25
        margin_r = params.wall_right.depth_for(target) + 0.25
        x_min = -params.L / 2. - margin_l
        x_max = params.L / 2. + margin_r
        if n_x is None:
            dx = params.magnetic_length / points_per_length
            n_x = max(MIN_GRID_POINTS, int(math.ceil((x_max - x_min) / dx)) + 1)
        if J is None:
            J = default_mode_cutoff(params)
        return cls(x_min, x_max, n_x, J, params.L)

    @classmethod
    def box(cls, x_min, x_max, n_x, L, J):
        return cls(x_min, x_max, n_x, J, L, hard_box=True)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_x)

    @property
    def j_values(self):
        return np.arange(-self.J, self.J + 1)

    @property
    def k_modes(self):
        return 2. * math.pi * self.j_values / self.L

    @property
    def n_modes(self):
        return 2 * self.J + 1

    @property
    def dim(self):
        return self.n_x * self.n_modes

    def reshape(self, vector):
        """ Coefficient array of shape (n_modes, n_x). """
        return np.asarray(vector).reshape(self.n_modes, self.n_x)

    def orbit_centers(self, params):
        return (self.k_modes - params.flux_shift) / params.B

    def extended(self, wall_side, reach):
        """
        Same spacing, the wall end kept, the opposite end moved out to
        `reach` (an x coordinate beyond the current open end).
        """
        wall_side = WallSide(wall_side)
        dx = self.dx
        if wall_side is WallSide.LEFT:
            n_ext = max(self.n_x, int(math.ceil((reach - self.x_min) / dx)) + 1)
            return Basis(self.x_min, self.x_min + (n_ext - 1) * dx, n_ext, self.J, self.L,
                         self.hard_box)
        n_ext = max(self.n_x, int(math.ceil((self.x_max - reach) / dx)) + 1)
        return Basis(self.x_max - (n_ext - 1) * dx, self.x_max, n_ext, self.J, self.L,
                     self.hard_box)

    def for_edge(self, params, wall_side, k_extent=None):
        """
        Basis of a single-wall Hamiltonian: every orbit centre, of the modes
        and of `k_extent` (max |k|) if given, stays OPEN_END_CLEARANCE
        magnetic lengths away from the open end.
        """
        wall_side = WallSide(wall_side)
        k_max = np.max(np.abs(self.k_modes)) + abs(params.flux_shift)
        if k_extent is not None:
            k_max = max(k_max, abs(k_extent) + abs(params.flux_shift))
        span = max(params.L / 2., k_max / params.B) + OPEN_END_CLEARANCE * params.magnetic_length
        reach = span if wall_side is WallSide.LEFT else -span
        return self.extended(wall_side, reach)

    def bulk_box(self, x_interval):
        """
        Hard-wall box on `x_interval` with (nearly) the same spacing.
        """
        lo, hi = x_interval
        n_x = max(MIN_GRID_POINTS, int(round((hi - lo) / self.dx)) + 1)
        return Basis.box(lo, hi, n_x, self.L, self.J)

    def to_dict(self):
        return {"x_min": float(self.x_min), "x_max": float(self.x_max),
                "n_x": int(self.n_x), "J": int(self.J), "L": float(self.L),
                "hard_box": bool(self.hard_box), "dx": float(self.dx)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["x_min"]), float(d["x_max"]), int(d["n_x"]), int(d["J"]),
                   float(d["L"]), bool(d.get("hard_box", False)))


def wall_potential(basis, params, walls=BOTH_WALLS):
    """ Sum of the requested wall profiles on the grid. """
    x = basis.x
    u = np.zeros(basis.n_x)
    for side in normalize_walls(walls):
        u += params.wall(side)(x, params.L)
    return u


def check_truncation(basis, params, walls=BOTH_WALLS):
    """
    Raises a TruncationError if an active wall does not dominate the
    energy ceiling at its grid end.
    """
    if basis.hard_box:
        return
    required = TRUNCATION_FACTOR * params.energy_ceiling
    for side in normalize_walls(walls):
        edge = basis.x_min if side is WallSide.LEFT else basis.x_max
        value = params.wall(side)(edge, params.L)
        if value < required:
            raise TruncationError("The {} wall reaches only {:.4g} at x={:.4g}; "
                                  "at least {:.4g} is required!".format(side.value, value,
                                                                        edge, required))


def fiber_diagonals(k, basis, params, walls=BOTH_WALLS, extra_potential=None):
    """
    Main and off diagonal of the fiber Hamiltonian
    -d^2/dx^2 + (k - 2*pi*flux/L - Bx)^2 + U(x) [+ extra].

    Parameters
    ----------
    k : float
        fiber momentum (a mode or an off-lattice probe).
    basis : Basis
        grid.
    params : ModelParams
        physical parameters.
    walls : iterable of WallSide
        walls present in the potential.
    extra_potential : numpy.ndarray or callable, optional
        additional potential sampled on the grid, or a function of x.

    Returns
    -------
    d, e : numpy.ndarray
        real diagonal (n_x) and off diagonal (n_x - 1).
    """
    check_truncation(basis, params, walls)
    x = basis.x
    dx = basis.dx
    k_eff = k - params.flux_shift
    d = 2. / dx ** 2 + (k_eff - params.B * x) ** 2 + wall_potential(basis, params, walls)
    if extra_potential is not None:
        if callable(extra_potential):
            d = d + np.asarray(extra_potential(x), dtype=float)
        else:
            d = d + np.asarray(extra_potential, dtype=float)
    e = np.full(basis.n_x - 1, -1. / dx ** 2)
    return d, e


def build_fiber(k, basis, params, walls=BOTH_WALLS, extra_potential=None):
    """
    Tridiagonal fiber Hamiltonian at momentum `k` as a sparse matrix.
    """
    d, e = fiber_diagonals(k, basis, params, walls, extra_potential)
    return sp.diags([e, d, e], [-1, 0, 1], format="csr")


def assemble_velocity(basis, params):
    """
    Velocity operator v_y = 2(p_y - Bx), diagonal block 2(k - 2*pi*flux/L - B x_i)
    for every mode.
    """
    x = basis.x
    v = 2. * ((basis.k_modes - params.flux_shift)[:, None] - params.B * x[None, :])
    return sp.diags(v.ravel(), 0, format="csr", dtype=complex)


def bump_fourier_profile(offsets, q, V_loc, quad_order=16):
    """
    Integrals F(x_i, q) = int V(x_i - n, s) cos(q s) ds of the bump row
    profile, by composite Gauss-Legendre quadrature over its support.

    Parameters
    ----------
    offsets : numpy.ndarray
        x offsets from the impurity column, |offset| < 1/4.
    q : numpy.ndarray
        momentum transfers.
    V_loc : float
        bump height.
    quad_order : int
        Gauss-Legendre order per panel.

    Returns
    -------
    numpy.ndarray
        shape (len(offsets), len(q)).
    """
    offsets = np.asarray(offsets, dtype=float)
    q = np.asarray(q, dtype=float)
    half = np.sqrt(np.clip(BUMP_RADIUS ** 2 - offsets ** 2, 0., None))
    q_max = np.max(np.abs(q)) if q.size else 0.
    n_panels = max(1, int(math.ceil(q_max * 2. * BUMP_RADIUS / math.pi)))
    t, w = leggauss(quad_order)
    # panel-local nodes on [-1, 1] mapped onto [-h, h]
    edges = np.linspace(-1., 1., n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    width = 0.5 * (edges[1:] - edges[:-1])
    unit_nodes = (mid[:, None] + width[:, None] * t[None, :]).ravel()
    unit_weights = (width[:, None] * w[None, :]).ravel()
    s = half[:, None] * unit_nodes[None, :]
    weights = half[:, None] * unit_weights[None, :]
    profile = V_loc * (16. * (half[:, None] ** 2 - s ** 2)) ** 3
    return np.einsum("is,isq->iq", profile * weights, np.cos(s[:, :, None] * q[None, None, :]))


def disorder_entries(omega, basis, quad_order=16):
    """
    Sparse entries of the projected disorder potential
    <k_a|V|k_b>(x_i) = (1/L) int V_omega(x_i, y) exp(-i(k_a - k_b)y) dy.

    Returns
    -------
    rows, cols : numpy.ndarray of int
    values : numpy.ndarray of complex
    """
    empty = (np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0, dtype=complex))
    if omega is None or omega.is_trivial():
        return empty
    if basis.n_modes < MIN_MODES:
        raise ValueError("{} modes cannot resolve the bump; 2J+1 >= {} is "
                         "required!".format(basis.n_modes, MIN_MODES))
    if omega.lattice.L != basis.L:
        raise ValueError("Realisation lattice L={} does not match the basis "
                         "L={}!".format(omega.lattice.L, basis.L))

    x = basis.x
    n_x, n_modes, J = basis.n_x, basis.n_modes, basis.J
    transfers = np.arange(-2 * J, 2 * J + 1)
    q = 2. * math.pi * transfers / basis.L
    mode_a, mode_b = np.meshgrid(np.arange(n_modes), np.arange(n_modes), indexing="ij")
    transfer_index = (mode_a - mode_b + 2 * J).ravel()

    sites = omega.lattice.site_array
    rows, cols, values = [], [], []
    for n in omega.lattice.n_values:
        inside = np.nonzero(np.abs(x - n) < BUMP_RADIUS)[0]
        if inside.size == 0:
            continue
        column = sites[:, 0] == n
        m = sites[column, 1]
        couplings = omega.couplings[column]
        if not np.any(couplings):
            continue
        phases = np.exp(-1j * np.outer(q, m)) @ couplings
        profile = bump_fourier_profile(x[inside] - n, q, omega.bump_height, quad_order)
        coupling = phases[None, :] * profile / basis.L
        for local, i in enumerate(inside):
            rows.append(mode_a.ravel() * n_x + i)
            cols.append(mode_b.ravel() * n_x + i)
            values.append(coupling[local, transfer_index])
    if not rows:
        return empty
    _logger.debug("disorder coupling: %d grid rows, %d entries", len(rows),
                  sum(r.size for r in rows))
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(values)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """
    Sparse Hermitian H_omega and velocity operator on one basis.

    Attributes
    ----------
    hamiltonian : scipy.sparse.csr_matrix
    velocity : scipy.sparse.csr_matrix
    basis : Basis
    params : ModelParams
    realization : DisorderRealization or None
    walls : tuple of WallSide
    label : str
    """
    hamiltonian: sp.csr_matrix
    velocity: sp.csr_matrix
    basis: Basis
    params: object
    realization: object = None
    walls: tuple = BOTH_WALLS
    label: str = "H"

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def is_block_diagonal(self):
        coo = self.hamiltonian.tocoo()
        n_x = self.basis.n_x
        return not np.any((coo.row // n_x != coo.col // n_x) & (coo.data != 0))

    def export_coo(self, path):
        """
        Writes the Hamiltonian as "row col re im" lines.
        """
        coo = self.hamiltonian.tocoo()
        with open(path, "w") as f:
            f.write("# {} dim={} ordering=mode-major n_x={} n_modes={}\n".format(
                self.label, self.dim, self.basis.n_x, self.basis.n_modes))
            for r, c, v in zip(coo.row, coo.col, coo.data):
                f.write("{} {} {!r} {!r}\n".format(int(r), int(c), float(v.real), float(v.imag)))


def assemble_full(omega, basis, params, walls=BOTH_WALLS, quad_order=16, label="H_omega"):
    """
    Assembles H_omega = p_x^2 + (p_y - Bx)^2 + V_omega + walls.

    Parameters
    ----------
    omega : DisorderRealization or None
        disorder; None or a zero realisation gives the block-diagonal H_0 + U.
    basis : Basis
        discretisation.
    params : ModelParams
        physical parameters.
    walls : iterable of WallSide
        walls present.
    quad_order : int
        Gauss-Legendre order of the bump Fourier integrals.
    label : str
        provenance tag.

    Returns
    -------
    AssembledOperator
    """
    walls = normalize_walls(walls)
    check_truncation(basis, params, walls)
    n_x, n_modes = basis.n_x, basis.n_modes
    x = basis.x
    dx = basis.dx
    kinetic = ((basis.k_modes - params.flux_shift)[:, None] - params.B * x[None, :]) ** 2
    diagonal = (2. / dx ** 2 + kinetic + wall_potential(basis, params, walls)[None, :]).ravel()

    inner = np.ones((n_modes, n_x), dtype=bool)
    inner[:, -1] = False
    upper = np.nonzero(inner.ravel())[0]
    hop = np.full(upper.size, -1. / dx ** 2)

    d_rows, d_cols, d_vals = disorder_entries(omega, basis, quad_order)
    index = np.arange(basis.dim)
    rows = np.concatenate([index, upper, upper + 1, d_rows])
    cols = np.concatenate([index, upper + 1, upper, d_cols])
    vals = np.concatenate([diagonal.astype(complex), hop.astype(complex),
                           hop.astype(complex), d_vals])
    h = sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()
    h.sum_duplicates()
    h = ((h + h.conj().T) * 0.5).tocsr()
    _logger.debug("assembled %s: dim=%d nnz=%d", label, h.shape[0], h.nnz)
    return AssembledOperator(h, assemble_velocity(basis, params), basis, params,
                             omega, walls, label)
