'''
Physical ingredients of the magnetic random Schroedinger operator on a
cylinder: confining walls, the local bump, the impurity lattice and the
sampled couplings.

Units are hbar = 2m = e = 1, so the Landau levels sit at (2n+1)B.
'''

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

_logger = logging.getLogger(__name__)

# name of the pseudorandom generator used for the couplings
GENERATOR_NAME = "numpy.random.PCG64"
# base of the "log L" buffer strips
LOG_BASE = "natural"
# support radius of the local bump
BUMP_RADIUS = 0.25


class WallSide(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self):
        return -1 if self is WallSide.LEFT else 1


class LatticeVariant(str, enum.Enum):
    BAND = "band_experiment"
    GAP = "gap_experiment"
    EDGE_LEFT = "edge_strip_left"
    EDGE_RIGHT = "edge_strip_right"


@dataclass(frozen=True)
class WallProfile:
    """
    Polynomial confining wall U(x) = c|x -+ L/2|^m outside the sample.

    Attributes
    ----------
    c : float
        stiffness coefficient, > 0.
    m : int
        exponent, integer >= 3 (twice differentiable at the junction).
    side : WallSide
        wall the profile describes.
    """
    c: float = 1.0
    m: int = 4
    side: WallSide = WallSide.LEFT

    def __post_init__(self):
        object.__setattr__(self, "side", WallSide(self.side))
        if not self.c > 0:
            raise ValueError("Wall stiffness c={} must be positive!".format(self.c))
        if int(self.m) != self.m or self.m < 3:
            raise ValueError("Exponent m={} must be an integer >= 3!".format(self.m))
        object.__setattr__(self, "m", int(self.m))

    def __call__(self, x, L):
        return eval_wall(x, self, L)

    def mirrored(self):
        """ Same profile attached to the opposite wall. """
        other = WallSide.RIGHT if self.side is WallSide.LEFT else WallSide.LEFT
        return WallProfile(self.c, self.m, other)

    def depth_for(self, energy):
        """
        Distance beyond the junction at which the wall reaches `energy`.
        """
        return (max(energy, 0.) / self.c) ** (1. / self.m)

    def to_dict(self):
        return {"c": float(self.c), "m": int(self.m), "side": self.side.value}

    @classmethod
    def from_dict(cls, d):
        return cls(c=float(d["c"]), m=int(d["m"]), side=WallSide(d["side"]))


def eval_wall(x, w, L):
    """
    Evaluates a wall profile.

    Parameters
    ----------
    x : float or numpy.ndarray
        position(s) along the cylinder axis.
    w : WallProfile
        the wall.
    L : float
        wall separation.

    Returns
    -------
    float or numpy.ndarray
        0 on the interior side of the junction, c|x -+ L/2|^m outside.
    """
    x = np.asarray(x, dtype=float)
    if w.side is WallSide.LEFT:
        depth = -L / 2. - x
    else:
        depth = x - L / 2.
    u = np.where(depth > 0, w.c * np.abs(depth) ** w.m, 0.)
    if u.ndim == 0:
        return float(u)
    return u


def eval_bump(dx, dy, V_loc):
    """
    Local impurity profile V_loc (1 - (4r)^2)^3, compactly supported in the
    ball of radius 1/4 and C^2 across its boundary.

    Parameters
    ----------
    dx, dy : float or numpy.ndarray
        offsets from the impurity centre.
    V_loc : float
        peak height.

    Returns
    -------
    float or numpy.ndarray
        bump values in [0, V_loc].
    """
    r2 = np.asarray(dx, dtype=float) ** 2 + np.asarray(dy, dtype=float) ** 2
    u = 1. - 16. * r2
    v = np.where(u > 0, V_loc * np.clip(u, 0., None) ** 3, 0.)
    if v.ndim == 0:
        return float(v)
    return v


@dataclass(frozen=True)
class ModelParams:
    """
    Full physical configuration of one cylinder.

    Attributes
    ----------
    B : float
        magnetic field strength.
    L : float
        circumference and wall separation.
    V0 : float
        disorder amplitude bound.
    wall_left, wall_right : WallProfile
        confining walls.
    flux : float
        Aharonov-Bohm flux through the cylinder, in flux quanta.
    epsilon : float
        offset of the band window from the first Landau level.
    delta : float
        half width of the gap window.
    """
    B: float
    L: float
    V0: float
    wall_left: WallProfile = field(default_factory=lambda: WallProfile(side=WallSide.LEFT))
    wall_right: WallProfile = field(default_factory=lambda: WallProfile(side=WallSide.RIGHT))
    flux: float = 0.
    epsilon: float = 0.05
    delta: float = 0.3

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("Magnetic field B={} must be positive!".format(self.B))
        if not self.L >= 4:
            raise ValueError("Circumference L={} must satisfy L >= 4!".format(self.L))
        if not self.V0 >= 0:
            raise ValueError("Disorder bound V0={} must be non-negative!".format(self.V0))
        if not self.epsilon > 0:
            raise ValueError("Band offset epsilon={} must be positive!".format(self.epsilon))
        if not self.delta > 0:
            raise ValueError("Gap half width delta={} must be positive!".format(self.delta))
        if self.wall_left.side is not WallSide.LEFT or self.wall_right.side is not WallSide.RIGHT:
            raise ValueError("Wall profiles are attached to the wrong sides!")

    @property
    def magnetic_length(self):
        return 1. / math.sqrt(self.B)

    @property
    def flux_shift(self):
        """ Momentum shift 2*pi*flux/L of every fiber. """
        return 2. * math.pi * self.flux / self.L

    @property
    def energy_ceiling(self):
        """ Top of the second Landau band; every window lies below. """
        return 3. * self.B + self.V0

    def wall(self, side):
        return self.wall_left if WallSide(side) is WallSide.LEFT else self.wall_right

    def symmetric_walls(self):
        return self.wall_left.c == self.wall_right.c and self.wall_left.m == self.wall_right.m

    def band_window_bounds(self):
        return self.B + self.epsilon, self.B + self.V0

    def gap_window_bounds(self):
        return 2. * self.B - self.delta, 2. * self.B + self.delta

    def landau_bands(self, n_max=2):
        """
        Intervals [(2n+1)B - V0, (2n+1)B + V0] holding the bulk spectrum.
        """
        return [((2 * n + 1) * self.B - self.V0, (2 * n + 1) * self.B + self.V0)
                for n in range(n_max + 1)]

    def spectral_gaps(self, n_max=1):
        """ Open gaps between consecutive Landau bands (empty if V0 >= B). """
        bands = self.landau_bands(n_max + 1)
        return [(lo[1], hi[0]) for lo, hi in zip(bands[:-1], bands[1:]) if lo[1] < hi[0]]

    def check_theorem1(self):
        """
        Raises a ValueError naming the violated inequality of the band
        experiment.
        """
        if not self.B > 4. * self.V0:
            raise ValueError("B > 4*V0 required for theorem1 "
                             "(B={}, V0={})".format(self.B, self.V0))

    def check_theorem2(self):
        """
        Raises a ValueError naming the violated inequality of the gap
        experiment.
        """
        lo, hi = self.gap_window_bounds()
        if not self.B + self.V0 + self.epsilon < lo:
            raise ValueError("B + V0 + epsilon < 2B - delta required for theorem2 "
                             "({} >= {})".format(self.B + self.V0 + self.epsilon, lo))
        if not hi < 3. * self.B - self.V0 - self.epsilon:
            raise ValueError("2B + delta < 3B - V0 - epsilon required for theorem2 "
                             "({} >= {})".format(hi, 3. * self.B - self.V0 - self.epsilon))

    def replace(self, **changes):
        d = dict(B=self.B, L=self.L, V0=self.V0, wall_left=self.wall_left,
                 wall_right=self.wall_right, flux=self.flux, epsilon=self.epsilon,
                 delta=self.delta)
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self):
        return {"B": float(self.B), "L": float(self.L), "V0": float(self.V0),
                "wall_left": self.wall_left.to_dict(),
                "wall_right": self.wall_right.to_dict(),
                "flux": float(self.flux), "epsilon": float(self.epsilon),
                "delta": float(self.delta)}

    @classmethod
    def from_dict(cls, d):
        return cls(B=float(d["B"]), L=float(d["L"]), V0=float(d["V0"]),
                   wall_left=WallProfile.from_dict(d["wall_left"]),
                   wall_right=WallProfile.from_dict(d["wall_right"]),
                   flux=float(d["flux"]), epsilon=float(d["epsilon"]),
                   delta=float(d["delta"]))


@dataclass(frozen=True)
class LatticeSpec:
    """
    Finite impurity lattice Z^2 cap (X x [-L/2, L/2)).

    Attributes
    ----------
    x_interval : tuple of float
        closed interval X along the cylinder axis.
    sites : tuple of tuple of int
        (n, m) pairs, n-major order.
    L : float
        circumference the y-range refers to.
    variant : LatticeVariant
        construction rule the lattice came from.
    """
    x_interval: tuple
    sites: tuple
    L: float
    variant: LatticeVariant = LatticeVariant.GAP

    def __post_init__(self):
        lo, hi = self.x_interval
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("Lattice sites must be distinct!")
        for n, m in self.sites:
            if not (lo <= n <= hi and -self.L / 2. <= m < self.L / 2.):
                raise ValueError("Site ({}, {}) lies outside X x [-L/2, L/2)!".format(n, m))

    def __len__(self):
        return len(self.sites)

    @property
    def n_values(self):
        return sorted(set(n for n, _ in self.sites))

    @property
    def site_array(self):
        return np.array(self.sites, dtype=int).reshape(-1, 2)

    def restrict(self, x_interval, variant=None):
        """
        Sub-lattice of the sites whose column n lies in `x_interval`.
        """
        lo, hi = x_interval
        sites = tuple(s for s in self.sites if lo <= s[0] <= hi)
        return LatticeSpec((float(lo), float(hi)), sites, self.L,
                           self.variant if variant is None else LatticeVariant(variant))

    def to_dict(self):
        return {"x_interval": list(self.x_interval), "L": float(self.L),
                "variant": self.variant.value, "n_sites": len(self.sites)}


def lattice_interval(variant, L):
    """
    Interval X of the requested lattice variant.
    """
    variant = LatticeVariant(variant)
    half = L / 2.
    if variant is LatticeVariant.BAND:
        buffer = math.log(L)
        return -half + buffer, half - buffer
    elif variant is LatticeVariant.GAP:
        return -half, half
    width = 3. * math.sqrt(L) / 4. + 1.
    if variant is LatticeVariant.EDGE_LEFT:
        return -half, -half + width
    return half - width, half


def build_lattice(variant, L):
    """
    Enumerates the impurity sites of one lattice variant.

    Parameters
    ----------
    variant : LatticeVariant or str
        band_experiment, gap_experiment, edge_strip_left or edge_strip_right.
    L : float
        circumference, >= 4.

    Returns
    -------
    LatticeSpec
    """
    if L < 4:
        raise ValueError("L={} is too small; L >= 4 is required!".format(L))
    variant = LatticeVariant(variant)
    lo, hi = lattice_interval(variant, L)
    n_range = range(int(math.ceil(lo)), int(math.floor(hi)) + 1)
    if len(n_range) == 0:
        raise ValueError("Lattice {} is empty for L={}: X=[{}, {}]".format(
            variant.value, L, lo, hi))
    m_range = range(int(math.ceil(-L / 2.)), int(math.ceil(L / 2.)))
    sites = tuple((n, m) for n in n_range for m in m_range)
    _logger.debug("lattice %s, L=%s: %d sites", variant.value, L, len(sites))
    return LatticeSpec((lo, hi), sites, float(L), variant)


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """
    One sampled realisation omega of the coupling constants.

    Attributes
    ----------
    lattice : LatticeSpec
        impurity sites.
    couplings : numpy.ndarray
        X_{n,m} in [-1, 1], aligned with `lattice.sites`.
    seed : int or None
        generator seed (None for hand-made realisations).
    bump_height : float
        peak height of each bump, equal to V0.
    generator : str
        name and version of the pseudorandom generator.
    """
    lattice: LatticeSpec
    couplings: np.ndarray
    seed: object = None
    bump_height: float = 0.
    generator: str = GENERATOR_NAME

    def __post_init__(self):
        couplings = np.array(self.couplings, dtype=float)
        if couplings.shape != (len(self.lattice),):
            raise ValueError("Expected {} couplings, got {}!".format(len(self.lattice),
                                                                    couplings.shape))
        if np.any(np.abs(couplings) > 1.):
            raise ValueError("Couplings must lie in [-1, 1]!")
        couplings.setflags(write=False)
        object.__setattr__(self, "couplings", couplings)

    def coupling_map(self):
        return dict(zip(self.lattice.sites, self.couplings.tolist()))

    def is_trivial(self):
        return self.bump_height == 0 or not np.any(self.couplings)

    def restrict(self, x_interval, variant=None):
        """
        Realisation on the sub-lattice of columns inside `x_interval`, with
        the same coupling values.
        """
        sub = self.lattice.restrict(x_interval, variant)
        index = {s: i for i, s in enumerate(self.lattice.sites)}
        couplings = [self.couplings[index[s]] for s in sub.sites]
        return DisorderRealization(sub, np.array(couplings, dtype=float), self.seed,
                                   self.bump_height, self.generator)

    def to_dict(self):
        return {"lattice": self.lattice.to_dict(), "seed": self.seed,
                "bump_height": float(self.bump_height), "generator": self.generator,
                "couplings": [[int(n), int(m), float(x)] for (n, m), x
                              in zip(self.lattice.sites, self.couplings)]}


def generator_version():
    return "{} (numpy {})".format(GENERATOR_NAME, np.__version__)


def sample_realization(seed, lattice, V0):
    """
    Draws i.i.d. couplings uniform on [-1, 1], one per site in lattice
    order.

    Parameters
    ----------
    seed : int
        64-bit seed of the PCG64 generator.
    lattice : LatticeSpec
        impurity sites.
    V0 : float
        bump height.

    Returns
    -------
    DisorderRealization
    """
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    couplings = rng.uniform(-1., 1., size=len(lattice))
    return DisorderRealization(lattice, couplings, int(seed), float(V0), generator_version())


def zero_realization(lattice):
    """ Realisation with every coupling set to zero. """
    return DisorderRealization(lattice, np.zeros(len(lattice)), None, 0.)


def eval_disorder_potential(x, y, omega, L):
    """
    Evaluates V_omega(x, y) = sum X_{n,m} V(x - n, y - m) with the
    y-displacement taken as the minimal periodic image.

    Parameters
    ----------
    x, y : float or numpy.ndarray
        evaluation points (broadcastable).
    omega : DisorderRealization
        the realisation.
    L : float
        circumference.

    Returns
    -------
    float or numpy.ndarray
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    total = np.zeros(x.shape)
    if len(omega.lattice) == 0:
        return total if total.ndim else float(total)
    sites = omega.lattice.site_array
    for (n, m), coupling in zip(sites, omega.couplings):
        if coupling == 0:
            continue
        dy = np.mod(y - m + L / 2., L) - L / 2.
        total += coupling * eval_bump(x - n, dy, omega.bump_height)
    if total.ndim == 0:
        return float(total)
    return total
