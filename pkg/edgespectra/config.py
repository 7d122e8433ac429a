'''
Run configuration: JSON documents, defaults, validation against the model
invariants, and the manifest that makes a run replayable.
'''

import datetime
import json
import logging
import math
from dataclasses import dataclass, field, fields

from edgespectra import __version__
from edgespectra.assembly import Basis
from edgespectra.model import (LOG_BASE, LatticeVariant, ModelParams, WallProfile, WallSide,
                               build_lattice, generator_version)
from edgespectra.observables import ClassificationThresholds
from edgespectra.spectral import EnergyWindow

_logger = logging.getLogger(__name__)

EXPERIMENTS = ("dispersion", "spectrum", "classify", "theorem1", "theorem2", "flux-scan",
               "fit")
DEFAULT_WALL = {"c": 1.0, "m": 4}
DEFAULT_DISCRETIZATION = {"n_x": None, "J": None, "points_per_length": 8, "quad_order": 16}
DEFAULT_FLUX_GRID = tuple(round(0.05 * i, 2) for i in range(11))
# flux of an "auto" run without a window to scan
PINNED_FLUX = 0.25


class ConfigError(ValueError):
    """
    Invalid run configuration; `field` is the dotted path of the offending
    entry.
    """

    def __init__(self, message, field=None):
        super(ConfigError, self).__init__(message)
        self.field = field


def _number(d, key, default=None, positive=False, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError("Missing required entry '{}'!".format(key), key)
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("Entry '{}' must be a number, got {!r}!".format(key, value), key)
    if not math.isfinite(value):
        raise ConfigError("Entry '{}' must be finite!".format(key), key)
    if positive and not value > 0:
        raise ConfigError("Entry '{}'={} must be positive!".format(key, value), key)
    return float(value)


def _walls(raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("Entry 'walls' must be an object!", "walls")
    if "left" in raw or "right" in raw:
        sides = {"left": raw.get("left", DEFAULT_WALL), "right": raw.get("right", DEFAULT_WALL)}
    else:
        shared = dict(DEFAULT_WALL, **raw)
        sides = {"left": shared, "right": shared}
    walls = {}
    for side, spec in sides.items():
        spec = dict(DEFAULT_WALL, **spec)
        try:
            w = WallProfile(c=spec["c"], m=spec["m"], side=side)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err), "walls.{}".format(side))
        walls[side] = {"c": float(w.c), "m": int(w.m)}
    return walls


def _seeds(raw):
    if raw is None:
        return tuple(range(32))
    if isinstance(raw, bool):
        raise ConfigError("Entry 'seeds' must be a count or a list!", "seeds")
    if isinstance(raw, int):
        if raw < 1:
            raise ConfigError("Seed count {} must be positive!".format(raw), "seeds")
        return tuple(range(raw))
    if isinstance(raw, (list, tuple)):
        if not raw or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                              for s in raw):
            raise ConfigError("Seed list must hold non-negative integers!", "seeds")
        if len(set(raw)) != len(raw):
            raise ConfigError("Seed list holds duplicates!", "seeds")
        return tuple(int(s) for s in raw)
    raise ConfigError("Entry 'seeds' must be a count or a list!", "seeds")


def _pair(raw, key):
    if raw is None:
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ConfigError("Entry '{}' must be a pair [lo, hi]!".format(key), key)
    lo, hi = (_number({key: v}, key) for v in raw)
    if not lo < hi:
        raise ConfigError("Entry '{}' needs lo < hi, got [{}, {}]!".format(key, lo, hi), key)
    return (lo, hi)


@dataclass(frozen=True)
class RunConfig:
    """
    Fully defaulted run configuration. `to_dict` and `load_config_dict`
    round-trip exactly.
    """
    experiment: str
    B: float
    L: float
    V0: float
    epsilon: float = 0.05
    delta: float = 0.3
    flux: object = "auto"
    walls: dict = field(default_factory=lambda: {"left": dict(DEFAULT_WALL),
                                                 "right": dict(DEFAULT_WALL)})
    seeds: tuple = tuple(range(32))
    workers: int = 1
    discretization: dict = field(default_factory=lambda: dict(DEFAULT_DISCRETIZATION))
    thresholds: dict = None
    window: tuple = None
    L_list: tuple = None
    flux_grid: tuple = DEFAULT_FLUX_GRID
    tol: float = 1e-10
    max_failure_fraction: float = 0.25
    n_max: int = 1
    k_range: tuple = None
    reports: tuple = ()

    def to_dict(self):
        d = {}
        for f in fields(self):
            value = getattr(self, f.name)
            d[f.name] = list(value) if isinstance(value, tuple) else value
        return json.loads(json.dumps(d))

    @property
    def auto_flux(self):
        return self.flux == "auto"

    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return load_config_dict(d)

    def model_params(self, flux=None):
        """
        ModelParams of the run; `flux` overrides an "auto" flux.
        """
        if flux is None:
            flux = 0. if self.auto_flux else self.flux
        try:
            return ModelParams(
                B=self.B, L=self.L, V0=self.V0,
                wall_left=WallProfile(side=WallSide.LEFT, **self.walls["left"]),
                wall_right=WallProfile(side=WallSide.RIGHT, **self.walls["right"]),
                flux=float(flux), epsilon=self.epsilon, delta=self.delta)
        except ValueError as err:
            raise ConfigError(str(err), "model")

    def basis(self, params):
        disc = self.discretization
        try:
            return Basis.for_params(params, n_x=disc["n_x"], J=disc["J"],
                                    points_per_length=disc["points_per_length"])
        except ValueError as err:
            raise ConfigError(str(err), "discretization")

    def classification_thresholds(self):
        if self.thresholds is None:
            return ClassificationThresholds.default(self.B)
        try:
            return ClassificationThresholds(**self.thresholds)
        except ValueError as err:
            raise ConfigError(str(err), "thresholds")

    def energy_window(self, params):
        """
        Window override, or the gap window for theorem2 and the band window
        otherwise.
        """
        try:
            if self.window is not None:
                window = EnergyWindow(*self.window)
            elif self.experiment == "theorem2":
                window = EnergyWindow.gap(params)
            else:
                window = EnergyWindow.band(params)
        except ValueError as err:
            raise ConfigError(str(err), "window")
        if window.hi >= params.energy_ceiling:
            raise ConfigError("Window top {} reaches 3B + V0 = {}!".format(
                window.hi, params.energy_ceiling), "window")
        return window

    def scan_window(self, params):
        """
        Window the "auto" flux scan runs over: the window of the experiment,
        or None when that window is empty.
        """
        try:
            return self.energy_window(params)
        except ConfigError as err:
            _logger.info("no flux scan window: %s", err)
            return None

    def check_invariants(self):
        """
        Raises a ConfigError naming the inequality the selected experiment
        needs and the configuration violates.
        """
        params = self.model_params()
        if self.experiment == "theorem1":
            try:
                params.check_theorem1()
            except ValueError as err:
                raise ConfigError(str(err), "V0")
        elif self.experiment == "theorem2":
            try:
                params.check_theorem2()
            except ValueError as err:
                raise ConfigError(str(err), "delta")
        self.classification_thresholds()
        if self.window is not None or self.experiment in ("theorem1", "theorem2",
                                                          "spectrum", "classify"):
            self.energy_window(params)
        return params


def load_config_dict(d):
    """
    Validates a configuration document and fills in the defaults.

    Parameters
    ----------
    d : dict
        parsed document.

    Returns
    -------
    RunConfig
    """
    if not isinstance(d, dict):
        raise ConfigError("Configuration must be a JSON object!", "")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError("Unknown configuration entries {}!".format(unknown), unknown[0])
    experiment = d.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("Entry 'experiment' must be one of {}, got {!r}!".format(
            list(EXPERIMENTS), experiment), "experiment")

    flux = d.get("flux")
    if flux is None:
        flux = "auto"
    elif flux != "auto":
        flux = _number(d, "flux")

    disc = dict(DEFAULT_DISCRETIZATION)
    raw_disc = d.get("discretization") or {}
    if not isinstance(raw_disc, dict):
        raise ConfigError("Entry 'discretization' must be an object!", "discretization")
    for key, value in raw_disc.items():
        if key not in disc:
            raise ConfigError("Unknown entry '{}'!".format(key), "discretization." + key)
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)
                                  or value < 1):
            raise ConfigError("Entry '{}' must be a positive integer!".format(key),
                              "discretization." + key)
        disc[key] = value
    if disc["points_per_length"] is None or disc["quad_order"] is None:
        raise ConfigError("points_per_length and quad_order cannot be null!",
                          "discretization")

    thresholds = d.get("thresholds")
    if thresholds is not None:
        if not isinstance(thresholds, dict) or set(thresholds) != {"edge_min", "bulk_max"}:
            raise ConfigError("Entry 'thresholds' needs edge_min and bulk_max!", "thresholds")
        thresholds = {k: _number(thresholds, k, positive=True) for k in ("edge_min",
                                                                         "bulk_max")}

    L_list = d.get("L_list")
    if L_list is not None:
        if not isinstance(L_list, (list, tuple)) or not L_list:
            raise ConfigError("Entry 'L_list' must be a non-empty list!", "L_list")
        L_list = tuple(_number({"L_list": v}, "L_list", positive=True) for v in L_list)

    flux_grid = d.get("flux_grid")
    if flux_grid is None:
        flux_grid = DEFAULT_FLUX_GRID
    elif not isinstance(flux_grid, (list, tuple)) or not flux_grid:
        raise ConfigError("Entry 'flux_grid' must be a non-empty list!", "flux_grid")
    flux_grid = tuple(_number({"flux_grid": v}, "flux_grid") for v in flux_grid)

    workers = d.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("Entry 'workers' must be a positive integer!", "workers")
    n_max = d.get("n_max", 1)
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 0:
        raise ConfigError("Entry 'n_max' must be a non-negative integer!", "n_max")
    fraction = _number(d, "max_failure_fraction", 0.25)
    if not 0 <= fraction <= 1:
        raise ConfigError("Entry 'max_failure_fraction' must lie in [0, 1]!",
                          "max_failure_fraction")
    reports = d.get("reports") or ()
    if not isinstance(reports, (list, tuple)) or not all(isinstance(r, str) for r in reports):
        raise ConfigError("Entry 'reports' must be a list of paths!", "reports")

    config = RunConfig(
        experiment=experiment,
        B=_number(d, "B", required=True, positive=True),
        L=_number(d, "L", required=True, positive=True),
        V0=_number(d, "V0", required=True),
        epsilon=_number(d, "epsilon", 0.05, positive=True),
        delta=_number(d, "delta", 0.3, positive=True),
        flux=flux,
        walls=_walls(d.get("walls")),
        seeds=_seeds(d.get("seeds")),
        workers=workers,
        discretization=disc,
        thresholds=thresholds,
        window=_pair(d.get("window"), "window"),
        L_list=L_list,
        flux_grid=flux_grid,
        tol=_number(d, "tol", 1e-10, positive=True),
        max_failure_fraction=fraction,
        n_max=n_max,
        k_range=_pair(d.get("k_range"), "k_range"),
        reports=tuple(reports))
    if config.V0 < 0:
        raise ConfigError("Disorder bound V0={} must be non-negative!".format(config.V0), "V0")
    if config.L < 4:
        raise ConfigError("Circumference L={} must satisfy L >= 4!".format(config.L), "L")
    config.model_params()
    return config


def parse_config(path):
    """
    Reads and validates a JSON run configuration.

    Parameters
    ----------
    path : str
        configuration file.

    Returns
    -------
    RunConfig
    """
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError("Malformed JSON in {}: {}".format(path, err), "")
    config = load_config_dict(d)
    config.check_invariants()
    _logger.info("loaded %s configuration from %s", config.experiment, path)
    return config


@dataclass
class RunManifest:
    """
    Everything needed to replay a run: the defaulted configuration, the
    seeds, the versions, the discretisation and the derived quantities.
    """
    config: dict
    seeds: list
    version: str
    timestamp: str
    discretization: dict
    derived: dict
    notes: list = field(default_factory=list)
    generator: str = ""

    @classmethod
    def create(cls, config, params=None, basis=None, window=None, notes=()):
        derived = {"log_base": LOG_BASE}
        if params is not None:
            derived["flux"] = float(params.flux)
            derived["magnetic_length"] = params.magnetic_length
            derived["landau_bands"] = [list(b) for b in params.landau_bands(1)]
            derived["band_window"] = list(params.band_window_bounds())
            derived["gap_window"] = list(params.gap_window_bounds())
            derived["lattices"] = {
                v.value: len(build_lattice(v, params.L)) for v in LatticeVariant}
        if window is not None:
            derived["window"] = window.to_dict()
        return cls(config.to_dict(), list(config.seeds), __version__,
                   datetime.datetime.now(datetime.timezone.utc).isoformat(),
                   basis.to_dict() if basis is not None else {}, derived, list(notes),
                   generator_version())

    def run_config(self):
        """ Configuration to replay the run with; the resolved flux is pinned. """
        d = dict(self.config)
        if d.get("flux") == "auto" and "flux" in self.derived:
            d["flux"] = self.derived["flux"]
        return load_config_dict(d)

    def to_dict(self):
        return {"config": self.config, "seeds": self.seeds, "version": self.version,
                "timestamp": self.timestamp, "discretization": self.discretization,
                "derived": self.derived, "notes": self.notes, "generator": self.generator}

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], list(d["seeds"]), d["version"], d["timestamp"],
                   d["discretization"], d["derived"], list(d.get("notes", [])),
                   d.get("generator", ""))
