'''
Disorder-ensemble experiments on the edge/bulk structure of windowed
spectra: the band-window three-set decomposition, the gap-window two-set
decomposition, the flux scan of left/right reference spacings, and decay
fits of eigenvalue shifts across cylinder sizes.
'''

import logging
import math
import multiprocessing
from dataclasses import dataclass, field, fields, replace
from functools import partial

import numpy as np
from scipy.stats import linregress
from tqdm import tqdm

from edgespectra.assembly import Basis, assemble_full
from edgespectra.model import (LatticeVariant, WallSide, build_lattice, lattice_interval,
                               sample_realization)
from edgespectra.observables import ClassificationThresholds, diagnose_all
from edgespectra.spectral import (ConvergenceError, EnergyWindow, WindowLabel,
                                  eigs_in_window, fiber_window_spectrum)

_logger = logging.getLogger(__name__)

DEFAULT_FLUX_GRID = tuple(round(0.05 * i, 2) for i in range(11))
DEFAULT_L_LIST = (8, 12, 16)
DEFAULT_SEEDS = 32
# bulk states must stay below this fraction of the single-mode slice value
SLICE_RATIO_MAX = 1e-2
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

BULK_REFERENCE_NOTE = ("bulk reference H_b: walls removed, x-grid restricted to "
                       "[-L/2, L/2] with Dirichlet ends, states with |J| >= edge_min "
                       "dropped; compared by cardinality and shifts only")
GAP_WINDOW_NOTE = ("gap window taken as (2B - delta, 2B + delta) inside the first "
                   "spectral gap; the theorem statement writes (B - delta, B + delta)")
SIGMA_B_NOTE = ("Sigma_b is the unmatched remainder of the window spectrum; the "
                "bulk-reference matching is a secondary diagnostic")


# ----------------------------------------------------------------------------
# matching

@dataclass(frozen=True)
class SpectralMatch:
    """
    Order-preserving pairing of a perturbed and a reference spectrum.

    Attributes
    ----------
    pairs : list of tuple
        (perturbed energy, reference energy, shift).
    index_pairs : list of tuple
        (perturbed index, reference index) of every pair.
    unmatched_perturbed, unmatched_reference : list of float
    cap : float
        largest allowed shift of a pair.
    """
    pairs: list
    index_pairs: list
    unmatched_perturbed: list
    unmatched_reference: list
    cap: float

    @property
    def shifts(self):
        return np.array([p[2] for p in self.pairs], dtype=float)

    @property
    def total_shift(self):
        return float(np.sum(self.shifts))

    @property
    def max_shift(self):
        return float(np.max(self.shifts)) if self.pairs else float("nan")

    @property
    def median_shift(self):
        return float(np.median(self.shifts)) if self.pairs else float("nan")


def match_spectra(perturbed, reference, cap):
    """
    Pairs two sorted spectra: as many pairs as possible with shift <= cap,
    and among those the smallest total shift. Solved exactly by dynamic
    programming over order-preserving assignments.

    Parameters
    ----------
    perturbed, reference : sequence of float
        ascending energies.
    cap : float
        largest allowed shift.

    Returns
    -------
    SpectralMatch
    """
    a = np.asarray(perturbed, dtype=float)
    b = np.asarray(reference, dtype=float)
    if np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise ValueError("Both spectra must be sorted ascending!")
    n, m = a.size, b.size
    count = np.zeros((n + 1, m + 1), dtype=int)
    cost = np.zeros((n + 1, m + 1))
    # 0 pair, 1 skip perturbed, 2 skip reference
    move = np.zeros((n + 1, m + 1), dtype=np.int8)
    move[1:, 0] = 1
    move[0, 1:] = 2

    def better(c1, s1, c2, s2):
        return c1 > c2 or (c1 == c2 and s1 < s2)

    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best_c, best_s, best_m = count[i - 1, j], cost[i - 1, j], 1
            if better(count[i, j - 1], cost[i, j - 1], best_c, best_s):
                best_c, best_s, best_m = count[i, j - 1], cost[i, j - 1], 2
            shift = abs(a[i - 1] - b[j - 1])
            if shift <= cap:
                c, s = count[i - 1, j - 1] + 1, cost[i - 1, j - 1] + shift
                if not better(best_c, best_s, c, s):
                    best_c, best_s, best_m = c, s, 0
            count[i, j], cost[i, j], move[i, j] = best_c, best_s, best_m

    index_pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if move[i, j] == 0:
            index_pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif move[i, j] == 1:
            i -= 1
        else:
            j -= 1
    index_pairs.reverse()
    used_a = {p for p, _ in index_pairs}
    used_b = {r for _, r in index_pairs}
    pairs = [(float(a[p]), float(b[r]), float(abs(a[p] - b[r]))) for p, r in index_pairs]
    return SpectralMatch(pairs, index_pairs,
                         [float(a[p]) for p in range(n) if p not in used_a],
                         [float(b[r]) for r in range(m) if r not in used_b], float(cap))


def min_spacing(energies):
    e = np.sort(np.asarray(energies, dtype=float))
    if e.size < 2:
        return float("inf")
    return float(np.min(np.diff(e)))


def min_cross_distance(first, second):
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.size == 0 or second.size == 0:
        return float("nan")
    return float(np.min(np.abs(first[:, None] - second[None, :])))


def theorem1_cap(reference, params, tol):
    """
    min(d/3, 10 V0 L exp(-B/4)) with d the minimal reference spacing,
    floored at 100 tol; d/3 alone when V0 = 0.
    """
    d = min_spacing(reference)
    bound = 10. * params.V0 * params.L * math.exp(-params.B / 4.)
    if params.V0 == 0:
        cap = d / 3.
    else:
        cap = min(d / 3., bound)
    if not math.isfinite(cap):
        cap = bound if params.V0 > 0 else 1.
    return max(cap, 100. * tol)


def theorem2_cap(reference, window, tol):
    """ Half the minimal spacing of the combined reference spectrum. """
    d = min_spacing(reference)
    cap = d / 2. if math.isfinite(d) else window.hi - window.lo
    return max(cap, 100. * tol)


# ----------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class RealizationRecord:
    """
    Outcome of one seed. Statistics that do not apply are NaN.
    """
    seed: int
    status: str = "ok"
    message: str = ""
    n_window: int = 0
    n_left: int = 0
    n_right: int = 0
    n_bulk: int = 0
    n_unmatched: int = 0
    n_unmatched_reference: int = 0
    n_bulk_reference: int = 0
    n_bulk_matched: int = 0
    cap: float = float("nan")
    max_shift: float = float("nan")
    median_shift: float = float("nan")
    min_edge_current: float = float("nan")
    max_bulk_current: float = float("nan")
    max_current_deviation: float = float("nan")
    dist_bulk_edge: float = float("nan")
    max_slice_ratio: float = float("nan")
    partition_ok: bool = True
    currents_ok: bool = True
    slice_ok: bool = True
    violation: bool = False

    @property
    def ok(self):
        return self.status == "ok"

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def failed(cls, seed, message):
        return cls(int(seed), status="failed", message=message)


@dataclass(frozen=True)
class StateRow:
    seed: int
    set: str
    energy: float
    current: float
    x_centroid: float
    x_spread: float
    min_slice: float
    y_bar: float
    dy_slice: float
    label: str
    reference_energy: float = float("nan")
    shift: float = float("nan")
    reference_current: float = float("nan")


@dataclass(frozen=True)
class ReferenceState:
    set: str
    energy: float
    current: float
    seed: int = -1


@dataclass
class ExperimentReport:
    """
    Per-realisation records and raw state rows of one experiment; every
    aggregate is recomputed from them.
    """
    experiment: str
    params: object
    window: EnergyWindow
    seeds: list
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    references: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    thresholds: ClassificationThresholds = None

    def merge(self, other):
        """
        Union of two reports of the same experiment; the result does not
        depend on the merge order.
        """
        if self.experiment != other.experiment:
            raise ValueError("Cannot merge {} into {}!".format(other.experiment,
                                                              self.experiment))
        seeds = sorted(set(self.seeds) | set(other.seeds))
        records = sorted(self.records + other.records, key=lambda r: r.seed)
        states = sorted(self.states + other.states, key=lambda s: (s.seed, s.energy))
        references = sorted(set(self.references) | set(other.references),
                            key=lambda r: (r.seed, r.set, r.energy))
        notes = list(dict.fromkeys(self.notes + other.notes))
        return replace(self, seeds=seeds, records=records, states=states,
                       references=references, notes=notes)

    @property
    def ok_records(self):
        return [r for r in self.records if r.ok]

    @property
    def failures(self):
        return [r for r in self.records if not r.ok]

    @property
    def failure_fraction(self):
        return len(self.failures) / len(self.records) if self.records else 0.

    def median_shift(self):
        """ Median over converged seeds of the per-seed median shift. """
        values = np.array([r.median_shift for r in self.ok_records], dtype=float)
        values = values[np.isfinite(values)]
        return float(np.median(values)) if values.size else float("nan")

    def fraction(self, flag):
        ok = self.ok_records
        return sum(bool(getattr(r, flag)) for r in ok) / len(ok) if ok else float("nan")

    def aggregate(self):
        """
        Quantiles over converged seeds of every numeric statistic, plus
        the flag fractions and the failure census.

        Returns
        -------
        list of dict
            one row per statistic.
        """
        rows = []
        ok = self.ok_records
        for f in fields(RealizationRecord):
            if f.type not in (int, float, "int", "float") or f.name == "seed":
                continue
            values = np.array([getattr(r, f.name) for r in ok], dtype=float)
            values = values[np.isfinite(values)]
            row = {"statistic": f.name, "count": int(values.size)}
            for q in QUANTILES:
                row["q{:02d}".format(int(round(100 * q)))] = (
                    float(np.quantile(values, q)) if values.size else float("nan"))
            rows.append(row)
        for flag in ("partition_ok", "currents_ok", "slice_ok", "violation"):
            value = self.fraction(flag)
            row = {"statistic": flag + "_fraction", "count": len(ok)}
            for q in QUANTILES:
                row["q{:02d}".format(int(round(100 * q)))] = value
            rows.append(row)
        row = {"statistic": "failure_fraction", "count": len(self.records)}
        for q in QUANTILES:
            row["q{:02d}".format(int(round(100 * q)))] = self.failure_fraction
        rows.append(row)
        return rows


# ----------------------------------------------------------------------------
# per-seed work

@dataclass(frozen=True)
class _RunContext:
    params: object
    basis: Basis
    window: EnergyWindow
    thresholds: ClassificationThresholds
    tol: float
    quad_order: int
    ref_energies: tuple = ()
    ref_sides: tuple = ()
    ref_currents: tuple = ()


def _state_row(seed, set_name, d, ref_energy=float("nan"), ref_current=float("nan")):
    shift = abs(d.energy - ref_energy) if math.isfinite(ref_energy) else float("nan")
    return StateRow(int(seed), set_name, d.energy, d.current, d.x_centroid, d.x_spread,
                    d.min_slice, d.y_bar, d.dy_slice, d.label.value, ref_energy, shift,
                    ref_current)


def pure_edge_references(params, basis, window):
    """
    Window spectra of the pure edge Hamiltonians, one per wall, on grids
    extended away from the wall.

    Returns
    -------
    dict
        WallSide -> list of FiberState.
    """
    refs = {}
    for side in (WallSide.LEFT, WallSide.RIGHT):
        refs[side] = fiber_window_spectrum(basis.for_edge(params, side), params, (side,),
                                           window)
    return refs


def _theorem1_seed(ctx, seed):
    params, basis, window = ctx.params, ctx.basis, ctx.window
    lattice = build_lattice(LatticeVariant.BAND, params.L)
    omega = sample_realization(seed, lattice, params.V0)

    op = assemble_full(omega, basis, params, quad_order=ctx.quad_order, label="H_omega")
    diags = diagnose_all(eigs_in_window(op, window, ctx.tol), op, ctx.thresholds)
    energies = np.array([d.energy for d in diags])

    ref_e = np.array(ctx.ref_energies)
    cap = theorem1_cap(ref_e, params, ctx.tol)
    match = match_spectra(energies, ref_e, cap)
    sides = ["bulk"] * len(diags)
    partner = [None] * len(diags)
    for i, j in match.index_pairs:
        sides[i] = ctx.ref_sides[j]
        partner[i] = j

    bulk_op = assemble_full(omega, basis.bulk_box((-params.L / 2., params.L / 2.)), params,
                            walls=(), quad_order=ctx.quad_order, label="H_b")
    bulk_diags = diagnose_all(eigs_in_window(bulk_op, window, ctx.tol), bulk_op,
                              ctx.thresholds)
    bulk_ref = np.array([d.energy for d in bulk_diags
                         if abs(d.current) < ctx.thresholds.edge_min])

    rows = []
    for i, d in enumerate(diags):
        if partner[i] is None:
            rows.append(_state_row(seed, "bulk", d))
        else:
            j = partner[i]
            rows.append(_state_row(seed, sides[i], d, ctx.ref_energies[j],
                                   ctx.ref_currents[j]))

    edge = [d for d, s in zip(diags, sides) if s != "bulk"]
    bulk = [d for d, s in zip(diags, sides) if s == "bulk"]
    bulk_energies = np.array([d.energy for d in bulk])
    bulk_match = match_spectra(bulk_energies, bulk_ref,
                               theorem2_cap(bulk_ref, window, ctx.tol))
    n_left = sides.count(WallSide.LEFT.value)
    n_right = sides.count(WallSide.RIGHT.value)
    t = ctx.thresholds
    record = RealizationRecord(
        int(seed), n_window=len(diags), n_left=n_left, n_right=n_right, n_bulk=len(bulk),
        n_unmatched=len(match.unmatched_perturbed),
        n_unmatched_reference=len(match.unmatched_reference),
        n_bulk_reference=int(bulk_ref.size), n_bulk_matched=len(bulk_match.pairs),
        cap=cap, max_shift=match.max_shift, median_shift=match.median_shift,
        min_edge_current=min((abs(d.current) for d in edge), default=float("nan")),
        max_bulk_current=max((abs(d.current) for d in bulk), default=float("nan")),
        dist_bulk_edge=min_cross_distance(bulk_energies, [d.energy for d in edge]),
        max_slice_ratio=max((d.slice_ratio for d in bulk), default=float("nan")),
        partition_ok=n_left + n_right + len(bulk) == len(diags),
        currents_ok=(all(abs(d.current) >= t.edge_min for d in edge)
                     and all(abs(d.current) <= t.bulk_max for d in bulk)),
        slice_ok=all(d.slice_ratio <= SLICE_RATIO_MAX for d in bulk))
    refs = [ReferenceState("bulk_reference", float(e), float("nan"), int(seed))
            for e in bulk_ref]
    return record, rows, refs


def _theorem2_seed(ctx, seed):
    params, basis, window = ctx.params, ctx.basis, ctx.window
    lattice = build_lattice(LatticeVariant.GAP, params.L)
    omega = sample_realization(seed, lattice, params.V0)
    op = assemble_full(omega, basis, params, quad_order=ctx.quad_order, label="H_omega")
    diags = diagnose_all(eigs_in_window(op, window, ctx.tol), op, ctx.thresholds)
    energies = np.array([d.energy for d in diags])

    ref = []
    for side, variant in ((WallSide.LEFT, LatticeVariant.EDGE_LEFT),
                          (WallSide.RIGHT, LatticeVariant.EDGE_RIGHT)):
        strip = omega.restrict(lattice_interval(variant, params.L), variant)
        edge_op = assemble_full(strip, basis.for_edge(params, side), params, walls=(side,),
                                quad_order=ctx.quad_order, label="H_" + side.value)
        for d in diagnose_all(eigs_in_window(edge_op, window, ctx.tol), edge_op,
                              ctx.thresholds):
            ref.append((d.energy, side.value, d.current))
    ref.sort()
    ref_e = np.array([r[0] for r in ref])
    cap = theorem2_cap(ref_e, window, ctx.tol)
    match = match_spectra(energies, ref_e, cap)

    rows = []
    matched = {}
    for i, j in match.index_pairs:
        matched[i] = j
    deviations = []
    sides = []
    for i, d in enumerate(diags):
        if i in matched:
            e_ref, side, j_ref = ref[matched[i]]
            rows.append(_state_row(seed, side, d, e_ref, j_ref))
            deviations.append(abs(d.current - j_ref))
            sides.append(side)
        else:
            rows.append(_state_row(seed, "unmatched", d))
            sides.append("unmatched")

    n_unmatched = len(match.unmatched_perturbed)
    if n_unmatched:
        _logger.warning("seed %d: %d gap-window eigenvalue(s) without a random edge "
                        "partner", seed, n_unmatched)
    edge = [d for d, s in zip(diags, sides) if s != "unmatched"]
    n_left = sides.count(WallSide.LEFT.value)
    n_right = sides.count(WallSide.RIGHT.value)
    record = RealizationRecord(
        int(seed), n_window=len(diags), n_left=n_left, n_right=n_right,
        n_unmatched=n_unmatched, n_unmatched_reference=len(match.unmatched_reference),
        cap=cap, max_shift=match.max_shift, median_shift=match.median_shift,
        min_edge_current=min((abs(d.current) for d in edge), default=float("nan")),
        max_current_deviation=max(deviations, default=float("nan")),
        partition_ok=n_left + n_right + n_unmatched == len(diags),
        currents_ok=all(abs(d.current) >= ctx.thresholds.edge_min for d in edge),
        violation=n_unmatched > 0)
    refs = [ReferenceState(side, float(e), float(j), int(seed)) for e, side, j in ref]
    return record, rows, refs


def _guarded(worker, ctx, seed):
    try:
        return worker(ctx, seed)
    except (ConvergenceError, np.linalg.LinAlgError, RuntimeError) as err:
        _logger.warning("seed %d failed: %s", seed, err)
        return RealizationRecord.failed(seed, "{}: {}".format(type(err).__name__, err)), [], []


def _run_seeds(worker, ctx, seeds, workers=1, progress=False):
    task = partial(_guarded, worker, ctx)
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            results = list(tqdm(pool.imap(task, seeds), total=len(seeds),
                                disable=not progress))
    else:
        results = [task(s) for s in tqdm(seeds, disable=not progress)]
    records, states, refs = [], [], []
    for record, rows, ref in results:
        records.append(record)
        states.extend(rows)
        refs.extend(ref)
        _logger.info("seed %d: %s (%d window states)", record.seed, record.status,
                     record.n_window)
    return records, states, refs


def theorem1_run(params, basis, seeds, thresholds=None, window=None, tol=1e-10,
                 workers=1, quad_order=16, progress=False):
    """
    Three-set decomposition of the band-window spectrum over an ensemble.

    For every seed the window spectrum of H_omega is matched against the
    pure edge spectra of both walls; the unmatched remainder forms the
    bulk set, whose cardinality is compared to a bulk reference Hamiltonian
    without walls.

    Parameters
    ----------
    params : ModelParams
        requires B > 4 V0.
    basis : Basis
        discretisation of H_omega.
    seeds : list of int
        realisation seeds.
    thresholds : ClassificationThresholds, optional
        defaults to ClassificationThresholds.default(B).
    window : EnergyWindow, optional
        defaults to the band window [B + eps, B + V0].
    tol : float
        eigenpair residual bound.
    workers : int
        size of the process pool.
    quad_order : int
        Gauss-Legendre order of the bump integrals.
    progress : bool
        show a progress bar.

    Returns
    -------
    ExperimentReport
    """
    params.check_theorem1()
    if window is None:
        window = EnergyWindow.band(params)
    if thresholds is None:
        thresholds = ClassificationThresholds.default(params.B)
    refs = pure_edge_references(params, basis, window)
    merged = sorted((s.energy, side.value, s.current) for side, states in refs.items()
                    for s in states)
    ctx = _RunContext(params, basis, window, thresholds, tol, quad_order,
                      tuple(r[0] for r in merged), tuple(r[1] for r in merged),
                      tuple(r[2] for r in merged))
    if not merged:
        _logger.warning("no pure edge states in [%.6g, %.6g]", window.lo, window.hi)
    if min_spacing(ctx.ref_energies) < 100. * tol:
        _logger.warning("left and right pure edge spectra are degenerate; choose a "
                        "flux away from 0 and 1/2")
    records, states, seed_refs = _run_seeds(_theorem1_seed, ctx, list(seeds), workers,
                                            progress)
    references = [ReferenceState(side, e, j) for e, side, j in merged] + seed_refs
    return ExperimentReport("theorem1", params, window, list(seeds), records, states,
                            references, [BULK_REFERENCE_NOTE, SIGMA_B_NOTE], thresholds)


def theorem2_run(params, basis, seeds, thresholds=None, window=None, tol=1e-10,
                 workers=1, quad_order=16, progress=False):
    """
    Two-set decomposition of the gap-window spectrum: every eigenvalue of
    H_omega is matched against the random edge Hamiltonians of the two
    sqrt(L) strips, which see the same couplings restricted to the strips.

    Returns
    -------
    ExperimentReport
    """
    params.check_theorem2()
    if window is None:
        window = EnergyWindow.gap(params)
    if thresholds is None:
        thresholds = ClassificationThresholds.default(params.B)
    ctx = _RunContext(params, basis, window, thresholds, tol, quad_order)
    records, states, refs = _run_seeds(_theorem2_seed, ctx, list(seeds), workers, progress)
    notes = [GAP_WINDOW_NOTE] if window.label is WindowLabel.GAP else []
    return ExperimentReport("theorem2", params, window, list(seeds), records, states, refs,
                            notes, thresholds)


# ----------------------------------------------------------------------------
# flux scan

@dataclass(frozen=True)
class FluxScanRow:
    flux: float
    n_left: int
    n_right: int
    min_spacing: float
    scaled_spacing: float


@dataclass(frozen=True)
class FluxScanTable:
    L: float
    window: EnergyWindow
    rows: tuple

    @property
    def best(self):
        finite = [r for r in self.rows if math.isfinite(r.scaled_spacing)]
        if not finite:
            return None
        return max(finite, key=lambda r: r.scaled_spacing)

    @property
    def best_flux(self):
        best = self.best
        return best.flux if best is not None else float("nan")


def hypothesis1_flux_scan(params, basis, flux_grid=DEFAULT_FLUX_GRID, window=None):
    """
    L times the minimal distance between the left and right pure edge
    window spectra, for every flux of `flux_grid`.

    Parameters
    ----------
    params : ModelParams
        symmetric walls are expected.
    basis : Basis
        reference grid.
    flux_grid : sequence of float
        fluxes in flux quanta.
    window : EnergyWindow, optional
        defaults to the band window.

    Returns
    -------
    FluxScanTable
    """
    if not params.symmetric_walls():
        _logger.warning("flux scan with asymmetric walls")
    if window is None:
        window = EnergyWindow.band(params)
    rows = []
    for flux in flux_grid:
        p = params.replace(flux=float(flux))
        refs = pure_edge_references(p, basis, window)
        left = [s.energy for s in refs[WallSide.LEFT]]
        right = [s.energy for s in refs[WallSide.RIGHT]]
        spacing = min_cross_distance(left, right)
        rows.append(FluxScanRow(float(flux), len(left), len(right), spacing,
                                params.L * spacing))
        _logger.debug("flux %.4g: L*dist = %.6g", flux, params.L * spacing)
    table = FluxScanTable(params.L, window, tuple(rows))
    best = table.best
    if best is None or best.scaled_spacing <= 1e-8:
        _logger.warning("no flux in the scan separates the left and right edge spectra "
                        "(L=%s)", params.L)
    return table


def resolve_flux(params, basis, flux_grid=DEFAULT_FLUX_GRID, window=None):
    """ Flux of the scan grid maximising the scaled left/right spacing. """
    table = hypothesis1_flux_scan(params, basis, flux_grid, window)
    flux = table.best_flux
    if not math.isfinite(flux):
        raise ValueError("Flux scan found no pure edge states in the window!")
    _logger.info("resolved flux %.4g (L*dist=%.6g)", flux, table.best.scaled_spacing)
    return flux


# ----------------------------------------------------------------------------
# decay fits

DECAY_MODELS = {
    "log_sq": lambda L: np.log(L) ** 2,
    "sqrt": lambda L: np.sqrt(L),
}


@dataclass(frozen=True)
class DecayFit:
    """
    Least-squares slope of log(shift) against (log L)^2 or sqrt(L).
    """
    model: str
    slope: float
    intercept: float
    residual: float
    n_points: int
    censored: tuple = ()
    degenerate: bool = False

    @property
    def decaying(self):
        return not self.degenerate and self.slope < 0

    def to_dict(self):
        return {"model": self.model, "slope": self.slope, "intercept": self.intercept,
                "residual": self.residual, "n_points": self.n_points,
                "censored": list(self.censored), "degenerate": self.degenerate}


def fit_decay(L_values, shifts, model="log_sq", tol=1e-10):
    """
    Fits log(shift) = slope * g(L) + intercept.

    Parameters
    ----------
    L_values : sequence of float
        circumferences.
    shifts : sequence of float
        per-L shift statistic (median).
    model : str
        "log_sq" for g = (log L)^2, "sqrt" for g = sqrt(L).
    tol : float
        solver tolerance; shifts below 10 tol are censored.

    Returns
    -------
    DecayFit
    """
    if model not in DECAY_MODELS:
        raise ValueError("Unknown decay model {}; expected one of {}!".format(
            model, sorted(DECAY_MODELS)))
    L_values = np.asarray(L_values, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    if L_values.shape != shifts.shape:
        raise ValueError("Got {} L values but {} shifts!".format(L_values.size, shifts.size))
    keep = np.isfinite(shifts) & (shifts >= 10. * tol)
    censored = tuple(float(L) for L in L_values[~keep])
    if censored:
        _logger.warning("censored shifts at L=%s (below %.1e or missing)", censored,
                        10. * tol)
    L_kept = L_values[keep]
    if np.unique(L_kept).size < 3:
        _logger.warning("decay fit is degenerate: %d usable L values", np.unique(L_kept).size)
        return DecayFit(model, float("nan"), float("nan"), float("nan"), int(L_kept.size),
                        censored, True)
    g = DECAY_MODELS[model](L_kept)
    y = np.log(shifts[keep])
    res = linregress(g, y)
    residual = float(np.sqrt(np.mean((y - (res.slope * g + res.intercept)) ** 2)))
    return DecayFit(model, float(res.slope), float(res.intercept), residual,
                    int(L_kept.size), censored, False)


@dataclass
class SweepResult:
    experiment: str
    reports: dict
    fit: DecayFit = None

    def medians(self):
        return {L: r.median_shift() for L, r in sorted(self.reports.items())}


def sweep(experiment, params, L_list=DEFAULT_L_LIST, seeds=range(DEFAULT_SEEDS),
          basis_options=None, flux_grid=None, window=None, on_report=None, **run_options):
    """
    Runs one experiment per circumference and fits the decay of the median
    shift: (log L)^2 for theorem1, sqrt(L) for theorem2.

    Parameters
    ----------
    experiment : str
        "theorem1" or "theorem2".
    params : ModelParams
        template; L is replaced per run.
    L_list : sequence of float
        circumferences.
    seeds : sequence of int
        seeds of every cell.
    basis_options : dict, optional
        keyword arguments of Basis.for_params.
    flux_grid : sequence of float, optional
        if given, the flux is resolved per L by a flux scan over the
        experiment window; without edge states there the flux of `params`
        is kept.
    window : EnergyWindow, optional
        defaults to the gap window for theorem2 and the band window for
        theorem1.
    on_report : callable, optional
        called as on_report(report, basis) once per circumference.
    run_options
        passed on to the experiment.

    Returns
    -------
    SweepResult
        `fit` is None for a single circumference.
    """
    runners = {"theorem1": (theorem1_run, "log_sq"), "theorem2": (theorem2_run, "sqrt")}
    if experiment not in runners:
        raise ValueError("Sweeps support theorem1 and theorem2, not {}!".format(experiment))
    run, model = runners[experiment]
    basis_options = basis_options or {}
    if window is None and experiment == "theorem2":
        window = EnergyWindow.gap(params)
    elif window is None:
        window = EnergyWindow.band(params)
    reports = {}
    for L in L_list:
        p = params.replace(L=float(L))
        if flux_grid is not None:
            try:
                p = p.replace(flux=resolve_flux(p, Basis.for_params(p, **basis_options),
                                                flux_grid, window))
            except ValueError as err:
                _logger.warning("%s Keeping flux %s at L=%s", err, p.flux, L)
        basis = Basis.for_params(p, **basis_options)
        _logger.info("%s at L=%s, flux %.4g", experiment, L, p.flux)
        report = run(p, basis, list(seeds), window=window, **run_options)
        reports[float(L)] = report
        if on_report is not None:
            on_report(report, basis)
    fit = None
    if len(reports) > 1:
        L_values = sorted(reports)
        tol = run_options.get("tol", 1e-10)
        fit = fit_decay(L_values, [reports[L].median_shift() for L in L_values], model, tol)
    return SweepResult(experiment, reports, fit)
