"""Finite-difference time integration of the nonlinear system on boxes
with no-flux boundaries.

Space: cell-centered second-order differences with mirror ghost cells, so
the discrete Laplacian annihilates constants and telescopes to zero cell
sum; together with Q P(a) = 0 this conserves the discrete masses exactly
up to roundoff.  Time: operator splitting.

* ``imex``: backward-Euler diffusion (one tridiagonal solve per species
  and axis), then forward-Euler reaction.  First order.
* ``strang``: half-step Crank-Nicolson diffusion, full-step Heun
  (second-order Runge-Kutta) pointwise reaction, half-step diffusion.
  Second order; on rectangles the half steps use Peaceman-Rachford
  alternating-direction sweeps.

Negative concentrations are an error, not something to clip: clipping
would silently destroy the conservation laws the scheme is built around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import DiagnosticsSeries, entropy_dissipation, relative_entropy, \
    weighted_norm
from .equilibrium import EquilibriumState, conserved_masses, \
    detailed_balance_equilibrium
from .geometry import Domain, Grid, Interval, Rectangle  # noqa: F401 (re-export)
from .network import ReactionNetwork, decompose

NEGATIVE_TOL = -1e-10

_SCHEMES = {"strang": "strang", "imex": "imex", "imex_euler": "imex"}


class NonPositivityError(RuntimeError):
    """A cell dropped below the roundoff tolerance for nonnegativity."""

    def __init__(self, species: str, cell: tuple[int, ...], t: float, value: float):
        super().__init__(
            f"species {species} went negative at cell {cell}, t = {t:g} "
            f"(value {value:.3e})")
        self.species = species
        self.cell = cell
        self.t = t
        self.value = value


@dataclass(frozen=True)
class State:
    """Cell-averaged concentrations of every species at one time."""

    t: float
    fields: np.ndarray  # (I, *grid.shape)
    grid: Grid

    def __post_init__(self):
        fields = np.asarray(self.fields, dtype=float)
        if fields.shape[1:] != self.grid.shape:
            raise ValueError(
                f"fields of shape {fields.shape} do not live on grid {self.grid.shape}")
        object.__setattr__(self, "fields", fields)

    @property
    def n_species(self) -> int:
        return self.fields.shape[0]

    def means(self) -> np.ndarray:
        axes = tuple(range(1, self.fields.ndim))
        return self.fields.mean(axis=axes)


@dataclass(frozen=True)
class SpeciesProfile:
    """Constant plus Neumann-compatible cosine bumps for one species."""

    base: float
    modes: tuple[tuple[tuple[int, ...], float], ...] = ()


@dataclass(frozen=True)
class InitialSpec:
    """Either per-species cosine profiles or verbatim cell values from CSV."""

    profiles: tuple[SpeciesProfile, ...] | None = None
    csv_path: str | None = None

    def __post_init__(self):
        if (self.profiles is None) == (self.csv_path is None):
            raise ValueError("give exactly one of profiles or csv_path")


def build_laplacian(grid: Grid) -> "NeumannLaplacian":
    return NeumannLaplacian(grid)


class NeumannLaplacian:
    """Second-order cell-centered Laplacian with mirror ghost cells."""

    def __init__(self, grid: Grid):
        self.grid = grid

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.grid.shape:
            raise ValueError(f"field shape {u.shape} does not match the grid")
        out = np.zeros_like(u)
        for axis, h in enumerate(self.grid.spacing):
            padded = np.concatenate([np.take(u, [0], axis=axis), u,
                                     np.take(u, [-1], axis=axis)], axis=axis)
            n = u.shape[axis]
            out += (np.take(padded, range(0, n), axis=axis)
                    - 2.0 * u
                    + np.take(padded, range(2, n + 2), axis=axis)) / (h * h)
        return out


def _shifted_banded(n: int, h: float, c: float) -> np.ndarray:
    """Banded form of I + c * (-Lap_1d) for solve_banded ((1, 1) bands)."""
    r = c / (h * h)
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[1, 0] = 1.0 + r  # mirror ghost cells: boundary rows lose one neighbour
    ab[1, -1] = 1.0 + r
    ab[2, :-1] = -r
    return ab


def _lap1d(u: np.ndarray, h: float, axis: int) -> np.ndarray:
    padded = np.concatenate([np.take(u, [0], axis=axis), u,
                             np.take(u, [-1], axis=axis)], axis=axis)
    n = u.shape[axis]
    return (np.take(padded, range(0, n), axis=axis) - 2.0 * u
            + np.take(padded, range(2, n + 2), axis=axis)) / (h * h)


class _DiffusionStep:
    """Precomputed implicit solves for one species over one substep.

    1D: backward Euler (I - c Lap) u+ = u, or Crank-Nicolson
    (I - c/2 Lap) u+ = (I + c/2 Lap) u.  2D backward Euler splits the two
    axes sequentially; 2D Crank-Nicolson uses a Peaceman-Rachford sweep
    pair, which is second order over the substep.
    """

    def __init__(self, grid: Grid, d: float, dt_sub: float, crank_nicolson: bool):
        self.grid = grid
        self.cn = crank_nicolson
        h = grid.spacing
        c = d * dt_sub
        self.half = 0.5 * c
        self.spacing = h
        if grid.ndim == 1:
            self.bands = [_shifted_banded(grid.shape[0], h[0],
                                          self.half if crank_nicolson else c)]
        else:
            # Peaceman-Rachford carries c/2 per alternating sweep; the
            # first-order split solves the full c on each axis in turn.
            per_axis = 0.5 * c if crank_nicolson else c
            self.axis_coeff = per_axis
            self.bands = [_shifted_banded(grid.shape[k], h[k], per_axis)
                          for k in range(2)]

    def apply(self, u: np.ndarray) -> np.ndarray:
        if self.grid.ndim == 1:
            if self.cn:
                rhs = u + self.half * _lap1d(u, self.spacing[0], 0)
            else:
                rhs = u
            return solve_banded((1, 1), self.bands[0], rhs, check_finite=False)
        if self.cn:
            # Peaceman-Rachford: implicit x with explicit y, then swap.
            c = self.axis_coeff
            rhs = u + c * _lap1d(u, self.spacing[1], 1)
            star = solve_banded((1, 1), self.bands[0], rhs, check_finite=False)
            rhs = star + c * _lap1d(star, self.spacing[0], 0)
            return solve_banded((1, 1), self.bands[1], rhs.T, check_finite=False).T
        star = solve_banded((1, 1), self.bands[0], u, check_finite=False)
        return solve_banded((1, 1), self.bands[1], star.T, check_finite=False).T


class _ReactionTerm:
    """Vectorized mass-action production over all cells."""

    def __init__(self, net: ReactionNetwork):
        self.alpha = net.alpha_matrix()
        self.beta = net.beta_matrix()
        self.kf = net.kf_array()
        self.kb = net.kb_array()
        self.wt = (self.beta - self.alpha).T.astype(float)  # I x R

    def production(self, fields: np.ndarray) -> np.ndarray:
        flat = fields.reshape(fields.shape[0], -1)
        mono_a = np.prod(flat[np.newaxis, :, :] ** self.alpha[:, :, np.newaxis], axis=1)
        mono_b = np.prod(flat[np.newaxis, :, :] ** self.beta[:, :, np.newaxis], axis=1)
        K = self.kf[:, np.newaxis] * mono_a - self.kb[:, np.newaxis] * mono_b
        return (self.wt @ K).reshape(fields.shape)


class Stepper:
    """One-step integrator bound to a network, grid, dt and scheme."""

    def __init__(self, net: ReactionNetwork, grid: Grid, dt: float, scheme: str):
        key = _SCHEMES.get(str(scheme).lower())
        if key is None:
            raise ValueError(f"unknown scheme {scheme!r} (use 'strang' or 'imex')")
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.net = net
        self.grid = grid
        self.dt = dt
        self.scheme = key
        self.reaction = _ReactionTerm(net)
        if key == "strang":
            self.diffusion = [_DiffusionStep(grid, d, 0.5 * dt, crank_nicolson=True)
                              for d in net.diffusion]
        else:
            self.diffusion = [_DiffusionStep(grid, d, dt, crank_nicolson=False)
                              for d in net.diffusion]

    def _diffuse(self, fields: np.ndarray) -> np.ndarray:
        return np.stack([step.apply(fields[i])
                         for i, step in enumerate(self.diffusion)])

    def _check(self, fields: np.ndarray, t: float) -> None:
        worst = int(np.argmin(fields))
        if fields.flat[worst] < NEGATIVE_TOL:
            i, *cell = np.unravel_index(worst, fields.shape)
            raise NonPositivityError(self.net.species[i], tuple(cell), t,
                                     float(fields.flat[worst]))

    def advance(self, state: State) -> State:
        fields = state.fields
        self._check(fields, state.t)  # the step contract needs admissible input
        dt = self.dt
        if self.scheme == "imex":
            fields = self._diffuse(fields)
            fields = fields + dt * self.reaction.production(fields)
        else:
            fields = self._diffuse(fields)
            # Heun: explicit trapezoid, second order, matches the scheme order
            k1 = self.reaction.production(fields)
            k2 = self.reaction.production(fields + dt * k1)
            fields = fields + 0.5 * dt * (k1 + k2)
            fields = self._diffuse(fields)
        t_new = state.t + dt
        self._check(fields, t_new)
        return State(t=t_new, fields=fields, grid=state.grid)


def step(state: State, net: ReactionNetwork, dt: float, scheme: str = "strang") -> State:
    """Advance one time step (builds a fresh Stepper; loops should reuse one)."""
    return Stepper(net, state.grid, dt, scheme).advance(state)


def build_initial(spec: InitialSpec, grid: Grid,
                  species_names=None) -> State:
    """Evaluate an initial condition on the grid at t = 0.

    Cosine profiles are evaluated at cell centers: base +
    sum eps cos(k pi x / Lx) (times cos(l pi y / Ly) in 2D).  CSV input is
    loaded verbatim in snapshot format.  The result must be nonnegative.
    """
    if spec.csv_path is not None:
        fields = _read_snapshot_csv(spec.csv_path, grid, species_names)
    else:
        centers = grid.centers()
        extents = grid.domain.extents
        fields = np.zeros((len(spec.profiles),) + grid.shape)
        for i, profile in enumerate(spec.profiles):
            field = np.full(grid.shape, float(profile.base))
            for mode, amplitude in profile.modes:
                mode = (mode,) if isinstance(mode, int) else tuple(mode)
                if len(mode) != grid.ndim:
                    raise ValueError(
                        f"mode {mode} does not match a {grid.ndim}-d grid")
                bump = float(amplitude)
                for axis, k in enumerate(mode):
                    bump = bump * np.cos(int(k) * math.pi
                                         * centers[axis] / extents[axis])
                field = field + bump
            fields[i] = field
        if species_names is not None and len(species_names) != len(spec.profiles):
            raise ValueError("one profile per species required")
    if fields.min() < 0:
        i, *cell = np.unravel_index(int(np.argmin(fields)), fields.shape)
        raise ValueError(
            f"negative initial value for species index {i} at cell {tuple(cell)}")
    return State(t=0.0, fields=fields, grid=grid)


def _read_snapshot_csv(path, grid: Grid, species_names) -> np.ndarray:
    import csv as _csv

    with open(path, newline="") as fh:
        rows = [r for r in _csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"empty snapshot file {path}")
    header, data = rows[0], rows[1:]
    n_coord = grid.ndim
    columns = header[n_coord:]
    if species_names is not None:
        try:
            order = [columns.index(name) for name in species_names]
        except ValueError as exc:
            raise ValueError(f"snapshot {path} is missing a species column: {exc}")
    else:
        order = list(range(len(columns)))
    if len(data) != grid.n_cells:
        raise ValueError(
            f"snapshot {path} has {len(data)} cells, grid needs {grid.n_cells}")
    values = np.array([[float(v) for v in row] for row in data])
    if values.shape[1] != len(header):
        raise ValueError(f"ragged snapshot rows in {path}")
    fields = np.empty((len(order),) + grid.shape)
    for i, col in enumerate(order):
        fields[i] = values[:, n_coord + col].reshape(grid.shape)
    return fields


def write_snapshot_csv(path, state: State, species_names,
                       comment: str | None = None) -> None:
    """Snapshot CSV: header x[,y],A1,...,AI, one row per cell."""
    import csv as _csv

    grid = state.grid
    coords = grid.centers()
    with open(path, "w", newline="") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        writer = _csv.writer(fh)
        writer.writerow(list("xy"[:grid.ndim]) + list(species_names))
        flat_coords = [c.ravel() for c in coords]
        flat_fields = state.fields.reshape(state.n_species, -1)
        for idx in range(grid.n_cells):
            row = [f"{c[idx]:.17g}" for c in flat_coords]
            row += [f"{flat_fields[i, idx]:.17g}" for i in range(state.n_species)]
            writer.writerow(row)


def default_dt(net: ReactionNetwork, a_inf, grid: Grid) -> float:
    """Heuristic step size: min(0.1 / |L|, 0.25 h^2 / max d).

    |L| is a Frobenius bound on the symmetrized reaction linearisation at
    the equilibrium; the second term keeps the splitting error of the
    (unconditionally stable) implicit diffusion small.  Override freely.
    """
    from .linearised import linearised_matrix

    lin = linearised_matrix(net, a_inf)
    sqrt_w = np.sqrt(lin.weights)
    S = sqrt_w[:, np.newaxis] * lin.matrix / sqrt_w[np.newaxis, :]
    reaction_scale = max(float(np.linalg.norm(S)), 1e-12)
    h_min = min(grid.spacing)
    return min(0.1 / reaction_scale, 0.25 * h_min ** 2 / max(net.diffusion))


@dataclass(frozen=True)
class SimulationResult:
    series: DiagnosticsSeries
    snapshots: tuple[State, ...]
    equilibrium: EquilibriumState


def simulate(net: ReactionNetwork, grid: Grid, initial: InitialSpec | State,
             dt: float, t_end: float, output_every: int = 1,
             scheme: str = "strang",
             snapshot_every: int | None = None) -> SimulationResult:
    """Advance to t_end, recording diagnostics every ``output_every`` steps.

    The reference equilibrium is computed from the conserved masses of the
    initial data.  Deterministic: identical inputs give identical outputs.
    Dissipation columns are NaN at states with non-positive cells (where
    the dissipation integrals genuinely diverge); all other columns are
    finite throughout.
    """
    if isinstance(initial, State):
        if initial.grid != grid:
            raise ValueError("initial state lives on a different grid")
        state = initial
    else:
        state = build_initial(initial, grid, species_names=net.species)
    if state.n_species != net.n_species:
        raise ValueError("initial data does not match the species count")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if output_every < 1:
        raise ValueError("output_every must be >= 1")

    stoich = decompose(net)
    masses = conserved_masses(stoich, state.means(), volume=grid.domain.measure)
    eq = detailed_balance_equilibrium(net, stoich, masses)
    a_inf = eq.vector
    q_matrix = stoich.Q.astype(float)
    volume = grid.domain.measure

    stepper = Stepper(net, grid, dt, scheme)
    n_steps = max(1, int(round(t_end / dt)))

    rows = {name: [] for name in
            ("t", "masses", "entropy", "l2", "l4", "linf", "fisher", "reaction")}
    snapshots: list[State] = []

    def record(st: State) -> None:
        rows["t"].append(st.t)
        rows["masses"].append(q_matrix @ st.means() * volume)
        h = st.fields - a_inf.reshape((-1,) + (1,) * grid.ndim)
        rows["entropy"].append(relative_entropy(st.fields, a_inf, grid))
        rows["l2"].append(weighted_norm(h, a_inf, 2, grid))
        rows["l4"].append(weighted_norm(h, a_inf, 4, grid))
        rows["linf"].append(weighted_norm(h, a_inf, math.inf, grid))
        if st.fields.min() > 0:
            fisher, reaction = entropy_dissipation(st.fields, net, a_inf, grid)
        else:
            fisher, reaction = math.nan, math.nan
        rows["fisher"].append(fisher)
        rows["reaction"].append(reaction)

    record(state)
    snapshots.append(state)
    outputs = 0
    for k in range(1, n_steps + 1):
        state = stepper.advance(state)
        # keep recorded times exact multiples of dt
        state = State(t=k * dt, fields=state.fields, grid=grid)
        if k % output_every == 0 or k == n_steps:
            record(state)
            outputs += 1
            if snapshot_every and outputs % snapshot_every == 0 and k != n_steps:
                snapshots.append(state)
    if state is not snapshots[-1]:
        snapshots.append(state)

    series = DiagnosticsSeries(
        t=np.array(rows["t"]), masses=np.array(rows["masses"]),
        entropy=np.array(rows["entropy"]), l2=np.array(rows["l2"]),
        l4=np.array(rows["l4"]), linf=np.array(rows["linf"]),
        fisher=np.array(rows["fisher"]), reaction=np.array(rows["reaction"]))
    return SimulationResult(series=series, snapshots=tuple(snapshots),
                            equilibrium=eq)
