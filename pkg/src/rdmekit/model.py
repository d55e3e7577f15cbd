"""Core model types: species, reactions, mesh graph, and state operations.

The state of a system with ``N_v`` voxels and ``N_s`` species is an
``(N_v, N_s)`` integer matrix; entry ``x[i, s]`` is the copy number of
species ``s`` in voxel ``i``.  Diffusion is a weighted directed graph over
voxels with per-species jump rates; reactions change a single row of the
state matrix.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ModelError, NegativePopulationError

__all__ = [
    "SpeciesSet",
    "Reaction",
    "MeshGraph",
    "ModelSystem",
    "build_cartesian_mesh",
    "apply_reaction",
    "apply_diffusion_jump",
]


@dataclass(frozen=True)
class SpeciesSet:
    """Ordered species names and their diffusion constants (length^2/time)."""

    names: tuple[str, ...]
    diffusion_constants: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise ModelError("at least one species is required")
        if len(set(self.names)) != len(self.names):
            raise ModelError("species names must be unique")
        if len(self.diffusion_constants) != len(self.names):
            raise ModelError("one diffusion constant per species is required")
        if any(g < 0 or not np.isfinite(g) for g in self.diffusion_constants):
            raise ModelError("diffusion constants must be finite and >= 0")

    @property
    def count(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ModelError(f"unknown species {name!r}") from None


@dataclass(frozen=True)
class Reaction:
    """A single reaction channel.

    ``stoichiometry`` is the length-``N_s`` change vector applied to the row
    of the voxel where the reaction fires.  ``reactants`` lists
    ``(species index, order)`` pairs; total order 0, 1 or 2 selects the
    mass-action form, while ``kind='custom'`` defers to ``propensity``,
    a callable ``f(row) -> rate`` evaluated on one state row.  ``voxels``
    optionally restricts the channel to a subset of voxels (``None`` means
    every voxel).
    """

    stoichiometry: tuple[int, ...]
    reactants: tuple[tuple[int, int], ...]
    rate_constant: float
    kind: str = "mass-action"
    propensity: object = None
    voxels: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self):
        if self.rate_constant < 0 or not np.isfinite(self.rate_constant):
            raise ModelError(f"reaction {self.name!r}: rate constant must be finite and >= 0")
        if self.kind not in ("mass-action", "custom"):
            raise ModelError(f"reaction {self.name!r}: unknown kind {self.kind!r}")
        orders = {}
        for s, order in self.reactants:
            if order < 1:
                raise ModelError(f"reaction {self.name!r}: reactant order must be >= 1")
            orders[s] = orders.get(s, 0) + order
        if self.kind == "mass-action":
            total = sum(orders.values())
            if total > 2:
                raise ModelError(
                    f"reaction {self.name!r}: mass-action order {total} > 2 is unsupported"
                )
            if total == 2 and len(orders) == 1:
                (order,) = orders.values()
                if order != 2:
                    raise ModelError(f"reaction {self.name!r}: malformed bimolecular reactants")
        elif self.propensity is None:
            raise ModelError(f"reaction {self.name!r}: custom kind requires a propensity callable")
        # Firing from any state with sufficient reactants must not go negative.
        for s, change in enumerate(self.stoichiometry):
            if change < 0 and orders.get(s, 0) < -change:
                raise ModelError(
                    f"reaction {self.name!r}: species {s} decreases by {-change} but is not "
                    "a reactant of that order"
                )

    @property
    def order(self) -> int:
        return sum(order for _, order in self.reactants)

    @property
    def change(self) -> np.ndarray:
        return np.asarray(self.stoichiometry, dtype=np.int64)

    def dependent_species(self, n_species: int) -> tuple[int, ...]:
        """Species whose copy number can change this channel's propensity."""
        if self.kind == "custom":
            return tuple(range(n_species))
        return tuple(sorted({s for s, _ in self.reactants}))


class MeshGraph:
    """Voxel volumes plus directed, per-species diffusion edges.

    Edges are keyed ``(i, j, s)`` with jump rate ``d >= 0`` (units 1/time);
    a molecule of species ``s`` in voxel ``i`` hops to ``j`` with propensity
    ``d * x[i, s]``.  The graph is immutable after construction and caches
    adjacency indices for O(degree) lookups.
    """

    def __init__(self, volumes, n_species: int, edges):
        volumes = np.asarray(volumes, dtype=np.float64)
        if volumes.ndim != 1 or volumes.size < 1:
            raise ModelError("volumes must be a non-empty 1-d sequence")
        if np.any(volumes <= 0) or not np.all(np.isfinite(volumes)):
            raise ModelError("voxel volumes must be finite and > 0")
        if n_species < 1:
            raise ModelError("n_species must be >= 1")
        self.volumes = volumes
        self.volumes.setflags(write=False)
        self.n_voxels = int(volumes.size)
        self.n_species = int(n_species)

        rates: dict[tuple[int, int, int], float] = {}
        for i, j, s, d in edges:
            i, j, s, d = int(i), int(j), int(s), float(d)
            if i == j:
                raise ModelError(f"self-edge ({i}, {j}) is not allowed")
            if not (0 <= i < self.n_voxels and 0 <= j < self.n_voxels):
                raise ModelError(f"edge ({i}, {j}) references an invalid voxel")
            if not 0 <= s < n_species:
                raise ModelError(f"edge ({i}, {j}) references invalid species index {s}")
            if d < 0 or not np.isfinite(d):
                raise ModelError(f"edge ({i}, {j}, {s}) has invalid rate {d}")
            if (i, j, s) in rates:
                raise ModelError(f"duplicate edge key ({i}, {j}, {s})")
            if d > 0:
                rates[(i, j, s)] = d
        self._rates = rates

        nv, ns = self.n_voxels, n_species
        self.dout = np.zeros((nv, ns))
        out_lists: list[list[list]] = [[[] for _ in range(ns)] for _ in range(nv)]
        in_lists: list[list[list]] = [[[] for _ in range(ns)] for _ in range(nv)]
        for (i, j, s), d in sorted(rates.items()):
            self.dout[i, s] += d
            out_lists[i][s].append((j, d))
            in_lists[j][s].append((i, d))
        self.dout.setflags(write=False)

        def freeze(lists):
            frozen = []
            for per_voxel in lists:
                row = []
                for pairs in per_voxel:
                    idx = np.array([p[0] for p in pairs], dtype=np.int64)
                    val = np.array([p[1] for p in pairs], dtype=np.float64)
                    row.append((idx, val))
                frozen.append(row)
            return frozen

        self._out = freeze(out_lists)
        self._in = freeze(in_lists)
        self.n_connections = len({frozenset((i, j)) for (i, j, _s) in rates})
        self._inflow_cache: dict[int, object] = {}
        self._generator_cache: dict[int, object] = {}

    # -- lookups -------------------------------------------------------

    def rate(self, i: int, j: int, s: int) -> float:
        return self._rates.get((i, j, s), 0.0)

    def out_edges(self, i: int, s: int):
        """(targets, rates) arrays for molecules of ``s`` leaving voxel ``i``."""
        return self._out[i][s]

    def in_edges(self, j: int, s: int):
        """(sources, rates) arrays for molecules of ``s`` arriving at voxel ``j``."""
        return self._in[j][s]

    def iter_edges(self):
        """Yield ``(i, j, s, d)`` for every directed edge with ``d > 0``."""
        for (i, j, s), d in sorted(self._rates.items()):
            yield i, j, s, d

    @property
    def n_edges_directed(self) -> int:
        return len(self._rates)

    def inflow_matrix(self, s: int):
        """Sparse ``W`` with ``W[i, j] = d_{j -> i}`` for species ``s``."""
        if s not in self._inflow_cache:
            from scipy.sparse import csr_matrix

            rows, cols, vals = [], [], []
            for (i, j, sp), d in self._rates.items():
                if sp == s:
                    rows.append(j)
                    cols.append(i)
                    vals.append(d)
            self._inflow_cache[s] = csr_matrix(
                (vals, (cols, rows)), shape=(self.n_voxels, self.n_voxels)
            )
        return self._inflow_cache[s]

    def species_generator(self, s: int):
        """Single-molecule generator for species ``s``.

        Returns the sparse ``(N_v, N_v)`` matrix with off-diagonal entries
        ``d_{i -> j}`` at ``[i, j]`` and diagonal ``-sum_j d_{i -> j}``; the
        occupancy distribution of one molecule evolves as
        ``p'(t) = G^T p(t)``.
        """
        if s not in self._generator_cache:
            from scipy.sparse import csr_matrix

            rows, cols, vals = [], [], []
            for (i, j, sp), d in self._rates.items():
                if sp == s:
                    rows.append(i)
                    cols.append(j)
                    vals.append(d)
                    rows.append(i)
                    cols.append(i)
                    vals.append(-d)
            self._generator_cache[s] = csr_matrix(
                (vals, (rows, cols)), shape=(self.n_voxels, self.n_voxels)
            )
        return self._generator_cache[s]

    def hop_neighborhood(self, i: int, s: int, radius: int) -> list[int]:
        """Voxels reachable from ``i`` in <= ``radius`` hops along ``s``-edges."""
        seen = {i}
        frontier = [i]
        for _ in range(radius):
            nxt = []
            for v in frontier:
                targets, _ = self._out[v][s]
                for j in targets:
                    j = int(j)
                    if j not in seen:
                        seen.add(j)
                        nxt.append(j)
            if not nxt:
                break
            frontier = nxt
        return sorted(seen)

    def content_hash(self) -> str:
        """Stable digest of volumes and edges, used to key cached tables."""
        h = hashlib.sha256()
        h.update(np.int64(self.n_voxels).tobytes())
        h.update(np.int64(self.n_species).tobytes())
        h.update(np.ascontiguousarray(self.volumes).tobytes())
        for (i, j, s), d in sorted(self._rates.items()):
            h.update(np.array([i, j, s], dtype=np.int64).tobytes())
            h.update(np.float64(d).tobytes())
        return h.hexdigest()


def build_cartesian_mesh(dims, h: float, species: SpeciesSet) -> MeshGraph:
    """Uniform Cartesian mesh with reflecting (zero-flux) boundaries.

    Every voxel has volume ``h**len(dims)`` and each axis-adjacent pair
    ``(i, j)`` carries the jump rate ``gamma_s / h**2`` for every mobile
    species.  Immobile species (``gamma == 0``) get no edges.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (1, 2, 3) or any(d < 1 for d in dims):
        raise ModelError("dims must be 1-3 positive voxel counts")
    if not (h > 0 and np.isfinite(h)):
        raise ModelError("voxel side length h must be finite and > 0")

    n_voxels = int(np.prod(dims))
    volumes = np.full(n_voxels, float(h) ** len(dims))
    coords = np.stack(np.unravel_index(np.arange(n_voxels), dims), axis=1)

    edges = []
    mobile = [
        (s, gamma / h**2)
        for s, gamma in enumerate(species.diffusion_constants)
        if gamma > 0
    ]
    for i in range(n_voxels):
        for axis in range(len(dims)):
            if coords[i, axis] + 1 < dims[axis]:
                step = coords[i].copy()
                step[axis] += 1
                j = int(np.ravel_multi_index(step, dims))
                for s, d in mobile:
                    edges.append((i, j, s, d))
                    edges.append((j, i, s, d))
    return MeshGraph(volumes, species.count, edges)


def new_state(n_voxels: int, n_species: int, fill=0) -> np.ndarray:
    return np.full((n_voxels, n_species), fill, dtype=np.int64)


def validate_state(x: np.ndarray, mesh: MeshGraph) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (mesh.n_voxels, mesh.n_species):
        raise ModelError(
            f"state shape {x.shape} does not match mesh "
            f"({mesh.n_voxels} voxels x {mesh.n_species} species)"
        )
    if np.any(x < 0):
        raise ModelError("initial copy numbers must be >= 0")
    return x


def apply_reaction(x: np.ndarray, voxel: int, reaction: Reaction) -> np.ndarray:
    """Return a copy of ``x`` with ``reaction``'s stoichiometry applied to one row."""
    row = x[voxel] + reaction.change
    if np.any(row < 0):
        raise NegativePopulationError(
            f"reaction {reaction.name!r} in voxel {voxel} would produce {row.tolist()}"
        )
    out = x.copy()
    out[voxel] = row
    return out


def apply_diffusion_jump(x: np.ndarray, edge) -> np.ndarray:
    """Return a copy of ``x`` after one molecule hops along ``edge = (i, j, s)``."""
    i, j, s = edge
    if x[i, s] < 1:
        raise NegativePopulationError(
            f"diffusion jump ({i} -> {j}, species {s}) from an empty voxel"
        )
    out = x.copy()
    out[i, s] -= 1
    out[j, s] += 1
    return out


@dataclass
class ModelSystem:
    """A complete simulation problem: network, mesh, initial state, horizon."""

    species: SpeciesSet
    reactions: tuple[Reaction, ...]
    mesh: MeshGraph
    initial_state: np.ndarray
    end_time: float
    output_interval: float
    name: str = "model"
    controller: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.mesh.n_species != self.species.count:
            raise ModelError("mesh species dimension does not match the species set")
        ns = self.species.count
        for r in self.reactions:
            if len(r.stoichiometry) != ns:
                raise ModelError(f"reaction {r.name!r} stoichiometry length != {ns}")
            for s, _ in r.reactants:
                if not 0 <= s < ns:
                    raise ModelError(f"reaction {r.name!r} references species index {s}")
            if r.voxels is not None:
                for v in r.voxels:
                    if not 0 <= v < self.mesh.n_voxels:
                        raise ModelError(f"reaction {r.name!r} references voxel {v}")
        self.initial_state = validate_state(self.initial_state, self.mesh)
        if not (self.end_time > 0 and np.isfinite(self.end_time)):
            raise ModelError("end_time must be finite and > 0")
        if not (0 < self.output_interval <= self.end_time):
            raise ModelError("output_interval must lie in (0, end_time]")

    @property
    def n_voxels(self) -> int:
        return self.mesh.n_voxels

    @property
    def n_species(self) -> int:
        return self.species.count

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def stoichiometry_matrix(self) -> np.ndarray:
        """(N_r, N_s) matrix of change vectors."""
        if not self.reactions:
            return np.zeros((0, self.species.count), dtype=np.int64)
        return np.stack([r.change for r in self.reactions])
