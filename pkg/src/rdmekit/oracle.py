"""Brute-force ground truth on an explicitly truncated state space.

Enumerates every joint state up to per-(voxel, species) copy caps, builds
the reaction and diffusion generator matrices, and evaluates matrix
exponentials by uniformization.  Everything here is deterministic and
sampling-free; it exists to verify the samplers, the split stepper, and
the local-error formulas on small systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .exceptions import StateSpaceCeilingError
from .model import MeshGraph
from .propensity import PropensityModel

__all__ = [
    "TruncatedStateSpace",
    "build_generators",
    "expm_apply",
    "commutator_apply",
    "exact_local_error",
]

SIZE_CEILING = 2_000_000
DENSE_CEILING = 10_000


@dataclass
class TruncatedStateSpace:
    """Enumeration of all states with ``0 <= x[i, s] <= caps[i, s]``.

    States are indexed in C order over the flattened ``(voxel, species)``
    axes, i.e. ``index = ravel_multi_index(x.ravel(), caps.ravel() + 1)``.
    """

    caps: np.ndarray
    ceiling: int = SIZE_CEILING

    def __post_init__(self):
        self.caps = np.asarray(self.caps, dtype=np.int64)
        if self.caps.ndim != 2 or np.any(self.caps < 0):
            raise ValueError("caps must be a (N_v, N_s) array of nonnegative ints")
        self.n_voxels, self.n_species = self.caps.shape
        self._radix = tuple(int(c) + 1 for c in self.caps.ravel())
        size = 1
        for base in self._radix:
            size *= base
            if size > self.ceiling:
                raise StateSpaceCeilingError(
                    f"state space exceeds ceiling {self.ceiling}"
                )
        self.size = size

    @classmethod
    def from_cap(cls, n_voxels: int, n_species: int, cap, ceiling: int = SIZE_CEILING):
        caps = np.broadcast_to(np.asarray(cap, dtype=np.int64), (n_voxels, n_species))
        return cls(caps.copy(), ceiling)

    def index(self, x) -> int:
        x = np.asarray(x, dtype=np.int64)
        if np.any(x < 0) or np.any(x > self.caps):
            raise ValueError("state lies outside the truncated space")
        return int(np.ravel_multi_index(tuple(x.ravel()), self._radix))

    def state(self, idx: int) -> np.ndarray:
        coords = np.unravel_index(int(idx), self._radix)
        return np.array(coords, dtype=np.int64).reshape(self.n_voxels, self.n_species)

    def all_states(self) -> np.ndarray:
        """(size, N_v, N_s) array of every enumerated state."""
        coords = np.unravel_index(np.arange(self.size), self._radix)
        out = np.stack(coords, axis=1).astype(np.int64)
        return out.reshape(self.size, self.n_voxels, self.n_species)

    def delta(self, x) -> np.ndarray:
        """Point-mass distribution concentrated on state ``x``."""
        p = np.zeros(self.size)
        p[self.index(x)] = 1.0
        return p

    def marginal_values(self, voxel: int, species: int) -> np.ndarray:
        """Copy number of ``(voxel, species)`` for every enumerated state."""
        states = self.all_states()
        return states[:, voxel, species].astype(np.float64)

    def boundary_mass(self, p: np.ndarray) -> float:
        """Probability sitting on states with any entry at its cap."""
        states = self.all_states()
        at_cap = np.any(states == self.caps[None, :, :], axis=(1, 2))
        return float(p[at_cap].sum())


def _finalize(rows, cols, vals, size):
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    ).tocsr()
    if size <= DENSE_CEILING:
        return mat.toarray()
    return mat


def build_generators(prop: PropensityModel, mesh: MeshGraph, space: TruncatedStateSpace):
    """Dense (or sparse, when large) reaction and diffusion generators ``(M, D)``.

    Both act on probability column vectors, ``p'(t) = (M + D) p(t)``.
    Transitions that would leave the truncated space are dropped from the
    gain and the loss term alike, so every column sums to zero.
    """
    size = space.size
    states = space.all_states()
    idx = np.arange(size, dtype=np.int64)
    strides = np.empty(space.n_voxels * space.n_species, dtype=np.int64)
    strides[-1] = 1
    radix = np.array(space._radix, dtype=np.int64)
    for k in range(len(strides) - 2, -1, -1):
        strides[k] = strides[k + 1] * radix[k + 1]
    strides = strides.reshape(space.n_voxels, space.n_species)

    def accumulate(rows, cols, vals, rate, shift, valid):
        live = valid & (rate > 0)
        if not np.any(live):
            return
        src = idx[live]
        rows.append(src + shift)
        cols.append(src)
        vals.append(rate[live])
        rows.append(src)
        cols.append(src)
        vals.append(-rate[live])

    def fresh():
        return [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)], [np.zeros(0)]

    m_rows, m_cols, m_vals = fresh()
    for i in range(space.n_voxels):
        rows_i = states[:, i, :]
        for r_idx, reaction in enumerate(prop.reactions):
            rate = prop.vector_propensity(i, r_idx, rows_i)
            shift = 0
            valid = np.ones(size, dtype=bool)
            for s, change in enumerate(reaction.stoichiometry):
                if change == 0:
                    continue
                shift += change * strides[i, s]
                target = states[:, i, s] + change
                valid &= (target >= 0) & (target <= space.caps[i, s])
            accumulate(m_rows, m_cols, m_vals, rate, shift, valid)
    M = _finalize(m_rows, m_cols, m_vals, size)

    d_rows, d_cols, d_vals = fresh()
    for i, j, s, d in mesh.iter_edges():
        rate = d * states[:, i, s].astype(np.float64)
        shift = strides[j, s] - strides[i, s]
        valid = (states[:, i, s] >= 1) & (states[:, j, s] + 1 <= space.caps[j, s])
        accumulate(d_rows, d_cols, d_vals, rate, shift, valid)
    D = _finalize(d_rows, d_cols, d_vals, size)
    return M, D


def _max_exit_rate(A) -> float:
    diag = A.diagonal() if sparse.issparse(A) else np.diag(A)
    return float(np.max(-diag)) if diag.size else 0.0


def expm_apply(A, t: float, v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Evaluate ``exp(t A) v`` for a generator ``A`` by uniformization.

    The Poisson series is truncated once its remaining mass is below
    ``tol``; long horizons are split into substeps so the Poisson rate per
    substep stays moderate.  Nonnegativity and the sum of ``v`` are
    preserved up to roundoff.
    """
    v = np.asarray(v, dtype=np.float64)
    if t < 0:
        raise ValueError("t must be >= 0")
    lam = _max_exit_rate(A)
    if t == 0.0 or lam == 0.0:
        return v.copy()

    n_sub = max(1, int(np.ceil(lam * t / 50.0)))
    tau = t / n_sub
    a = lam * tau
    sub_tol = tol / n_sub

    out = v.copy()
    for _ in range(n_sub):
        term = out
        pmf = np.exp(-a)
        acc = pmf * term
        mass = pmf
        k = 0
        while mass < 1.0 - sub_tol:
            k += 1
            term = term + (A @ term) / lam
            pmf *= a / k
            acc = acc + pmf * term
            mass += pmf
            if k > 100 * (a + 10):
                raise RuntimeError("uniformization failed to converge")
        out = acc
    return out


def commutator_apply(M, D, p0: np.ndarray, dt: float | None = None) -> np.ndarray:
    """``(DM - MD) p0``, scaled by ``dt**2 / 2`` when ``dt`` is given."""
    val = D @ (M @ p0) - M @ (D @ p0)
    if dt is not None:
        val = (dt * dt / 2.0) * val
    return val


def exact_local_error(
    prop: PropensityModel,
    mesh: MeshGraph,
    space: TruncatedStateSpace,
    x0: np.ndarray,
    dt: float,
    generators=None,
    tol: float = 1e-13,
):
    """True one-step splitting error, conditioned on starting state ``x0``.

    Returns ``(pdf_error, d_mean, d_m2, d_var)`` where ``pdf_error`` is
    ``exp(dt (M+D)) delta - exp(dt M) exp(dt D) delta`` over the enumerated
    states and the moment arrays are ``(N_v, N_s)`` differences
    (exact minus split) of mean, second moment, and variance.
    """
    M, D = generators if generators is not None else build_generators(prop, mesh, space)
    delta = space.delta(x0)
    p_exact = expm_apply(M + D, dt, delta, tol)
    p_split = expm_apply(M, dt, expm_apply(D, dt, delta, tol), tol)
    pdf_error = p_exact - p_split

    states = space.all_states().astype(np.float64)
    nv, ns = space.n_voxels, space.n_species
    d_mean = np.zeros((nv, ns))
    d_m2 = np.zeros((nv, ns))
    d_var = np.zeros((nv, ns))
    for i in range(nv):
        for s in range(ns):
            values = states[:, i, s]
            m1e = values @ p_exact
            m1s = values @ p_split
            m2e = (values * values) @ p_exact
            m2s = (values * values) @ p_split
            d_mean[i, s] = m1e - m1s
            d_m2[i, s] = m2e - m2s
            d_var[i, s] = (m2e - m1e * m1e) - (m2s - m1s * m1s)
    return pdf_error, d_mean, d_m2, d_var
