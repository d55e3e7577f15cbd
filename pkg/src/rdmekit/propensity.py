"""Propensity evaluation and the state-perturbation quantities built on it.

A ``PropensityModel`` stores per-voxel effective rate constants: bimolecular
channels are scaled by the voxel volume once, at construction, so every
mass-action form is evaluated directly in copy-number units:

    order 0:              k
    order 1 in u:         k * x_u
    order 2, u != v:      k * x_u * x_v
    order 2, same u:      k * x_u * (x_u - 1)

Mass-action propensities read only their reactant counts; if a reactant
count is negative (which happens only for estimator probe states) the value
is 0.  Custom channels are evaluated through their callable, guarded to 0
whenever any entry of the row is negative.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ModelError
from .model import MeshGraph, ModelSystem, Reaction

__all__ = ["PropensityModel", "total_diffusion_rate"]


class PropensityModel:
    """Evaluates reaction propensities for every voxel of one model."""

    def __init__(self, reactions, n_species: int, k_eff: np.ndarray):
        self.reactions: tuple[Reaction, ...] = tuple(reactions)
        self.n_species = int(n_species)
        self.n_reactions = len(self.reactions)
        k_eff = np.atleast_2d(np.asarray(k_eff, dtype=np.float64))
        if self.n_reactions == 0:
            k_eff = k_eff.reshape(0, k_eff.shape[-1] if k_eff.size else 0)
        elif k_eff.shape[0] != self.n_reactions:
            raise ModelError("k_eff must have shape (n_reactions, n_voxels)")
        self.k_eff = k_eff
        self.n_voxels = k_eff.shape[1]
        if self.n_reactions:
            self.stoich = np.stack([r.change for r in self.reactions])
        else:
            self.stoich = np.zeros((0, self.n_species), dtype=np.int64)
        self._deps = [r.dependent_species(self.n_species) for r in self.reactions]

    @classmethod
    def from_model(cls, model: ModelSystem) -> "PropensityModel":
        """Build the evaluator, scaling bimolecular constants by voxel volume."""
        return cls.from_reactions(model.reactions, model.mesh, model.species.count)

    @classmethod
    def from_reactions(cls, reactions, mesh: MeshGraph, n_species: int) -> "PropensityModel":
        nv = mesh.n_voxels
        k_eff = np.zeros((len(reactions), nv))
        for r_idx, r in enumerate(reactions):
            k = np.full(nv, r.rate_constant)
            if r.kind == "mass-action" and r.order == 2:
                k = k / mesh.volumes
            if r.voxels is not None:
                mask = np.zeros(nv, dtype=bool)
                mask[list(r.voxels)] = True
                k = np.where(mask, k, 0.0)
            k_eff[r_idx] = k
        return cls(reactions, n_species, k_eff)

    # -- single evaluations ---------------------------------------------

    def evaluate(self, voxel: int, r_idx: int, row) -> float:
        """Propensity of channel ``r_idx`` in ``voxel`` for one state row."""
        r = self.reactions[r_idx]
        k = self.k_eff[r_idx, voxel]
        if k == 0.0:
            return 0.0
        if r.kind == "custom":
            if min(row) < 0:
                return 0.0
            return k * float(r.propensity(row))
        reactants = r.reactants
        if not reactants:
            return k
        value = k
        for s, order in reactants:
            xs = row[s]
            if xs < 0:
                return 0.0
            if order == 1:
                value *= xs
            else:
                value *= xs * (xs - 1)
        return float(value)

    def voxel_propensities(self, voxel: int, row) -> np.ndarray:
        """All channel propensities for one voxel row."""
        return np.array(
            [self.evaluate(voxel, r, row) for r in range(self.n_reactions)]
        )

    def delta_a_minus(self, voxel: int, r_idx: int, species: int, x) -> float:
        """Propensity change when one molecule of ``species`` leaves the voxel."""
        if species not in self._deps[r_idx]:
            return 0.0
        row = np.array(x[voxel], dtype=np.int64)
        base = self.evaluate(voxel, r_idx, row)
        row[species] -= 1
        return self.evaluate(voxel, r_idx, row) - base

    def delta_a_plus(self, voxel: int, r_idx: int, species: int, x) -> float:
        """Propensity change when one molecule of ``species`` arrives in the voxel."""
        if species not in self._deps[r_idx]:
            return 0.0
        row = np.array(x[voxel], dtype=np.int64)
        base = self.evaluate(voxel, r_idx, row)
        row[species] += 1
        return self.evaluate(voxel, r_idx, row) - base

    def dependent_species(self, r_idx: int) -> tuple[int, ...]:
        return self._deps[r_idx]

    # -- vectorized evaluations -------------------------------------------

    def vector_propensity(self, voxel: int, r_idx: int, rows: np.ndarray) -> np.ndarray:
        """Propensities of one channel over many state rows (shape ``(m, N_s)``)."""
        r = self.reactions[r_idx]
        k = self.k_eff[r_idx, voxel]
        if k == 0.0:
            return np.zeros(rows.shape[0])
        if r.kind == "custom":
            out = np.array([float(r.propensity(row)) for row in rows])
            out[np.any(rows < 0, axis=1)] = 0.0
            return k * out
        value = np.full(rows.shape[0], k)
        for s, order in r.reactants:
            xs = rows[:, s]
            if order == 1:
                value = value * xs
            else:
                value = value * xs * (xs - 1)
            value = np.where(xs < 0, 0.0, value)
        return value

    def propensity_matrix(self, x: np.ndarray) -> np.ndarray:
        """(N_v, N_r) matrix of all propensities at state ``x``."""
        nv = x.shape[0]
        out = np.zeros((nv, self.n_reactions))
        for r_idx, r in enumerate(self.reactions):
            k = self.k_eff[r_idx]
            if r.kind == "custom":
                col = np.array(
                    [
                        k[i] * float(r.propensity(x[i])) if k[i] else 0.0
                        for i in range(nv)
                    ]
                )
            else:
                col = k.astype(float).copy()
                for s, order in r.reactants:
                    xs = x[:, s]
                    if order == 1:
                        col = col * xs
                    else:
                        col = col * xs * (xs - 1)
            out[:, r_idx] = col
        return out

    def total_reaction_rate(self, x: np.ndarray) -> float:
        """Sum of all propensities over voxels and channels."""
        if self.n_reactions == 0:
            return 0.0
        return float(self.propensity_matrix(x).sum())

    def reaction_rate_field(self, x: np.ndarray) -> np.ndarray:
        """(N_v, N_s) net production rates: ``R[i, s] = sum_r n_rs a_ir``."""
        if self.n_reactions == 0:
            return np.zeros_like(x, dtype=np.float64)
        return self.propensity_matrix(x) @ self.stoich.astype(np.float64)

    def sigma(self, voxel: int, r_idx: int, species: int, x, mesh: MeshGraph) -> float:
        """Diffusive drift of one channel's propensity w.r.t. one species.

        ``delta_a_minus * x_is * sum_j d_ijs + delta_a_plus * sum_j d_jis x_js``;
        zero whenever the channel does not involve ``species`` or the species
        is immobile.
        """
        if species not in self._deps[r_idx]:
            return 0.0
        dm = self.delta_a_minus(voxel, r_idx, species, x)
        dp = self.delta_a_plus(voxel, r_idx, species, x)
        if dm == 0.0 and dp == 0.0:
            return 0.0
        sources, rates = mesh.in_edges(voxel, species)
        inflow = float(rates @ x[sources, species]) if len(sources) else 0.0
        return dm * x[voxel, species] * mesh.dout[voxel, species] + dp * inflow


def total_diffusion_rate(x: np.ndarray, mesh: MeshGraph) -> float:
    """Total diffusion event rate ``sum_{i,s} x_is * sum_j d_ijs``."""
    return float(np.sum(mesh.dout * x))
