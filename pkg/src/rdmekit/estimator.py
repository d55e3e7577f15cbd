"""Conditional local splitting-error estimators.

For a first-order (diffusion-then-reactions) split step of size ``dt``,
the local error in the probability density, conditioned on the currently
observed state, is ``(dt^2 / 2) * (DM - MD) delta(x)`` up to ``O(dt^3)``.
Because the point mass is sparse, the commutator has closed-form values on
a small set of reachable states, and marginal weak errors (mean, second
moment, variance) reduce to sums over mesh edges and reaction channels.

All outputs are exactly homogeneous of degree two in ``dt``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MeshGraph
from .propensity import PropensityModel

__all__ = [
    "commutator_pdf_error",
    "key_state",
    "weak_error",
    "error_mean",
    "error_second_moment",
    "error_variance",
    "normalized_l1",
    "ErrorEstimate",
    "estimate_local_error",
]


def commutator_pdf_error(x: np.ndarray, prop: PropensityModel, mesh: MeshGraph, dt: float):
    """Sparse map from reachable-state keys to splitting-error values.

    Keys are tuples: ``('diff', i, j, s)`` for ``x + nu_ijs``,
    ``('react', k, r)`` for ``x + n_kr``, and ``('cross', i, j, s, k, r)``
    with ``k in {i, j}`` for ``x + n_kr + nu_ijs``.  Values are the
    ``dt^2/2``-scaled commutator entries; zero-valued entries are omitted,
    and the base state (value 0) is never stored.  The values over all keys
    sum to zero.
    """
    half = 0.5 * dt * dt
    out: dict[tuple, float] = {}
    if prop.n_reactions == 0:
        return out

    A = prop.propensity_matrix(x)
    stoich = prop.stoich

    for i, j, s, d in mesh.iter_edges():
        xis = int(x[i, s])
        flux = d * xis
        diff_val = 0.0
        for r in range(prop.n_reactions):
            n_rs = stoich[r, s]
            a_i = A[i, r]
            dm_i = prop.delta_a_minus(i, r, s, x) if flux != 0.0 else 0.0
            dp_j = prop.delta_a_plus(j, r, s, x) if flux != 0.0 else 0.0
            cross_i = d * n_rs * a_i - flux * dm_i
            if cross_i != 0.0:
                out[("cross", i, j, s, i, r)] = half * cross_i
            cross_j = -flux * dp_j
            if cross_j != 0.0:
                out[("cross", i, j, s, j, r)] = half * cross_j
            diff_val += flux * (dm_i + dp_j)
        if diff_val != 0.0:
            out[("diff", i, j, s)] = half * diff_val

    dout = mesh.dout
    for i in range(mesh.n_voxels):
        for r in range(prop.n_reactions):
            a_i = A[i, r]
            if a_i == 0.0:
                continue
            val = -a_i * float(stoich[r] @ dout[i])
            if val != 0.0:
                out[("react", i, r)] = half * val
    return out


def key_state(x: np.ndarray, key: tuple, prop: PropensityModel) -> np.ndarray:
    """Materialize the perturbed state a reachable-state key refers to."""
    out = np.array(x, dtype=np.int64)
    tag = key[0]
    if tag == "base":
        return out
    if tag == "diff":
        _, i, j, s = key
        out[i, s] -= 1
        out[j, s] += 1
        return out
    if tag == "react":
        _, k, r = key
        out[k] += prop.stoich[r]
        return out
    if tag == "cross":
        _, i, j, s, k, r = key
        out[k] += prop.stoich[r]
        out[i, s] -= 1
        out[j, s] += 1
        return out
    raise ValueError(f"unknown key tag {tag!r}")


def _inflow_fields(x: np.ndarray, R: np.ndarray, mesh: MeshGraph):
    """Per-(voxel, species) inflow-weighted copy numbers and rate fields.

    ``dinx[i, s] = sum_j d_jis x_js`` and ``dinR[i, s] = sum_j d_jis R_js``.
    """
    nv, ns = x.shape
    dinx = np.zeros((nv, ns))
    dinR = np.zeros((nv, ns))
    for s in range(ns):
        W = mesh.inflow_matrix(s)
        dinx[:, s] = W @ x[:, s].astype(np.float64)
        dinR[:, s] = W @ R[:, s]
    return dinx, dinR


def _moment_errors(x, prop: PropensityModel, mesh: MeshGraph, dt: float, want_m2: bool):
    """Shared assembly of the mean and (optionally) second-moment errors."""
    x = np.asarray(x, dtype=np.int64)
    half = 0.5 * dt * dt
    nv, ns = x.shape
    if prop.n_reactions == 0:
        zero = np.zeros((nv, ns))
        return (zero, zero.copy()) if want_m2 else (zero, None)

    A = prop.propensity_matrix(x)
    R = A @ prop.stoich.astype(np.float64)
    dout = mesh.dout
    dinx, dinR = _inflow_fields(x, R, mesh)

    mean = half * (dinR - dout * R)
    sigma_rows = []

    for i in range(nv):
        for r in range(prop.n_reactions):
            if prop.k_eff[r, i] == 0.0:
                continue
            deps = prop.dependent_species(r)
            sigma_total = 0.0
            dms = {}
            dps = {}
            for sp in deps:
                dm = prop.delta_a_minus(i, r, sp, x)
                dp = prop.delta_a_plus(i, r, sp, x)
                dms[sp], dps[sp] = dm, dp
                sigma_total += dm * x[i, sp] * dout[i, sp] + dp * dinx[i, sp]
            n_r = prop.stoich[r].astype(np.float64)
            if sigma_total != 0.0:
                mean[i] -= half * n_r * sigma_total
            if want_m2:
                sigma_rows.append((i, r, n_r, A[i, r], sigma_total, dms, dps))

    if not want_m2:
        return mean, None

    m2 = half * (dinR + dout * R) + 2.0 * x * mean
    dt2 = dt * dt
    for i, r, n_r, a_i, sigma_total, dms, dps in sigma_rows:
        m2[i] -= half * n_r * n_r * sigma_total
        m2[i] -= dt2 * dout[i] * (n_r * n_r) * a_i
        for sp, dm in dms.items():
            n_rs = n_r[sp]
            if n_rs == 0.0:
                continue
            m2[i, sp] += dt2 * n_rs * (x[i, sp] * dm * dout[i, sp] - dinx[i, sp] * dps[sp])
    return mean, m2


def error_mean(x, prop: PropensityModel, mesh: MeshGraph, dt: float) -> np.ndarray:
    """(N_v, N_s) conditional local error in the mean over one split step."""
    mean, _ = _moment_errors(x, prop, mesh, dt, want_m2=False)
    return mean


def error_second_moment(x, prop: PropensityModel, mesh: MeshGraph, dt: float) -> np.ndarray:
    """(N_v, N_s) conditional local error in the second moment."""
    _, m2 = _moment_errors(x, prop, mesh, dt, want_m2=True)
    return m2


def error_variance(x, prop: PropensityModel, mesh: MeshGraph, dt: float) -> np.ndarray:
    """Local error in variance: ``dE[X^2] - 2 x dE[X]`` (drops O(dt^3) terms)."""
    mean, m2 = _moment_errors(x, prop, mesh, dt, want_m2=True)
    return m2 - 2.0 * np.asarray(x, dtype=np.float64) * mean


def weak_error(x, prop: PropensityModel, mesh: MeshGraph, dt: float, g, voxel: int, species: int) -> float:
    """Local error of ``E[g(X_{voxel, species})]`` for an arbitrary ``g``.

    ``g`` is any real function of an integer copy number; only differences
    ``g(x + y) - g(x)`` near the current value enter.
    """
    x = np.asarray(x, dtype=np.int64)
    if prop.n_reactions == 0:
        return 0.0
    i, s = voxel, species
    xis = int(x[i, s])

    def dg(y):
        return g(xis + int(y)) - g(xis)

    A = prop.propensity_matrix(x)
    R = A @ prop.stoich.astype(np.float64)
    douts = mesh.dout[i, s]

    sources, rates = mesh.in_edges(i, s)
    dinx_s = float(rates @ x[sources, s]) if len(sources) else 0.0
    dinR_s = float(rates @ R[sources, s]) if len(sources) else 0.0

    sum_dm = sum(prop.delta_a_minus(i, r, s, x) for r in range(prop.n_reactions))
    sum_dp = sum(prop.delta_a_plus(i, r, s, x) for r in range(prop.n_reactions))

    total = dg(-1) * xis * douts * sum_dm
    total += dg(+1) * (dinR_s + dinx_s * sum_dp)

    for r in range(prop.n_reactions):
        n_rs = int(prop.stoich[r, s])
        a_i = A[i, r]
        bracket = douts * n_rs * a_i
        for sp in prop.dependent_species(r):
            if sp == s:
                continue
            bracket += x[i, sp] * prop.delta_a_minus(i, r, sp, x) * mesh.dout[i, sp]
            src, rts = mesh.in_edges(i, sp)
            din = float(rts @ x[src, sp]) if len(src) else 0.0
            bracket += din * prop.delta_a_plus(i, r, sp, x)
        total -= dg(n_rs) * bracket
        total += dg(n_rs - 1) * douts * (n_rs * a_i - xis * prop.delta_a_minus(i, r, s, x))
        total -= dg(n_rs + 1) * dinx_s * prop.delta_a_plus(i, r, s, x)

    return 0.5 * dt * dt * total


def normalized_l1(d_mean: np.ndarray, x: np.ndarray, volumes: np.ndarray) -> np.ndarray:
    """Per-species volume-weighted relative L1 error.

    ``eta_s = sum_i V_i |dE[i, s]| / sum_i V_i x[i, s]``; defined as 0 for
    species with no molecules anywhere.
    """
    v = np.asarray(volumes, dtype=np.float64)[:, None]
    num = np.sum(v * np.abs(d_mean), axis=0)
    den = np.sum(v * x, axis=0)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


@dataclass
class ErrorEstimate:
    """Bundle of per-(voxel, species) local errors and the L1 aggregate."""

    d_mean: np.ndarray
    d_m2: np.ndarray
    d_var: np.ndarray
    eta: np.ndarray
    dt: float


def estimate_local_error(x, prop: PropensityModel, mesh: MeshGraph, dt: float) -> ErrorEstimate:
    """Compute mean / second-moment / variance errors and ``eta`` in one pass."""
    mean, m2 = _moment_errors(x, prop, mesh, dt, want_m2=True)
    var = m2 - 2.0 * np.asarray(x, dtype=np.float64) * mean
    eta = normalized_l1(mean, x, mesh.volumes)
    return ErrorEstimate(mean, m2, var, eta, dt)
