"""Scratch validation of estimator formulas against the dense oracle."""
import sys

sys.path.insert(0, "src")
import numpy as np

from rdmekit.model import MeshGraph, Reaction, SpeciesSet, build_cartesian_mesh
from rdmekit.propensity import PropensityModel
from rdmekit.estimator import (
    commutator_pdf_error,
    error_mean,
    error_second_moment,
    key_state,
    weak_error,
)
from rdmekit.oracle import (
    TruncatedStateSpace,
    build_generators,
    commutator_apply,
    exact_local_error,
    expm_apply,
)

rng = np.random.default_rng(7)


def random_system(seed):
    r = np.random.default_rng(seed)
    nv = int(r.integers(1, 4))
    ns = int(r.integers(1, 3))
    # random mesh: possibly asymmetric directed edges
    edges = []
    for i in range(nv):
        for j in range(nv):
            if i == j:
                continue
            for s in range(ns):
                if r.random() < 0.7:
                    edges.append((i, j, s, float(np.round(r.uniform(0.1, 2.0), 3))))
    volumes = np.round(r.uniform(0.5, 2.0, nv), 3)
    mesh = MeshGraph(volumes, ns, edges)

    n_r = int(r.integers(1, 4))
    reactions = []
    for _ in range(n_r):
        kind = r.integers(0, 4)
        stoich = [0] * ns
        if kind == 0:  # creation
            s = int(r.integers(ns))
            stoich[s] = int(r.integers(1, 3))
            reactants = ()
        elif kind == 1:  # conversion or degradation
            s = int(r.integers(ns))
            stoich[s] = -1
            if ns > 1 and r.random() < 0.5:
                s2 = int(r.integers(ns))
                if s2 != s:
                    stoich[s2] = stoich[s2] + 1
            reactants = ((s, 1),)
        elif kind == 2:  # dimerization-style, same species
            s = int(r.integers(ns))
            stoich[s] = -2
            reactants = ((s, 2),)
        else:  # bimolecular distinct (needs 2 species)
            if ns < 2:
                s = int(r.integers(ns))
                stoich[s] = -1
                reactants = ((s, 1),)
            else:
                s1, s2 = 0, 1
                stoich[s1] = -1
                stoich[s2] = -1
                reactants = ((s1, 1), (s2, 1))
        k = float(np.round(r.uniform(0.2, 1.5), 3))
        voxels = None
        if r.random() < 0.4:
            voxels = tuple(sorted(r.choice(nv, size=max(1, nv // 2), replace=False).tolist()))
        reactions.append(
            Reaction(tuple(stoich), reactants, k, voxels=voxels, name=f"r{_}")
        )
    prop = PropensityModel.from_reactions(reactions, mesh, ns)
    x0 = r.integers(0, 5, size=(nv, ns))
    return mesh, prop, x0


def check_system(seed):
    mesh, prop, x0 = random_system(seed)
    nv, ns = x0.shape
    space = TruncatedStateSpace.from_cap(nv, ns, 8)
    M, D = build_generators(prop, mesh, space)
    dt = 0.05

    # 1. map vs oracle commutator
    comm = commutator_apply(M, D, space.delta(x0), dt)
    est_vec = np.zeros(space.size)
    emap = commutator_pdf_error(x0, prop, mesh, dt)
    for key, val in emap.items():
        st = key_state(x0, key, prop)
        est_vec[space.index(st)] += val
    err1 = np.max(np.abs(est_vec - comm))
    scale = max(np.max(np.abs(comm)), 1e-300)
    print(f"seed={seed} nv={nv} ns={ns} map-vs-oracle rel={err1/scale:.2e}", end="  ")

    # 2. moment formulas vs delta-weighted oracle commutator
    dmean = error_mean(x0, prop, mesh, dt)
    dm2 = error_second_moment(x0, prop, mesh, dt)
    ok_mean = ok_m2 = 0.0
    for i in range(nv):
        for s in range(ns):
            vals = space.marginal_values(i, s)
            om = float(vals @ comm)
            om2 = float((vals * vals) @ comm)
            sc = max(abs(om), abs(om2), 1e-12)
            ok_mean = max(ok_mean, abs(dmean[i, s] - om) / sc)
            ok_m2 = max(ok_m2, abs(dm2[i, s] - om2) / sc)
    print(f"mean rel={ok_mean:.2e} m2 rel={ok_m2:.2e}", end="  ")

    # 3. weak error g=x, g=x^2 match the closed forms
    werr = 0.0
    for i in range(nv):
        for s in range(ns):
            w1 = weak_error(x0, prop, mesh, dt, lambda v: float(v), i, s)
            w2 = weak_error(x0, prop, mesh, dt, lambda v: float(v) ** 2, i, s)
            sc = max(abs(dmean[i, s]), abs(dm2[i, s]), 1e-12)
            werr = max(werr, abs(w1 - dmean[i, s]) / sc, abs(w2 - dm2[i, s]) / sc)
    print(f"weak rel={werr:.2e}", end="  ")

    # 4. map sums to zero
    tot = sum(emap.values())
    mx = max((abs(v) for v in emap.values()), default=1.0)
    print(f"sum0={abs(tot)/mx:.2e}")
    return err1 / scale, ok_mean, ok_m2, werr


worst = [0.0] * 4
for seed in range(20):
    res = check_system(seed)
    worst = [max(w, r) for w, r in zip(worst, res)]
print("WORST:", [f"{w:.3e}" for w in worst])

# 5. residual order check on the hetero-degrade example
species = SpeciesSet(("A",), (1.0,))
mesh = build_cartesian_mesh((2,), 1.0, species)
reactions = (Reaction((-1,), ((0, 1),), 1.0, voxels=(0,), name="deg"),)
prop = PropensityModel.from_reactions(reactions, mesh, 1)
x0 = np.array([[3], [2]])
print("hetero-degrade dE_mean at dt=0.1:", error_mean(x0, prop, mesh, 0.1).ravel())

space = TruncatedStateSpace.from_cap(2, 1, 5)
M, D = build_generators(prop, mesh, space)
print("col sums:", np.max(np.abs(M.sum(axis=0))), np.max(np.abs(D.sum(axis=0))))
for dt in (0.02, 0.01, 0.005, 0.0025):
    pdf_err, dmean_true, dm2_true, dv_true = exact_local_error(
        prop, mesh, space, x0, dt, generators=(M, D)
    )
    est = error_mean(x0, prop, mesh, dt)
    est2 = error_second_moment(x0, prop, mesh, dt)
    resid = np.abs(est - dmean_true).sum()
    resid2 = np.abs(est2 - dm2_true).sum()
    print(
        f"dt={dt}: |true|={np.abs(dmean_true).sum():.3e} resid_mean={resid:.3e} "
        f"resid_m2={resid2:.3e} ratio_mean={resid/dt**3:.4f} ratio_m2={resid2/dt**3:.4f}"
    )
