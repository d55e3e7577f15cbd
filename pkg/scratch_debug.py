"""Pinpoint the moment-formula discrepancy with feature-isolated micro systems."""
import sys

sys.path.insert(0, "src")
import numpy as np

from rdmekit.model import MeshGraph, Reaction
from rdmekit.propensity import PropensityModel
from rdmekit.estimator import (
    commutator_pdf_error,
    error_mean,
    error_second_moment,
    key_state,
    weak_error,
)


def map_moments(x0, prop, mesh, dt):
    """Reference mean/m2 errors aggregated from the (oracle-verified) map."""
    emap = commutator_pdf_error(x0, prop, mesh, dt)
    nv, ns = x0.shape
    ref_mean = np.zeros((nv, ns))
    ref_m2 = np.zeros((nv, ns))
    for key, val in emap.items():
        st = key_state(x0, key, prop)
        ref_mean += val * (st - x0)
        ref_m2 += val * (st.astype(float) ** 2 - x0.astype(float) ** 2)
    return ref_mean, ref_m2


def compare(label, x0, prop, mesh, dt=0.05):
    ref_mean, ref_m2 = map_moments(x0, prop, mesh, dt)
    fm = error_mean(x0, prop, mesh, dt)
    f2 = error_second_moment(x0, prop, mesh, dt)
    w1 = np.zeros_like(fm)
    w2 = np.zeros_like(fm)
    for i in range(x0.shape[0]):
        for s in range(x0.shape[1]):
            w1[i, s] = weak_error(x0, prop, mesh, dt, float, i, s)
            w2[i, s] = weak_error(x0, prop, mesh, dt, lambda v: float(v) ** 2, i, s)
    e_mean = np.max(np.abs(fm - ref_mean))
    e_m2 = np.max(np.abs(f2 - ref_m2))
    e_w1 = np.max(np.abs(w1 - ref_mean))
    e_w2 = np.max(np.abs(w2 - ref_m2))
    flag = "OK " if max(e_mean, e_m2, e_w1, e_w2) < 1e-14 else "BAD"
    print(f"{flag} {label}: mean={e_mean:.1e} m2={e_m2:.1e} weak1={e_w1:.1e} weak2={e_w2:.1e}")
    if flag == "BAD":
        print("   ref_mean:", ref_mean.ravel())
        print("   formula :", fm.ravel())
        print("   weak1   :", w1.ravel())
        print("   ref_m2  :", ref_m2.ravel())
        print("   formula2:", f2.ravel())
        print("   weak2   :", w2.ravel())


# 1. symmetric mesh, uniform first-order degradation
mesh = MeshGraph([1.0, 1.0], 1, [(0, 1, 0, 1.0), (1, 0, 0, 1.0)])
r = Reaction((-1,), ((0, 1),), 1.0)
prop = PropensityModel.from_reactions([r], mesh, 1)
compare("sym mesh, uniform 1st-order", np.array([[3], [2]]), prop, mesh)

# 2. asymmetric mesh, same reaction
mesh2 = MeshGraph([1.0, 1.0], 1, [(0, 1, 0, 1.5), (1, 0, 0, 0.5)])
prop2 = PropensityModel.from_reactions([r], mesh2, 1)
compare("asym mesh, uniform 1st-order", np.array([[3], [2]]), prop2, mesh2)

# 3. symmetric mesh, restricted 1st-order (voxel 0 only)
r3 = Reaction((-1,), ((0, 1),), 1.0, voxels=(0,))
prop3 = PropensityModel.from_reactions([r3], mesh, 1)
compare("sym mesh, restricted 1st-order", np.array([[3], [2]]), prop3, mesh)

# 4. symmetric mesh, order-2 same species
r4 = Reaction((-2,), ((0, 2),), 1.0)
prop4 = PropensityModel.from_reactions([r4], mesh, 1)
compare("sym mesh, dimer annihilation", np.array([[3], [2]]), prop4, mesh)

# 5. symmetric mesh, creation +2
r5 = Reaction((2,), (), 1.0)
prop5 = PropensityModel.from_reactions([r5], mesh, 1)
compare("sym mesh, creation +2", np.array([[3], [2]]), prop5, mesh)

# 6. 2 species, bimolecular distinct
mesh6 = MeshGraph([1.0, 1.0], 2, [(0, 1, 0, 1.0), (1, 0, 0, 1.0), (0, 1, 1, 1.0), (1, 0, 1, 1.0)])
r6 = Reaction((-1, -1), ((0, 1), (1, 1)), 1.0)
prop6 = PropensityModel.from_reactions([r6], mesh6, 2)
compare("sym mesh, bimolecular A+B", np.array([[3, 1], [2, 2]]), prop6, mesh6)

# 7. conversion A->B (stoich crosses species)
r7 = Reaction((-1, 1), ((0, 1),), 1.0)
prop7 = PropensityModel.from_reactions([r7], mesh6, 2)
compare("sym mesh, conversion A->B", np.array([[3, 1], [2, 2]]), prop7, mesh6)

# 8. immobile second species (no edges for s=1)
mesh8 = MeshGraph([1.0, 1.0], 2, [(0, 1, 0, 1.0), (1, 0, 0, 1.0)])
prop8 = PropensityModel.from_reactions([r6], mesh8, 2)
compare("immobile B, bimolecular A+B", np.array([[3, 1], [2, 2]]), prop8, mesh8)
