"""Bound states of the default two-well potential and the resonance bookkeeping they induce."""
import numpy as np

from refprofile.config import load_config
from refprofile.indices import enumerate_tables, nonresonance_witness
from refprofile.spectral import build_operator

cfg = load_config()
op = build_operator(cfg.grid, cfg.potential_fn())
print(f"grid: {op.grid.n_points} points, h = {op.h:g}")
for j, w in enumerate(op.omegas):
    print(f"  omega_{j + 1} = {w:+.10f}")

tables = enumerate_tables(op.omegas)
print("R_min:", tables.r_min, " m.omega =", [float(np.dot(m, op.omegas)) for m in tables.r_min])
print("NR_1 :", tables.nr1)

# no integer relation among the frequencies up to the configured norm
print("witness:", nonresonance_witness(op.omegas, cfg.witness_max_norm, cfg.index_tau))

# a closer pair of frequencies needs a larger search box
for w2 in (-0.45, -0.77, -0.93):
    t = enumerate_tables((-1.0, w2))
    print(f"omega = (-1, {w2}): box {t.box}, R_min {t.r_min}")
