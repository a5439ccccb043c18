"""Refined profile: fixed point coefficients and how fast the forced residual vanishes."""
import numpy as np

from refprofile.config import load_config
from refprofile.indices import enumerate_tables
from refprofile.profile import build_leading, forced_residual, probe_radius, solve_profile
from refprofile.spectral import build_operator

cfg = load_config()
op = build_operator(cfg.grid, cfg.potential_fn())
nl = cfg.nonlinearity
tables = enumerate_tables(op.omegas)
lead = build_leading(op, nl, tables)

best, report = probe_radius(op, nl, tables, lead, cfg.radius_ladder)
for rho, ratio, ok in report:
    print(f"rho={rho:<5} contraction {ratio:.3e} {'ok' if ok else 'FAIL'}")
print("largest contracting radius on the ladder:", best)

rhos = np.geomspace(1e-3, 1e-2, 8)
raw, after = [], []
for rho in rhos:
    z = np.full(op.n_modes, rho, complex)
    c = solve_profile(op, nl, tables, lead, np.abs(z) ** 2)
    fr = forced_residual(op, nl, lead, c, z)
    raw.append(fr.norms["raw_s0"])
    after.append(fr.norms["after_G_s0"])
    print(f"rho={rho:.2e}  varpi-omega={c.varpi - op.omegas}  |R|={raw[-1]:.3e}  |R+zG|={after[-1]:.3e}")

# the resonant forcing z^m G_m carries the rho^3 part; what is left is higher order
print("slope raw     %.3f" % np.polyfit(np.log(rhos), np.log(raw), 1)[0])
print("slope after G %.3f" % np.polyfit(np.log(rhos), np.log(after), 1)[0])
