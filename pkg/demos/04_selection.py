"""Two-mode initial data on the default config; writes demos/out/series.csv.

Takes about a minute and a half at T = 500.  Pass a smaller T as the first
argument for a quick look, e.g. ``python demos/04_selection.py 50``.
"""
import sys
from pathlib import Path

import numpy as np

from refprofile.config import load_config
from refprofile.dynamics import fgr_dissipation_diagnostic, run_selection, write_series_csv
from refprofile.fgr import gammas_for
from refprofile.indices import enumerate_tables
from refprofile.profile import build_leading
from refprofile.spectral import build_operator

T = float(sys.argv[1]) if len(sys.argv) > 1 else None
cfg = load_config(overrides={"integrator": {"T": T}} if T else None)
op = build_operator(cfg.grid, cfg.potential_fn())
nl = cfg.nonlinearity
tables = enumerate_tables(op.omegas)
lead = build_leading(op, nl, tables)
gam = {c.m: c.gamma for c in gammas_for(op, lead, cfg.eps_fractions, boundary=cfg.fgr_boundary)}

rep = run_selection(op, nl, tables, lead, cfg.integrator, np.asarray(cfg.z0, complex),
                    sample_every=cfg.sample_every, refresh_tol=cfg.refresh_tol, gammas=gam)
s = rep.series
out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
write_series_csv(out / "series.csv", s)

print(f"T = {s.t[-1]:g}, {len(s.t)} samples, {rep.profile_solves} profile solves")
print("|z(0)| =", s.zabs[0], " |z(T)| =", s.zabs[-1])
print("E(phi(z)) trend:", rep.energy_trend)
print("verdict:", rep.verdict)
print("dissipation fit:", fgr_dissipation_diagnostic(s))
print("max orthogonality residual %.2e" % s.orth_residual.max())
