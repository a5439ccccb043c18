"""Command line entry point: ``refprofile {spectrum,indices,profile,fgr,simulate}``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import dynamics, fgr, indices, profile, spectral
from .config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
DIGITS = 12

log = logging.getLogger("refprofile")


class FgrCheckFailed(RuntimeError):
    pass


def _clean(obj):
    """Round floats to fixed precision so identical runs give identical bytes."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{DIGITS}g}")
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True)


def _operator(cfg: RunConfig):
    sp = cfg.spectral
    kw = {k: sp[k] for k in ("tau_decay", "boundary_tol") if k in sp}
    return spectral.build_operator(cfg.grid, cfg.potential_fn(), **kw)


def _pipeline(cfg):
    op = _operator(cfg)
    tables = indices.enumerate_tables(op.omegas, tau=cfg.index_tau)
    lead = profile.build_leading(op, cfg.nonlinearity, tables)
    return op, tables, lead


def _gammas(cfg, op, lead):
    coeffs = fgr.gammas_for(op, lead, cfg.eps_fractions, boundary=cfg.fgr_boundary, tau=cfg.fgr_tau)
    return coeffs, fgr.check_fgr_assumption(coeffs, cfg.fgr_tau)


def cmd_spectrum(cfg: RunConfig, args) -> dict:
    op = _operator(cfg)
    w = op.omegas
    full = indices.nonresonance_witness(w, cfg.witness_max_norm, cfg.index_tau)
    sum_one = indices.nonresonance_witness(w, cfg.witness_max_norm, cfg.index_tau, sum_one_only=True)
    edges = [max(abs(op.modes[0, j]), abs(op.modes[-1, j])) for j in range(op.n_modes)]
    rows = [f"{'j':>3} {'omega_j':>16} {'edge |phi_j|':>14}"]
    rows += [f"{j + 1:>3} {w[j]:>16.10f} {edges[j]:>14.3e}" for j in range(op.n_modes)]
    print("\n".join(rows), file=sys.stderr)
    return {"omegas": w, "gaps": np.diff(w), "n_modes": op.n_modes, "n_points": op.grid.n_points,
            "h": op.h, "boundary_values": edges,
            "nonresonance": {"max_norm": cfg.witness_max_norm, "tau": cfg.index_tau,
                             "witness": None if full is None else list(full),
                             "witness_sum_one": None if sum_one is None else list(sum_one)},
            "resolvent_probe": op.resolvent_norm_probe(seed=cfg.seed)}


def cmd_indices(cfg: RunConfig, args) -> dict:
    op = _operator(cfg)
    return indices.enumerate_tables(op.omegas, tau=cfg.index_tau).to_dict()


def cmd_profile(cfg: RunConfig, args) -> dict:
    op, tables, lead = _pipeline(cfg)
    nl = cfg.nonlinearity
    z2 = np.zeros(op.n_modes) if args.z2 is None else np.asarray(args.z2, float)
    if z2.shape != (op.n_modes,):
        raise ConfigError(f"--z2 needs {op.n_modes} values")
    if np.sum(np.sqrt(z2)) >= cfg.delta_profile:
        raise ConfigError("--z2 lies outside the profile radius")
    coeffs = profile.solve_profile(op, nl, tables, lead, z2, tol=cfg.profile_tol, max_iter=cfg.profile_max_iter)
    z = np.sqrt(z2).astype(complex)
    fr = profile.forced_residual(op, nl, lead, coeffs, z)
    report = {"z2": z2, "varpi": coeffs.varpi, "truncation_order": coeffs.truncation,
              "fixed_point_residual": coeffs.residual, "iterations": coeffs.iterations,
              "contraction": coeffs.contraction, "residual_norms": fr.norms,
              "coefficients": [{"m": list(m), "shift": float(np.dot(m, op.omegas)), "l2": op.l2(coeffs.psi[m])}
                               for m in lead.nr1],
              "G": [{"m": list(m), "l2": op.l2(lead.G[m])} for m in lead.r_min]}
    if args.out:
        profile.write_coefficients(Path(args.out) / "coefficients", op, lead, coeffs)
    return report


def cmd_fgr(cfg: RunConfig, args) -> dict:
    op, tables, lead = _pipeline(cfg)
    coeffs, check = _gammas(cfg, op, lead)
    gen = []
    for m in lead.r_min:
        lam = float(np.dot(m, op.omegas))
        ladder = [e * min(lam, 1.0) for e in cfg.eps_fractions]
        try:
            gen.append(fgr.genericity_quadratic(op, cfg.nonlinearity, lead, m, ladder, cfg.fgr_boundary,
                                                cfg.fgr_tau).to_dict())
        except fgr.FgrAssumptionError as exc:
            gen.append({"m": list(m), "error": str(exc)})
    return {"check": check.to_dict(), "genericity": gen}


def cmd_simulate(cfg: RunConfig, args) -> dict:
    op, tables, lead = _pipeline(cfg)
    coeffs, check = _gammas(cfg, op, lead)
    if cfg.require_fgr and not check.ok and not args.force:
        raise FgrCheckFailed(f"FGR check failed for {check.failing}; rerun with --force to simulate anyway")
    z0 = np.asarray(cfg.z0, complex)
    if z0.shape != (op.n_modes,):
        raise ConfigError(f"simulate.z0 needs {op.n_modes} entries")
    rep = dynamics.run_selection(op, cfg.nonlinearity, tables, lead, cfg.integrator, z0,
                                 sample_every=cfg.sample_every, refresh_tol=cfg.refresh_tol,
                                 gammas={c.m: c.gamma for c in coeffs},
                                 verdict_threshold=cfg.verdict_threshold)
    fit = dynamics.fgr_dissipation_diagnostic(rep.series)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dynamics.write_series_csv(out / "series.csv", rep.series)
    report = {"verdict": rep.verdict.to_dict(), "energy_trend": rep.energy_trend, "dissipation": fit.to_dict(),
              "fgr": check.to_dict(), "z_final": [abs(v) for v in rep.z_final], "profile_solves": rep.profile_solves,
              "max_orthogonality_residual": float(np.max(rep.series.orth_residual)),
              "series": "series.csv"}
    return report


COMMANDS = {"spectrum": cmd_spectrum, "indices": cmd_indices, "profile": cmd_profile,
            "fgr": cmd_fgr, "simulate": cmd_simulate}


def build_parser():
    p = argparse.ArgumentParser(prog="refprofile", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, default=None, help="TOML file merged over the shipped defaults")
    p.add_argument("--out", type=Path, default=None, help="output directory (JSON manifest and CSV files)")
    p.add_argument("--force", action="store_true", help="simulate even if the FGR check fails")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--z2", type=lambda s: [float(v) for v in s.split(",")], default=None,
                   help="squared moduli for `profile`, comma separated")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    try:
        body = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (spectral.SpectralError, indices.ResonanceDegeneracyError, profile.ProfileError, fgr.FgrError,
            dynamics.DynamicsError, FgrCheckFailed, ArithmeticError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    payload = {"command": args.command, "config_hash": cfg.hash, "seed": cfg.seed, "result": body}
    text = dumps(payload)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"{args.command}.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
