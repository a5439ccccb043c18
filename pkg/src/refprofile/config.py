"""Run configuration: TOML in, validated dataclass out."""
from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .dynamics import SCHEMES, IntegratorConfig
from .profile import NonlinearitySpec
from .spectral import Grid, make_potential


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = "default.toml"


def _default_text() -> str:
    return resources.files("refprofile").joinpath("data", DEFAULT_CONFIG).read_text()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict
    grid: Grid
    potential: dict
    nonlinearity: NonlinearitySpec
    index_tau: float
    witness_max_norm: int
    spectral: dict
    delta_profile: float
    profile_tol: float
    profile_max_iter: int
    radius_ladder: tuple
    eps_fractions: tuple
    fgr_tau: float
    fgr_boundary: str
    integrator: IntegratorConfig
    z0: tuple
    sample_every: int
    refresh_tol: float
    verdict_threshold: float
    require_fgr: bool
    output_dir: str
    seed: int
    source: str = "<default>"
    extra: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def potential_fn(self):
        return make_potential(self.potential)


def _get(d, *keys, cast=None):
    cur = d
    for k in keys:
        if not isinstance(cur, dict) or k not in cur:
            raise ConfigError(f"missing key {'.'.join(keys)}")
        cur = cur[k]
    if cast is not None:
        try:
            return cast(cur)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {'.'.join(keys)}: {cur!r}") from exc
    return cur


def parse_config(raw: dict, source="<dict>") -> RunConfig:
    """Validate a config dict (already merged over the defaults)."""
    try:
        g = raw["grid"]
        if "half_width" in g:
            grid = Grid.symmetric(float(g["half_width"]), float(g["spacing"]))
        else:
            grid = Grid(float(g["x_min"]), float(g["x_max"]), int(g["n_points"]))
        pot = dict(_get(raw, "potential"))
        if pot.get("kind") == "tabulated" and source not in ("<dict>", "<default>"):
            pot["path"] = str((Path(source).parent / pot["path"]).resolve())
        make_potential(pot)  # raises on unknown kind / missing fields
        taylor = tuple(float(c) for c in _get(raw, "nonlinearity", "taylor"))
        nl = NonlinearitySpec(taylor)
        ic = raw["integrator"]
        integ = IntegratorConfig(dt=float(ic["dt"]), T=float(ic["T"]), scheme=str(ic["scheme"]),
                                 sponge_width=float(ic["sponge_width"]),
                                 sponge_strength=float(ic["sponge_strength"]))
        integ.validate()
        sim = raw["simulate"]
        cfg = RunConfig(
            raw=raw,
            grid=grid,
            potential=pot,
            nonlinearity=nl,
            index_tau=_get(raw, "indices", "tau", cast=float),
            witness_max_norm=_get(raw, "indices", "witness_max_norm", cast=int),
            spectral={k: float(v) for k, v in raw.get("spectral", {}).items()},
            delta_profile=_get(raw, "profile", "delta", cast=float),
            profile_tol=_get(raw, "profile", "tol", cast=float),
            profile_max_iter=_get(raw, "profile", "max_iter", cast=int),
            radius_ladder=tuple(float(r) for r in _get(raw, "profile", "radius_ladder")),
            eps_fractions=tuple(float(e) for e in _get(raw, "fgr", "eps_fractions")),
            fgr_tau=_get(raw, "fgr", "tau", cast=float),
            fgr_boundary=_get(raw, "fgr", "boundary", cast=str),
            integrator=integ,
            z0=tuple(complex(*v) if isinstance(v, list) else complex(v) for v in sim["z0"]),
            sample_every=int(sim["sample_every"]),
            refresh_tol=float(sim["refresh_tol"]),
            verdict_threshold=float(sim["verdict_threshold"]),
            require_fgr=bool(sim["require_fgr"]),
            output_dir=str(_get(raw, "output", "dir")),
            seed=int(raw.get("seed", 0)),
            source=source,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config ({source}): {exc}") from exc
    _check(cfg)
    return cfg


def _check(cfg: RunConfig):
    if cfg.nonlinearity.degree == 0:
        raise ConfigError("nonlinearity.taylor must list at least g'(0)")
    if cfg.index_tau <= 0 or cfg.witness_max_norm < 1:
        raise ConfigError("indices.tau must be > 0 and witness_max_norm >= 1")
    if not 0 < cfg.delta_profile:
        raise ConfigError("profile.delta must be > 0")
    if cfg.profile_tol <= 0 or cfg.profile_max_iter < 1:
        raise ConfigError("profile.tol must be > 0, profile.max_iter >= 1")
    e = cfg.eps_fractions
    if len(e) < 2 or any(b >= a for a, b in zip(e, e[1:])) or e[-1] <= 0:
        raise ConfigError("fgr.eps_fractions must be strictly decreasing and positive")
    if cfg.fgr_boundary not in ("outgoing", "dirichlet"):
        raise ConfigError("fgr.boundary must be 'outgoing' or 'dirichlet'")
    if cfg.fgr_tau <= 0:
        raise ConfigError("fgr.tau must be > 0")
    if cfg.integrator.scheme not in SCHEMES:
        raise ConfigError(f"integrator.scheme must be one of {SCHEMES}")
    if cfg.sample_every < 1 or cfg.refresh_tol < 0 or cfg.verdict_threshold <= 1:
        raise ConfigError("simulate.sample_every >= 1, refresh_tol >= 0, verdict_threshold > 1 required")
    if sum(abs(z) for z in cfg.z0) >= cfg.delta_profile:
        raise ConfigError("simulate.z0 lies outside the profile radius")


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    try:
        base = tomllib.loads(_default_text())
        source = "<default>"
        if path is not None:
            source = str(path)
            try:
                user = tomllib.loads(Path(path).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read {path}: {exc}") from exc
            base = _merge(base, user)
        if overrides:
            base = _merge(base, overrides)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(base, source)
