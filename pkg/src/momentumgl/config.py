"""Experiment configuration: INI-style key-value files with per-kind defaults."""
import configparser
import io
import math

KINDS = (
    "grid-curve",
    "grid-circle-validate",
    "grid-minimal-surface",
    "graph-blobs",
    "graph-mnist",
    "ode-corrector",
    "scalar-compare",
)

_COMMON = {
    "experiment": {"kind": "", "seed": 0},
    "io": {"output": "out", "snapshots": 10},
    "stop": {"rule": "max-steps", "delta": 1e-11, "delta_ref": 1e-12, "ref_tau": 0.1,
             "ref_max_steps": 200000, "plateau_tol": 1e-10, "plateau_window": 10},
}

DEFAULTS = {
    "grid-curve": {
        "backend": {"n": 400, "dim": 2, "eps": 0.01, "R": 2.0, "init": "cshape",
                    "warmup_steps": 10, "warmup_tau": ""},
        "scheme": {"scheme": "cinema", "tau": 1e-5, "eta": "", "rho": "", "alpha": 3.0,
                   "steps": 2000, "record_every": 10},
    },
    "grid-circle-validate": {
        "backend": {"n": 256, "dim": 2, "eps": 0.015, "R": 2.0, "init": "profile-disk",
                    "radius": 0.45},
        "scheme": {"scheme": "cinema", "tau": 1e-6, "eta": "", "rho": "", "alpha": 3.0,
                   "steps": 1000000, "record_every": 1000},
        "ode": {"dt": 1e-5, "r_stop": 0.01},
    },
    "grid-minimal-surface": {
        "backend": {"n": 64, "dim": 3, "eps": 7.5 / 64, "R": 2.0, "init": "schwarzp",
                    "radius": 0.3, "mean": "0"},
        "scheme": {"scheme": "fista", "tau": 0.4, "eta": "", "rho": "", "alpha": 1.4,
                   "steps": 5000, "record_every": 1, "initial_gd_step": "yes"},
    },
    "graph-blobs": {
        "data": {"n": 2000, "k": 5, "std": 1.1, "box_half_width": 10.0,
                 "label_fraction": 0.01, "label_seed": 1},
        "graph": {"type": "full", "sigma": 0.2, "cutoff": 1e-3, "knn": 5},
        "backend": {"eps": 1.0, "R": 2.0},
        "scheme": {"scheme": "fista", "tau": 10.0, "eta": "", "rho": 0.4, "alpha": 0.0,
                   "steps": 100, "record_every": 1},
    },
    "graph-mnist": {
        "data": {"images": "", "labels": "", "subset": 10000, "label_fraction": 0.01,
                 "label_seed": 0},
        "graph": {"type": "knn", "sigma": 1.5, "cutoff": 1e-3, "knn": 5},
        "backend": {"eps": 1.0, "R": 2.0},
        "scheme": {"scheme": "fista", "tau": 10.0, "eta": "", "rho": 0.4, "alpha": 0.0,
                   "steps": 100, "record_every": 1},
    },
    "ode-corrector": {
        "backend": {"R": 2.0, "X_max": 24.0, "n_points": 8193},
        "ode": {"r0": 0.45, "rdot0": 0.0, "alpha": 3.0, "dt": 1e-4, "t_end": 2.0,
                "r_stop": 0.01},
    },
    "scalar-compare": {
        "backend": {"R": 2.0, "u0": 0.2, "v0": 0.0},
        "scheme": {"alpha": 0.01, "taus": "0.5, 1, 10, 100, 1000", "steps": 100,
                   "schemes": "nesterov, fista, cinema"},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration (a usage error)."""


def _coerce(text, default):
    text = text.strip()
    if isinstance(default, bool):
        return text.lower() in ("1", "yes", "true", "on")
    if isinstance(default, int) and not isinstance(default, bool):
        try:
            return int(text)
        except ValueError:
            return int(float(text))
    if isinstance(default, float):
        return float(text)
    return text


class ExperimentConfig:
    """Resolved configuration: ``cfg[section][key]`` with typed values.

    Empty strings stand for "unset" (for example ``eta`` and ``rho``, whose
    defaults are derived from ``tau`` and ``alpha``).
    """

    def __init__(self, sections):
        self.sections = sections

    @property
    def kind(self):
        return self.sections["experiment"]["kind"]

    @property
    def seed(self):
        return self.sections["experiment"]["seed"]

    def __getitem__(self, section):
        return self.sections[section]

    def get(self, section, key, default=None):
        val = self.sections.get(section, {}).get(key, default)
        return default if val == "" else val

    def set(self, section, key, value):
        self.sections.setdefault(section, {})[key] = value

    def copy(self):
        return ExperimentConfig({s: dict(v) for s, v in self.sections.items()})

    def to_text(self):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for sec, vals in self.sections.items():
            cp[sec] = {k: _format(v) for k, v in vals.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def as_dict(self):
        return {s: dict(v) for s, v in self.sections.items()}


def _format(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def defaults_for(kind):
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    sections = {s: dict(v) for s, v in _COMMON.items()}
    for sec, vals in DEFAULTS[kind].items():
        sections.setdefault(sec, {}).update(vals)
    sections["experiment"]["kind"] = kind
    return ExperimentConfig(sections)


def parse_config(text, overrides=None):
    """Parse INI text; unknown sections or keys are usage errors."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kind = cp.get("experiment", "kind", fallback="").strip()
    cfg = defaults_for(kind)
    items = [(s, k, v) for s in cp.sections() for k, v in cp[s].items()]
    items += list(overrides or [])
    for sec, key, val in items:
        if sec not in cfg.sections or key not in cfg.sections[sec]:
            raise ConfigError(f"unknown setting [{sec}] {key}")
        try:
            cfg.sections[sec][key] = _coerce(str(val), cfg.sections[sec][key])
        except ValueError as exc:
            raise ConfigError(f"bad value for [{sec}] {key}: {val!r}") from exc
    validate(cfg)
    return cfg


def load_config(path, overrides=None):
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def validate(cfg):
    b = cfg.sections.get("backend", {})
    if "eps" in b and not b["eps"] > 0:
        raise ConfigError("eps must be positive")
    if "n" in b and b["n"] < 2:
        raise ConfigError("grid size n must be at least 2")
    sc = cfg.sections.get("scheme", {})
    if "tau" in sc and not (sc["tau"] > 0 and math.isfinite(sc["tau"])):
        raise ConfigError("tau must be positive")
    if "scheme" in sc and sc["scheme"] not in ("gd", "cinema", "fista", "nesterov"):
        raise ConfigError(f"unknown scheme {sc['scheme']!r}")
    if "steps" in sc and sc["steps"] < 0:
        raise ConfigError("steps must be non-negative")
    if cfg["stop"]["rule"] not in ("max-steps", "energy-plateau", "reference-distance"):
        raise ConfigError(f"unknown stop rule {cfg['stop']['rule']!r}")
    if cfg["io"]["snapshots"] < 0:
        raise ConfigError("snapshot count must be non-negative")
