"""Run configuration and run manifests.

Config files are flat UTF-8 text: one ``dotted.key = value`` per line,
``#`` comments.  Values parse as int, float, bool, or string.  Every key
has a default; unknown keys are a config error.
"""

import datetime
import hashlib
import json
from dataclasses import dataclass, field

from . import __version__


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "mu": 1e-3,
    "h": 0.0,
    "delta": 0.2,
    "seed": 0,
    "integrator.rel_tol": 1e-12,
    "integrator.abs_tol": 1e-12,
    "integrator.event_tol": 1e-12,
    "integrator.max_step": 0.0,  # 0 means unlimited
    "quad.c": 0.001,
    "quad.C": 100.0,
    "quad.exclusion": 0.45,
    "quad.panel_target": 1e-11,
    "quad.cert_C": 1000.0,
    "quad.cert_exclusion": 0.3,
    "melnikov.n": 10000,
    "melnikov.cert_n": 10000,
    "melnikov.theta_min": -3.141592653589793,
    "melnikov.theta_max": 3.141592653589793,
    "distance.n_theta": 10,
    "distance.mu_decades": 2,
    "eco.k_max": 2,
    "eco.n_probe": 7,
    "localmap.delta": 0.1,
    "localmap.nu_min": 1e-5,
    "localmap.nu_max": 1e-2,
    "localmap.n_nu": 13,
    "localmap.z0": 0.0,
    "localmap.z_slope": 0.0,
    "triple.delta": 0.1,
    "integrate.field": "polar_cm",
    "integrate.state": "2.5,0.0,0.05,1.6",
    "integrate.t0": 0.0,
    "integrate.t1": 50.0,
}


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = _parse_value(val)
    return values


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path=None, overrides=None):
        merged = dict(DEFAULTS)
        if path is not None:
            extra = parse_config_file(path)
            unknown = set(extra) - set(DEFAULTS)
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            merged.update(extra)
        if overrides:
            merged.update(overrides)
        cfg = cls(merged)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def validate(self):
        v = self.values
        if not (0.0 <= v["mu"] <= 0.5):
            raise ConfigError("mu must be in [0, 1/2]")
        if not (0.0 < v["delta"] < 1.0) or not (0.0 < v["localmap.delta"] < 1.0):
            raise ConfigError("delta must be in (0, 1)")
        if not (0.0 < v["triple.delta"] < 1.0):
            raise ConfigError("triple.delta must be in (0, 1)")
        for key in ("integrator.rel_tol", "integrator.abs_tol", "integrator.event_tol"):
            if v[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        if not (0.0 < v["quad.c"] < v["quad.C"]):
            raise ConfigError("need 0 < quad.c < quad.C")
        if v["melnikov.theta_min"] >= v["melnikov.theta_max"]:
            raise ConfigError("empty melnikov scan range")
        if v["melnikov.n"] < 1 or v["melnikov.cert_n"] < 1:
            raise ConfigError("grid sizes must be >= 1")
        if not (0.0 < v["localmap.nu_min"] < v["localmap.nu_max"]):
            raise ConfigError("need 0 < localmap.nu_min < localmap.nu_max")
        if v["localmap.nu_max"] > 0.2 * v["localmap.delta"]:
            raise ConfigError("localmap.nu_max must stay well below localmap.delta")
        if v["eco.k_max"] < 1:
            raise ConfigError("eco.k_max >= 1")

    def integrator(self):
        from .flow import IntegratorConfig

        ms = self.values["integrator.max_step"]
        return IntegratorConfig(
            rel_tol=self.values["integrator.rel_tol"],
            abs_tol=self.values["integrator.abs_tol"],
            event_tol=self.values["integrator.event_tol"],
            max_step=ms if ms > 0 else float("inf"),
        )

    def budget(self, certification=False):
        from .melnikov import QuadratureBudget

        v = self.values
        if certification:
            return QuadratureBudget(
                c=v["quad.c"], C=v["quad.cert_C"],
                panel_target=v["quad.panel_target"],
                exclusion=v["quad.cert_exclusion"],
            )
        return QuadratureBudget(
            c=v["quad.c"], C=v["quad.C"],
            panel_target=v["quad.panel_target"],
            exclusion=v["quad.exclusion"],
        )


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(outdir, config: RunConfig, outputs, started, command):
    """Write the run manifest last; every emitted file is listed with a hash."""
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "config": {k: config.values[k] for k in sorted(config.values)},
        "started_utc": started,
        "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": {
            name: {"path": str(path.name), "sha256": sha256_of(path)}
            for name, path in sorted(outputs.items())
        },
    }
    path = outdir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path
