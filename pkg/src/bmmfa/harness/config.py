"""Experiment configuration (JSON, schema version 1) and instance construction."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from typing import Any

from .. import adversary
from .. import matroid as mat
from ..allocator import SCHEDULES, Policy, PolicyConfig
from ..core import ConfigurationError, InputError, Instance, RngHandle
from ..env import DistributionSpec

SCHEMA_VERSION = 1
PRESETS = ("symmetric", "two_goods", "hard")
ALPHA_STREAM = 1
ENV_STREAM = 0

_HARD_RE = re.compile(r"^hard\((\d+),\s*(\d+)\)$")


class ConfigError(ConfigurationError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def normalize_instance(spec) -> dict:
    """Expand preset shorthands into explicit mappings."""
    if isinstance(spec, str):
        hit = _HARD_RE.match(spec.strip())
        if hit:
            spec = {"preset": "hard", "n": int(hit.group(1)), "b": int(hit.group(2))}
        else:
            spec = {"preset": spec}
    if not isinstance(spec, dict):
        raise ConfigError("instance", "must be a preset name or a mapping")
    spec = dict(spec)
    preset = spec.get("preset")
    if preset is None:
        return spec
    if preset == "symmetric":
        return {"means": [[spec.get("mean", 0.5)] * spec.get("m", 2)] * spec.get("n", 2),
                "kind": spec.get("kind", "bernoulli")}
    if preset == "two_goods":
        # Both agents value good 0 at 1 and good 1 at `low`.
        low = spec.get("low", 0.1)
        return {"means": [[1.0, low], [1.0, low]], "kind": "point"}
    if preset == "hard":
        return {"type": "alpha", "n": spec.get("n", 2), "b": spec.get("b", 2),
                "eps": spec.get("eps", "auto"), "alpha": spec.get("alpha", "random"),
                "erase_block": spec.get("erase_block")}
    raise ConfigError("instance.preset", f"unknown preset {preset!r}; known: {PRESETS}")


def build_instance(spec: dict, T: int, rng: RngHandle | None = None):
    """Instance for horizon T plus its BlockAssignment (None unless adversarial)."""
    if spec.get("type") == "alpha":
        try:
            n, b = int(spec["n"]), int(spec["b"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("instance", "alpha adversaries need integer n and b") from None
        eps = spec.get("eps", "auto")
        eps = adversary.lb_epsilon(T) if eps == "auto" else float(eps)
        alpha_spec = spec.get("alpha", "random")
        if alpha_spec == "random":
            alpha = adversary.BlockAssignment.sample(n, b, rng or RngHandle(0, ALPHA_STREAM))
        elif alpha_spec == "identity":
            alpha = adversary.BlockAssignment.identity(n, b)
        else:
            alpha = adversary.BlockAssignment(alpha_spec)
        erase = spec.get("erase_block")
        try:
            if erase is None:
                inst = adversary.make_alpha_adversary(n, b, eps, alpha, T)
            else:
                inst = adversary.make_alpha_minus_k(n, b, eps, alpha, int(erase), T)
        except InputError as exc:
            raise ConfigError("instance", str(exc)) from None
        return inst, alpha
    try:
        if "dists" in spec:
            grid = [[DistributionSpec.from_dict(d) for d in row] for row in spec["dists"]]
            return Instance.from_dists(grid, T), None
        if "means" in spec:
            return Instance.from_means(spec["means"], T, spec.get("kind", "bernoulli")), None
    except (InputError, KeyError, TypeError) as exc:
        raise ConfigError("instance", str(exc)) from None
    raise ConfigError("instance", "needs a preset, 'means', 'dists' or type 'alpha'")


@dataclass
class ExperimentConfig:
    instance: dict
    policies: list[Policy]
    T: list[int]
    seeds: int = 1
    master_seed: int = 0
    c_rad: float | None = None
    epsilon_schedule: str = "sqrt_n_log_n"
    epsilon: float = 0.1
    clip_ucb: bool = True
    utility_source: str = "ucb"
    matroid: dict | None = None
    opt_replications: int = 200
    plot: bool = True
    output_dir: str | None = None
    parallelism: int = 1
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {version}")
        known = {"instance", "policies", "T", "seeds", "master_seed", "c_rad", "epsilon_schedule",
                 "epsilon", "clip_ucb", "utility_source", "matroid", "opt_replications", "plot",
                 "output_dir", "parallelism", "schema_version"}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        if "instance" not in d:
            raise ConfigError("instance", "required")
        instance = normalize_instance(d["instance"])

        policies_raw = d.get("policies")
        if not isinstance(policies_raw, list) or not policies_raw:
            raise ConfigError("policies", "must be a nonempty list")
        policies = []
        for k, p in enumerate(policies_raw):
            try:
                policies.append(Policy.parse(p))
            except (ConfigurationError, KeyError, ValueError) as exc:
                raise ConfigError(f"policies[{k}]", str(exc)) from None
        labels = [p.label for p in policies]
        if len(set(labels)) != len(labels):
            raise ConfigError("policies", "duplicate policy entries")

        grid = d.get("T")
        if isinstance(grid, int):
            grid = [grid]
        if not isinstance(grid, list) or not grid or not all(isinstance(t, int) and t >= 1 for t in grid):
            raise ConfigError("T", "must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("T", "grid must be strictly increasing")

        seeds = d.get("seeds", 1)
        if not isinstance(seeds, int) or seeds < 1:
            raise ConfigError("seeds", "must be an integer >= 1")
        schedule = d.get("epsilon_schedule", "sqrt_n_log_n")
        if schedule not in SCHEDULES:
            raise ConfigError("epsilon_schedule", f"must be one of {SCHEDULES}")
        parallelism = d.get("parallelism", 1)
        if not isinstance(parallelism, int) or parallelism < 1:
            raise ConfigError("parallelism", "must be an integer >= 1")

        cfg = cls(
            instance=instance,
            policies=policies,
            T=list(grid),
            seeds=seeds,
            master_seed=int(d.get("master_seed", 0)),
            c_rad=d.get("c_rad"),
            epsilon_schedule=schedule,
            epsilon=float(d.get("epsilon", 0.1)),
            clip_ucb=bool(d.get("clip_ucb", True)),
            utility_source=d.get("utility_source", "ucb"),
            matroid=d.get("matroid"),
            opt_replications=int(d.get("opt_replications", 200)),
            plot=bool(d.get("plot", True)),
            output_dir=d.get("output_dir"),
            parallelism=parallelism,
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        try:
            self.policy_config()
        except ConfigurationError as exc:
            raise ConfigError("epsilon", str(exc)) from None
        inst, _ = build_instance(self.instance, self.T[0], RngHandle(0, ALPHA_STREAM))
        if self.matroid is not None:
            try:
                mat.from_spec(self.matroid, inst.n, inst.m)
            except (ConfigurationError, InputError, KeyError, TypeError) as exc:
                raise ConfigError("matroid", str(exc)) from None
        elif any(p.name == "algorithm1_matroid" for p in self.policies):
            raise ConfigError("matroid", "algorithm1_matroid needs a matroid spec")
        if self.opt_replications < 1:
            raise ConfigError("opt_replications", "must be >= 1")

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(epsilon=self.epsilon, epsilon_schedule=self.epsilon_schedule,
                            clip_ucb=self.clip_ucb, c_rad=self.c_rad,
                            utility_source=self.utility_source)

    def content(self) -> dict:
        """Everything that determines results; execution settings are left out."""
        return {
            "schema_version": self.schema_version,
            "instance": self.instance,
            "policies": [{"name": p.name, "owner": None if p.owner is None else list(p.owner)}
                         for p in self.policies],
            "T": self.T,
            "seeds": self.seeds,
            "master_seed": self.master_seed,
            "c_rad": self.c_rad,
            "epsilon_schedule": self.epsilon_schedule,
            "epsilon": self.epsilon,
            "clip_ucb": self.clip_ucb,
            "utility_source": self.utility_source,
            "matroid": self.matroid,
            "opt_replications": self.opt_replications,
        }

    def to_dict(self) -> dict:
        d = self.content()
        d.update(plot=self.plot, output_dir=self.output_dir, parallelism=self.parallelism)
        return d

    @property
    def fingerprint(self) -> str:
        return content_hash(self.content())

    def matroid_oracle(self, n: int, m: int):
        return None if self.matroid is None else mat.from_spec(self.matroid, n, m)
