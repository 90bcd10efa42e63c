"""YAML experiment configuration and scenario (de)serialisation.

A config file holds one mapping with optional sections ``scenario``, ``sae``,
``drl``, ``asa``, ``replay``, ``bench`` and ``dynamic`` plus top-level
``seed`` and ``out``.  Unknown keys raise immediately: a typo in a knob name
should never silently fall back to a default.  Scenario files written by
``gen-scenario`` pin every UE explicitly and load back bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .annealing import AnnealConfig
from .bench import PsoConfig
from .mec import (MecSpec, RadioParams, Scenario, Task, UeSpec,
                  default_mec_positions, random_scenario)
from .replay import ReplayConfig


def _check_keys(section: str, data: dict, allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {section} keys: {sorted(unknown)}")


@dataclass
class ScenarioConfig:
    """Synthesis parameters for a scenario, or a pointer to an explicit one.

    ``weights`` accepts a number (same weight everywhere), a list with one
    entry per UE, or a {low, high} mapping for a uniform draw from the
    scenario seed; ``cycles`` under ``task`` accepts the same scalar or
    {low, high} forms.  The defaults describe the desk-scale profile used
    across the bundled experiments.
    """

    n_ues: int = 10
    n_mecs: int = 2
    area_m: float = 50.0
    mec_positions: list | None = None
    bandwidth_hz: float = 1e6
    noise_w: float = 3e-9
    beta0: float = 1e-3
    p_ue_max_w: float = 1.0
    min_distance_m: float = 1.0
    fading: str = "exponential"
    data_bits: float = 8e5
    cycles: Any = field(default_factory=lambda: {"low": 2e8, "high": 4e9})
    weights: Any = field(default_factory=lambda: {"low": 0.5, "high": 2.0})
    f_local_max: float = 2.5e8
    f_mec_max: float = 4e9
    kappa: float = 1e-27
    v: float = 3.0
    rng_seed: int | None = None
    ues: list | None = None
    file: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        _check_keys("scenario", data, {
            "n_ues", "n_mecs", "area_m", "mec_positions", "bandwidth_hz",
            "noise_w", "beta0", "p_ue_max_w", "min_distance_m", "fading",
            "task", "weights", "f_local_max", "f_mec_max", "kappa", "v",
            "rng_seed", "ues", "file", "radio", "mecs",
        })
        task = data.pop("task", None)
        if task is not None:
            _check_keys("scenario.task", task, {"data_bits", "cycles"})
            if "data_bits" in task:
                data["data_bits"] = task["data_bits"]
            if "cycles" in task:
                data["cycles"] = task["cycles"]
        radio = data.pop("radio", None)
        if radio is not None:
            _check_keys("scenario.radio", radio, {
                "bandwidth_hz", "noise_w", "beta0", "min_distance_m", "fading"})
            data.update(radio)
        mecs = data.pop("mecs", None)
        if mecs is not None:
            data["mec_positions"] = [list(m["position"]) for m in mecs]
            data["f_mec_max"] = mecs[0].get("f_max", cls.f_mec_max)
            data["n_mecs"] = len(mecs)
        return cls(**data)


def build_scenario(cfg: ScenarioConfig, fallback_seed: int = 0) -> Scenario:
    """Materialise a scenario: from file, from explicit UEs, or sampled."""
    if cfg.file is not None:
        return load_scenario(cfg.file)
    seed = cfg.rng_seed if cfg.rng_seed is not None else fallback_seed
    radio = RadioParams(bandwidth_hz=cfg.bandwidth_hz, noise_w=cfg.noise_w,
                        beta0=cfg.beta0, min_distance_m=cfg.min_distance_m,
                        fading=cfg.fading)
    if cfg.ues is not None:
        ues = tuple(_ue_from_dict(u, cfg) for u in cfg.ues)
        positions = cfg.mec_positions or default_mec_positions(cfg.n_mecs,
                                                               cfg.area_m)
        mecs = tuple(MecSpec(position=(float(x), float(y)), f_max=cfg.f_mec_max)
                     for x, y in positions)
        return Scenario(ues=ues, mecs=mecs, radio=radio, area_m=cfg.area_m,
                        rng_seed=seed)
    weights: Any = cfg.weights
    if isinstance(weights, dict):
        weights = (float(weights["low"]), float(weights["high"]))
    elif isinstance(weights, list):
        weights = list(map(float, weights))
    cycles_range = None
    template_cycles = cfg.cycles
    if isinstance(cfg.cycles, dict):
        cycles_range = (float(cfg.cycles["low"]), float(cfg.cycles["high"]))
        template_cycles = cycles_range[0]
    return random_scenario(
        cfg.n_ues, cfg.n_mecs, area_m=cfg.area_m, rng_seed=seed,
        mec_positions=cfg.mec_positions, radio=radio,
        task=Task(data_bits=cfg.data_bits, cycles=float(template_cycles)),
        weights=weights, cycles_range=cycles_range,
        f_local_max=cfg.f_local_max, p_max=cfg.p_ue_max_w,
        f_mec_max=cfg.f_mec_max, kappa=cfg.kappa, v=cfg.v)


def _ue_from_dict(u: dict, cfg: ScenarioConfig) -> UeSpec:
    cycles = u.get("cycles", cfg.cycles)
    if isinstance(cycles, dict):
        raise ValueError("explicit UEs must pin cycles when the scenario "
                         "default is a range")
    return UeSpec(
        position=(float(u["position"][0]), float(u["position"][1])),
        task=Task(data_bits=float(u.get("data_bits", cfg.data_bits)),
                  cycles=float(cycles)),
        weight=float(u.get("weight", 1.0)),
        f_local_max=float(u.get("f_local_max", cfg.f_local_max)),
        p_max=float(u.get("p_max", cfg.p_ue_max_w)),
        kappa=float(u.get("kappa", cfg.kappa)),
        v=float(u.get("v", cfg.v)))


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "area_m": scenario.area_m,
        "rng_seed": scenario.rng_seed,
        "radio": {
            "bandwidth_hz": scenario.radio.bandwidth_hz,
            "noise_w": scenario.radio.noise_w,
            "beta0": scenario.radio.beta0,
            "min_distance_m": scenario.radio.min_distance_m,
            "fading": scenario.radio.fading,
        },
        "mecs": [{"position": list(m.position), "f_max": m.f_max}
                 for m in scenario.mecs],
        "ues": [{
            "position": list(u.position),
            "data_bits": u.task.data_bits,
            "cycles": u.task.cycles,
            "weight": u.weight,
            "f_local_max": u.f_local_max,
            "p_max": u.p_max,
            "kappa": u.kappa,
            "v": u.v,
        } for u in scenario.ues],
    }


def dump_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scenario),
                                         sort_keys=True))


def load_scenario(source: str | Path | dict) -> Scenario:
    data = source if isinstance(source, dict) else yaml.safe_load(
        Path(source).read_text())
    _check_keys("scenario file", data, {"area_m", "rng_seed", "radio",
                                        "mecs", "ues"})
    radio = RadioParams(**data["radio"])
    mecs = tuple(MecSpec(position=tuple(map(float, m["position"])),
                         f_max=float(m["f_max"])) for m in data["mecs"])
    ues = tuple(UeSpec(position=tuple(map(float, u["position"])),
                       task=Task(data_bits=float(u["data_bits"]),
                                 cycles=float(u["cycles"])),
                       weight=float(u["weight"]),
                       f_local_max=float(u["f_local_max"]),
                       p_max=float(u["p_max"]), kappa=float(u["kappa"]),
                       v=float(u["v"])) for u in data["ues"])
    return Scenario(ues=ues, mecs=mecs, radio=radio,
                    area_m=float(data["area_m"]),
                    rng_seed=int(data["rng_seed"]))


@dataclass
class SaeSection:
    dims: list[int] | None = None
    out_dim: int | None = None
    gamma1: float = 0.5
    gamma2: float = 0.08
    t_sae: int = 500
    memory: int = 4096
    threshold: float = 0.01
    batch: int = 32
    lr: float = 1e-3
    activation: str = "sigmoid"
    sync_period: int = 200
    refresh_iters: int = 20
    pretrain_samples: int = 2000

    @classmethod
    def from_dict(cls, data: dict) -> "SaeSection":
        _check_keys("sae", data, {f.name for f in
                                  cls.__dataclass_fields__.values()})  # type: ignore[attr-defined]
        return cls(**data)


@dataclass
class DrlSection:
    dims: list[int] | None = None
    lambda_reg: float = 0.02
    t_drl: int = 3000
    phi: int = 10
    batch: int = 64
    lr: float = 1e-3
    hidden_activation: str = "relu"
    weight_shift_epoch: int | None = None
    search: str = "asa"
    replay_mode: str = "prioritized"
    epsilon_greedy: float = 0.0
    checkpoint_interval: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "DrlSection":
        data = dict(data)
        if "lambda" in data:
            data["lambda_reg"] = data.pop("lambda")
        _check_keys("drl", data, {f.name for f in
                                  cls.__dataclass_fields__.values()})  # type: ignore[attr-defined]
        return cls(**data)


def anneal_from_dict(data: dict) -> AnnealConfig:
    data = dict(data)
    if "t_sa" in data:
        data["t_sa_init"] = data.pop("t_sa")
    _check_keys("asa", data, {"t0", "phi_cool", "t_sa_init", "epsilon",
                              "t_sa_max"})
    return AnnealConfig(**data)


def replay_from_dict(data: dict) -> ReplayConfig:
    _check_keys("replay", data, {"capacity", "rho_max", "tau", "eps"})
    return ReplayConfig(**data)


@dataclass
class BenchSection:
    n_channels: int = 100
    asa_budget: int = 200
    with_oracle: bool = False
    pso: PsoConfig = field(default_factory=PsoConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchSection":
        data = dict(data)
        _check_keys("bench", data, {"n_channels", "asa_budget", "with_oracle",
                                    "pso"})
        pso = data.pop("pso", None)
        out = cls(**data)
        if pso is not None:
            _check_keys("bench.pso", pso, {"particles", "iters", "inertia",
                                           "cognitive", "social"})
            out.pso = PsoConfig(**pso)
        return out


@dataclass
class DynamicSection:
    mec_counts: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    nrr_stride: int = 50
    workers: int = 1
    out_dim: int | None = None
    accuracy_samples: int = 200

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicSection":
        _check_keys("dynamic", data, {f.name for f in
                                      cls.__dataclass_fields__.values()})  # type: ignore[attr-defined]
        return cls(**data)


@dataclass
class ExperimentConfig:
    seed: int = 1
    out: str | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sae: SaeSection = field(default_factory=SaeSection)
    drl: DrlSection = field(default_factory=DrlSection)
    asa: AnnealConfig = field(default_factory=AnnealConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    bench: BenchSection = field(default_factory=BenchSection)
    dynamic: DynamicSection = field(default_factory=DynamicSection)


def config_from_dict(data: dict) -> ExperimentConfig:
    _check_keys("config", data, {"seed", "out", "scenario", "sae", "drl",
                                 "asa", "replay", "bench", "dynamic"})
    return ExperimentConfig(
        seed=int(data.get("seed", 1)),
        out=data.get("out"),
        scenario=ScenarioConfig.from_dict(data.get("scenario", {})),
        sae=SaeSection.from_dict(data.get("sae", {})),
        drl=DrlSection.from_dict(data.get("drl", {})),
        asa=anneal_from_dict(data.get("asa", {})),
        replay=replay_from_dict(data.get("replay", {})),
        bench=BenchSection.from_dict(data.get("bench", {})),
        dynamic=DynamicSection.from_dict(data.get("dynamic", {})),
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    data = yaml.safe_load(Path(path).read_text()) or {}
    return config_from_dict(data)


def override(cfg: ExperimentConfig, *, seed: int | None = None,
             out: str | None = None) -> ExperimentConfig:
    """Apply command-line overrides on top of a loaded config."""
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out is not None:
        cfg = replace(cfg, out=out)
    return cfg
