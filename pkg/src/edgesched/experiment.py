"""End-to-end experiment drivers shared by the CLI and the test suite.

``train_experiment`` runs the full pipeline (scenario, autoencoder
pretraining, online scheduling loop) and optionally writes the artifact set:
resolved scenario, compressor and policy checkpoints, the deterministic
epoch trace and the separate timing trace.  ``bench_experiment`` scores a
trained policy against the baselines; ``dynamic_experiment`` sweeps the
server count and reports accuracy, compression and NRR statistics around a
mid-run workload shift.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agent import (AgentConfig, RunResult, SeedBundle, build_policy, run,
                    write_epoch_csv, write_timings_csv)
from .autoencoder import AutoencoderConfig, ChannelCompressor, default_dims
from .bench import BenchReport, PsoConfig, nrr, pso_oracle, run_benchmark, write_bench_csv
from .config import (DrlSection, ExperimentConfig, SaeSection, build_scenario,
                     dump_scenario, load_scenario)
from .mec import Scenario, sample_channel_state
from .neural import Network, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

# Channel epoch namespaces disjoint from training epochs (1..T_DRL) and from
# the benchmark base: pretraining and held-out accuracy evaluation each get
# their own range.
PRETRAIN_EPOCH_BASE = 2_000_001
HELDOUT_EPOCH_BASE = 3_000_001


@dataclass
class TrainArtifacts:
    scenario: Scenario
    compressor: ChannelCompressor
    result: RunResult
    seeds: SeedBundle
    sae_trace: list[float]


def autoencoder_config(cfg: ExperimentConfig, n_ues: int,
                       n_mecs: int) -> AutoencoderConfig:
    sae = cfg.sae
    dims = sae.dims or default_dims(n_ues, n_mecs, sae.out_dim)
    if dims[0] != n_ues * n_mecs:
        raise ValueError(f"sae dims {dims} do not start at N*M = {n_ues * n_mecs}")
    return AutoencoderConfig(dims=list(dims), gamma1=sae.gamma1,
                             gamma2=sae.gamma2, t_sae=sae.t_sae,
                             memory=sae.memory, threshold=sae.threshold,
                             batch=sae.batch, lr=sae.lr,
                             activation=sae.activation,
                             sync_period=sae.sync_period,
                             refresh_iters=sae.refresh_iters,
                             pretrain_samples=sae.pretrain_samples)


def agent_config(drl: DrlSection, state_dim: int, n_ues: int,
                 n_mecs: int) -> AgentConfig:
    head = n_ues * (n_mecs + 1)
    if drl.dims is None:
        hidden = [120, 80]
    else:
        dims = list(drl.dims)
        if len(dims) < 2 or dims[0] != state_dim or dims[-1] != head:
            raise ValueError(
                f"drl dims {dims} must run from the encoded state size "
                f"{state_dim} to the policy head {head}")
        hidden = dims[1:-1]
    return AgentConfig(hidden_dims=hidden, lambda_reg=drl.lambda_reg,
                       t_drl=drl.t_drl, train_interval=drl.phi,
                       batch=drl.batch, lr=drl.lr,
                       hidden_activation=drl.hidden_activation,
                       weight_shift_epoch=drl.weight_shift_epoch,
                       search=drl.search, replay_mode=drl.replay_mode,
                       epsilon_greedy=drl.epsilon_greedy,
                       checkpoint_interval=drl.checkpoint_interval)


def pretrain_compressor(cfg: ExperimentConfig, scenario: Scenario,
                        seeds: SeedBundle) -> tuple[ChannelCompressor,
                                                    np.random.Generator,
                                                    list[float]]:
    """Build the compressor and pretrain it on a dedicated channel stream."""
    ae_cfg = autoencoder_config(cfg, scenario.n_ues, scenario.n_mecs)
    sae_rng = np.random.default_rng(seeds.sae)
    comp = ChannelCompressor(ae_cfg, scenario.n_ues, scenario.n_mecs,
                             rng=sae_rng)
    mats = [sample_channel_state(scenario, PRETRAIN_EPOCH_BASE + i,
                                 seeds.channel).gains
            for i in range(ae_cfg.pretrain_samples)]
    trace = comp.pretrain(mats, sae_rng)
    return comp, sae_rng, trace


def heldout_accuracy(compressor: ChannelCompressor, scenario: Scenario,
                     seeds: SeedBundle, n_samples: int = 200) -> float:
    mats = [sample_channel_state(scenario, HELDOUT_EPOCH_BASE + i,
                                 seeds.channel).gains
            for i in range(n_samples)]
    return compressor.accuracy(mats)


def train_experiment(cfg: ExperimentConfig,
                     out_dir: str | Path | None = None) -> TrainArtifacts:
    seeds = SeedBundle.from_master(cfg.seed)
    scenario = build_scenario(cfg.scenario, fallback_seed=cfg.seed)
    logger.info("scenario: %d UEs, %d MECs, seed %d", scenario.n_ues,
                scenario.n_mecs, cfg.seed)
    comp, sae_rng, sae_trace = pretrain_compressor(cfg, scenario, seeds)
    if sae_trace:
        logger.info("autoencoder pretrained: loss %.5f -> %.5f",
                    sae_trace[0], sae_trace[-1])
    drl_cfg = agent_config(cfg.drl, comp.out_dim, scenario.n_ues,
                           scenario.n_mecs)
    result = run(scenario, comp, drl_cfg, cfg.asa, cfg.replay, seeds,
                 sae_rng=sae_rng, out_dir=out_dir)
    tail = result.logs[-min(200, len(result.logs)):]
    logger.info("run finished: mean reward over last %d epochs %.5f",
                len(tail), float(np.mean([r.reward for r in tail])))
    artifacts = TrainArtifacts(scenario=scenario, compressor=comp,
                               result=result, seeds=seeds,
                               sae_trace=sae_trace)
    if out_dir is not None:
        _write_train_outputs(artifacts, cfg, Path(out_dir))
    return artifacts


def _write_train_outputs(art: TrainArtifacts, cfg: ExperimentConfig,
                         out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump_scenario(art.scenario, out / "scenario_resolved.yaml")
    art.compressor.save(out / "sae.json", seed=cfg.seed,
                        epoch=len(art.result.logs))
    save_checkpoint(art.result.policy, out / "policy.json", seed=cfg.seed,
                    epoch=len(art.result.logs))
    write_epoch_csv(art.result.logs, out / "epochs.csv")
    write_timings_csv(art.result.logs, out / "timings.csv")


def load_artifacts(cfg: ExperimentConfig, out: Path) -> TrainArtifacts | None:
    """Reload a trained artifact set if all files exist, else None."""
    needed = [out / "scenario_resolved.yaml", out / "sae.json",
              out / "policy.json"]
    if not all(p.exists() for p in needed):
        return None
    scenario = load_scenario(out / "scenario_resolved.yaml")
    comp = ChannelCompressor.load(out / "sae.json")
    policy, _ = load_checkpoint(out / "policy.json")
    seeds = SeedBundle.from_master(cfg.seed)
    result = RunResult(policy=policy, logs=[], scenario_final=scenario,
                       shift_epoch=None)
    return TrainArtifacts(scenario=scenario, compressor=comp, result=result,
                          seeds=seeds, sae_trace=[])


def bench_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                     artifacts: TrainArtifacts | None = None) -> BenchReport:
    """Benchmark a trained policy, training one first when necessary."""
    out = None if out_dir is None else Path(out_dir)
    if artifacts is None and out is not None:
        artifacts = load_artifacts(cfg, out)
        if artifacts is not None:
            logger.info("loaded trained artifacts from %s", out)
    if artifacts is None:
        artifacts = train_experiment(cfg, out_dir)
    scenario = artifacts.result.scenario_final
    report = run_benchmark(
        scenario, artifacts.result.policy, artifacts.compressor, cfg.asa,
        n_channels=cfg.bench.n_channels, asa_budget=cfg.bench.asa_budget,
        rng=np.random.default_rng(artifacts.seeds.bench),
        pso_cfg=cfg.bench.pso if cfg.bench.with_oracle else None,
        channel_seed=artifacts.seeds.channel)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_bench_csv(report, out / "bench.csv")
    return report


def nrr_samples(result: RunResult, scenario_pre: Scenario,
                seeds: SeedBundle, pso_cfg: PsoConfig, stride: int,
                rng: np.random.Generator) -> tuple[list[float], list[float]]:
    """NRR of the online decision at every ``stride``-th epoch.

    Channels are regenerated from the epoch indices; evaluation uses the
    weights active at that epoch (pre- or post-shift scenario).  Returns the
    pre-shift and post-shift sample lists; without a shift everything lands
    in the first list.
    """
    shift = result.shift_epoch or (len(result.logs) + 1)
    pre: list[float] = []
    post: list[float] = []
    for row in result.logs:
        if row.epoch % stride != 0:
            continue
        scen = scenario_pre if row.epoch < shift else result.scenario_final
        channel = sample_channel_state(scen, row.epoch, seeds.channel)
        _, f_opt = pso_oracle(scen, channel, pso_cfg, rng)
        value = nrr(row.reward, 1.0 / f_opt)
        (pre if row.epoch < shift else post).append(value)
    return pre, post


def _dynamic_row(cfg: ExperimentConfig, m: int) -> dict:
    n = cfg.scenario.n_ues
    out_dim = cfg.dynamic.out_dim if cfg.dynamic.out_dim is not None else n
    scen_cfg = replace(cfg.scenario, n_mecs=m, mec_positions=None)
    sae_cfg = replace(cfg.sae, dims=None, out_dim=out_dim)
    drl_cfg = replace(cfg.drl,
                      weight_shift_epoch=cfg.drl.weight_shift_epoch
                      or cfg.drl.t_drl // 2)
    sub = replace(cfg, scenario=scen_cfg, sae=sae_cfg, drl=drl_cfg)
    art = train_experiment(sub)
    comp = art.compressor
    acc = heldout_accuracy(comp, art.scenario, art.seeds,
                           cfg.dynamic.accuracy_samples)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(art.seeds.bench, spawn_key=(m,))))
    pre, post = nrr_samples(art.result, art.scenario, art.seeds,
                            cfg.bench.pso, cfg.dynamic.nrr_stride, rng)
    return {
        "m": m,
        "accuracy": acc,
        "compression_ratio": comp.compression_ratio(),
        "f_best": max(pre) if pre else float("nan"),
        "f_avg": float(np.mean(pre)) if pre else float("nan"),
        "s_best": max(post) if post else float("nan"),
        "s_avg": float(np.mean(post)) if post else float("nan"),
    }


def dynamic_experiment(cfg: ExperimentConfig,
                       out_dir: str | Path | None = None) -> list[dict]:
    """Sweep the MEC count and collect the per-M summary rows."""
    counts = list(cfg.dynamic.mec_counts)
    if cfg.dynamic.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.dynamic.workers) as pool:
            rows = list(pool.map(_dynamic_row, [cfg] * len(counts), counts))
    else:
        rows = [_dynamic_row(cfg, m) for m in counts]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table_csv(rows, out / "table3.csv")
    return rows


_TABLE_COLUMNS = ("m", "accuracy", "compression_ratio", "f_best", "f_avg",
                  "s_best", "s_avg")


def write_table_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TABLE_COLUMNS)
        for row in rows:
            writer.writerow([row["m"]] + [repr(float(row[c]))
                                          for c in _TABLE_COLUMNS[1:]])


def format_table(rows: list[dict]) -> str:
    lines = [f"{'M':>2} {'acc':>7} {'CR':>5} {'F-Best':>7} {'F-Avg':>7} "
             f"{'S-Best':>7} {'S-Avg':>7}"]
    for r in rows:
        lines.append(f"{r['m']:>2} {r['accuracy']:>7.4f} "
                     f"{r['compression_ratio']:>5.2f} {r['f_best']:>7.4f} "
                     f"{r['f_avg']:>7.4f} {r['s_best']:>7.4f} "
                     f"{r['s_avg']:>7.4f}")
    return "\n".join(lines)
