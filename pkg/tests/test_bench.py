import numpy as np
import pytest

from edgesched.agent import SeedBundle
from edgesched.allocator import Evaluator, local_capacity
from edgesched.annealing import AnnealConfig
from edgesched.bench import (BENCH_EPOCH_BASE, PsoConfig, asa_only,
                             exhaustive_best, format_report, greedy_baseline,
                             nrr, pso_oracle, random_baseline, run_benchmark,
                             window_rewards, write_bench_csv)
from edgesched.mec import (MecSpec, RadioParams, Scenario, Task, UeSpec,
                           random_scenario, sample_channel_state)


def toy(n=4, m=2, seed=0, **kw):
    kw.setdefault("weights", (0.5, 2.0))
    scen = random_scenario(n, m, rng_seed=seed, **kw)
    return scen, sample_channel_state(scen, 1)


class TestGreedy:
    def test_all_offload_when_capacity_ample(self):
        # huge MEC budget, slow local CPUs: greedy keeps everyone remote,
        # each UE on its nearest server
        scen, ch = toy(f_mec_max=1e12, f_local_max=1e8)
        dec = greedy_baseline(scen, ch)
        assert np.all(dec.assign > 0)
        from edgesched.mec import distance_matrix
        np.testing.assert_array_equal(dec.assign,
                                      distance_matrix(scen).argmin(axis=1) + 1)

    def test_sheds_load_when_server_weak(self):
        # tiny MEC budget, decent local CPUs: at least one UE must fall back
        scen, ch = toy(f_mec_max=5e8, f_local_max=1e9)
        dec = greedy_baseline(scen, ch)
        assert np.any(dec.assign == 0)

    def test_hand_example_single_ue(self):
        # one UE next to one MEC: remote easily wins with a fat server
        ue = UeSpec(position=(10.0, 10.0), task=Task(8e5, 1e9),
                    f_local_max=5e8)
        scen = Scenario(ues=(ue,), mecs=(MecSpec(position=(12.0, 10.0),
                                                 f_max=1e10),),
                        radio=RadioParams(noise_w=3e-9))
        ch = sample_channel_state(scen, 1)
        dec = greedy_baseline(scen, ch)
        ev = Evaluator(scen, ch)
        remote = ev.upload_lat[0, 0] / ue.weight + ue.task.cycles / 1e10
        local = ue.task.cycles / local_capacity(ue)
        assert (dec.assign[0] == 1) == (remote <= local)


class TestRandom:
    def test_uniform_over_choices(self):
        scen, ch = toy(n=1, m=2)
        rng = np.random.default_rng(0)
        counts = np.zeros(3)
        trials = 30_000
        for _ in range(trials):
            counts[random_baseline(scen, ch, rng).assign[0]] += 1
        np.testing.assert_allclose(counts / trials, [1 / 3] * 3, atol=0.01)


class TestOracles:
    def test_pso_finds_toy_optimum(self):
        hits = 0
        for trial in range(20):
            scen, ch = toy(n=4, m=2, seed=50 + trial)
            _, f_opt = exhaustive_best(scen, ch)
            _, f_pso = pso_oracle(scen, ch, PsoConfig(particles=30, iters=80),
                                  np.random.default_rng(trial))
            hits += abs(f_pso - f_opt) < 1e-9
        assert hits >= 19

    def test_pso_beats_or_matches_baselines(self):
        scen, ch = toy(n=6, m=2, seed=9)
        ev = Evaluator(scen, ch)
        _, f_pso = pso_oracle(scen, ch, PsoConfig(), np.random.default_rng(1))
        assert f_pso <= ev.latency_of(greedy_baseline(scen, ch).assign) + 1e-12
        res = asa_only(scen, ch, AnnealConfig(), 100, np.random.default_rng(2))
        assert f_pso <= res.objective + 1e-9

    def test_exhaustive_small_space(self):
        scen, ch = toy(n=2, m=1, seed=3)
        ev = Evaluator(scen, ch)
        best, f_opt = exhaustive_best(scen, ch)
        brute = min(ev.latency_of(np.array([a, b]))
                    for a in range(2) for b in range(2))
        assert f_opt == pytest.approx(brute, rel=1e-12)
        assert ev.latency_of(best) == pytest.approx(f_opt, rel=1e-12)

    def test_exhaustive_rejects_large_space(self):
        scen, ch = toy(n=30, m=2)
        with pytest.raises(ValueError):
            exhaustive_best(scen, ch)

    def test_asa_only_uses_budget(self):
        scen, ch = toy(seed=4)
        res = asa_only(scen, ch, AnnealConfig(), 37, np.random.default_rng(0))
        assert len(res.trace) == 38


class TestNrr:
    def test_plain_ratio(self):
        assert nrr(0.5, 1.0) == 0.5
        assert nrr(1.0, 1.0) == 1.0

    def test_above_one_clamped(self, caplog):
        import logging
        with caplog.at_level(logging.WARNING, logger="edgesched.bench"):
            assert nrr(1.2, 1.0) == 1.0001
        assert "above 1" in caplog.text

    def test_oracle_reward_must_be_positive(self):
        with pytest.raises(ValueError):
            nrr(0.5, 0.0)


class TestRunBenchmark:
    def test_baselines_only(self):
        scen, _ = toy(seed=5)
        rep = run_benchmark(scen, None, None, AnnealConfig(), n_channels=4,
                            asa_budget=30, rng=np.random.default_rng(0),
                            channel_seed=scen.rng_seed)
        names = [s.name for s in rep.stats]
        assert names == ["greedy", "random", "asa"]
        assert rep.n_channels == 4
        with pytest.raises(KeyError):
            rep.by_name("policy")

    def test_reward_is_reciprocal_mean_latency(self):
        scen, _ = toy(seed=6)
        rep = run_benchmark(scen, None, None, AnnealConfig(), n_channels=5,
                            asa_budget=20, rng=np.random.default_rng(1),
                            channel_seed=scen.rng_seed)
        for s in rep.stats:
            assert s.reward == pytest.approx(1.0 / s.latency_s, rel=1e-12)

    def test_asa_dominates_random(self):
        scen, _ = toy(n=6, seed=7)
        rep = run_benchmark(scen, None, None, AnnealConfig(), n_channels=6,
                            asa_budget=150, rng=np.random.default_rng(2),
                            channel_seed=scen.rng_seed)
        assert rep.by_name("asa").latency_s < rep.by_name("random").latency_s

    def test_oracle_attaches_nrr(self):
        scen, _ = toy(seed=8)
        rep = run_benchmark(scen, None, None, AnnealConfig(), n_channels=3,
                            asa_budget=60, rng=np.random.default_rng(3),
                            pso_cfg=PsoConfig(particles=25, iters=60),
                            channel_seed=scen.rng_seed)
        assert [s.name for s in rep.stats] == ["greedy", "random", "asa",
                                               "oracle"]
        for s in rep.stats[:-1]:
            assert s.nrr_mean is not None and 0.0 <= s.nrr_mean <= 1.0001
            assert s.nrr_best is not None and s.nrr_best >= s.nrr_mean - 1e-12
        assert rep.by_name("oracle").nrr_mean is None

    def test_draws_are_shared_and_reproducible(self):
        scen, _ = toy(seed=9)
        kw = dict(n_channels=3, asa_budget=25, channel_seed=scen.rng_seed)
        a = run_benchmark(scen, None, None, AnnealConfig(),
                          rng=np.random.default_rng(5), **kw)
        b = run_benchmark(scen, None, None, AnnealConfig(),
                          rng=np.random.default_rng(5), **kw)
        for sa, sb in zip(a.stats, b.stats):
            assert sa.latency_s == sb.latency_s

    def test_bench_epochs_disjoint_from_training(self):
        assert BENCH_EPOCH_BASE > 1_000_000


class TestReporting:
    def make_report(self):
        scen, _ = toy(seed=10)
        return run_benchmark(scen, None, None, AnnealConfig(), n_channels=3,
                             asa_budget=20, rng=np.random.default_rng(0),
                             channel_seed=scen.rng_seed)

    def test_csv_schema(self, tmp_path):
        rep = self.make_report()
        p = tmp_path / "bench.csv"
        write_bench_csv(rep, p)
        lines = p.read_text().splitlines()
        assert lines[0] == ("strategy,decision_time_s,decision_time_mean_s,"
                            "latency_s,reward,mean_draw_reward,nrr_mean,"
                            "nrr_best")
        assert len(lines) == 4
        row = lines[1].split(",")
        assert row[0] == "greedy"
        assert float(row[3]) == rep.by_name("greedy").latency_s

    def test_format_report_lists_all(self):
        rep = self.make_report()
        text = format_report(rep)
        for name in ("greedy", "random", "asa"):
            assert name in text


class TestWindowRewards:
    def test_policy_side_uses_logged_rewards(self):
        from edgesched.agent import EpochLog

        scen, _ = toy(seed=11)
        logs = [EpochLog(epoch=e, reward=float(e), latency=1.0 / e, loss=None,
                         delta_loss=None, t_sa=1, asa_best_objective=1.0,
                         buffer_size=1, mean_priority=1.0, evictions=0,
                         preserve_hits=0, decision_ms=0.0, asa_ms=0.0,
                         decision=np.zeros(4, dtype=int))
                for e in range(1, 11)]
        out = window_rewards(logs, scen, channel_seed=scen.rng_seed, window=4,
                             rng=np.random.default_rng(0))
        assert out["policy"] == pytest.approx(np.mean([7, 8, 9, 10]))
        assert set(out) == {"policy", "greedy", "random"}
        assert out["greedy"] > 0 and out["random"] > 0
