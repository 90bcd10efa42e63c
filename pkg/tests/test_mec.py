import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgesched.mec import (ChannelState, MecSpec, OffloadDecision, RadioParams,
                           Scenario, Task, UeSpec, channel_gain, data_rate,
                           default_mec_positions, distance, distance_matrix,
                           random_scenario, reweighted, sample_channel_state,
                           sample_fading, weighted_latency)


def make_scenario(n=4, m=2, seed=0, **kw):
    return random_scenario(n, m, rng_seed=seed, **kw)


class TestConstruction:
    def test_task_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Task(data_bits=0.0, cycles=1e9)
        with pytest.raises(ValueError):
            Task(data_bits=1e5, cycles=-1.0)

    def test_position_outside_area_rejected(self):
        ue = UeSpec(position=(60.0, 10.0), task=Task(1e5, 1e9))
        mec = MecSpec(position=(25.0, 25.0))
        with pytest.raises(ValueError, match="outside area"):
            Scenario(ues=(ue,), mecs=(mec,), area_m=50.0)

    def test_empty_scenario_rejected(self):
        with pytest.raises(ValueError):
            Scenario(ues=(), mecs=(MecSpec(position=(1.0, 1.0)),))

    def test_unknown_fading_rejected(self):
        with pytest.raises(ValueError):
            RadioParams(fading="rician")

    def test_channel_state_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            ChannelState(gains=np.array([[1e-6, 0.0]]), epoch=1)

    def test_decision_bounds(self):
        with pytest.raises(ValueError):
            OffloadDecision(assign=np.array([0, 3]), n_mecs=2)
        with pytest.raises(ValueError):
            OffloadDecision(assign=np.array([-1, 0]), n_mecs=2)


class TestGeometry:
    def test_distance(self):
        assert distance((0.0, 0.0), (3.0, 4.0)) == 5.0

    def test_distance_matrix_shape_and_values(self):
        scen = make_scenario(3, 2)
        d = distance_matrix(scen)
        assert d.shape == (3, 2)
        expect = distance(scen.ues[1].position, scen.mecs[0].position)
        assert d[1, 0] == pytest.approx(expect)

    def test_default_layouts_scale_with_area(self):
        base = default_mec_positions(2, 50.0)
        scaled = default_mec_positions(2, 100.0)
        assert scaled == tuple((2 * x, 2 * y) for x, y in base)

    def test_default_layouts_inside_area(self):
        for m in range(1, 9):
            for x, y in default_mec_positions(m, 50.0):
                assert 0.0 <= x <= 50.0 and 0.0 <= y <= 50.0


class TestChannel:
    def test_gain_inverse_square(self):
        # doubling the distance quarters the gain
        g1 = channel_gain(1e-3, 1.0, 10.0)
        g2 = channel_gain(1e-3, 1.0, 20.0)
        assert g1 == pytest.approx(4.0 * g2)
        assert g1 == pytest.approx(1e-3 / 100.0)

    def test_gain_distance_clamp(self):
        # below the minimum distance the gain stops growing
        assert channel_gain(1e-3, 1.0, 0.01) == channel_gain(1e-3, 1.0, 1.0)

    def test_fading_unit_mean(self):
        rng = np.random.default_rng(0)
        draws = sample_fading((200_000,), rng)
        assert draws.mean() == pytest.approx(1.0, abs=5e-3)
        assert np.all(draws >= 0)

    def test_fading_deterministic(self):
        rng = np.random.default_rng(0)
        assert np.all(sample_fading((4, 4), rng, "deterministic") == 1.0)

    def test_sample_is_pure_in_epoch_and_seed(self):
        scen = make_scenario()
        a = sample_channel_state(scen, epoch=7)
        b = sample_channel_state(scen, epoch=7)
        np.testing.assert_array_equal(a.gains, b.gains)
        c = sample_channel_state(scen, epoch=8)
        assert not np.array_equal(a.gains, c.gains)
        d = sample_channel_state(scen, epoch=7, seed=99)
        assert not np.array_equal(a.gains, d.gains)

    def test_sample_independent_of_call_order(self):
        scen = make_scenario()
        forward = [sample_channel_state(scen, e).gains for e in (1, 2, 3)]
        backward = [sample_channel_state(scen, e).gains for e in (3, 2, 1)]
        for f, b in zip(forward, backward[::-1]):
            np.testing.assert_array_equal(f, b)

    def test_deterministic_fading_matches_pathloss(self):
        radio = RadioParams(fading="deterministic")
        scen = make_scenario(radio=radio)
        ch = sample_channel_state(scen, 1)
        d = np.maximum(distance_matrix(scen), radio.min_distance_m)
        np.testing.assert_allclose(ch.gains, radio.beta0 / d ** 2)

    def test_data_rate_formula(self):
        # B log2(1 + p h / sigma^2) with easy numbers: SNR 3 -> 2 bits/s/Hz
        r = data_rate(1e6, 3.0, 1e-10, 1e-10)
        assert r == pytest.approx(2e6)

    def test_data_rate_monotone_in_gain(self):
        gains = np.array([1e-8, 1e-7, 1e-6])
        r = data_rate(1e6, 1.0, gains, 1e-10)
        assert np.all(np.diff(r) > 0)


@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_decision_matrix_round_trip(n, m, seed):
    rng = np.random.default_rng(seed)
    assign = rng.integers(0, m + 1, size=n)
    dec = OffloadDecision(assign=assign, n_mecs=m)
    mat = dec.to_matrix()
    assert mat.shape == (n, m + 1)
    assert np.all(mat.sum(axis=1) == 1)
    back = OffloadDecision.from_matrix(mat)
    np.testing.assert_array_equal(back.assign, assign)
    assert back.n_mecs == m


class TestWeightedLatency:
    def test_hand_computed_local_only(self):
        scen = make_scenario(2, 1)
        ch = sample_channel_state(scen, 1)
        dec = OffloadDecision(assign=np.array([0, 0]), n_mecs=1)
        freqs = np.array([1e9, 2e9])
        lat = weighted_latency(scen, dec, freqs, np.zeros(2), ch)
        expect = sum(u.weight * u.task.cycles / f
                     for u, f in zip(scen.ues, freqs))
        assert lat == pytest.approx(expect)

    def test_hand_computed_offloaded(self):
        scen = make_scenario(1, 1)
        ch = sample_channel_state(scen, 1)
        dec = OffloadDecision(assign=np.array([1]), n_mecs=1)
        freqs = np.array([5e10])
        powers = np.array([scen.ues[0].p_max])
        lat = weighted_latency(scen, dec, freqs, powers, ch)
        ue = scen.ues[0]
        r = data_rate(scen.radio.bandwidth_hz, powers[0], ch.gains[0, 0],
                      scen.radio.noise_w)
        expect = ue.weight * (ue.task.data_bits / r + ue.task.cycles / freqs[0])
        assert lat == pytest.approx(expect)

    def test_rejects_nonpositive_frequency(self):
        scen = make_scenario(2, 1)
        ch = sample_channel_state(scen, 1)
        dec = OffloadDecision(assign=np.array([0, 0]), n_mecs=1)
        with pytest.raises(ValueError):
            weighted_latency(scen, dec, np.array([1e9, 0.0]), np.zeros(2), ch)

    def test_latency_decreases_with_faster_cpu(self):
        scen = make_scenario(3, 2)
        ch = sample_channel_state(scen, 1)
        dec = OffloadDecision(assign=np.array([0, 1, 2]), n_mecs=2)
        powers = np.array([u.p_max for u in scen.ues])
        slow = weighted_latency(scen, dec, np.full(3, 1e9), powers, ch)
        fast = weighted_latency(scen, dec, np.full(3, 2e9), powers, ch)
        assert fast < slow

    def test_shape_mismatch_rejected(self):
        scen = make_scenario(3, 2)
        ch = sample_channel_state(scen, 1)
        dec = OffloadDecision(assign=np.array([0, 0]), n_mecs=2)
        with pytest.raises(ValueError):
            weighted_latency(scen, dec, np.full(2, 1e9), np.zeros(2), ch)


class TestScenarioFactory:
    def test_weight_modes(self):
        scalar = make_scenario(weights=1.5)
        assert all(u.weight == 1.5 for u in scalar.ues)
        explicit = make_scenario(weights=[1.0, 2.0, 3.0, 4.0])
        assert [u.weight for u in explicit.ues] == [1.0, 2.0, 3.0, 4.0]
        ranged = make_scenario(weights=(0.5, 2.0))
        assert all(0.5 <= u.weight <= 2.0 for u in ranged.ues)

    def test_explicit_weights_length_checked(self):
        with pytest.raises(ValueError):
            make_scenario(weights=[1.0, 2.0, 3.0])

    def test_reproducible(self):
        a = make_scenario(seed=5)
        b = make_scenario(seed=5)
        assert a == b

    def test_reweighted_keeps_positions(self):
        scen = make_scenario(weights=(0.5, 2.0))
        shifted = reweighted(scen, np.random.default_rng(1))
        assert [u.position for u in shifted.ues] == [u.position for u in scen.ues]
        assert any(a.weight != b.weight for a, b in zip(scen.ues, shifted.ues))
        # same positions, same channel draws
        np.testing.assert_array_equal(sample_channel_state(scen, 3).gains,
                                      sample_channel_state(shifted, 3).gains)
