import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hebbnets.network import NetworkTopology, PlasticNetwork, WeightInit
from hebbnets.plasticity import (
    NEURON_CENTRIC,
    REFERENCE_NETWORKS,
    SYNAPTIC,
    WEIGHTLESS_NEURON_CENTRIC,
    EtaMode,
    Genome,
    NeuronParams,
    WeightlessState,
    apply_hebbian_update,
    as_scheme,
    decode_genome,
    delta_neuron_centric,
    delta_synaptic,
    lift_neuron_to_synaptic,
    load_genome,
    memory_footprint,
    param_count,
    random_rule_genome,
    save_genome,
    step_weightless,
    weightless_weights,
)

WORM_LOW = NetworkTopology((3, 3, 7))
ANT_MEDIUM = NetworkTopology((28, 128, 64, 8))
ANT_HIGH = NetworkTopology((28, 256, 128, 8))

# (name -> synaptic total, neuron total, ratio) from the published table
TABLE_EXPECTED = {
    "biped-low": (576, 88, 6.54),
    "biped-medium": (2400, 160, 15.00),
    "biped-high": (4524, 214, 21.14),
    "worm-low": (120, 46, 2.60),
    "worm-medium": (3920, 196, 20.00),
    "worm-high": (4712, 214, 22.01),
    "ant-medium": (61440, 1140, 53.89),
    "ant-high": (204800, 2100, 97.52),
}


class TestParamCount:
    def test_all_reference_rows(self):
        for name, sizes, kind in REFERENCE_NETWORKS:
            topo = NetworkTopology(sizes)
            eta = EtaMode.fixed() if kind == "fixed" else EtaMode.evolved()
            synaptic = param_count(SYNAPTIC, topo, eta)
            neuron = param_count(NEURON_CENTRIC, topo, eta)
            want_s, want_n, want_r = TABLE_EXPECTED[name]
            assert synaptic.total == want_s, name
            assert neuron.total == want_n, name
            assert synaptic.ratio == pytest.approx(want_r, abs=1e-9), name
            assert neuron.ratio == synaptic.ratio

    def test_worm_low_fixed(self):
        assert param_count(SYNAPTIC, WORM_LOW, EtaMode.fixed()).total == 120
        assert param_count(NEURON_CENTRIC, WORM_LOW, EtaMode.fixed()).total == 46
        assert param_count(SYNAPTIC, WORM_LOW, EtaMode.fixed()).ratio == pytest.approx(2.60)

    def test_ant_high_evolved(self):
        assert param_count(SYNAPTIC, ANT_HIGH, EtaMode.evolved()).total == 204800
        assert param_count(NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved()).total == 2100
        assert param_count(SYNAPTIC, ANT_HIGH, EtaMode.evolved()).ratio == pytest.approx(97.52)

    def test_weightless_matches_neuron_centric(self):
        for eta in (EtaMode.fixed(), EtaMode.evolved()):
            assert (
                param_count(WEIGHTLESS_NEURON_CENTRIC, WORM_LOW, eta).total
                == param_count(NEURON_CENTRIC, WORM_LOW, eta).total
            )

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 30))
    def test_toy_network_closed_forms(self, hidden_layers, width):
        # 1-input/1-output toy nets: synaptic-evolved 5*(2n + (L-1)n^2),
        # neuron-evolved 5*(Ln + 2)
        topo = NetworkTopology((1, *([width] * hidden_layers), 1))
        evolved = EtaMode.evolved()
        assert param_count(SYNAPTIC, topo, evolved).total == 5 * (
            2 * width + (hidden_layers - 1) * width**2
        )
        assert param_count(NEURON_CENTRIC, topo, evolved).total == 5 * (
            hidden_layers * width + 2
        )


class TestMemoryFootprint:
    def test_ant_high_stored_values(self):
        fp = memory_footprint(NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved())
        assert fp.values_stored == 40960 + 2100 + 392 == 43452
        assert fp.bytes_at_32bit == 4 * 43452  # ~170 kB

    def test_ant_high_weightless_window_2(self):
        fp = memory_footprint(WEIGHTLESS_NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved(), 2)
        assert fp.values_stored == 420 * (2 + 5) == 2940
        assert fp.bytes_at_32bit == 11760  # ~11 kB

    def test_storage_ratio_is_about_15(self):
        stored = memory_footprint(NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved()).values_stored
        weightless = memory_footprint(
            WEIGHTLESS_NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved(), 2
        ).values_stored
        assert 14.5 <= stored / weightless <= 15.0

    def test_window_monotone(self):
        values = [
            memory_footprint(WEIGHTLESS_NEURON_CENTRIC, ANT_MEDIUM, EtaMode.evolved(), w).values_stored
            for w in range(1, 20)
        ]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_weightless_needs_window(self):
        with pytest.raises(ValueError):
            memory_footprint(WEIGHTLESS_NEURON_CENTRIC, ANT_HIGH, EtaMode.evolved())


class TestDeltaRules:
    def test_synaptic_zero_params(self):
        assert delta_synaptic((0, 0, 0, 0), 0.7, -0.3, rate=0.1) == 0.0

    def test_synaptic_hand_value(self):
        value = delta_synaptic((1.0, 0.5, 0.25, 0.1), 0.5, -0.5, rate=0.1)
        assert value == pytest.approx(0.02875, abs=1e-12)

    def test_synaptic_bias_only(self):
        # pure bias increment: activations do not matter
        for a_i, a_j in [(0.9, -0.9), (0.0, 0.0), (-1.0, 1.0)]:
            assert delta_synaptic((0, 0, 0, 1.0), a_i, a_j, rate=1.0) == 1.0

    def test_synaptic_embedded_rate(self):
        assert delta_synaptic((1.0, 0.0, 0.0, 0.0, 0.5), 1.0, 0.0) == pytest.approx(0.5)

    def test_synaptic_missing_rate(self):
        with pytest.raises(ValueError):
            delta_synaptic((1.0, 0.0, 0.0, 0.0), 1.0, 0.0)

    def test_synaptic_non_finite(self):
        with pytest.raises(ValueError):
            delta_synaptic((np.inf, 0, 0, 0), 1.0, 0.0, rate=0.1)

    def test_neuron_zero_params(self):
        zero = NeuronParams(0, 0, 0, 0, 0)
        assert delta_neuron_centric(zero, zero, 0.4, 0.6) == 0.0

    def test_neuron_hand_value(self):
        pre = NeuronParams(pre_coef=1.0, post_coef=0.0, corr_coef=0.5, bias=2.0, rate=0.2)
        post = NeuronParams(pre_coef=0.0, post_coef=1.0, corr_coef=0.5, bias=0.25, rate=0.4)
        value = delta_neuron_centric(pre, post, 1.0, -1.0)
        assert value == pytest.approx(0.075, abs=1e-12)

    def test_neuron_zero_activations_leave_bias_term(self):
        pre = NeuronParams(0.7, 0.1, 0.9, 1.5, 0.2)
        post = NeuronParams(0.3, -0.4, 0.2, 0.5, 0.6)
        value = delta_neuron_centric(pre, post, 0.0, 0.0)
        assert value == pytest.approx(((0.2 + 0.6) / 2) * 1.5 * 0.5)


def genome_cases():
    cases = []
    for scheme in (SYNAPTIC, NEURON_CENTRIC, WEIGHTLESS_NEURON_CENTRIC):
        for eta in (EtaMode.fixed(0.1), EtaMode.evolved()):
            cases.append((scheme, eta))
    return cases


class TestGenome:
    @pytest.mark.parametrize("scheme,eta", genome_cases())
    def test_roundtrip_identity(self, scheme, eta):
        topo = NetworkTopology((3, 4, 2))
        genome = random_rule_genome(scheme, topo, seed=5, eta_mode=eta)
        params = decode_genome(as_scheme(genome, NEURON_CENTRIC) if scheme == WEIGHTLESS_NEURON_CENTRIC else genome)
        again = params.to_genome()
        assert (again.values == genome.values).all()

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            Genome(np.zeros(7), SYNAPTIC, EtaMode.evolved(), NetworkTopology((1, 1)))

    def test_values_read_only(self):
        genome = random_rule_genome(SYNAPTIC, NetworkTopology((1, 1)), 0, EtaMode.evolved())
        with pytest.raises(ValueError):
            genome.values[0] = 3.0

    def test_as_scheme_rejects_synaptic(self):
        genome = random_rule_genome(SYNAPTIC, WORM_LOW, 0, EtaMode.fixed())
        with pytest.raises(ValueError):
            as_scheme(genome, NEURON_CENTRIC)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_roundtrip_property(self, seed):
        rng = np.random.default_rng(seed)
        sizes = tuple(int(rng.integers(1, 7)) for _ in range(int(rng.integers(2, 5))))
        topo = NetworkTopology(sizes)
        scheme = [SYNAPTIC, NEURON_CENTRIC][int(rng.integers(2))]
        eta = [EtaMode.fixed(0.1), EtaMode.evolved()][int(rng.integers(2))]
        genome = random_rule_genome(scheme, topo, seed, eta)
        assert (decode_genome(genome).to_genome().values == genome.values).all()


class TestRandomGenome:
    def test_counts_and_range(self):
        genome = random_rule_genome(SYNAPTIC, WORM_LOW, 3, EtaMode.fixed())
        assert len(genome) == 120
        assert (genome.values >= -1.0).all() and (genome.values <= 1.0).all()

    def test_ant_medium_neuron_count(self):
        genome = random_rule_genome(NEURON_CENTRIC, ANT_MEDIUM, 3, EtaMode.evolved())
        assert len(genome) == 1140

    def test_deterministic(self):
        a = random_rule_genome(NEURON_CENTRIC, WORM_LOW, 9, EtaMode.fixed())
        b = random_rule_genome(NEURON_CENTRIC, WORM_LOW, 9, EtaMode.fixed())
        assert (a.values == b.values).all()


class TestApplyUpdate:
    def test_zero_genome_leaves_weights(self):
        topo = NetworkTopology((2, 3, 1))
        genome = Genome(
            np.zeros(param_count(SYNAPTIC, topo, EtaMode.evolved()).total),
            SYNAPTIC,
            EtaMode.evolved(),
            topo,
        )
        net = PlasticNetwork(topo)
        net.init_weights(WeightInit.uniform(-0.1, 0.1), 4)
        before = [w.copy() for w in net.weights]
        net.forward([0.5, -0.5])
        apply_hebbian_update(net, genome)
        for w, b in zip(net.weights, before):
            assert (w == b).all()

    def test_single_synapse_trace(self):
        # one step on [1,1] with zero weight: input activation 1, output 0;
        # synaptic pre-coef 1, everything else 0, rate 1 -> weight becomes 1
        topo = NetworkTopology((1, 1))
        genome = Genome(np.array([1.0, 0.0, 0.0, 0.0, 1.0]), SYNAPTIC, EtaMode.evolved(), topo)
        net = PlasticNetwork(topo)
        net.forward([1.0])
        apply_hebbian_update(net, genome)
        assert net.weights[0][0, 0] == 1.0

    def test_requires_forward_first(self):
        topo = NetworkTopology((1, 1))
        genome = random_rule_genome(SYNAPTIC, topo, 0, EtaMode.evolved())
        net = PlasticNetwork(topo)
        with pytest.raises(ValueError):
            apply_hebbian_update(net, genome)

    def test_rejects_weightless_scheme(self):
        genome = random_rule_genome(WEIGHTLESS_NEURON_CENTRIC, WORM_LOW, 0, EtaMode.fixed())
        net = PlasticNetwork(WORM_LOW)
        net.forward([0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            apply_hebbian_update(net, genome)

    def test_neuron_genome_matches_its_lift_one_step(self):
        topo = NetworkTopology((4, 5, 3))
        genome = random_rule_genome(NEURON_CENTRIC, topo, 21, EtaMode.evolved())
        lifted = lift_neuron_to_synaptic(genome)
        a = PlasticNetwork(topo)
        b = PlasticNetwork(topo)
        a.init_weights(WeightInit.uniform(-0.1, 0.1), 5)
        b.init_weights(WeightInit.uniform(-0.1, 0.1), 5)
        x = np.linspace(-1, 1, 4)
        a.forward(x)
        b.forward(x)
        apply_hebbian_update(a, genome)
        apply_hebbian_update(b, lifted)
        for wa, wb in zip(a.weights, b.weights):
            assert (wa == wb).all()


class TestLift:
    def test_zero_genome_lifts_to_zero_updates(self):
        topo = NetworkTopology((2, 2))
        zero = Genome(
            np.zeros(param_count(NEURON_CENTRIC, topo, EtaMode.evolved()).total),
            NEURON_CENTRIC,
            EtaMode.evolved(),
            topo,
        )
        lifted = lift_neuron_to_synaptic(zero)
        params = decode_genome(lifted)
        for arrays in (params.pre, params.post, params.corr, params.bias, params.rate):
            for a in arrays:
                assert (a == 0.0).all()

    def test_rate_is_arithmetic_mean(self):
        topo = NetworkTopology((1, 1))
        # neuron records: [pre, post, corr, bias, rate] per neuron
        values = np.array([0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.4])
        genome = Genome(values, NEURON_CENTRIC, EtaMode.evolved(), topo)
        lifted = lift_neuron_to_synaptic(genome)
        assert decode_genome(lifted).rate[0][0, 0] == pytest.approx(0.3)

    def test_rejects_fixed_rate(self):
        genome = random_rule_genome(NEURON_CENTRIC, WORM_LOW, 0, EtaMode.fixed())
        with pytest.raises(ValueError):
            lift_neuron_to_synaptic(genome)

    def test_rejects_synaptic_input(self):
        genome = random_rule_genome(SYNAPTIC, WORM_LOW, 0, EtaMode.evolved())
        with pytest.raises(ValueError):
            lift_neuron_to_synaptic(genome)

    def test_identical_updates_on_random_activation_pairs(self):
        topo = NetworkTopology((1, 1))
        rng = np.random.default_rng(3)
        genome = random_rule_genome(NEURON_CENTRIC, topo, 3, EtaMode.evolved())
        lifted = lift_neuron_to_synaptic(genome)
        neuron = decode_genome(genome)
        synapse = decode_genome(lifted)
        worst = 0.0
        for _ in range(100):
            a_i, a_j = rng.uniform(-1, 1, size=2)
            d_n = delta_neuron_centric(neuron.neuron(0), neuron.neuron(1), a_i, a_j)
            d_s = delta_synaptic(
                (
                    synapse.pre[0][0, 0],
                    synapse.post[0][0, 0],
                    synapse.corr[0][0, 0],
                    synapse.bias[0][0, 0],
                ),
                a_i,
                a_j,
                rate=synapse.rate[0][0, 0],
            )
            worst = max(worst, abs(d_n - d_s))
        assert worst == 0.0


class TestWeightless:
    def test_empty_window_gives_zero_weights(self):
        genome = random_rule_genome(WEIGHTLESS_NEURON_CENTRIC, WORM_LOW, 1, EtaMode.fixed())
        state = WeightlessState(WORM_LOW, window_size=5)
        for w in weightless_weights(state, genome):
            assert (w == 0.0).all()

    def test_first_step_outputs_zero(self):
        genome = random_rule_genome(WEIGHTLESS_NEURON_CENTRIC, WORM_LOW, 1, EtaMode.fixed())
        state = WeightlessState(WORM_LOW, window_size=3)
        out = step_weightless(state, genome, [0.4, -0.2, 0.9])
        assert (out == 0.0).all()
        assert state.step_count == 1

    def test_window_single_entry_is_one_delta(self):
        topo = NetworkTopology((1, 1))
        genome = random_rule_genome(NEURON_CENTRIC, topo, 8, EtaMode.evolved())
        weightless = as_scheme(genome, WEIGHTLESS_NEURON_CENTRIC)
        params = decode_genome(genome)
        state = WeightlessState(topo, window_size=1)
        step_weightless(state, weightless, [0.7])
        acts = state.window[0]
        expected = delta_neuron_centric(
            params.neuron(0), params.neuron(1), acts[0][0], acts[1][0]
        )
        weights = weightless_weights(state, weightless)
        assert weights[0][0, 0] == expected

    def test_full_window_matches_stored_weights_exactly(self):
        # side-by-side oracle: zero-init stored-weight run vs weightless run
        topo = NetworkTopology((4, 6, 3))
        for seed in range(5):
            genome = random_rule_genome(NEURON_CENTRIC, topo, seed, EtaMode.evolved())
            weightless = as_scheme(genome, WEIGHTLESS_NEURON_CENTRIC)
            net = PlasticNetwork(topo)  # zero weights
            state = WeightlessState(topo, window_size=50)
            rng = np.random.default_rng(100 + seed)
            for _ in range(50):
                x = rng.uniform(-1, 1, 4)
                expected = net.forward(x)
                apply_hebbian_update(net, genome)
                got = step_weightless(state, weightless, x)
                assert (expected == got).all()
            # with every snapshot retained, the fold equals the stored weights
            reconstructed = weightless_weights(state, weightless)
            for rebuilt, stored in zip(reconstructed, net.weights):
                assert (rebuilt == stored).all()

    def test_short_window_diverges(self):
        topo = NetworkTopology((4, 6, 3))
        diverged = 0
        for seed in range(10):
            genome = random_rule_genome(NEURON_CENTRIC, topo, seed, EtaMode.evolved())
            weightless = as_scheme(genome, WEIGHTLESS_NEURON_CENTRIC)
            net = PlasticNetwork(topo)
            state = WeightlessState(topo, window_size=2)
            rng = np.random.default_rng(200 + seed)
            first_diff = None
            for t in range(1, 11):
                x = rng.uniform(-1, 1, 4)
                expected = net.forward(x)
                apply_hebbian_update(net, genome)
                got = step_weightless(state, weightless, x)
                if first_diff is None and not (expected == got).all():
                    first_diff = t
            if first_diff is not None and first_diff <= 4:
                diverged += 1
        assert diverged >= 9

    def test_scheme_mismatch(self):
        genome = random_rule_genome(NEURON_CENTRIC, WORM_LOW, 1, EtaMode.fixed())
        state = WeightlessState(WORM_LOW, window_size=2)
        with pytest.raises(ValueError):
            weightless_weights(state, genome)
        with pytest.raises(ValueError):
            step_weightless(state, genome, [0.1, 0.2, 0.3])

    def test_window_size_validation(self):
        with pytest.raises(ValueError):
            WeightlessState(WORM_LOW, window_size=0)


class TestCheckpoint:
    def test_roundtrip_exact(self, tmp_path):
        genome = random_rule_genome(NEURON_CENTRIC, ANT_MEDIUM, 77, EtaMode.evolved())
        path = tmp_path / "genome.json"
        save_genome(genome, path, seed=77)
        loaded = load_genome(path)
        assert loaded.scheme == genome.scheme
        assert loaded.eta_mode == genome.eta_mode
        assert loaded.topology == genome.topology
        assert (loaded.values == genome.values).all()

    def test_fixed_eta_preserved(self, tmp_path):
        genome = random_rule_genome(SYNAPTIC, WORM_LOW, 1, EtaMode.fixed(0.05))
        path = tmp_path / "genome.json"
        save_genome(genome, path)
        loaded = load_genome(path)
        assert loaded.eta_mode.is_fixed
        assert loaded.eta_mode.eta0 == 0.05

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text("{}")
        with pytest.raises(ValueError):
            load_genome(path)
