import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnlab import NumericError, ParameterError
from gnnlab import diagnostics as D
from gnnlab import engine as E
from gnnlab import graphs as G
from gnnlab import spectral as S

from conftest import fit_slope, small_graph


@pytest.fixture(scope="module")
def setup():
    g = small_graph(seed=41, n=20, a=5.0, b=1.5)
    op = S.normalized_adjacency(g, self_loops=True)
    return g, op


def arch_for(op, n0, depth=2, width=8, init=E.HeInit(), **kw):
    return E.Architecture(input_dim=n0, hidden_widths=tuple([width] * depth),
                          output_dim=2, base_operator=op, init=init, **kw)


class TestFirstLayerCovariance:
    def test_identity_features(self):
        g = G.Graph(num_vertices=2, num_classes=2,
                    edges=np.zeros((0, 2), dtype=np.int64),
                    features=np.eye(2), labels=np.array([0, 1]))
        op = S.normalized_adjacency(g, self_loops=True)
        # explicit scale n0 = 2 makes C_W1 = 2/(2*1) = 1
        arch = arch_for(op, n0=2, init=E.ExplicitInit(2.0))
        assert np.allclose(D.exact_first_layer_cov(arch, np.eye(2)), np.eye(2))

    def test_orthonormal_rows(self, setup):
        g, op = setup
        x = np.linalg.qr(np.random.default_rng(0).normal(size=(20, 20)))[0]
        arch = arch_for(op, n0=20)
        k1 = D.exact_first_layer_cov(arch, x)
        cw1 = arch.weight_variances()[0]
        assert np.allclose(k1, cw1 * np.eye(20), atol=1e-12)

    def test_matches_monte_carlo(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4)
        est = D.estimate_covariances(arch, g.features, layers=(1,), m=10_000, seed=3)[0]
        exact = D.exact_first_layer_cov(arch, g.features)
        assert est.trace == pytest.approx(float(np.trace(exact)),
                                          abs=3 * est.trace_se)
        # Entrywise agreement at the 6-sigma-ish level for the largest entry
        assert np.max(np.abs(est.matrix - exact)) <= 0.05 * np.max(np.abs(exact)) + 0.01


class TestEstimateCovariances:
    def test_depth4_he_traces_inside_corridor(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=4)
        ests = D.estimate_covariances(arch, g.features, layers=(2, 3, 4, 5),
                                      m=2_000, seed=5)
        k1 = D.exact_first_layer_cov(arch, g.features)
        lower = float(np.trace(k1 @ op.projector))
        upper = float(np.trace(k1))
        for est in ests:
            assert est.trace >= lower - 3 * est.trace_se
            assert est.trace <= upper + 3 * est.trace_se

    def test_se_shrinks_with_samples(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4)
        small = D.estimate_covariances(arch, g.features, (2,), m=40, seed=7)[0]
        large = D.estimate_covariances(arch, g.features, (2,), m=4000, seed=7)[0]
        expected_ratio = math.sqrt(4000 / 40)
        assert small.trace_se / large.trace_se == pytest.approx(expected_ratio, rel=0.5)

    def test_matrix_psd_to_tolerance(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4)
        est = D.estimate_covariances(arch, g.features, (2,), m=200, seed=9)[0]
        eigs = np.linalg.eigvalsh(est.matrix)
        assert eigs.min() >= -1e-10 * max(eigs.max(), 1.0)

    def test_sample_count_validated(self, setup):
        g, op = setup
        with pytest.raises(ParameterError):
            D.estimate_covariances(arch_for(op, n0=4), g.features, (1,), m=1, seed=0)


class TestOutputDistortion:
    def test_deterministic_scalar_chain(self):
        g = G.Graph(num_vertices=1, num_classes=1,
                    edges=np.zeros((0, 2), dtype=np.int64),
                    features=np.ones((1, 1)), labels=np.zeros(1, dtype=np.int64))
        op = S.normalized_adjacency(g, self_loops=True)
        arch = E.Architecture(input_dim=1, hidden_widths=(1, 1), output_dim=1,
                              base_operator=op)
        state = E.NetworkState(weights=tuple(np.ones((1, 1)) for _ in range(3)),
                               seed=0, scheme_name="manual")
        trace = E.forward(state, arch, np.ones((1, 1)))
        assert D.output_distortion(trace, np.ones((1, 1)), 0) == pytest.approx(1.0)

    def test_depth1_he_ensemble_mean_is_two(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=1, width=32)
        summary = D.distortion_profile(arch, g.features, m=3000, seed=11)
        # E|z_v|^2 = n1 * C_W1 * |x_v|^2 with C_W1 = 2/n0 and unit rows.
        assert summary.mean == pytest.approx(2.0, abs=3 * summary.se)

    def test_explicit_scheme_decays_at_half_per_layer(self, setup):
        g, op = setup
        means = []
        for depth in (1, 3, 5, 7):
            arch = arch_for(op, n0=4, depth=depth, init=E.ExplicitInit(1.0))
            means.append(D.distortion_profile(arch, g.features, m=400, seed=13).mean)
        slope = fit_slope((1, 3, 5, 7), np.log(means))
        assert slope == pytest.approx(-math.log(2), rel=0.2)

    def test_zero_input_row_rejected(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4)
        state = E.init_weights(arch, seed=0)
        x = g.features.copy()
        trace = E.forward(state, arch, x)
        x[3] = 0.0
        with pytest.raises(NumericError):
            D.output_distortion(trace, x, 3)


class TestOversmoothingRatio:
    def test_projector_covariance_gives_one(self, setup):
        _, op = setup
        assert D.oversmoothing_ratio(op.projector, op.projector) == pytest.approx(1.0)

    def test_complement_gives_zero(self, setup):
        _, op = setup
        comp = np.eye(op.num_vertices) - op.projector
        assert D.oversmoothing_ratio(comp, op.projector) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_trace_rejected(self, setup):
        _, op = setup
        with pytest.raises(NumericError):
            D.oversmoothing_ratio(np.zeros_like(op.projector), op.projector)

    def test_rate_values(self):
        assert D.oversmoothing_rate(0.0) == 0.0
        assert D.oversmoothing_rate(0.5) == pytest.approx(0.69314718, abs=1e-6)
        assert D.oversmoothing_rate(1 - math.exp(-5)) == pytest.approx(5.0, abs=1e-9)
        assert D.oversmoothing_rate(1.0) == math.inf

    def test_ratio_invariant_to_input_scaling(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=3)
        p1 = D.oversmoothing_profile(arch, g.features, m=50, seed=15)
        p2 = D.oversmoothing_profile(arch, 3.0 * g.features, m=50, seed=15)
        # Same seeds, positively homogeneous network: identical ratios.
        assert np.allclose(p1.ratios, p2.ratios, atol=1e-12)

    def test_profile_ratios_in_unit_interval(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=4)
        profile = D.oversmoothing_profile(arch, g.features, m=100, seed=17)
        for r in profile.ratios:
            assert -1e-6 <= r <= 1 + 1e-6

    def test_rate_increases_with_aggregation_strength(self, setup):
        # Stronger interpolation toward the base operator smooths harder:
        # the final-layer rate is increasing in t at fixed depth.
        g, op = setup
        rates = []
        for t in (0.1, 0.4, 0.8):
            arch = arch_for(op, n0=4, depth=8,
                            schedule=S.ResidualSchedule.constant(t, 8))
            profile = D.oversmoothing_profile(arch, g.features, m=150, seed=19,
                                              layers=(8,))
            rates.append(profile.rates[0])
        assert rates[0] < rates[1] < rates[2]


class TestClassCondition:
    def test_orthonormal_class_rows(self):
        matrix = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert D.condition_number_of(matrix) == pytest.approx(1.0)

    def test_identical_rows_infinite(self):
        matrix = np.array([[1.0, 2.0], [1.0, 2.0]])
        assert D.condition_number_of(matrix) == math.inf

    def test_residual_beta_zero_matches_embedded_input(self, setup):
        g, op = setup
        depth = 3
        arch = E.Architecture(input_dim=4, hidden_widths=(8,) * depth, output_dim=2,
                              base_operator=op, betas=(0.0,) * depth)
        state = E.init_weights(arch, seed=19)
        trace = E.forward(state, arch, g.features)
        expected_rows = []
        for c in (0, 1):
            expected_rows.append(trace.embedded[g.labels == c].mean(axis=0))
        expected = D.condition_number_of(np.stack(expected_rows))
        assert D.class_condition_number(trace, g.labels) == pytest.approx(expected)

    def test_empty_class_rejected(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4)
        state = E.init_weights(arch, seed=21)
        trace = E.forward(state, arch, g.features)
        with pytest.raises(ParameterError):
            D.class_condition_number(trace, np.zeros(20, dtype=int) + 1, num_classes=2)

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        matrix = rng.normal(size=(2, 6))
        q = np.linalg.qr(rng.normal(size=(6, 6)))[0]
        assert D.condition_number_of(matrix @ q) == pytest.approx(
            D.condition_number_of(matrix), rel=1e-9
        )


class TestGradientCovariance:
    def test_depth1_closed_form(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=1)
        traces = D.gradient_covariance_trace(arch, g.features, (1,), m=600, seed=23)
        est, se = traces[1]
        exact = arch.weight_variances()[0] * 4 * g.num_vertices
        assert est == pytest.approx(exact, abs=3 * se)

    def test_he_corridor(self, setup):
        g, op = setup
        arch = arch_for(op, n0=4, depth=3)
        from gnnlab import theory

        traces = D.gradient_covariance_trace(arch, g.features, (2, 3, 4), m=300, seed=25)
        g1, g1_proj = theory.gradient_first_layer_traces(arch)
        for ell, (est, se) in traces.items():
            assert est >= g1_proj - 3 * se
            assert est <= g1 + 3 * se

    def test_explicit_scheme_decay(self, setup):
        # Unit-scale weights halve the trace per layer once the Jacobian
        # mass settles near the top eigenspace; the first layers carry a
        # spectral transient (delta tangents spread over the whole
        # spectrum), so the slope is measured from layer 4 on.
        g, op = setup
        arch = arch_for(op, n0=4, depth=8, init=E.ExplicitInit(1.0))
        traces = D.gradient_covariance_trace(arch, g.features, (4, 6, 8), m=300, seed=27)
        layers = sorted(traces)
        slope = fit_slope(layers, [math.log(traces[ell][0]) for ell in layers])
        assert slope == pytest.approx(-math.log(2), rel=0.2)


class TestStreamingAccumulation:
    def test_neumaier_order_independence(self):
        rng = np.random.default_rng(0)
        values = list(rng.normal(size=500) * 10.0 ** rng.integers(-8, 8, size=500))
        fwd, rev = D.NeumaierSum(), D.NeumaierSum()
        for v in values:
            fwd.add(float(v))
        for v in reversed(values):
            rev.add(float(v))
        scale = max(abs(fwd.value), 1.0)
        assert abs(fwd.value - rev.value) <= 1e-12 * scale

    def test_ratio_se_matches_bootstrap(self):
        rng = np.random.default_rng(1)
        num = rng.normal(5.0, 1.0, size=4000)
        den = rng.normal(10.0, 2.0, size=4000) + 0.3 * num
        r, se = D.ratio_mean_se(num, den)
        boots = []
        for _ in range(300):
            idx = rng.integers(0, len(num), len(num))
            boots.append(np.mean(num[idx]) / np.mean(den[idx]))
        assert se == pytest.approx(np.std(boots), rel=0.3)
