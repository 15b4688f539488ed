import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridmc import gridmodel as gm
from gridmc import linflow as lf


class TestBuildLinearModel:
    def test_shapes(self, small_instance):
        model = small_instance["model"]
        n = small_instance["net"].n_phases
        assert model.n_mat.shape == (n, 2 * n)
        assert model.k_mat.shape == (n, 2 * n)

    def test_matches_finite_difference(self, small_feeder):
        """Columns of N and K equal the sensitivity of the exact flow to each
        load component, evaluated at zero load."""
        net, _, _ = small_feeder
        model = lf.build_linear_model(net)
        n = net.n_phases
        eps = 1e-7
        for col in [0, 2, n, n + 3]:
            s = np.zeros(n, dtype=complex)
            if col < n:
                s[col] = eps
            else:
                s[col - n] = 1j * eps
            v = gm.solve_exact_flow(net, s, tol=1e-14)
            dv = (v - net.no_load_voltage) / eps
            dmag = (np.abs(v) - np.abs(net.no_load_voltage)) / eps
            assert np.max(np.abs(dv - model.n_mat[:, col])) < 1e-5
            assert np.max(np.abs(dmag - model.k_mat[:, col])) < 1e-5

    def test_prediction_accuracy(self, small_instance):
        model = small_instance["model"]
        scen = small_instance["scen"]
        v_exact = small_instance["v"]
        v_lin, vmag_lin = lf.predict(model, lf.h_from_loads(scen.s))
        assert np.max(np.abs(v_lin - v_exact)) < 0.01
        assert np.max(np.abs(vmag_lin - np.abs(v_exact))) < 0.01

    def test_degenerate_profile_rejected(self):
        index = gm.PhaseIndex(entries=(("b2", "a"),))
        net = gm.NetworkModel(
            y_ll=np.array([[1.0 + 0j]]),
            y_l0=np.array([[0.0 + 0j]]),  # isolated from slack: w = 0
            v0=np.array([1.0 + 0j]),
            index=index,
        )
        with pytest.raises(lf.LinFlowError, match="degenerate"):
            lf.build_linear_model(net)


class TestTruncation:
    def test_single_area_is_exact(self, small_instance):
        model = small_instance["model"]
        part = gm.AreaPartition.single_area(model.n_phases)
        trunc = lf.truncate_model(model, part)
        assert lf.truncation_error(model, trunc) == 0.0

    def test_idempotent(self, small_instance):
        model, part = small_instance["model"], small_instance["part"]
        once = lf.truncate_model(model, part)
        twice = lf.truncate_model(once, part)
        assert np.array_equal(once.n_mat, twice.n_mat)
        assert np.array_equal(once.k_mat, twice.k_mat)

    def test_extra_adjacency_reduces_error(self, small_instance):
        """Keeping more couplings can only shrink the truncation metric."""
        model, part = small_instance["model"], small_instance["part"]
        richer = gm.AreaPartition(
            assignment=part.assignment,
            n_areas=part.n_areas,
            adjacency=part.adjacency | {frozenset({1, 3})},
        )
        e_chain = lf.truncation_error(model, lf.truncate_model(model, part))
        e_rich = lf.truncation_error(model, lf.truncate_model(model, richer))
        # with three areas the extra pair makes the coupling graph complete,
        # so the richer truncation is exact
        assert e_chain > 0
        assert 0 <= e_rich < e_chain

    def test_zeroes_only_cross_area_blocks(self, small_instance):
        model, part = small_instance["model"], small_instance["part"]
        trunc = lf.truncate_model(model, part)
        a = part.assignment
        n = model.n_phases
        adj = {tuple(sorted(p)) for p in part.adjacency}
        for i in range(n):
            for j in range(n):
                coupled = a[i] == a[j] or tuple(sorted((a[i], a[j]))) in adj
                for col in (j, j + n):
                    if coupled:
                        assert trunc.n_mat[i, col] == model.n_mat[i, col]
                    else:
                        assert trunc.n_mat[i, col] == 0.0

    def test_partition_size_mismatch(self, small_instance):
        model = small_instance["model"]
        with pytest.raises(lf.LinFlowError):
            lf.truncate_model(model, gm.AreaPartition.single_area(3))


class TestDecentralizedFlow:
    def test_matches_dense_truncated_evaluation(self, small_instance):
        trunc, part = small_instance["trunc"], small_instance["part"]
        rng = np.random.default_rng(11)
        for _ in range(10):
            h = 0.01 * rng.standard_normal((2, 2 * trunc.n_phases))
            v_dense, vmag_dense = lf.predict(trunc, h)
            per_area = lf.decentralized_flow(trunc, h)
            for area in part.areas:
                v_l, vmag_l = per_area[area]
                cols = part.phases_in(area)
                assert np.max(np.abs(v_l - v_dense[:, cols])) < 1e-12
                assert np.max(np.abs(vmag_l - vmag_dense[:, cols])) < 1e-12

    def test_flow_term_wire_round_trip(self):
        rng = np.random.default_rng(0)
        term = lf.FlowTerm(
            p=rng.standard_normal(4) + 1j * rng.standard_normal(4),
            q=rng.standard_normal(4),
        )
        again = lf.FlowTerm.from_stacked(term.stacked())
        assert np.allclose(again.p, term.p)
        assert np.allclose(again.q, term.q)

    def test_unknown_area(self, small_instance):
        with pytest.raises(lf.LinFlowError):
            lf.area_flow_terms(small_instance["trunc"], np.zeros((1, 16)), 99)


class TestAreaMaps:
    def test_residual_matches_dense_oracle(self, small_instance):
        """E_ll(X) + sum E_lj(X) - f_l computed independently from the row
        selectors and the truncated coefficients."""
        trunc = small_instance["trunc"]
        part = small_instance["part"]
        maps = small_instance["maps"]
        n = trunc.n_phases
        t_steps = trunc.n_steps
        rng = np.random.default_rng(5)
        x = rng.standard_normal((5 * t_steps, n))
        for l in part.areas:
            got = maps.residual(l, x)
            keep = np.isin(
                part.assignment, [l] + part.neighbors(l)
            )
            expected = []
            for c in part.phases_in(l):
                for t in range(t_steps):
                    vr, vi, vm = x[5 * t, c], x[5 * t + 1, c], x[5 * t + 2, c]
                    h_re = np.where(keep, x[5 * t + 3], 0.0)
                    h_im = np.where(keep, x[5 * t + 4], 0.0)
                    pred = (trunc.n_mat[c, :n] @ h_re
                            + trunc.n_mat[c, n:] @ h_im)
                    pred_mag = (trunc.k_mat[c, :n] @ h_re
                                + trunc.k_mat[c, n:] @ h_im)
                    w = trunc.w[c]
                    expected.extend([
                        vr - pred.real - w.real,
                        vi - pred.imag - w.imag,
                        vm - pred_mag - np.abs(w),
                    ])
            assert np.max(np.abs(got - np.array(expected))) < 1e-12

    def test_residual_zero_at_linear_solution(self, small_instance):
        """A matrix assembled from the truncated model's own predictions has
        zero flow residual."""
        trunc = small_instance["trunc"]
        maps = small_instance["maps"]
        part = small_instance["part"]
        scen = small_instance["scen"]
        h = lf.h_from_loads(scen.s)
        v_lin, vmag_lin = lf.predict(trunc, h)
        x = np.empty((5 * trunc.n_steps, trunc.n_phases))
        for t in range(trunc.n_steps):
            x[5 * t] = v_lin[t].real
            x[5 * t + 1] = v_lin[t].imag
            x[5 * t + 2] = vmag_lin[t]
            x[5 * t + 3] = scen.s[t].real
            x[5 * t + 4] = scen.s[t].imag
        for l in part.areas:
            assert np.max(np.abs(maps.residual(l, x))) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(0.1, 10.0))
    def test_linearity(self, small_instance, seed, scale):
        maps = small_instance["maps"]
        part = small_instance["part"]
        rng = np.random.default_rng(seed)
        shape = (maps.m, maps.n_phases)
        x, y = rng.standard_normal(shape), rng.standard_normal(shape)
        for l in part.areas:
            for j in maps.sources(l):
                lhs = maps.apply(l, j, scale * x + y)
                rhs = scale * maps.apply(l, j, x) + maps.apply(l, j, y)
                assert np.max(np.abs(lhs - rhs)) < 1e-9 * (1 + scale)

    def test_residual_dims(self, small_instance):
        maps = small_instance["maps"]
        part = small_instance["part"]
        for l in part.areas:
            n_l = part.phases_in(l).size
            assert maps.residual_dim(l) == 3 * maps.n_steps * n_l
            assert maps.f[l].shape == (3 * maps.n_steps * n_l,)
