import json

import numpy as np
import pytest
from scipy.io import mmwrite
from scipy.optimize import fsolve

from gridmc import gridmodel as gm


def newton_flow_oracle(net, s):
    """Independent power-flow solve: root-find the injection equations
    s_i = v_i * conj(I_i) with scipy's general-purpose solver."""

    n = net.n_phases

    def residual(x):
        v = x[:n] + 1j * x[n:]
        i_inj = net.y_ll @ v + net.y_l0 @ net.v0
        mismatch = v * np.conj(i_inj) - s
        return np.concatenate([mismatch.real, mismatch.imag])

    x0 = np.concatenate([np.ones(n), np.zeros(n)])
    x, info, ier, msg = fsolve(residual, x0, full_output=True, xtol=1e-13)
    assert ier == 1, msg
    return x[:n] + 1j * x[n:]


class TestPhaseIndex:
    def test_rejects_empty(self):
        with pytest.raises(gm.GridModelError):
            gm.PhaseIndex(entries=())

    def test_rejects_duplicates(self):
        with pytest.raises(gm.GridModelError):
            gm.PhaseIndex(entries=(("b1", "a"), ("b1", "a")))

    def test_rejects_bad_slack_count(self):
        with pytest.raises(gm.GridModelError):
            gm.PhaseIndex(entries=(("b1", "a"),), slack_phases=2)


class TestNetworkModel:
    @pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
    def test_singular_admittance_rejected(self):
        index = gm.PhaseIndex(entries=(("b1", "a"), ("b2", "a")))
        y_ll = np.ones((2, 2), dtype=complex)  # rank 1
        with pytest.raises(gm.SingularAdmittanceError):
            gm.NetworkModel(
                y_ll=y_ll,
                y_l0=np.zeros((2, 1), dtype=complex),
                v0=np.array([1.0 + 0j]),
                index=index,
            )

    def test_shape_validation(self):
        index = gm.PhaseIndex(entries=(("b1", "a"),))
        with pytest.raises(gm.GridModelError):
            gm.NetworkModel(
                y_ll=np.eye(2, dtype=complex),
                y_l0=np.zeros((1, 1), dtype=complex),
                v0=np.array([1.0 + 0j]),
                index=index,
            )

    def test_no_load_voltage_two_bus(self):
        # single line of impedance z from slack at 1.0 pu: w = v0 exactly
        z = 0.03 + 0.02j
        index = gm.PhaseIndex(entries=(("b2", "a"),))
        net = gm.NetworkModel(
            y_ll=np.array([[1 / z]]),
            y_l0=np.array([[-1 / z]]),
            v0=np.array([1.0 + 0j]),
            index=index,
        )
        assert np.allclose(net.no_load_voltage, [1.0 + 0j], atol=1e-14)


class TestAreaPartition:
    def test_every_area_nonempty(self):
        with pytest.raises(gm.GridModelError):
            gm.AreaPartition(assignment=np.array([1, 1, 3]), n_areas=3)

    def test_adjacency_no_self_pairs(self):
        with pytest.raises(gm.GridModelError):
            gm.AreaPartition(
                assignment=np.array([1, 2]),
                n_areas=2,
                adjacency=frozenset({frozenset({1})}),
            )

    def test_neighbors_symmetric(self):
        part = gm.AreaPartition.contiguous(10, 4)
        for a in part.areas:
            for b in part.neighbors(a):
                assert a in part.neighbors(b)

    def test_contiguous_covers_all(self):
        part = gm.AreaPartition.contiguous(7, 3)
        sizes = [part.phases_in(a).size for a in part.areas]
        assert sum(sizes) == 7
        assert min(sizes) >= 1

    def test_single_area_has_no_neighbors(self):
        part = gm.AreaPartition.single_area(5)
        assert part.neighbors(1) == []


class TestGenerateRadialFeeder:
    def test_deterministic_per_seed(self):
        a1, l1 = gm.generate_radial_feeder(10, seed=5, n_steps=3)
        a2, l2 = gm.generate_radial_feeder(10, seed=5, n_steps=3)
        assert np.array_equal(a1.y_ll, a2.y_ll)
        assert np.array_equal(l1.s, l2.s)

    def test_shapes(self):
        net, loads = gm.generate_radial_feeder(8, n_steps=4)
        assert net.n_phases == 7
        assert loads.s.shape == (4, 7)

    def test_three_phase_mode(self):
        net, loads = gm.generate_radial_feeder(5, three_phase=True)
        assert net.n_phases == 12
        assert net.y_l0.shape == (12, 3)

    def test_rejects_single_bus(self):
        with pytest.raises(gm.GridModelError):
            gm.generate_radial_feeder(1)

    def test_admittance_row_sums_vanish_with_slack(self):
        # Kirchhoff structure: [y_l0, y_ll] rows sum to zero for a pure
        # line network
        net, _ = gm.generate_radial_feeder(9, seed=1)
        rows = np.hstack([net.y_l0, net.y_ll]).sum(axis=1)
        assert np.max(np.abs(rows)) < 1e-12


class TestFeeder33Analog:
    def test_partition_sizes(self):
        _, _, part = gm.feeder33_analog(n_areas=4)
        assert [part.phases_in(a).size for a in part.areas] == [17, 4, 3, 8]

    def test_unknown_partition_count(self):
        with pytest.raises(gm.GridModelError):
            gm.feeder33_analog(n_areas=7)

    def test_phase_count(self):
        net, loads, part = gm.feeder33_analog(n_steps=3, n_areas=5)
        assert net.n_phases == 32
        assert loads.s.shape == (3, 32)
        assert part.n_areas == 5


class TestSolveExactFlow:
    def test_fixed_point_residual(self, small_feeder):
        net, scen, _ = small_feeder
        v = gm.solve_exact_flow(net, scen.s[0])
        w = net.no_load_voltage
        residual = v - (w + net.solve_y_ll(np.conj(scen.s[0]) / np.conj(v)))
        assert np.max(np.abs(residual)) <= 1e-10

    def test_matches_newton_oracle(self, small_feeder):
        net, scen, _ = small_feeder
        v_fp = gm.solve_exact_flow(net, scen.s[0])
        v_newton = newton_flow_oracle(net, scen.s[0])
        assert np.max(np.abs(v_fp - v_newton)) < 1e-8

    def test_two_bus_closed_form(self):
        # one line, one load: v solves v*conj((v - v0)/z) = s, a scalar
        # quadratic with closed-form root
        z = 0.05 + 0.03j
        s = -0.04 - 0.01j
        index = gm.PhaseIndex(entries=(("b2", "a"),))
        net = gm.NetworkModel(
            y_ll=np.array([[1 / z]]),
            y_l0=np.array([[-1 / z]]),
            v0=np.array([1.0 + 0j]),
            index=index,
        )
        v = gm.solve_exact_flow(net, np.array([s]))[0]
        # verify against the quadratic v^2 - v0 v - z conj(s) scaled form
        assert abs(v * np.conj((v - 1.0) / z) - s) < 1e-8

    def test_zero_load_gives_no_load_profile(self, small_feeder):
        net, _, _ = small_feeder
        v = gm.solve_exact_flow(net, np.zeros(net.n_phases, dtype=complex))
        assert np.allclose(v, net.no_load_voltage, atol=1e-12)

    def test_diverges_on_absurd_load(self, small_feeder):
        net, _, _ = small_feeder
        s = np.full(net.n_phases, -50.0 - 20.0j)
        with pytest.raises(gm.DivergedFlowError):
            gm.solve_exact_flow(net, s)

    def test_multi_step(self, small_feeder):
        net, scen, _ = small_feeder
        v = gm.solve_exact_flow(net, scen.s)
        assert v.shape == scen.s.shape


class TestLoadNetwork:
    def _write_manifest(self, tmp_path, net, loads, assignment, adjacency):
        mmwrite(tmp_path / "y_ll.mtx", net.y_ll)
        mmwrite(tmp_path / "y_l0.mtx", net.y_l0)
        with open(tmp_path / "phases.csv", "w") as fh:
            for bus, ph in net.index.entries:
                fh.write(f"{bus},{ph}\n")
        with open(tmp_path / "areas.csv", "w") as fh:
            for i, a in enumerate(assignment):
                fh.write(f"{i},{a}\n")
        with open(tmp_path / "loads.csv", "w") as fh:
            for row in loads.s:
                fh.write(",".join(f"{c.real},{c.imag}" for c in row) + "\n")
        manifest = {
            "y_ll": "y_ll.mtx",
            "y_l0": "y_l0.mtx",
            "v0": [[c.real, c.imag] for c in net.v0],
            "phases": "phases.csv",
            "areas": "areas.csv",
            "loads": "loads.csv",
            "adjacency": [sorted(p) for p in adjacency],
        }
        path = tmp_path / "manifest.json"
        with open(path, "w") as fh:
            json.dump(manifest, fh)
        return path

    def test_round_trip(self, tmp_path, small_feeder):
        net, loads, part = small_feeder
        path = self._write_manifest(
            tmp_path, net, loads, part.assignment, part.adjacency
        )
        net2, loads2, part2 = gm.load_network(path)
        assert np.allclose(net2.y_ll, net.y_ll)
        assert np.allclose(loads2.s, loads.s)
        assert np.array_equal(part2.assignment, part.assignment)
        assert part2.adjacency == part.adjacency

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(gm.GridModelError, match="missing"):
            gm.load_network(tmp_path / "nope.json")

    def test_missing_referenced_file(self, tmp_path, small_feeder):
        net, loads, part = small_feeder
        path = self._write_manifest(
            tmp_path, net, loads, part.assignment, part.adjacency
        )
        (tmp_path / "loads.csv").unlink()
        with pytest.raises(gm.GridModelError, match="missing file"):
            gm.load_network(path)

    def test_unassigned_phase(self, tmp_path, small_feeder):
        net, loads, part = small_feeder
        assignment = part.assignment.copy()
        path = self._write_manifest(
            tmp_path, net, loads, assignment, part.adjacency
        )
        with open(tmp_path / "areas.csv", "w") as fh:
            for i, a in enumerate(assignment[:-1]):
                fh.write(f"{i},{a}\n")
        with pytest.raises(gm.GridModelError, match="unassigned"):
            gm.load_network(path)

    def test_singular_admittance_file(self, tmp_path, small_feeder):
        net, loads, part = small_feeder
        path = self._write_manifest(
            tmp_path, net, loads, part.assignment, part.adjacency
        )
        mmwrite(tmp_path / "y_ll.mtx", np.zeros_like(net.y_ll))
        with pytest.raises(gm.SingularAdmittanceError):
            gm.load_network(path)
