"""Network data model, manifest ingestion, synthetic radial feeders, and an
exact fixed-point power-flow solver used to produce ground-truth voltages."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import mmread
from scipy.linalg import lu_factor, lu_solve


class GridModelError(Exception):
    """Base class for network-model failures."""


class SingularAdmittanceError(GridModelError):
    pass


class DivergedFlowError(GridModelError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"power flow diverged: residual {residual:.3e} after {iterations} iterations"
        )


@dataclass(frozen=True)
class PhaseIndex:
    """Ordering of the non-slack bus-phases (the matrix column unit)."""

    entries: tuple[tuple[str, str], ...]
    slack_phases: int = 1

    def __post_init__(self):
        if len(self.entries) < 1:
            raise GridModelError("phase index must contain at least one phase")
        if len(set(self.entries)) != len(self.entries):
            raise GridModelError("duplicate (bus, phase) entries in phase index")
        if self.slack_phases not in (1, 3):
            raise GridModelError("slack bus must have 1 or 3 phases")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class NetworkModel:
    """Bus-admittance blocks and slack voltage, all per-unit."""

    y_ll: np.ndarray
    y_l0: np.ndarray
    v0: np.ndarray
    index: PhaseIndex

    def __post_init__(self):
        n = len(self.index)
        if self.y_ll.shape != (n, n):
            raise GridModelError(
                f"y_ll shape {self.y_ll.shape} inconsistent with |P|={n}"
            )
        if self.y_l0.shape != (n, self.index.slack_phases):
            raise GridModelError(
                f"y_l0 shape {self.y_l0.shape} inconsistent with "
                f"{self.index.slack_phases} slack phases"
            )
        if self.v0.shape != (self.index.slack_phases,):
            raise GridModelError("v0 length inconsistent with slack phase count")
        try:
            lu, piv = lu_factor(self.y_ll)
        except Exception as exc:  # pragma: no cover - scipy raises ValueError
            raise SingularAdmittanceError(f"singular admittance: {exc}") from exc
        if not np.all(np.isfinite(lu)) or np.min(np.abs(np.diag(lu))) < 1e-12:
            raise SingularAdmittanceError("singular admittance matrix y_ll")
        object.__setattr__(self, "_lu", (lu, piv))

    @property
    def n_phases(self) -> int:
        return len(self.index)

    def solve_y_ll(self, rhs: np.ndarray) -> np.ndarray:
        """Solve y_ll @ x = rhs using the cached factorization."""
        return lu_solve(self._lu, rhs)

    @property
    def no_load_voltage(self) -> np.ndarray:
        """w = -Y_LL^{-1} Y_L0 v0, the zero-injection voltage profile."""
        return -self.solve_y_ll(self.y_l0 @ self.v0)


@dataclass(frozen=True)
class LoadScenario:
    """Complex power injections per time step (rows) and phase (columns)."""

    s: np.ndarray

    def __post_init__(self):
        if self.s.ndim != 2 or self.s.shape[0] < 1:
            raise GridModelError("load scenario must be a T x |P| matrix, T >= 1")

    @property
    def n_steps(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class AreaPartition:
    """Assignment of phase indices to areas plus the area adjacency graph."""

    assignment: np.ndarray  # int area id in [1, n_areas] per phase index
    n_areas: int
    adjacency: frozenset[frozenset[int]] = field(default_factory=frozenset)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        object.__setattr__(self, "assignment", a)
        if self.n_areas < 1:
            raise GridModelError("partition needs at least one area")
        present = set(np.unique(a).tolist())
        if present != set(range(1, self.n_areas + 1)):
            raise GridModelError(
                f"every area in 1..{self.n_areas} must be non-empty, got {sorted(present)}"
            )
        for pair in self.adjacency:
            if len(pair) != 2:
                raise GridModelError("adjacency pairs must join two distinct areas")
            if not all(1 <= x <= self.n_areas for x in pair):
                raise GridModelError("adjacency references unknown area")

    @property
    def areas(self) -> list[int]:
        return list(range(1, self.n_areas + 1))

    def phases_in(self, area: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == area)

    def neighbors(self, area: int) -> list[int]:
        out = set()
        for pair in self.adjacency:
            if area in pair:
                out.add(next(x for x in pair if x != area))
        return sorted(out)

    @classmethod
    def single_area(cls, n_phases: int) -> "AreaPartition":
        return cls(assignment=np.ones(n_phases, dtype=int), n_areas=1)

    @classmethod
    def contiguous(cls, n_phases: int, n_areas: int) -> "AreaPartition":
        """Split phases into n_areas contiguous index ranges, chain adjacency."""
        assignment = 1 + (np.arange(n_phases) * n_areas) // n_phases
        adjacency = frozenset(
            frozenset((a, a + 1)) for a in range(1, n_areas)
        )
        return cls(assignment=assignment, n_areas=n_areas, adjacency=adjacency)


def _read_complex_csv_loads(path: Path, n_phases: int) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            vals = [float(x) for x in rec]
            if len(vals) != 2 * n_phases:
                raise GridModelError(
                    f"load row has {len(vals)} columns, expected {2 * n_phases}"
                )
            re = np.array(vals[0::2])
            im = np.array(vals[1::2])
            rows.append(re + 1j * im)
    if not rows:
        raise GridModelError("empty load file")
    return np.array(rows)


def load_network(manifest_path) -> tuple[NetworkModel, LoadScenario, AreaPartition]:
    """Load a network, load scenario, and area partition from a JSON manifest.

    The manifest references Matrix Market files for the admittance blocks and
    CSV files for phases, area assignment, and loads; see the README for the
    exact schema.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise GridModelError(f"missing manifest file: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent

    def resolve(key: str) -> Path:
        p = base / manifest[key]
        if not p.exists():
            raise GridModelError(f"missing file for '{key}': {p}")
        return p

    def read_matrix(key: str) -> np.ndarray:
        mat = mmread(resolve(key))
        if hasattr(mat, "todense"):
            mat = mat.todense()
        return np.asarray(mat, dtype=complex)

    y_ll = read_matrix("y_ll")
    y_l0 = read_matrix("y_l0")
    v0 = np.array([complex(re, im) for re, im in manifest["v0"]])

    entries = []
    with open(resolve("phases"), newline="") as fh:
        for rec in csv.reader(fh):
            if rec:
                entries.append((rec[0].strip(), rec[1].strip()))
    index = PhaseIndex(entries=tuple(entries), slack_phases=len(v0))
    n = len(index)

    if np.count_nonzero(y_ll) == 0:
        raise SingularAdmittanceError("singular admittance: y_ll is all zeros")
    net = NetworkModel(y_ll=y_ll, y_l0=y_l0, v0=v0, index=index)

    assignment = np.zeros(n, dtype=int)
    with open(resolve("areas"), newline="") as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            idx, area = int(rec[0]), int(rec[1])
            if not 0 <= idx < n:
                raise GridModelError(f"area file references unknown phase {idx}")
            assignment[idx] = area
    if np.any(assignment == 0):
        missing = np.flatnonzero(assignment == 0).tolist()
        raise GridModelError(f"unassigned phase(s): {missing}")
    adjacency = frozenset(
        frozenset((int(a), int(b))) for a, b in manifest.get("adjacency", [])
    )
    part = AreaPartition(
        assignment=assignment, n_areas=int(assignment.max()), adjacency=adjacency
    )

    loads = LoadScenario(s=_read_complex_csv_loads(resolve("loads"), n))
    if loads.s.shape[1] != n:
        raise GridModelError("load column count inconsistent with phase index")
    return net, loads, part


def _sample_complex(rng: np.random.Generator, lo: complex, hi: complex,
                    size) -> np.ndarray:
    re = rng.uniform(lo.real, hi.real, size)
    im = rng.uniform(lo.imag, hi.imag, size)
    return re + 1j * im


def generate_radial_feeder(
    n_buses: int,
    branching: float = 0.5,
    impedance_range: tuple[complex, complex] = (0.01 + 0.01j, 0.04 + 0.03j),
    load_range: tuple[complex, complex] = (0.002 + 0.0005j, 0.01 + 0.004j),
    seed: int = 0,
    n_steps: int = 1,
    three_phase: bool = False,
) -> tuple[NetworkModel, LoadScenario]:
    """Generate a connected radial feeder rooted at the slack bus.

    Bus 0 is the slack bus.  Each new bus attaches to the previous bus with
    probability 1 - branching, otherwise to a uniformly random earlier bus.
    In three-phase mode the tree is replicated per phase with inter-phase
    mutual impedance at 0.3x the self impedance.  Loads follow a base value
    plus a smooth ramp and 1% process noise over ``n_steps``.
    """
    if n_buses < 2:
        raise GridModelError("need at least 2 buses (slack + one load bus)")
    rng = np.random.default_rng(seed)

    parents = np.zeros(n_buses, dtype=int)
    for b in range(1, n_buses):
        if b == 1 or rng.random() > branching:
            parents[b] = b - 1
        else:
            parents[b] = int(rng.integers(0, b))

    z_lines = _sample_complex(rng, *impedance_range, n_buses)

    n_ph = 3 if three_phase else 1
    phase_labels = ("a", "b", "c")[:n_ph]
    entries = tuple(
        (f"bus{b}", ph) for b in range(1, n_buses) for ph in phase_labels
    )
    index = PhaseIndex(entries=entries, slack_phases=n_ph)

    def phase_block(z: complex) -> np.ndarray:
        if n_ph == 1:
            return np.array([[1.0 / z]])
        zmat = z * (np.eye(3) + 0.3 * (np.ones((3, 3)) - np.eye(3)))
        return np.linalg.inv(zmat)

    n = len(index)
    y_full = np.zeros((n + n_ph, n + n_ph), dtype=complex)

    def sl(bus: int) -> slice:
        return slice(bus * n_ph, (bus + 1) * n_ph)

    for b in range(1, n_buses):
        yb = phase_block(z_lines[b])
        p = parents[b]
        y_full[sl(b), sl(b)] += yb
        y_full[sl(p), sl(p)] += yb
        y_full[sl(b), sl(p)] -= yb
        y_full[sl(p), sl(b)] -= yb

    y_ll = y_full[n_ph:, n_ph:]
    y_l0 = y_full[n_ph:, :n_ph]
    if n_ph == 1:
        v0 = np.array([1.0 + 0.0j])
    else:
        v0 = np.exp(-2j * np.pi * np.arange(3) / 3)
    net = NetworkModel(y_ll=y_ll, y_l0=y_l0, v0=v0, index=index)

    base = _sample_complex(rng, *load_range, n)
    t = np.arange(n_steps) / max(n_steps, 1)
    ramp = 1.0 + 0.2 * t[:, None]  # smooth loading increase over the window
    noise = 1.0 + 0.01 * rng.standard_normal((n_steps, n))
    loads = LoadScenario(s=-base[None, :] * ramp * noise)  # negative: consumption
    return net, loads


# Parent bus of buses 2..33 in the classic 33-bus radial feeder: a main
# trunk (2..18) with laterals off buses 2, 3, and 6.
_FEEDER33_PARENTS = (
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17,  # trunk
    2, 19, 20, 21,  # lateral off bus 2
    3, 23, 24,      # lateral off bus 3
    6, 26, 27, 28, 29, 30, 31, 32,  # lateral off bus 6
)

# Contiguous area splits of the 32 non-slack buses.  The canonical 4-area
# partition keeps the trunk whole and puts each lateral in its own area, so
# every lateral area neighbors only the trunk.  The 5-area partition splits
# the trunk; the long lateral attaches near the head but couples strongly to
# the deep trunk, so that pair is declared adjacent as well.
_FEEDER33_PARTITIONS = {
    1: ((32,), ()),
    2: ((17, 15), ((1, 2),)),
    3: ((17, 7, 8), ((1, 2), (1, 3))),
    4: ((17, 4, 3, 8), ((1, 2), (1, 3), (1, 4))),
    5: ((8, 9, 4, 3, 8), ((1, 2), (1, 3), (1, 4), (1, 5), (2, 5))),
}


def feeder33_analog(
    seed: int = 0,
    n_steps: int = 1,
    n_areas: int = 4,
    impedance_range: tuple[complex, complex] = (0.02 + 0.01j, 0.06 + 0.04j),
    load_range: tuple[complex, complex] = (0.002 + 0.0005j, 0.01 + 0.004j),
) -> tuple[NetworkModel, LoadScenario, AreaPartition]:
    """Desk-scale stand-in for the 33-bus feeder with its canonical 4-area
    contiguous partition.  Topology is fixed; impedances and loads are
    sampled per seed.  Loads follow the same base + ramp + 1% noise process
    as generate_radial_feeder."""
    if n_areas not in _FEEDER33_PARTITIONS:
        raise GridModelError(f"no canonical partition with {n_areas} areas")
    rng = np.random.default_rng(seed)
    n = len(_FEEDER33_PARENTS)  # 32 non-slack buses
    entries = tuple((f"bus{b}", "a") for b in range(2, 2 + n))
    index = PhaseIndex(entries=entries, slack_phases=1)

    y_full = np.zeros((n + 1, n + 1), dtype=complex)
    z = _sample_complex(rng, *impedance_range, n)
    for k, parent in enumerate(_FEEDER33_PARENTS):
        child = k + 1  # 0 = slack (bus 1)
        y = 1.0 / z[k]
        p = parent - 1
        y_full[child, child] += y
        y_full[p, p] += y
        y_full[child, p] -= y
        y_full[p, child] -= y
    net = NetworkModel(
        y_ll=y_full[1:, 1:],
        y_l0=y_full[1:, :1],
        v0=np.array([1.0 + 0.0j]),
        index=index,
    )

    base = _sample_complex(rng, *load_range, n)
    t = np.arange(n_steps) / max(n_steps, 1)
    ramp = 1.0 + 0.2 * t[:, None]
    noise = 1.0 + 0.01 * rng.standard_normal((n_steps, n))
    loads = LoadScenario(s=-base[None, :] * ramp * noise)

    sizes, adjacency = _FEEDER33_PARTITIONS[n_areas]
    assignment = np.concatenate(
        [np.full(sz, i + 1) for i, sz in enumerate(sizes)]
    )
    part = AreaPartition(
        assignment=assignment,
        n_areas=n_areas,
        adjacency=frozenset(frozenset(p) for p in adjacency),
    )
    return net, loads, part


def solve_exact_flow(
    net: NetworkModel,
    s: np.ndarray,
    max_iters: int = 100,
    tol: float = 1e-10,
) -> np.ndarray:
    """Solve the nonlinear power flow by the Z-bus fixed-point iteration.

    Returns v with v = w + Y_LL^{-1} diag(conj(v))^{-1} conj(s) to residual
    infinity-norm <= tol.  Raises DivergedFlowError outside the convergence
    region.
    """
    s = np.asarray(s, dtype=complex)
    if s.ndim == 2:
        return np.stack([solve_exact_flow(net, row, max_iters, tol) for row in s])
    w = net.no_load_voltage
    v = w.copy()
    residual = np.inf
    for it in range(max_iters):
        v_next = w + net.solve_y_ll(np.conj(s) / np.conj(v))
        residual = float(np.max(np.abs(v_next - (w + net.solve_y_ll(
            np.conj(s) / np.conj(v_next))))))
        v = v_next
        if residual <= tol:
            return v
        if not np.all(np.isfinite(v)) or np.min(np.abs(v)) < 1e-6:
            break
    raise DivergedFlowError(residual=residual, iterations=max_iters)
