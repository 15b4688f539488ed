"""Linear voltage model (N, K, w), area truncation, Algorithm-2 style
decentralized evaluation, and the per-area linear maps feeding the
completion objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamatrix import ROWS_PER_STEP
from .gridmodel import AreaPartition, NetworkModel
from .simnet import Message, MessageBus


class LinFlowError(Exception):
    pass


@dataclass(frozen=True)
class LinearFlowModel:
    """v ~ w + N h, |v| ~ |w| + K h with h = [Re s; Im s], identical blocks
    replicated over n_steps time steps."""

    n_mat: np.ndarray  # complex, |P| x 2|P|
    k_mat: np.ndarray  # real, |P| x 2|P|
    w: np.ndarray  # complex, |P|
    n_steps: int

    @property
    def n_phases(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class TruncatedFlowModel(LinearFlowModel):
    partition: AreaPartition = None

    def __post_init__(self):
        if self.partition is None:
            raise LinFlowError("truncated model requires a partition")


def build_linear_model(net: NetworkModel, n_steps: int = 1) -> LinearFlowModel:
    """First fixed-point iterate around the no-load profile w."""
    w = net.no_load_voltage
    if np.min(np.abs(w)) < 1e-9:
        raise LinFlowError("degenerate linearization: no-load voltage has a zero entry")
    n = net.n_phases
    g = net.solve_y_ll(np.diag(1.0 / np.conj(w)))
    n_mat = np.hstack([g, -1j * g])
    # first-order expansion of |w + delta| around w
    phase = (np.conj(w) / np.abs(w))[:, None]
    k_mat = np.real(phase * n_mat)
    assert n_mat.shape == (n, 2 * n)
    return LinearFlowModel(n_mat=n_mat, k_mat=k_mat, w=w, n_steps=n_steps)


def h_from_loads(s: np.ndarray) -> np.ndarray:
    """Stack [Re s, Im s] per time step into a (T, 2|P|) real array."""
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    return np.hstack([s.real, s.imag])


def predict(model: LinearFlowModel, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centralized evaluation: returns (v, |v|) of shape (T, |P|)."""
    h = np.atleast_2d(h)
    v = model.w[None, :] + h @ model.n_mat.T
    vmag = np.abs(model.w)[None, :] + h @ model.k_mat.T
    return v, vmag


def _coupling_mask(part: AreaPartition) -> np.ndarray:
    """Boolean |P| x |P|: True where phases share an area or adjacent areas."""
    a = part.assignment
    keep = a[:, None] == a[None, :]
    for pair in part.adjacency:
        x, y = sorted(pair)
        keep |= (a[:, None] == x) & (a[None, :] == y)
        keep |= (a[:, None] == y) & (a[None, :] == x)
    return keep


def truncate_model(model: LinearFlowModel, part: AreaPartition) -> TruncatedFlowModel:
    """Zero all couplings outside same-area/neighbor-area blocks (applied to
    both N and K)."""
    n = model.n_phases
    if part.assignment.shape[0] != n:
        raise LinFlowError("partition does not cover the model's phases")
    keep = _coupling_mask(part)
    keep2 = np.hstack([keep, keep])  # N columns pair up (Re s, Im s) per phase
    return TruncatedFlowModel(
        n_mat=np.where(keep2, model.n_mat, 0.0),
        k_mat=np.where(keep2, model.k_mat, 0.0),
        w=model.w,
        n_steps=model.n_steps,
        partition=part,
    )


def truncation_error(model: LinearFlowModel, truncated: LinearFlowModel) -> float:
    """Relative Frobenius error between the full and truncated N matrices."""
    if model.n_mat.shape != truncated.n_mat.shape:
        raise LinFlowError("model shapes do not match")
    denom = np.linalg.norm(model.n_mat)
    if denom == 0:
        raise LinFlowError("undefined metric: N is zero")
    return float(np.linalg.norm(model.n_mat - truncated.n_mat) / denom)


@dataclass(frozen=True)
class FlowTerm:
    """Aggregated contribution of one area's injections to one phase: complex
    phasor part p and real magnitude part q, per time step."""

    p: np.ndarray  # complex, (T,)
    q: np.ndarray  # real, (T,)

    def stacked(self) -> np.ndarray:
        """Flat real layout [Re p; Im p; q] used on the wire."""
        return np.concatenate([self.p.real, self.p.imag, self.q])

    @classmethod
    def from_stacked(cls, payload: np.ndarray) -> "FlowTerm":
        t = payload.size // 3
        return cls(p=payload[:t] + 1j * payload[t : 2 * t], q=payload[2 * t :])

    @classmethod
    def zeros(cls, n_steps: int) -> "FlowTerm":
        return cls(p=np.zeros(n_steps, dtype=complex), q=np.zeros(n_steps))

    def __add__(self, other: "FlowTerm") -> "FlowTerm":
        return FlowTerm(p=self.p + other.p, q=self.q + other.q)


def area_flow_terms(
    model: TruncatedFlowModel, h: np.ndarray, area: int
) -> dict[int, FlowTerm]:
    """T_{area,i} for every phase i in the given area or an adjacent area."""
    part = model.partition
    if area not in part.areas:
        raise LinFlowError(f"unknown area id {area}")
    h = np.atleast_2d(h)
    n = model.n_phases
    src = part.phases_in(area)
    cols = np.concatenate([src, src + n])
    targets = list(part.phases_in(area))
    for k in part.neighbors(area):
        targets.extend(part.phases_in(k))
    out = {}
    for i in sorted(targets):
        p = h[:, cols] @ model.n_mat[i, cols]
        q = h[:, cols] @ model.k_mat[i, cols]
        out[int(i)] = FlowTerm(p=p, q=q)
    return out


def decentralized_flow(
    model: TruncatedFlowModel,
    h: np.ndarray,
    part: AreaPartition | None = None,
    bus: MessageBus | None = None,
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Evaluate the truncated model by the per-area exchange protocol.

    Each area sends the aggregated flow terms for its neighbors' phases, then
    assembles its own voltages.  Returns per-area (v, |v|) arrays of shape
    (T, n_l); identical to dense evaluation of the truncated model.
    """
    part = part if part is not None else model.partition
    h = np.atleast_2d(h)
    n_steps = h.shape[0]
    if bus is None:
        bus = MessageBus(part.areas, part.adjacency)

    local_terms = {l: area_flow_terms(model, h, l) for l in part.areas}

    def send_node(area: int):
        def fn(inbox):
            sends = []
            for k in part.neighbors(area):
                for i in part.phases_in(k):
                    sends.append(
                        Message(
                            dest=k,
                            tag=f"flow-term:{i}",
                            payload=local_terms[area][int(i)].stacked(),
                        )
                    )
            return None, sends

        return fn

    def recv_node(area: int):
        def fn(inbox):
            own = part.phases_in(area)
            v = np.empty((n_steps, own.size), dtype=complex)
            vmag = np.empty((n_steps, own.size))
            for pos, i in enumerate(own):
                total = local_terms[area][int(i)]
                for src in part.neighbors(area):
                    payload = inbox[(src, f"flow-term:{i}")]
                    total = total + FlowTerm.from_stacked(payload)
                v[:, pos] = model.w[i] + total.p
                vmag[:, pos] = np.abs(model.w[i]) + total.q
            return (v, vmag), []

        return fn

    bus.run_round({l: send_node(l) for l in part.areas})
    return bus.run_round({l: recv_node(l) for l in part.areas})


# --- per-area linear maps over the measurement matrix -----------------------

@dataclass(frozen=True)
class AreaMaps:
    """Linear maps E_lj from area-j measurement columns to the area-l residual
    space, plus the affine targets f_l.

    The residual space of area l stacks, for each of its phases (in phase
    order) and each time step, the real rows [Re v, Im v, |v|], giving
    3T * n_l entries.  e_mats[(l, j)] acts on the column-major flattening of
    the m x n_j block X_j."""

    partition: AreaPartition
    n_steps: int
    n_phases: int
    cols: dict[int, np.ndarray]
    e_mats: dict[tuple[int, int], np.ndarray]
    f: dict[int, np.ndarray]

    @property
    def m(self) -> int:
        return ROWS_PER_STEP * self.n_steps

    def residual_dim(self, area: int) -> int:
        return 3 * self.n_steps * self.cols[area].size

    def sources(self, area: int) -> list[int]:
        return [area] + self.partition.neighbors(area)

    def block(self, x: np.ndarray, area: int) -> np.ndarray:
        return x[:, self.cols[area]]

    def apply(self, l: int, j: int, x: np.ndarray) -> np.ndarray:
        """E_lj evaluated on the full m x |P| matrix x."""
        return self.apply_block(l, j, self.block(x, j))

    def apply_block(self, l: int, j: int, x_j: np.ndarray) -> np.ndarray:
        """E_lj evaluated on the area-j column block itself."""
        return self.e_mats[(l, j)] @ x_j.ravel(order="F")

    def residual(self, l: int, x: np.ndarray) -> np.ndarray:
        """E_ll(X) + sum_j E_lj(X) - f_l."""
        out = -self.f[l].copy()
        for j in self.sources(l):
            out += self.apply(l, j, x)
        return out


def build_area_maps(model: TruncatedFlowModel, part: AreaPartition | None = None) -> AreaMaps:
    part = part if part is not None else model.partition
    n = model.n_phases
    t_steps = model.n_steps
    m = ROWS_PER_STEP * t_steps
    cols = {l: part.phases_in(l) for l in part.areas}

    e_mats: dict[tuple[int, int], np.ndarray] = {}
    f: dict[int, np.ndarray] = {}
    for l in part.areas:
        own = cols[l]
        n_l = own.size
        rdim = 3 * t_steps * n_l
        f_l = np.empty(rdim)
        for pos, c in enumerate(own):
            for t in range(t_steps):
                base = 3 * (pos * t_steps + t)
                f_l[base] = model.w[c].real
                f_l[base + 1] = model.w[c].imag
                f_l[base + 2] = np.abs(model.w[c])
        f[l] = f_l

        for j in [l] + part.neighbors(l):
            src = cols[j]
            n_j = src.size
            g = np.zeros((rdim, m * n_j))
            for pos, c in enumerate(own):
                for t in range(t_steps):
                    base = 3 * (pos * t_steps + t)
                    if j == l:
                        # voltage-row picks of the target phase itself
                        cpos = pos
                        g[base, cpos * m + ROWS_PER_STEP * t] += 1.0
                        g[base + 1, cpos * m + ROWS_PER_STEP * t + 1] += 1.0
                        g[base + 2, cpos * m + ROWS_PER_STEP * t + 2] += 1.0
                    for dpos, d in enumerate(src):
                        re_idx = dpos * m + ROWS_PER_STEP * t + 3
                        im_idx = dpos * m + ROWS_PER_STEP * t + 4
                        n_re = model.n_mat[c, d]
                        n_im = model.n_mat[c, d + n]
                        g[base, re_idx] -= n_re.real
                        g[base, im_idx] -= n_im.real
                        g[base + 1, re_idx] -= n_re.imag
                        g[base + 1, im_idx] -= n_im.imag
                        g[base + 2, re_idx] -= model.k_mat[c, d]
                        g[base + 2, im_idx] -= model.k_mat[c, d + n]
            e_mats[(l, j)] = g

    return AreaMaps(
        partition=part,
        n_steps=t_steps,
        n_phases=n,
        cols=cols,
        e_mats=e_mats,
        f=f,
    )
