"""Factored matrix-completion objective and its solvers: the per-area
proximal ADMM updates, the decentralized driver over the message bus, the
one-area centralized baseline, and an independent singular-value-thresholding
oracle for the convex problem."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .datamatrix import ObservationMask
from .gridmodel import AreaPartition
from .linflow import AreaMaps
from .simnet import Message, MessageBus


class CompletionError(Exception):
    pass


class DivergenceError(CompletionError):
    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"non-finite iterate at iteration {iteration}")


@dataclass(frozen=True)
class AdmmConfig:
    mu: float = 10.0
    nu: float = 1.0
    gamma: float = 1.0
    lam: float = 1.0
    prox_c: float = 0.1
    rank: int | None = None  # default min(10, m)
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if min(self.mu, self.nu, self.gamma, self.lam) <= 0:
            raise CompletionError("penalty parameters must be positive")
        if self.prox_c < 0 or self.tol <= 0:
            raise CompletionError("prox_c must be >= 0 and tol > 0")

    def resolve_rank(self, m: int) -> int:
        return self.rank if self.rank is not None else min(10, m)


@dataclass
class FactorPair:
    u: np.ndarray  # m x r
    v: np.ndarray  # r x n

    def __post_init__(self):
        if self.u.shape[1] != self.v.shape[0]:
            raise CompletionError("factor inner dimensions disagree")
        if self.rank > min(self.u.shape[0], self.v.shape[1]):
            raise CompletionError("rank bound exceeds matrix dimensions")

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.u @ self.v


@dataclass
class AreaState:
    """Per-area ADMM variables plus mirror copies of neighbor quantities."""

    u: np.ndarray
    v: np.ndarray
    s: dict[int, np.ndarray] = field(default_factory=dict)  # S_lj
    q: dict[int, np.ndarray] = field(default_factory=dict)  # q_lj
    gamma: dict[int, np.ndarray] = field(default_factory=dict)  # dual for U_l = S_lj
    lam: dict[int, np.ndarray] = field(default_factory=dict)  # dual for E_lj = q_lj
    # mirrors of the neighbor-owned quantities this area's updates need
    q_in: dict[int, np.ndarray] = field(default_factory=dict)  # q_jl
    lam_in: dict[int, np.ndarray] = field(default_factory=dict)  # Lambda_jl
    e_out: dict[int, np.ndarray] = field(default_factory=dict)  # E_jl(X_l), last sent
    e_in: dict[int, np.ndarray] = field(default_factory=dict)  # E_lj(X_j), last received
    u_in: dict[int, np.ndarray] = field(default_factory=dict)  # U_j, last received


@dataclass
class ConvergenceTrace:
    rmse: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    consensus: list[float] = field(default_factory=list)
    max_area_seconds: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective)


@dataclass
class SolveResult:
    x_blocks: dict[int, np.ndarray]
    states: dict[int, AreaState]
    trace: ConvergenceTrace
    partition: AreaPartition
    bus: MessageBus | None = None
    u_history: list[dict[int, np.ndarray]] | None = None

    @property
    def x(self) -> np.ndarray:
        part = self.partition
        any_block = next(iter(self.x_blocks.values()))
        n = part.assignment.size
        out = np.empty((any_block.shape[0], n))
        for l, block in self.x_blocks.items():
            out[:, part.phases_in(l)] = block
        return out

    def factors(self) -> FactorPair:
        """Assembled (U, V): consensus average of the basis factors and the
        column-concatenated coefficients."""
        part = self.partition
        u = np.mean([self.states[l].u for l in part.areas], axis=0)
        r = u.shape[1]
        v = np.empty((r, part.assignment.size))
        for l in part.areas:
            v[:, part.phases_in(l)] = self.states[l].v
        return FactorPair(u=u, v=v)


# --- objective --------------------------------------------------------------

def objective_factored(
    u: np.ndarray,
    v: np.ndarray,
    m_data: np.ndarray,
    mask: ObservationMask | np.ndarray,
    area_maps: AreaMaps | None,
    mu: float,
    nu: float,
) -> float:
    """Centralized factored objective: 0.5(|U|^2+|V|^2) + data + flow terms."""
    x = u @ v
    if x.shape != m_data.shape:
        raise CompletionError("factor product does not match data shape")
    mb = mask.as_bool() if isinstance(mask, ObservationMask) else mask
    val = 0.5 * (np.sum(u * u) + np.sum(v * v))
    diff = np.where(mb, x - m_data, 0.0)
    val += 0.5 * mu * np.sum(diff * diff)
    if area_maps is not None and nu != 0.0:
        for l in area_maps.partition.areas:
            res = area_maps.residual(l, x)
            val += 0.5 * nu * float(res @ res)
    return val


def _objective_decentralized(problems, states, config) -> float:
    """Area-wise objective with the communicated q terms in place of the
    neighbor flow contributions."""
    val = 0.0
    n_areas = len(problems)
    for l, prob in problems.items():
        st = states[l]
        val += 0.5 * (np.sum(st.u * st.u) / n_areas + np.sum(st.v * st.v))
        x_l = st.u @ st.v
        diff = np.where(prob.mask, x_l - prob.m_l, 0.0)
        val += 0.5 * config.mu * np.sum(diff * diff)
        if prob.maps is not None:
            res = prob.e_ll @ x_l.ravel(order="F") - prob.f_l
            for j in prob.neighbors:
                res = res + st.q[j]
            val += 0.5 * config.nu * float(res @ res)
    return val


# --- initialization ---------------------------------------------------------

def init_factors(
    m_data: np.ndarray, mask: ObservationMask | np.ndarray, r: int, seed: int = 0
) -> FactorPair:
    """Balanced factors from the rank-r SVD of P_Omega(M); seeded Gaussian
    fallback when the observed matrix has lower rank."""
    if r < 1:
        raise CompletionError("rank must be >= 1")
    mb = mask.as_bool() if isinstance(mask, ObservationMask) else mask
    observed = np.where(mb, m_data, 0.0)
    uu, sv, vt = np.linalg.svd(observed, full_matrices=False)
    if np.sum(sv > 1e-12 * max(1.0, sv[0] if sv.size else 0.0)) < r:
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(r)
        return FactorPair(
            u=scale * rng.standard_normal((m_data.shape[0], r)),
            v=scale * rng.standard_normal((r, m_data.shape[1])),
        )
    uu, sv, vt = uu[:, :r], sv[:r], vt[:r]
    # sign convention: largest-magnitude entry of each left vector positive
    for k in range(r):
        idx = np.argmax(np.abs(uu[:, k]))
        if uu[idx, k] < 0:
            uu[:, k] = -uu[:, k]
            vt[k] = -vt[k]
    root = np.sqrt(sv)
    return FactorPair(u=uu * root[None, :], v=root[:, None] * vt)


# --- per-area subproblem machinery ------------------------------------------

@dataclass
class AreaProblem:
    """Constant data for one area's subproblems."""

    area: int
    cols: np.ndarray
    m_l: np.ndarray  # m x n_l data block
    mask: np.ndarray  # boolean m x n_l
    neighbors: list[int]
    n_areas: int
    maps: AreaMaps | None
    e_ll: np.ndarray | None  # E_ll acting on vec(X_l)
    e_from: dict[int, np.ndarray]  # j -> E_jl acting on vec(X_l)
    f_l: np.ndarray | None
    obs_idx: np.ndarray  # indices into vec_F(X_l) of observed entries
    obs_val: np.ndarray

    @property
    def m(self) -> int:
        return self.m_l.shape[0]

    @property
    def n_l(self) -> int:
        return self.m_l.shape[1]

    @property
    def deg(self) -> int:
        return len(self.neighbors)


def _build_problems(
    m_data: np.ndarray,
    mask: ObservationMask | np.ndarray,
    area_maps: AreaMaps | None,
    part: AreaPartition,
) -> dict[int, AreaProblem]:
    mb = mask.as_bool() if isinstance(mask, ObservationMask) else mask
    m = m_data.shape[0]
    problems = {}
    for l in part.areas:
        cols = part.phases_in(l)
        m_l = m_data[:, cols]
        mask_l = mb[:, cols]
        local_cols, rows = np.nonzero(mask_l.T)  # sorted by column block
        obs_idx = local_cols * m + rows
        problems[l] = AreaProblem(
            area=l,
            cols=cols,
            m_l=m_l,
            mask=mask_l,
            neighbors=part.neighbors(l),
            n_areas=part.n_areas,
            maps=area_maps,
            e_ll=area_maps.e_mats[(l, l)] if area_maps is not None else None,
            e_from={
                j: area_maps.e_mats[(j, l)] for j in part.neighbors(l)
            } if area_maps is not None else {},
            f_l=area_maps.f[l] if area_maps is not None else None,
            obs_idx=obs_idx,
            obs_val=m_l.ravel(order="F")[obs_idx],
        )
    return problems


def _solve_quadratic(h: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(h, rhs)
    except np.linalg.LinAlgError as exc:  # cannot occur for prox_c>0 or gamma>0
        raise CompletionError(f"singular normal matrix in block update: {exc}")


def _data_rows_u(prob: AreaProblem, v: np.ndarray) -> np.ndarray:
    """Rows of the observed-entry sampler composed with U -> U V_l, acting on
    vec(U)."""
    m = prob.m
    r = v.shape[0]
    rows = prob.obs_idx % m
    cols = prob.obs_idx // m
    a_d = np.zeros((prob.obs_idx.size, m * r))
    a_d[np.arange(rows.size)[:, None], (np.arange(r) * m)[None, :] + rows[:, None]] = v[:, cols].T
    return a_d


def _flow_rows_u(e_mat: np.ndarray, v: np.ndarray, m: int) -> np.ndarray:
    """E composed with U -> U V_l, acting on vec(U), without forming the
    Kronecker factor."""
    n_l = v.shape[1]
    g3 = e_mat.reshape(e_mat.shape[0], n_l, m)
    return np.einsum("rca,bc->rba", g3, v).reshape(e_mat.shape[0], -1)


def _flow_rows_v(e_mat: np.ndarray, u: np.ndarray) -> np.ndarray:
    """E composed with V_l -> U V_l, acting on vec(V_l)."""
    m, r = u.shape
    n_l = e_mat.shape[1] // m
    g3 = e_mat.reshape(e_mat.shape[0], n_l, m)
    return np.einsum("rci,ib->rcb", g3, u).reshape(e_mat.shape[0], -1)


def update_u(prob: AreaProblem, st: AreaState, config: AdmmConfig) -> np.ndarray:
    """Exact minimizer of the Lagrangian restricted to U_l plus the proximal
    term, by direct solve of the normal equations."""
    m, r = st.u.shape
    base = 1.0 / prob.n_areas + config.prox_c + config.gamma * prob.deg
    h = base * np.eye(m * r)
    rhs = config.prox_c * st.u.ravel(order="F")
    for j in prob.neighbors:
        rhs += config.gamma * (st.s[j] - st.gamma[j]).ravel(order="F")

    a_d = _data_rows_u(prob, st.v)
    h += config.mu * (a_d.T @ a_d)
    rhs += config.mu * (a_d.T @ prob.obs_val)

    if prob.maps is not None:
        target = prob.f_l.copy()
        for j in prob.neighbors:
            target -= st.q[j]
        a_nu = _flow_rows_u(prob.e_ll, st.v, m)
        h += config.nu * (a_nu.T @ a_nu)
        rhs += config.nu * (a_nu.T @ target)
        for j in prob.neighbors:
            a_j = _flow_rows_u(prob.e_from[j], st.v, m)
            h += config.lam * (a_j.T @ a_j)
            rhs += config.lam * (a_j.T @ (st.q_in[j] + st.lam_in[j]))

    u_new = _solve_quadratic(h, rhs).reshape((m, r), order="F")
    grad = h @ u_new.ravel(order="F") - rhs
    scale = np.linalg.norm(h) * np.linalg.norm(u_new) + np.linalg.norm(rhs)
    assert np.linalg.norm(grad) <= 1e-9 * (1.0 + scale)
    return u_new


def update_v(prob: AreaProblem, st: AreaState, u_new: np.ndarray,
             config: AdmmConfig) -> np.ndarray:
    m, r = u_new.shape
    n_l = st.v.shape[1]
    h = (1.0 + config.prox_c) * np.eye(r * n_l)
    rhs = config.prox_c * st.v.ravel(order="F")

    rows = prob.obs_idx % m
    cols = prob.obs_idx // m
    a_d = np.zeros((prob.obs_idx.size, r * n_l))
    a_d[np.arange(rows.size)[:, None], (cols * r)[:, None] + np.arange(r)[None, :]] = u_new[rows, :]
    h += config.mu * (a_d.T @ a_d)
    rhs += config.mu * (a_d.T @ prob.obs_val)

    if prob.maps is not None:
        target = prob.f_l.copy()
        for j in prob.neighbors:
            target -= st.q[j]
        a_nu = _flow_rows_v(prob.e_ll, u_new)
        h += config.nu * (a_nu.T @ a_nu)
        rhs += config.nu * (a_nu.T @ target)
        for j in prob.neighbors:
            a_j = _flow_rows_v(prob.e_from[j], u_new)
            h += config.lam * (a_j.T @ a_j)
            rhs += config.lam * (a_j.T @ (st.q_in[j] + st.lam_in[j]))

    v_new = _solve_quadratic(h, rhs).reshape((r, n_l), order="F")
    grad = h @ v_new.ravel(order="F") - rhs
    scale = np.linalg.norm(h) * np.linalg.norm(v_new) + np.linalg.norm(rhs)
    assert np.linalg.norm(grad) <= 1e-9 * (1.0 + scale)
    return v_new


def update_s(u_l: np.ndarray, u_j: np.ndarray) -> np.ndarray:
    """Consensus average for the shared-basis auxiliary variable."""
    return 0.5 * (u_l + u_j)


def update_q(
    prob: AreaProblem,
    e_ll_val: np.ndarray,
    e_in: dict[int, np.ndarray],
    lam_duals: dict[int, np.ndarray],
    config: AdmmConfig,
) -> dict[int, np.ndarray]:
    """Simultaneous closed-form solve of the coupled q system at one area."""
    if config.lam == 0:
        raise CompletionError("unsupported config: q update requires lambda > 0")
    lam, nu = config.lam, config.nu
    deg = prob.deg
    rhs = {
        j: lam * (e_in[j] - lam_duals[j]) + nu * (prob.f_l - e_ll_val)
        for j in prob.neighbors
    }
    if not rhs:
        return {}
    total = np.sum(list(rhs.values()), axis=0)
    factor = nu / (lam + nu * deg)
    return {j: (rhs[j] - factor * total) / lam for j in prob.neighbors}


def update_duals(
    st: AreaState,
    u_new: np.ndarray,
    s_new: dict[int, np.ndarray],
    q_new: dict[int, np.ndarray],
    e_in: dict[int, np.ndarray],
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    gamma_new = {j: st.gamma[j] + u_new - s_new[j] for j in s_new}
    lam_new = {j: st.lam[j] + (q_new[j] - e_in[j]) for j in q_new}
    return gamma_new, lam_new


# --- drivers ----------------------------------------------------------------

def _init_states(
    problems: dict[int, AreaProblem],
    m_data: np.ndarray,
    mask,
    r: int,
    seed: int,
) -> dict[int, AreaState]:
    pair = init_factors(m_data, mask, r, seed)
    states = {}
    for l, prob in problems.items():
        u = pair.u.copy()
        v = pair.v[:, prob.cols].copy()
        st = AreaState(u=u, v=v)
        x_vec = (u @ v).ravel(order="F")
        for j in prob.neighbors:
            st.s[j] = u.copy()
            st.gamma[j] = np.zeros_like(u)
            if prob.maps is not None:
                st.e_out[j] = prob.e_from[j] @ x_vec
                st.lam[j] = np.zeros(prob.maps.residual_dim(l))
                st.lam_in[j] = np.zeros(prob.maps.residual_dim(j))
        states[l] = st
    # q_lj and its mirrors start at the corresponding E values so the first
    # primal solve sees a consistent decentralized model
    for l, prob in problems.items():
        st = states[l]
        for j in prob.neighbors:
            if prob.maps is not None:
                e_lj = states[j].e_out[l]  # E_lj(X_j), computed at area j
                st.q[j] = e_lj.copy()
                st.e_in[j] = e_lj.copy()
    for l, prob in problems.items():
        for j in prob.neighbors:
            if prob.maps is not None:
                states[l].q_in[j] = states[j].q[l].copy()
    return states


def _consensus_residual(problems, states) -> float:
    worst = 0.0
    for l, prob in problems.items():
        for j in prob.neighbors:
            worst = max(worst, float(np.linalg.norm(states[l].u - states[j].u)))
    return worst


def run_decentralized(
    m_data: np.ndarray,
    mask: ObservationMask | np.ndarray,
    area_maps: AreaMaps | None,
    part: AreaPartition,
    config: AdmmConfig,
    reference: np.ndarray | None = None,
    bus: MessageBus | None = None,
    order: dict[int, list[int]] | None = None,
    keep_history: bool = False,
) -> SolveResult:
    """Proximal ADMM over the area graph, two bus rounds per iteration.

    Round A delivers last iteration's q terms, then every area solves its
    U/V subproblems and sends its basis factor and the flow terms its
    neighbors need.  Round B computes q, the consensus average, and the dual
    ascent steps, then sends q.  Stops when both the consensus residual and
    the relative iterate change fall below tol.
    """
    m_data = np.asarray(m_data, dtype=float)
    m = m_data.shape[0]
    r = config.resolve_rank(m)
    problems = _build_problems(m_data, mask, area_maps, part)
    states = _init_states(problems, m_data, mask, r, config.seed)
    if bus is None:
        bus = MessageBus(part.areas, part.adjacency)
    trace = ConvergenceTrace()
    history: list[dict[int, np.ndarray]] = [] if keep_history else None
    timings: dict[int, float] = {}

    def node_a(l: int):
        prob, st = problems[l], states[l]

        def fn(inbox):
            t0 = time.perf_counter()
            for j in prob.neighbors:
                key = (j, "q-term")
                if key in inbox:  # refresh mirrors of the neighbor-owned duals
                    q_jl = inbox[key]
                    st.lam_in[j] = st.lam_in[j] + (q_jl - st.e_out[j])
                    st.q_in[j] = q_jl
            u_new = update_u(prob, st, config)
            v_new = update_v(prob, st, u_new, config)
            st.u, st.v = u_new, v_new
            sends = []
            if prob.neighbors:
                x_vec = (u_new @ v_new).ravel(order="F")
                for j in prob.neighbors:
                    st.e_out[j] = prob.e_from[j] @ x_vec
                    sends.append(Message(dest=j, tag="factor", payload=u_new))
                    if prob.maps is not None:
                        sends.append(
                            Message(dest=j, tag="flow-term", payload=st.e_out[j])
                        )
            timings[l] = time.perf_counter() - t0
            return None, sends

        return fn

    def node_b(l: int):
        prob, st = problems[l], states[l]

        def fn(inbox):
            t0 = time.perf_counter()
            sends = []
            if prob.neighbors:
                for j in prob.neighbors:
                    st.u_in[j] = inbox[(j, "factor")].reshape(st.u.shape)
                    if prob.maps is not None:
                        st.e_in[j] = inbox[(j, "flow-term")]
                if prob.maps is not None:
                    e_ll_val = prob.e_ll @ (st.u @ st.v).ravel(order="F")
                    q_new = update_q(prob, e_ll_val, st.e_in, st.lam, config)
                else:
                    q_new = {}
                s_new = {j: update_s(st.u, st.u_in[j]) for j in prob.neighbors}
                gamma_new, lam_new = update_duals(st, st.u, s_new, q_new, st.e_in)
                st.s, st.gamma = s_new, gamma_new
                if prob.maps is not None:
                    st.q, st.lam = q_new, lam_new
                    for j in prob.neighbors:
                        sends.append(Message(dest=j, tag="q-term", payload=q_new[j]))
            timings[l] += time.perf_counter() - t0
            return None, sends

        return fn

    x_prev = None
    for k in range(config.max_iters):
        order_a = order.get(2 * k) if order else None
        order_b = order.get(2 * k + 1) if order else None
        bus.run_round({l: node_a(l) for l in part.areas}, order=order_a)
        bus.run_round({l: node_b(l) for l in part.areas}, order=order_b)

        x_blocks = {l: states[l].u @ states[l].v for l in part.areas}
        x_full = np.empty_like(m_data)
        for l, prob in problems.items():
            x_full[:, prob.cols] = x_blocks[l]
        if not np.all(np.isfinite(x_full)):
            raise DivergenceError(iteration=k)

        consensus = _consensus_residual(problems, states)
        trace.consensus.append(consensus)
        trace.objective.append(_objective_decentralized(problems, states, config))
        trace.max_area_seconds.append(max(timings.values()))
        if reference is not None:
            trace.rmse.append(
                float(np.sqrt(np.mean((x_full - reference) ** 2)))
            )
        if keep_history:
            history.append({l: states[l].u.copy() for l in part.areas})

        if x_prev is not None:
            denom = max(np.linalg.norm(x_prev), 1e-30)
            change = np.linalg.norm(x_full - x_prev) / denom
            if consensus < config.tol and change < config.tol:
                x_prev = x_full
                break
        x_prev = x_full

    return SolveResult(
        x_blocks={l: states[l].u @ states[l].v for l in part.areas},
        states=states,
        trace=trace,
        partition=part,
        bus=bus,
        u_history=history,
    )


def run_centralized(
    m_data: np.ndarray,
    mask: ObservationMask | np.ndarray,
    area_maps: AreaMaps | None,
    config: AdmmConfig,
    reference: np.ndarray | None = None,
    keep_history: bool = False,
) -> SolveResult:
    """One-area instance of the same iteration, without a message bus."""
    if area_maps is not None and area_maps.partition.n_areas != 1:
        raise CompletionError("run_centralized requires single-area maps")
    m_data = np.asarray(m_data, dtype=float)
    part = AreaPartition.single_area(m_data.shape[1])
    problems = _build_problems(m_data, mask, area_maps, part)
    r = config.resolve_rank(m_data.shape[0])
    states = _init_states(problems, m_data, mask, r, config.seed)
    prob, st = problems[1], states[1]
    trace = ConvergenceTrace()
    history = [] if keep_history else None

    x_prev = None
    for k in range(config.max_iters):
        t0 = time.perf_counter()
        u_new = update_u(prob, st, config)
        v_new = update_v(prob, st, u_new, config)
        st.u, st.v = u_new, v_new
        elapsed = time.perf_counter() - t0
        x_full = st.u @ st.v
        if not np.all(np.isfinite(x_full)):
            raise DivergenceError(iteration=k)
        trace.consensus.append(0.0)
        trace.objective.append(_objective_decentralized(problems, states, config))
        trace.max_area_seconds.append(elapsed)
        if reference is not None:
            trace.rmse.append(float(np.sqrt(np.mean((x_full - reference) ** 2))))
        if keep_history:
            history.append({1: st.u.copy()})
        if x_prev is not None:
            change = np.linalg.norm(x_full - x_prev) / max(
                np.linalg.norm(x_prev), 1e-30
            )
            if change < config.tol:
                break
        x_prev = x_full

    return SolveResult(
        x_blocks={1: st.u @ st.v},
        states=states,
        trace=trace,
        partition=part,
        bus=None,
        u_history=history,
    )


# --- independent convex oracle ----------------------------------------------

def svt_objective(x: np.ndarray, m_data: np.ndarray, mb: np.ndarray,
                  mu: float) -> float:
    sv = np.linalg.svd(x, compute_uv=False)
    diff = np.where(mb, x - m_data, 0.0)
    return float(np.sum(sv) + 0.5 * mu * np.sum(diff * diff))


def svt_oracle(
    m_data: np.ndarray,
    mask: ObservationMask | np.ndarray,
    mu: float,
    max_iters: int = 20000,
) -> np.ndarray:
    """Proximal gradient with singular-value soft-thresholding for the convex
    nuclear-norm problem; certified reference for the nu = 0 case."""
    if mu <= 0:
        raise CompletionError("mu must be positive")
    mb = mask.as_bool() if isinstance(mask, ObservationMask) else mask
    m_data = np.asarray(m_data, dtype=float)
    x = np.zeros_like(m_data)
    prev_obj = svt_objective(x, m_data, mb, mu)
    for _ in range(max_iters):
        grad_step = x - np.where(mb, x - m_data, 0.0)
        uu, sv, vt = np.linalg.svd(grad_step, full_matrices=False)
        sv = np.maximum(sv - 1.0 / mu, 0.0)
        x = (uu * sv[None, :]) @ vt
        obj = svt_objective(x, m_data, mb, mu)
        if prev_obj - obj < 1e-10:
            break
        prev_obj = obj
    return x
