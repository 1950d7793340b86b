"""Distributed reservoir construction and state stepping.

The network is a single recurrent reservoir spread over the sensor nodes of
a :class:`~sodesn.topology.Topology`.  Each node hosts input units, tanh
internal units and linear output units.  Internal units connect recurrently
within a node and, sparsely, to internal units on neighbor nodes.  Remote
activations arrive through *proxy units*: local placeholders that take the
value forwarded by the remote unit when the link delivers, and 0 when it
does not.

State update for node j (all nodes advance in lockstep)::

    x_j(n+1) = tanh( Win_j u_j(n+1) + W_j x_j(n) + C_j p_j(n) )
    p_j(n+1) = delivered ? remote x(n+1) : 0        (per proxy slot)
    y_j(n+1) = Wout_j [ p_j(n+1); x_j(n+1); u_j(n+1) ]

With perfect links this is exactly a standard echo state network whose
global weight matrix carries the topology's block structure, so the usual
spectral-radius scaling controls the echo state property.

Proxy slots on node j are grouped by source neighbor in ascending node id,
mirroring the neighbor's internal units in order.  Readouts see local units
in the fixed order [proxy; internal; input].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .topology import LinkOutcomes, Topology
from .validation import check_probability, ensure_rng

__all__ = [
    "NodeSpec",
    "Sodesn",
    "NetworkState",
    "init_sodesn",
    "spectral_radius",
    "step",
    "assemble_global_w",
    "random_network_state",
]

# Below this many internal units the global operators are kept dense; per-step
# matvec overhead beats sparse bookkeeping for small nets.
_DENSE_LIMIT = 400

# Dense eigensolver handles matrices below this size; ARPACK above.
_EIG_DENSE_LIMIT = 200


@dataclass(frozen=True)
class NodeSpec:
    """Per-node unit counts, uniform across all sensor nodes."""

    inputs_per_node: int
    internal_per_node: int
    outputs_per_node: int

    def __post_init__(self):
        if self.internal_per_node < 1:
            raise ValueError("internal_per_node must be >= 1")
        if self.inputs_per_node < 0 or self.outputs_per_node < 0:
            raise ValueError("unit counts must be non-negative")


@dataclass
class NetworkState:
    """Activations of all units after one step.

    ``u``: inputs (K,), ``x``: internal units (N,), ``proxy``: proxy units
    (P,) in the network's proxy layout, ``y``: outputs (L,).
    """

    u: np.ndarray
    x: np.ndarray
    proxy: np.ndarray
    y: np.ndarray


@dataclass
class _GlobalOps:
    """Assembled whole-network operators (dense below _DENSE_LIMIT units)."""

    win: object  # (N, K)
    w: object  # (N, N) local blocks only
    c: object | None  # (N, P) proxy -> internal
    wout: object  # (L, Z)


class Sodesn:
    """Distributed reservoir: per-node weight matrices plus readout weights.

    Parameters
    ----------
    topology : Topology
        Sensor-node graph; cross-node connections exist only along its edges.
    spec : NodeSpec
        Unit counts per node.
    w_local : list of (N_j, N_j) arrays
        Recurrent weights within each node.
    w_in : list of (N_j, K_j) arrays
        Input-to-internal weights (dense).
    cross : list of (N_j, M_j) arrays
        Proxy-to-internal weights; column p corresponds to proxy slot p of
        the node.  M_j is the total internal-unit count of the neighbors.
    w_out : list of (L_j, M_j + N_j + K_j) arrays
        Readout weights over [proxy; internal; input].
    rho_target : float
        Spectral radius the assembled global matrix was scaled to.
    seed : int or None
        Seed used to draw the weights (recorded for bundles).
    teacher_mode : {"linear", "atanh"}
        "linear" reads outputs as Wout z; "atanh" applies tanh at the
        readout (paired with an atanh-transformed teacher during training).
    """

    def __init__(
        self,
        topology: Topology,
        spec: NodeSpec,
        w_local,
        w_in,
        cross,
        w_out,
        rho_target: float,
        seed=None,
        teacher_mode: str = "linear",
        normalization=None,
        sensor_names=None,
        training_meta=None,
    ):
        if teacher_mode not in ("linear", "atanh"):
            raise ValueError(f"unknown teacher_mode {teacher_mode!r}")
        self.topology = topology
        self.spec = spec
        self.w_local = [np.asarray(w, dtype=float) for w in w_local]
        self.w_in = [np.asarray(w, dtype=float) for w in w_in]
        self.cross = [np.asarray(w, dtype=float) for w in cross]
        self.w_out = [np.asarray(w, dtype=float) for w in w_out]
        self.rho_target = float(rho_target)
        self.seed = seed
        self.teacher_mode = teacher_mode
        self.normalization = normalization
        self.sensor_names = tuple(sensor_names) if sensor_names is not None else None
        self.training_meta = training_meta
        self._build_layout()
        self._check_shapes()
        self._ops_cache = None

    # ------------------------------------------------------------------
    # layout
    # ------------------------------------------------------------------

    def _build_layout(self):
        nn = self.topology.node_count
        km, nm, lm = (
            self.spec.inputs_per_node,
            self.spec.internal_per_node,
            self.spec.outputs_per_node,
        )
        self.n_nodes = nn
        self.n_inputs = nn * km
        self.n_internal = nn * nm
        self.n_outputs = nn * lm
        self.proxy_sources = [sorted(self.topology.neighbors[j]) for j in range(nn)]
        self.proxy_counts = [len(src) * nm for src in self.proxy_sources]
        self.proxy_offsets = np.concatenate(([0], np.cumsum(self.proxy_counts)))
        self.n_proxies = int(self.proxy_offsets[-1])

        # Per proxy slot: the global internal unit it mirrors, and the
        # directed edge whose delivery gates it.
        src_idx = np.empty(self.n_proxies, dtype=np.intp)
        edge_idx = np.empty(self.n_proxies, dtype=np.intp)
        pos = 0
        for j in range(nn):
            for i in self.proxy_sources[j]:
                src_idx[pos : pos + nm] = np.arange(i * nm, (i + 1) * nm)
                edge_idx[pos : pos + nm] = self.topology.edge_index(i, j)
                pos += nm
        self._proxy_src = src_idx
        self._proxy_edge = edge_idx

        # Readout vector layout: per node [proxy; internal; input], expressed
        # as a gather from concat([proxy, x, u]).
        widths = [self.proxy_counts[j] + nm + km for j in range(nn)]
        self.readout_widths = widths
        self.readout_offsets = np.concatenate(([0], np.cumsum(widths)))
        gather = np.empty(int(self.readout_offsets[-1]), dtype=np.intp)
        p0, n0 = self.n_proxies, self.n_proxies + self.n_internal
        for j in range(nn):
            z = self.readout_offsets[j]
            mj = self.proxy_counts[j]
            gather[z : z + mj] = np.arange(self.proxy_offsets[j], self.proxy_offsets[j] + mj)
            gather[z + mj : z + mj + nm] = p0 + np.arange(j * nm, (j + 1) * nm)
            gather[z + mj + nm : z + mj + nm + km] = n0 + np.arange(j * km, (j + 1) * km)
        self._z_gather = gather

    def _check_shapes(self):
        km, nm, lm = (
            self.spec.inputs_per_node,
            self.spec.internal_per_node,
            self.spec.outputs_per_node,
        )
        for j in range(self.n_nodes):
            mj = self.proxy_counts[j]
            if self.w_local[j].shape != (nm, nm):
                raise ValueError(f"node {j}: W must be {(nm, nm)}, got {self.w_local[j].shape}")
            if self.w_in[j].shape != (nm, km):
                raise ValueError(f"node {j}: W_in must be {(nm, km)}, got {self.w_in[j].shape}")
            if self.cross[j].shape != (nm, mj):
                raise ValueError(f"node {j}: cross must be {(nm, mj)}, got {self.cross[j].shape}")
            if self.w_out[j].shape != (lm, mj + nm + km):
                raise ValueError(
                    f"node {j}: W_out must be {(lm, mj + nm + km)}, got {self.w_out[j].shape}"
                )

    # ------------------------------------------------------------------
    # indexing helpers
    # ------------------------------------------------------------------

    def internal_slice(self, node: int) -> slice:
        nm = self.spec.internal_per_node
        return slice(node * nm, (node + 1) * nm)

    def input_slice(self, node: int) -> slice:
        km = self.spec.inputs_per_node
        return slice(node * km, (node + 1) * km)

    def output_slice(self, node: int) -> slice:
        lm = self.spec.outputs_per_node
        return slice(node * lm, (node + 1) * lm)

    def proxy_slice(self, node: int) -> slice:
        return slice(int(self.proxy_offsets[node]), int(self.proxy_offsets[node + 1]))

    def node_of_input(self, sensor: int) -> int:
        if not 0 <= sensor < self.n_inputs:
            raise ValueError(f"sensor {sensor} out of range")
        return sensor // self.spec.inputs_per_node

    def output_index_of_sensor(self, sensor: int) -> int:
        """Global index of the output unit predicting ``sensor``.

        Requires one output per input on each node (local input k maps to
        local output k).
        """
        km, lm = self.spec.inputs_per_node, self.spec.outputs_per_node
        node, local = divmod(sensor, km)
        if local >= lm:
            raise ValueError(
                f"sensor {sensor} has no matching output unit (outputs_per_node={lm})"
            )
        return node * lm + local

    def proxies_from(self, dst: int, src: int) -> slice:
        """Slots on ``dst`` mirroring internal units of neighbor ``src``."""
        sources = self.proxy_sources[dst]
        if src not in sources:
            raise ValueError(f"node {src} is not a neighbor of node {dst}")
        nm = self.spec.internal_per_node
        k = sources.index(src)
        base = int(self.proxy_offsets[dst]) + k * nm
        return slice(base, base + nm)

    # ------------------------------------------------------------------
    # assembled operators
    # ------------------------------------------------------------------

    def _ops(self) -> _GlobalOps:
        if self._ops_cache is None:
            dense = self.n_internal <= _DENSE_LIMIT
            # Cross-node influence enters through the proxies (C), so the
            # recurrent operator holds the local blocks only; the assembled
            # matrix with cross entries is used for scaling/analysis.
            self._ops_cache = _GlobalOps(
                win=_block_diag(self.w_in, dense),
                w=_block_diag(self.w_local, dense),
                c=_block_diag(self.cross, dense) if self.n_proxies else None,
                wout=_block_diag(self.w_out, dense),
            )
        return self._ops_cache

    def readout_vector(self, state: NetworkState) -> np.ndarray:
        """Concatenated per-node [proxy; internal; input] activations."""
        return np.concatenate((state.proxy, state.x, state.u))[self._z_gather]

    def zero_state(self) -> NetworkState:
        return NetworkState(
            u=np.zeros(self.n_inputs),
            x=np.zeros(self.n_internal),
            proxy=np.zeros(self.n_proxies),
            y=np.zeros(self.n_outputs),
        )

    def with_readout(self, w_out) -> "Sodesn":
        """Copy of this network with replaced readout weights; reservoir
        matrices are shared (training never touches them)."""
        return Sodesn(
            topology=self.topology,
            spec=self.spec,
            w_local=self.w_local,
            w_in=self.w_in,
            cross=self.cross,
            w_out=w_out,
            rho_target=self.rho_target,
            seed=self.seed,
            teacher_mode=self.teacher_mode,
            normalization=self.normalization,
            sensor_names=self.sensor_names,
            training_meta=self.training_meta,
        )


def _block_diag(blocks, dense: bool):
    """Block-diagonal operator from per-node matrices; tolerates zero-width
    blocks (nodes without neighbors)."""
    n_rows = sum(b.shape[0] for b in blocks)
    n_cols = sum(b.shape[1] for b in blocks)
    if dense:
        out = np.zeros((n_rows, n_cols))
        r = c = 0
        for b in blocks:
            out[r : r + b.shape[0], c : c + b.shape[1]] = b
            r += b.shape[0]
            c += b.shape[1]
        return out
    rows, cols, vals = [], [], []
    r = c = 0
    for b in blocks:
        br, bc = np.nonzero(b)
        rows.append(br + r)
        cols.append(bc + c)
        vals.append(b[br, bc])
        r += b.shape[0]
        c += b.shape[1]
    rows = np.concatenate(rows) if rows else np.array([], dtype=np.intp)
    cols = np.concatenate(cols) if cols else np.array([], dtype=np.intp)
    vals = np.concatenate(vals) if vals else np.array([])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))


def assemble_global_w(net: Sodesn, as_sparse: bool | None = None):
    """Global internal-to-internal matrix: local blocks on the diagonal plus
    cross-node entries routed through the proxy wiring.

    Entry (row, col) couples global internal unit ``col`` into unit ``row``;
    blocks between non-neighbor nodes are structurally zero.
    """
    nm = net.spec.internal_per_node
    n = net.n_internal
    rows, cols, vals = [], [], []
    for j in range(net.n_nodes):
        base = j * nm
        br, bc = np.nonzero(net.w_local[j])
        rows.append(br + base)
        cols.append(bc + base)
        vals.append(net.w_local[j][br, bc])
        mj = net.proxy_counts[j]
        if mj:
            src = net._proxy_src[net.proxy_slice(j)]
            cr, cc = np.nonzero(net.cross[j])
            rows.append(cr + base)
            cols.append(src[cc])
            vals.append(net.cross[j][cr, cc])
    rows = np.concatenate(rows) if rows else np.array([], dtype=np.intp)
    cols = np.concatenate(cols) if cols else np.array([], dtype=np.intp)
    vals = np.concatenate(vals) if vals else np.array([])
    w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if as_sparse is None:
        as_sparse = n > _DENSE_LIMIT
    return w if as_sparse else w.toarray()


def spectral_radius(w, tol: float = 1e-10) -> float:
    """Largest eigenvalue magnitude of a square matrix.

    Small or dense matrices go through the dense eigensolver; large sparse
    matrices use ARPACK with a fixed start vector (deterministic), falling
    back to the dense solver if the iteration does not converge.
    """
    is_sparse = sp.issparse(w)
    if not is_sparse:
        w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    if n == 0:
        return 0.0
    if is_sparse and n >= _EIG_DENSE_LIMIT:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            vals = spla.eigs(
                w.tocsr().astype(float),
                k=1,
                which="LM",
                v0=v0,
                tol=tol,
                maxiter=max(5000, 100 * n),
                return_eigenvectors=False,
            )
            return float(np.max(np.abs(vals)))
        except (spla.ArpackNoConvergence, spla.ArpackError):
            pass  # fall through to the dense solver
    dense = w.toarray() if is_sparse else w
    if n == 1:
        return float(abs(dense[0, 0]))
    return float(np.max(np.abs(np.linalg.eigvals(dense))))


def init_sodesn(
    topology: Topology,
    spec: NodeSpec,
    density_local: float = 0.2,
    density_cross: float = 0.1,
    rho_target: float = 0.66,
    rng=None,
) -> Sodesn:
    """Construct an untrained distributed reservoir.

    On each node: draw a sparse random internal matrix with ``density_local``
    and divide it by max(spectral radius, 1) so every node starts under
    similar conditions; fully connect the node's inputs to its internal
    units; wire a random fraction ``density_cross`` of the proxy units
    densely into the local internal units; zero-init the readout.  Finally
    the assembled global matrix is rescaled so its spectral radius equals
    ``rho_target``.

    Weight entries are uniform on [-1, 1] before scaling.  Nodes are
    processed in ascending id with a fixed draw order, so a seeded ``rng``
    reproduces the network exactly.
    """
    if not 0.0 < rho_target < 1.0:
        raise ValueError(f"rho_target must lie in (0, 1), got {rho_target}")
    if not 0.0 < density_local <= 1.0:
        raise ValueError(f"density_local must lie in (0, 1], got {density_local}")
    if not 0.0 < density_cross <= 1.0:
        raise ValueError(f"density_cross must lie in (0, 1], got {density_cross}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = ensure_rng(rng)
    km, nm, lm = spec.inputs_per_node, spec.internal_per_node, spec.outputs_per_node

    w_local, w_in, cross, w_out = [], [], [], []
    sources = [sorted(topology.neighbors[j]) for j in range(topology.node_count)]
    for j in range(topology.node_count):
        w = rng.uniform(-1.0, 1.0, size=(nm, nm))
        w *= rng.random(size=(nm, nm)) < density_local
        lam = spectral_radius(w)
        w /= max(lam, 1.0)
        w_local.append(w)
        w_in.append(rng.uniform(-1.0, 1.0, size=(nm, km)))
        mj = len(sources[j]) * nm
        c = np.zeros((nm, mj))
        n_sel = int(round(density_cross * mj))
        if n_sel > 0:
            chosen = rng.choice(mj, size=n_sel, replace=False)
            c[:, chosen] = rng.uniform(-1.0, 1.0, size=(nm, n_sel))
        cross.append(c)
        w_out.append(np.zeros((lm, mj + nm + km)))

    net = Sodesn(
        topology=topology,
        spec=spec,
        w_local=w_local,
        w_in=w_in,
        cross=cross,
        w_out=w_out,
        rho_target=rho_target,
        seed=seed,
    )
    rho = spectral_radius(assemble_global_w(net))
    if rho <= 1e-12:
        warnings.warn(
            "assembled reservoir has spectral radius ~0; target scaling skipped",
            stacklevel=2,
        )
        return net
    factor = rho_target / rho
    for j in range(net.n_nodes):
        net.w_local[j] *= factor
        net.cross[j] *= factor
    net._ops_cache = None
    return net


def step(
    net: Sodesn,
    state: NetworkState,
    sensor_inputs,
    links: LinkOutcomes,
) -> NetworkState:
    """Advance the whole network one step.

    New internal activations are computed from an immutable snapshot of the
    previous internal and proxy values; the fresh activations are then
    forwarded, overwriting each proxy with the remote value when its link
    delivered this step and with 0 otherwise; outputs read the post-delivery
    [proxy; internal; input] vector.
    """
    u = np.asarray(sensor_inputs, dtype=float).ravel()
    if u.shape[0] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {u.shape[0]}")
    if state.x.shape[0] != net.n_internal or state.proxy.shape[0] != net.n_proxies:
        raise ValueError("state dimensions do not match the network")
    if links.topology.directed_edges != net.topology.directed_edges:
        raise ValueError("link outcomes were sampled for a different topology")

    ops = net._ops()
    pre = ops.win @ u + ops.w @ state.x
    if ops.c is not None:
        pre = pre + ops.c @ state.proxy
    x_new = np.tanh(pre)
    if net.n_proxies:
        proxy_new = np.where(
            links.delivered[net._proxy_edge], x_new[net._proxy_src], 0.0
        )
    else:
        proxy_new = state.proxy
    z = np.concatenate((proxy_new, x_new, u))[net._z_gather]
    y = ops.wout @ z
    if net.teacher_mode == "atanh":
        y = np.tanh(y)
    return NetworkState(u=u, x=x_new, proxy=proxy_new, y=np.asarray(y, dtype=float))


def random_network_state(net: Sodesn, rng=None) -> NetworkState:
    """Random initial condition for echo-state convergence checks."""
    rng = ensure_rng(rng)
    return NetworkState(
        u=np.zeros(net.n_inputs),
        x=rng.uniform(-1.0, 1.0, size=net.n_internal),
        proxy=rng.uniform(-1.0, 1.0, size=net.n_proxies),
        y=np.zeros(net.n_outputs),
    )
