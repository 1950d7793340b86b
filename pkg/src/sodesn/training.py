"""Offline readout training.

Training happens off-network: the reservoir is driven over a recorded series
of fault-free sensor readings, the activations each local readout can see
are sampled into per-node matrices, and the readout weights are solved as a
minimum-norm least-squares problem (pseudoinverse).  Reservoir weights are
never modified.

Fault-detector training makes each sensor's prediction independent of its
own readings: for every monitored sensor, one harvesting pass is run with
that sensor's input replaced by fresh white noise while the true series
serves as the teacher, and only the readout row predicting that sensor is
solved and installed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import SeriesSet, default_washout
from .reservoir import Sodesn, step
from .topology import sample_link_outcomes
from .validation import check_probability, ensure_rng

__all__ = [
    "NoiseSpec",
    "SampleMatrices",
    "harvest_states",
    "project_node_samples",
    "solve_readout",
    "train_fault_detectors",
    "predict_series",
]


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise substitute for a sensor input: uniform on
    [-amplitude, +amplitude] in normalized input units."""

    amplitude: float = 1.0
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("noise amplitude must be > 0")
        if self.distribution != "uniform":
            raise ValueError(f"unsupported noise distribution {self.distribution!r}")

    def generator(self, sensor: int) -> np.random.Generator:
        # Distinct deterministic stream per monitored sensor.
        return np.random.default_rng((self.seed, sensor))


@dataclass
class SampleMatrices:
    """Activations sampled while driving the network over a training series.

    Columns are grouped per collected node (ascending id): ``states`` holds
    internal activations, ``proxies`` the post-delivery proxy values and
    ``inputs`` the (possibly noise-substituted) input values.  ``teacher``
    holds the matching teacher rows.  Rows cover steps >= washout.
    """

    states: np.ndarray
    proxies: np.ndarray
    inputs: np.ndarray
    teacher: np.ndarray
    nodes: tuple
    washout: int

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]


def _as_samples(obj) -> np.ndarray:
    if isinstance(obj, SeriesSet):
        return obj.samples
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    return arr


def harvest_states(
    net: Sodesn,
    inputs,
    teacher,
    substitute=None,
    washout: int = 0,
    link_quality: float = 1.0,
    rng=None,
    collect_nodes=None,
) -> SampleMatrices:
    """Drive the network over ``inputs`` and sample readout-visible activations.

    Parameters
    ----------
    inputs, teacher : SeriesSet or array (T, K) / (T, L)
        Normalized input series and teacher series, aligned in time.
    substitute : (sensor, NoiseSpec), optional
        Replace this sensor's input column with fresh noise at every step.
    washout : int
        Leading steps discarded so the arbitrary start state does not bias
        the regression.
    link_quality : float
        Per-step delivery probability for every directed edge.
    rng : seed or Generator
        Drives the link outcomes.
    collect_nodes : iterable of int, optional
        Restrict sampling to these nodes (default: all).  Keeps memory
        proportional to the readouts actually being trained.
    """
    u_all = _as_samples(inputs)
    d_all = _as_samples(teacher)
    if u_all.shape[0] != d_all.shape[0]:
        raise ValueError(
            f"inputs ({u_all.shape[0]} steps) and teacher ({d_all.shape[0]}) differ"
        )
    n_steps = u_all.shape[0]
    if u_all.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} input columns, got {u_all.shape[1]}")
    if d_all.shape[1] != net.n_outputs:
        raise ValueError(f"expected {net.n_outputs} teacher columns, got {d_all.shape[1]}")
    if washout < 0 or washout >= n_steps:
        raise ValueError(f"washout {washout} leaves no samples from {n_steps} steps")
    check_probability("link_quality", link_quality)
    rng = ensure_rng(rng)

    if collect_nodes is None:
        nodes = tuple(range(net.n_nodes))
    else:
        nodes = tuple(sorted(set(int(j) for j in collect_nodes)))
        for j in nodes:
            if not 0 <= j < net.n_nodes:
                raise ValueError(f"unknown node {j}")

    x_idx = np.concatenate(
        [np.arange(net.internal_slice(j).start, net.internal_slice(j).stop) for j in nodes]
    )
    p_idx = np.concatenate(
        [np.arange(net.proxy_slice(j).start, net.proxy_slice(j).stop) for j in nodes]
    ).astype(np.intp)
    u_idx = np.concatenate(
        [np.arange(net.input_slice(j).start, net.input_slice(j).stop) for j in nodes]
    )
    d_idx = np.concatenate(
        [np.arange(net.output_slice(j).start, net.output_slice(j).stop) for j in nodes]
    )

    n_rows = n_steps - washout
    states = np.empty((n_rows, x_idx.size))
    proxies = np.empty((n_rows, p_idx.size))
    inputs_m = np.empty((n_rows, u_idx.size))
    teacher_m = np.empty((n_rows, d_idx.size))

    noise_rng = None
    sub_sensor = None
    if substitute is not None:
        sub_sensor, noise = substitute
        noise_rng = noise.generator(sub_sensor)
        amplitude = noise.amplitude

    state = net.zero_state()
    full = len(nodes) == net.n_nodes
    for n in range(n_steps):
        u = u_all[n].copy()
        if noise_rng is not None:
            u[sub_sensor] = noise_rng.uniform(-amplitude, amplitude)
        links = sample_link_outcomes(net.topology, link_quality, rng)
        state = step(net, state, u, links)
        if n >= washout:
            r = n - washout
            if full:
                states[r] = state.x
                proxies[r] = state.proxy
                inputs_m[r] = state.u
                teacher_m[r] = d_all[n]
            else:
                states[r] = state.x[x_idx]
                proxies[r] = state.proxy[p_idx]
                inputs_m[r] = state.u[u_idx]
                teacher_m[r] = d_all[n, d_idx]

    widest = max(
        net.proxy_counts[j] + net.spec.internal_per_node + net.spec.inputs_per_node
        for j in nodes
    )
    if n_rows <= widest:
        warnings.warn(
            f"{n_rows} samples for readouts with up to {widest} columns:"
            " regression is underdetermined",
            stacklevel=2,
        )
    return SampleMatrices(
        states=states,
        proxies=proxies,
        inputs=inputs_m,
        teacher=teacher_m,
        nodes=nodes,
        washout=washout,
    )


def project_node_samples(samples: SampleMatrices, net: Sodesn, node: int):
    """Columns node ``node``'s readout can see, in readout order
    [proxy; internal; input], plus its teacher columns."""
    if node not in samples.nodes:
        raise ValueError(f"node {node} was not collected in these samples")
    pos = samples.nodes.index(node)
    nm, km, lm = (
        net.spec.internal_per_node,
        net.spec.inputs_per_node,
        net.spec.outputs_per_node,
    )
    p_off = sum(net.proxy_counts[j] for j in samples.nodes[:pos])
    mj = net.proxy_counts[node]
    m_j = np.hstack(
        (
            samples.proxies[:, p_off : p_off + mj],
            samples.states[:, pos * nm : (pos + 1) * nm],
            samples.inputs[:, pos * km : (pos + 1) * km],
        )
    )
    t_j = samples.teacher[:, pos * lm : (pos + 1) * lm]
    return m_j, t_j


def solve_readout(m_j, t_j, sv_cutoff: float = 1e-10, ridge: float = 0.0) -> np.ndarray:
    """Minimum-norm least-squares readout: ``Wout^T = pinv(M_j) T_j``.

    Singular values below ``sv_cutoff`` times the largest are treated as
    zero.  A positive ``ridge`` switches to the regularized normal equations
    for ill-conditioned data.
    """
    m = np.asarray(m_j, dtype=float)
    t = np.asarray(t_j, dtype=float)
    if t.ndim == 1:
        t = t[:, np.newaxis]
    if m.ndim != 2:
        raise ValueError("M_j must be 2-D")
    if m.size == 0 or t.size == 0:
        raise ValueError("empty sample matrices")
    if m.shape[0] != t.shape[0]:
        raise ValueError(f"row mismatch: M has {m.shape[0]}, T has {t.shape[0]}")
    if ridge > 0.0:
        gram = m.T @ m + ridge * np.eye(m.shape[1])
        coef = np.linalg.solve(gram, m.T @ t)
    else:
        coef, _, _, _ = np.linalg.lstsq(m, t, rcond=sv_cutoff)
    return coef.T


def train_fault_detectors(
    net: Sodesn,
    training,
    noise: NoiseSpec,
    washout: int | None = None,
    link_quality: float = 1.0,
    rng=None,
    sensors=None,
    sv_cutoff: float = 1e-10,
    ridge: float = 0.0,
) -> Sodesn:
    """Train one readout row per monitored sensor.

    Each sensor gets its own harvesting pass with its input replaced by
    white noise and the true series as teacher, so the learned prediction
    depends only on the rest of the network.  Per-sensor random streams are
    keyed by sensor id, making the result independent of training order.
    Returns a new network; reservoir weights are untouched.
    """
    samples = _as_samples(training)
    n_steps = samples.shape[0]
    if washout is None:
        washout = default_washout(n_steps)
    km, lm = net.spec.inputs_per_node, net.spec.outputs_per_node
    if lm < km:
        raise ValueError(
            f"each node needs one output per monitored sensor: {lm} outputs for {km} inputs"
        )
    if sensors is None:
        sensors = range(net.n_inputs)
    rng = ensure_rng(rng)
    link_rngs = rng.spawn(net.n_inputs)

    new_w_out = [w.copy() for w in net.w_out]
    for sensor in sensors:
        node = net.node_of_input(sensor)
        local = sensor % km
        pass_samples = harvest_states(
            net,
            samples,
            samples,
            substitute=(sensor, noise),
            washout=washout,
            link_quality=link_quality,
            rng=link_rngs[sensor],
            collect_nodes=[node],
        )
        m_j, t_j = project_node_samples(pass_samples, net, node)
        target = t_j[:, [local]]
        if net.teacher_mode == "atanh":
            target = np.arctanh(np.clip(target, -0.999999, 0.999999))
        row = solve_readout(m_j, target, sv_cutoff=sv_cutoff, ridge=ridge)
        new_w_out[node][local, :] = row[0]
    return net.with_readout(new_w_out)


def predict_series(
    net: Sodesn,
    inputs,
    substitute=None,
    link_quality: float = 1.0,
    rng=None,
) -> np.ndarray:
    """Run the trained network over a series and collect outputs (T, L).

    With ``substitute=(sensor, NoiseSpec)`` the named sensor's input is
    replaced by fresh noise at every step, reproducing the training
    condition for that sensor's prediction.
    """
    u_all = _as_samples(inputs)
    if u_all.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} input columns, got {u_all.shape[1]}")
    check_probability("link_quality", link_quality)
    rng = ensure_rng(rng)
    noise_rng = None
    sub_sensor = None
    if substitute is not None:
        sub_sensor, noise = substitute
        noise_rng = noise.generator(sub_sensor)
        amplitude = noise.amplitude
    outputs = np.empty((u_all.shape[0], net.n_outputs))
    state = net.zero_state()
    for n in range(u_all.shape[0]):
        u = u_all[n].copy()
        if noise_rng is not None:
            u[sub_sensor] = noise_rng.uniform(-amplitude, amplitude)
        links = sample_link_outcomes(net.topology, link_quality, rng)
        state = step(net, state, u, links)
        outputs[n] = state.y
    return outputs
