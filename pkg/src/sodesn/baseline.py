"""Centralized echo state network baseline.

One standard ESN per predicted sensor: the remaining sensors' readings are
collected at a central node over lossy links (each input independently
drops to 0 on steps where its uplink fails), driven through a single random
reservoir, and a readout over [inputs; internal] is solved by pseudoinverse.
Shares the readout solver and normalization conventions with the
distributed network so comparisons isolate the architecture.
"""

from __future__ import annotations

import numpy as np

from .data import default_washout
from .reservoir import spectral_radius
from .training import solve_readout, _as_samples
from .validation import check_probability, ensure_rng

__all__ = ["Esn", "init_esn", "train_esn", "esn_predict"]


class Esn:
    """Standard ESN with a linear readout over [inputs; internal].

    ``w`` is the (N, N) reservoir matrix scaled to ``rho_target``; ``w_in``
    the (N, K) input matrix; ``w_out`` the (1, K + N) readout (None until
    trained).
    """

    def __init__(self, w, w_in, w_out=None, rho_target=0.66, seed=None, meta=None):
        self.w = np.asarray(w, dtype=float)
        self.w_in = np.asarray(w_in, dtype=float)
        if self.w.ndim != 2 or self.w.shape[0] != self.w.shape[1]:
            raise ValueError(f"reservoir matrix must be square, got {self.w.shape}")
        if self.w_in.shape[0] != self.w.shape[0]:
            raise ValueError("w_in rows must match reservoir size")
        self.w_out = None if w_out is None else np.asarray(w_out, dtype=float)
        self.rho_target = float(rho_target)
        self.seed = seed
        self.meta = meta

    @property
    def n_internal(self) -> int:
        return self.w.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[1]


def init_esn(
    n_internal: int,
    n_inputs: int,
    rho_target: float = 0.66,
    density: float = 0.2,
    rng=None,
) -> Esn:
    """Random sparse reservoir scaled to ``rho_target``, dense input weights.

    ``n_internal`` may be 0, giving a degenerate linear model over the raw
    inputs.
    """
    if n_internal < 0 or n_inputs < 1:
        raise ValueError("need n_internal >= 0 and n_inputs >= 1")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = ensure_rng(rng)
    w = rng.uniform(-1.0, 1.0, size=(n_internal, n_internal))
    w *= rng.random(size=(n_internal, n_internal)) < density
    if n_internal:
        rho = spectral_radius(w)
        if rho > 1e-12:
            w *= rho_target / rho
    w_in = rng.uniform(-1.0, 1.0, size=(n_internal, n_inputs))
    return Esn(w=w, w_in=w_in, rho_target=rho_target, seed=seed)


def _run_reservoir(esn: Esn, inputs: np.ndarray, link_quality: float, rng) -> tuple:
    """Drive the reservoir over ``inputs`` with per-input Bernoulli loss.

    A lost input reads 0 for that step (the central node simply has no
    datum), mirroring the proxy-reset semantics of the distributed network.
    Returns the received inputs and the internal state trajectory.
    """
    n_steps, n_inputs = inputs.shape
    received = np.empty_like(inputs)
    states = np.zeros((n_steps, esn.n_internal))
    x = np.zeros(esn.n_internal)
    for n in range(n_steps):
        mask = rng.random(n_inputs) < link_quality
        u = inputs[n] * mask
        received[n] = u
        x = np.tanh(esn.w_in @ u + esn.w @ x)
        states[n] = x
    return received, states


def train_esn(
    inputs,
    teacher,
    n_internal: int = 120,
    rho_target: float = 0.66,
    density: float = 0.2,
    washout: int | None = None,
    link_quality: float = 1.0,
    rng=None,
    sv_cutoff: float = 1e-10,
    ridge: float = 0.0,
    esn: Esn | None = None,
) -> Esn:
    """Train a centralized ESN to predict ``teacher`` from ``inputs``.

    ``inputs`` must exclude the predicted sensor's own series.  Input loss
    is simulated during harvesting at the same ``link_quality`` used at
    evaluation time.  Pass ``esn`` to reuse an existing reservoir instead of
    drawing a fresh one.
    """
    u_all = _as_samples(inputs)
    d_all = np.asarray(teacher, dtype=float).ravel()
    if u_all.shape[0] != d_all.shape[0]:
        raise ValueError("inputs and teacher must have equal length")
    check_probability("link_quality", link_quality)
    if washout is None:
        washout = default_washout(u_all.shape[0])
    if washout >= u_all.shape[0]:
        raise ValueError("washout leaves no training samples")
    rng = ensure_rng(rng)
    if esn is None:
        esn = init_esn(
            n_internal, u_all.shape[1], rho_target=rho_target, density=density, rng=rng
        )
    received, states = _run_reservoir(esn, u_all, link_quality, rng)
    design = np.hstack((received[washout:], states[washout:]))
    w_out = solve_readout(design, d_all[washout:, np.newaxis], sv_cutoff=sv_cutoff, ridge=ridge)
    return Esn(
        w=esn.w,
        w_in=esn.w_in,
        w_out=w_out,
        rho_target=esn.rho_target,
        seed=esn.seed,
        meta=esn.meta,
    )


def esn_predict(esn: Esn, inputs, link_quality: float = 1.0, rng=None) -> np.ndarray:
    """Step-by-step prediction with per-step Bernoulli input loss."""
    if esn.w_out is None:
        raise ValueError("ESN has no trained readout")
    u_all = _as_samples(inputs)
    if u_all.shape[1] != esn.n_inputs:
        raise ValueError(f"expected {esn.n_inputs} inputs, got {u_all.shape[1]}")
    check_probability("link_quality", link_quality)
    rng = ensure_rng(rng)
    received, states = _run_reservoir(esn, u_all, link_quality, rng)
    design = np.hstack((received, states))
    return (design @ esn.w_out.T).ravel()
