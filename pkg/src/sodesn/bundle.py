"""Weight-bundle files: a single JSON document holding everything needed to
reload a trained model.

Schema (format "sodesn-bundle-v1"):

- ``kind``: "sodesn" or "esn"
- ``topology``: node_count, undirected ``edges`` (each pair once), optional
  grid ``positions``  (sodesn only)
- ``node_spec``: inputs/internal/outputs per node  (sodesn only)
- ``rho_target``, ``seed``, ``teacher_mode``
- ``nodes``: per node ``w``, ``w_in``, ``cross``, ``w_out`` as dense
  row-major nested lists  (sodesn); ``w``/``w_in``/``w_out`` at top level
  for esn bundles
- ``normalization``: sensor ``names``, ``offset``, ``scale``, sampling
  ``interval_minutes`` (present once trained)
- ``training``: free-form metadata (series fingerprint, washout, noise spec,
  cutoff, link quality, ...)

Floats are serialized with shortest-repr formatting, so a bundle round-trips
bit-exactly: load(save(net)) reproduces every weight, and re-saving yields
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .baseline import Esn
from .data import Normalization
from .errors import DataError
from .reservoir import NodeSpec, Sodesn
from .topology import Topology, from_undirected_edges

__all__ = ["save_bundle", "load_bundle", "series_fingerprint"]

FORMAT = "sodesn-bundle-v1"


def series_fingerprint(samples: np.ndarray, names=None) -> str:
    """Stable identifier of a training series (sha256 of raw values)."""
    h = hashlib.sha256()
    if names is not None:
        h.update(",".join(names).encode("utf-8"))
    arr = np.ascontiguousarray(np.asarray(samples, dtype=float))
    h.update(str(arr.shape).encode("ascii"))
    h.update(arr.tobytes())
    return h.hexdigest()


def _matrix(a: np.ndarray):
    return [[float(v) for v in row] for row in np.asarray(a, dtype=float)]


def _load_matrix(rows, n_rows: int, n_cols: int | None = None) -> np.ndarray:
    """Nested lists back to a 2-D array, preserving shape for zero-width or
    zero-height matrices (JSON cannot distinguish them from [])."""
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((n_rows, n_cols if n_cols is not None else 0))
    return arr.reshape(n_rows, -1)


def _topology_doc(topology: Topology) -> dict:
    doc = {
        "node_count": topology.node_count,
        "edges": [[int(a), int(b)] for a, b in topology.undirected_edges()],
    }
    if topology.positions is not None:
        doc["positions"] = [[int(r), int(c)] for r, c in topology.positions]
    return doc


def _normalization_doc(net) -> dict | None:
    if net.normalization is None:
        return None
    doc = {
        "offset": [float(v) for v in net.normalization.offset],
        "scale": [float(v) for v in net.normalization.scale],
    }
    if getattr(net, "sensor_names", None) is not None:
        doc["names"] = list(net.sensor_names)
    return doc


def save_bundle(model, path, training_meta: dict | None = None) -> None:
    """Write a Sodesn or Esn to ``path`` as a bundle document."""
    if isinstance(model, Sodesn):
        doc = {
            "format": FORMAT,
            "kind": "sodesn",
            "topology": _topology_doc(model.topology),
            "node_spec": {
                "inputs_per_node": model.spec.inputs_per_node,
                "internal_per_node": model.spec.internal_per_node,
                "outputs_per_node": model.spec.outputs_per_node,
            },
            "rho_target": model.rho_target,
            "seed": model.seed,
            "teacher_mode": model.teacher_mode,
            "nodes": [
                {
                    "w": _matrix(model.w_local[j]),
                    "w_in": _matrix(model.w_in[j]),
                    "cross": _matrix(model.cross[j]),
                    "w_out": _matrix(model.w_out[j]),
                }
                for j in range(model.n_nodes)
            ],
        }
        norm = _normalization_doc(model)
        if norm is not None:
            doc["normalization"] = norm
        meta = training_meta if training_meta is not None else model.training_meta
        if meta is not None:
            doc["training"] = meta
    elif isinstance(model, Esn):
        doc = {
            "format": FORMAT,
            "kind": "esn",
            "rho_target": model.rho_target,
            "seed": model.seed,
            "n_internal": model.n_internal,
            "n_inputs": model.n_inputs,
            "w": _matrix(model.w),
            "w_in": _matrix(model.w_in),
            "w_out": None if model.w_out is None else _matrix(model.w_out),
        }
        if model.meta is not None:
            doc["meta"] = model.meta
        if training_meta is not None:
            doc["training"] = training_meta
    else:
        raise TypeError(f"cannot bundle object of type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_bundle(path):
    """Read a bundle document back into a Sodesn or Esn."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open bundle {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid bundle document: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise DataError(f"{path}: unknown bundle format {doc.get('format')!r}")
    kind = doc.get("kind")
    if kind == "sodesn":
        topo_doc = doc["topology"]
        topology = from_undirected_edges(topo_doc["node_count"], topo_doc["edges"])
        if "positions" in topo_doc:
            topology = Topology(
                node_count=topology.node_count,
                neighbors=topology.neighbors,
                positions=tuple((r, c) for r, c in topo_doc["positions"]),
            )
        spec_doc = doc["node_spec"]
        spec = NodeSpec(
            inputs_per_node=spec_doc["inputs_per_node"],
            internal_per_node=spec_doc["internal_per_node"],
            outputs_per_node=spec_doc["outputs_per_node"],
        )
        nodes = doc["nodes"]
        norm = None
        names = None
        if "normalization" in doc:
            nd = doc["normalization"]
            norm = Normalization(
                offset=np.asarray(nd["offset"], dtype=float),
                scale=np.asarray(nd["scale"], dtype=float),
            )
            names = nd.get("names")
        return Sodesn(
            topology=topology,
            spec=spec,
            w_local=[np.asarray(n["w"], dtype=float) for n in nodes],
            w_in=[_load_matrix(n["w_in"], spec.internal_per_node) for n in nodes],
            cross=[_load_matrix(n["cross"], spec.internal_per_node) for n in nodes],
            w_out=[_load_matrix(n["w_out"], spec.outputs_per_node) for n in nodes],
            rho_target=doc["rho_target"],
            seed=doc.get("seed"),
            teacher_mode=doc.get("teacher_mode", "linear"),
            normalization=norm,
            sensor_names=names,
            training_meta=doc.get("training"),
        )
    if kind == "esn":
        n_internal = doc["n_internal"]
        n_inputs = doc["n_inputs"]
        return Esn(
            w=_load_matrix(doc["w"], n_internal, n_internal),
            w_in=_load_matrix(doc["w_in"], n_internal, n_inputs),
            w_out=None if doc["w_out"] is None else np.asarray(doc["w_out"], dtype=float),
            rho_target=doc["rho_target"],
            seed=doc.get("seed"),
            meta=doc.get("meta"),
        )
    raise DataError(f"{path}: unknown bundle kind {kind!r}")
