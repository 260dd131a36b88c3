"""Star-topology Bayesian fusion network.

Sensor predictor nodes are roots; a single fused child conditions on all
of them. CPTs are populated from aligned per-sensor prediction logs either
by predicted class or by stress-confidence bin (0..9), and queried by
exact inference (variable elimination, verified against brute-force joint
enumeration).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AllZeroWeights,
    DuplicateNodeId,
    ImpossibleEvidence,
    InvalidNetworkFile,
    MisalignedLogs,
    NegativeSmoothing,
    StateSpaceTooLarge,
    UnknownNode,
    UnknownState,
)
from .prediction_log import PredictionLog, align_logs

NETWORK_FORMAT = "stress-engine-network"
FUSED_ID = "Fused"
ROW_SUM_TOL = 1e-9


@dataclass
class Node:
    id: str
    states: list[str]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise UnknownState(f"node {self.id!r} has no state {state!r}") from None


@dataclass
class Cpt:
    """Distribution over the node's states per joint parent assignment.

    table has shape (*parent state counts, n_states); flattening the parent
    axes row-major in declared parent order gives the serialized rows.
    """

    node: str
    parents: list[str]
    table: np.ndarray

    def rows(self) -> np.ndarray:
        return self.table.reshape(-1, self.table.shape[-1])

    def validate(self):
        rows = self.rows()
        if (rows < 0).any():
            raise ValueError(f"cpt for {self.node!r} has negative entries")
        bad = np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOL
        if bad.any():
            raise ValueError(
                f"cpt for {self.node!r}: {int(bad.sum())} rows do not sum to 1")


@dataclass
class Posterior:
    query: str
    states: list[str]
    probs: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.states, self.probs)}

    def to_json(self) -> dict:
        return {"query": self.query, "posterior": self.as_dict()}


@dataclass
class BinningSpec:
    """Stress-confidence binning: bin(p) = min(floor(p*10), 9).

    Bin 9 is high confidence in stress, bin 0 high confidence in no-stress.
    """

    n_bins: int = 10

    def bin(self, p: float) -> int:
        return min(int(math.floor(p * self.n_bins)), self.n_bins - 1)

    @property
    def states(self) -> list[str]:
        return [str(i) for i in range(self.n_bins)]


@dataclass
class BayesNet:
    nodes: list[Node]
    edges: list[tuple[str, str]]
    cpts: dict[str, Cpt] = field(default_factory=dict)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateNodeId(f"duplicate node id(s): {dup}")
        self._by_id = {n.id: n for n in self.nodes}
        for p, c in self.edges:
            if p not in self._by_id or c not in self._by_id:
                raise UnknownNode(f"edge ({p!r}, {c!r}) references unknown node")
        self._check_acyclic()

    def _check_acyclic(self):
        order = self.topological_order()
        if len(order) != len(self.nodes):
            raise ValueError("network contains a cycle")

    def topological_order(self) -> list[str]:
        indeg = {n.id: 0 for n in self.nodes}
        for _, c in self.edges:
            indeg[c] += 1
        frontier = [i for i, d in sorted(indeg.items()) if d == 0]
        out = []
        indeg = dict(indeg)
        while frontier:
            nid = frontier.pop(0)
            out.append(nid)
            for p, c in self.edges:
                if p == nid:
                    indeg[c] -= 1
                    if indeg[c] == 0:
                        frontier.append(c)
        return out

    def node(self, node_id: str) -> Node:
        if node_id not in self._by_id:
            raise UnknownNode(f"unknown node {node_id!r}")
        return self._by_id[node_id]

    def parents_of(self, node_id: str) -> list[str]:
        self.node(node_id)
        return [p for p, c in self.edges if c == node_id]

    def roots(self) -> list[str]:
        children = {c for _, c in self.edges}
        return [n.id for n in self.nodes if n.id not in children]

    def validate_cpts(self):
        for node in self.nodes:
            cpt = self.cpts.get(node.id)
            if cpt is None:
                raise ValueError(f"node {node.id!r} has no CPT")
            if sorted(cpt.parents) != sorted(self.parents_of(node.id)):
                raise ValueError(f"cpt parents for {node.id!r} do not match edges")
            expected = tuple(self.node(p).n_states for p in cpt.parents) \
                + (node.n_states,)
            if cpt.table.shape != expected:
                raise ValueError(
                    f"cpt table for {node.id!r} has shape {cpt.table.shape}, "
                    f"expected {expected}")
            cpt.validate()

    # -- persistence --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": NETWORK_FORMAT,
            "nodes": [{"id": n.id, "states": list(n.states)} for n in self.nodes],
            "edges": [[p, c] for p, c in self.edges],
            "cpts": {
                nid: {"parents": list(cpt.parents),
                      "rows": [[float(v) for v in row] for row in cpt.rows()]}
                for nid, cpt in self.cpts.items()
            },
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BayesNet":
        try:
            nodes = [Node(n["id"], list(n["states"])) for n in obj["nodes"]]
            edges = [(p, c) for p, c in obj["edges"]]
            net = cls(nodes, edges)
            for nid, body in obj["cpts"].items():
                parents = list(body["parents"])
                shape = tuple(net.node(p).n_states for p in parents) \
                    + (net.node(nid).n_states,)
                table = np.array(body["rows"], dtype=np.float64).reshape(shape)
                net.cpts[nid] = Cpt(nid, parents, table)
            net.validate_cpts()
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidNetworkFile(f"malformed network object: {exc}") from None
        return net


def save_network(net: BayesNet, path) -> None:
    Path(path).write_text(json.dumps(net.to_json(), sort_keys=True))


def load_network(path) -> BayesNet:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidNetworkFile(f"cannot read network {path}: {exc}") from None
    if obj.get("format") != NETWORK_FORMAT:
        raise InvalidNetworkFile(f"{path} is not a stress-engine network file")
    return BayesNet.from_json(obj)


# ---------------------------------------------------------------------------
# Construction and population
# ---------------------------------------------------------------------------

def uniform_cpt(net: BayesNet, node_id: str) -> Cpt:
    node = net.node(node_id)
    parents = net.parents_of(node_id)
    shape = tuple(net.node(p).n_states for p in parents) + (node.n_states,)
    return Cpt(node_id, parents, np.full(shape, 1.0 / node.n_states))


def build_star_network(sensor_ids, state_labels, fused_id: str = FUSED_ID,
                       fused_states=None) -> BayesNet:
    """Sensor roots plus one fused child; CPTs start as uniform placeholders."""
    sensor_ids = list(sensor_ids)
    if not sensor_ids:
        raise ValueError("at least one sensor node is required")
    states = list(state_labels)
    nodes = [Node(s, list(states)) for s in sensor_ids]
    nodes.append(Node(fused_id, list(fused_states or states)))
    net = BayesNet(nodes, [(s, fused_id) for s in sensor_ids])
    for nid in [n.id for n in net.nodes]:
        net.cpts[nid] = uniform_cpt(net, nid)
    net.validate_cpts()
    return net


def _populate(net: BayesNet, sensor_states: dict[str, list[int]],
              fused_states: list[int], alpha: float) -> BayesNet:
    """Shared counting machinery: priors from per-sensor state sequences,
    fused CPT rows from additive-smoothed conditional frequencies."""
    if alpha < 0:
        raise NegativeSmoothing(f"smoothing alpha must be >= 0, got {alpha}")
    roots = net.roots()
    fused_id = [n.id for n in net.nodes if n.id not in roots]
    if len(fused_id) != 1:
        raise ValueError("population requires a star network with one fused child")
    fused_id = fused_id[0]
    n = len(fused_states)

    out = BayesNet([Node(nd.id, list(nd.states)) for nd in net.nodes],
                   list(net.edges))
    # Sensor priors: raw empirical histograms of the per-entry states.
    for sensor in roots:
        k = net.node(sensor).n_states
        counts = np.bincount(sensor_states[sensor], minlength=k)
        out.cpts[sensor] = Cpt(sensor, [], counts / n)

    fused_node = net.node(fused_id)
    parents = net.parents_of(fused_id)
    shape = tuple(net.node(p).n_states for p in parents)
    C = fused_node.n_states
    counts = np.zeros(shape + (C,), dtype=np.int64)
    for i in range(n):
        assignment = tuple(sensor_states[p][i] for p in parents)
        counts[assignment + (fused_states[i],)] += 1

    table = np.empty(shape + (C,), dtype=np.float64)
    flat_counts = counts.reshape(-1, C)
    flat_table = table.reshape(-1, C)
    for r in range(flat_counts.shape[0]):
        row_total = int(flat_counts[r].sum())
        if row_total == 0 and alpha == 0:
            flat_table[r] = 1.0 / C  # unobserved, nothing to estimate
        else:
            flat_table[r] = (flat_counts[r] + alpha) / (row_total + alpha * C)
    out.cpts[fused_id] = Cpt(fused_id, parents, table)
    out.validate_cpts()
    return out


def populate_class_cpts(net: BayesNet, logs: dict[str, PredictionLog],
                        alpha: float = 1.0) -> BayesNet:
    """Class-based population: sensor state = predicted class, fused outcome
    = the sample's true class."""
    sample_ids = align_logs(logs)
    roots = net.roots()
    missing = sorted(set(roots) - set(logs))
    if missing:
        raise MisalignedLogs(f"no log supplied for sensor node(s) {missing}")
    fused_id = [n.id for n in net.nodes if n.id not in roots][0]
    fused_node = net.node(fused_id)

    sensor_states = {}
    fused_states = None
    for sensor in roots:
        log = logs[sensor]
        node = net.node(sensor)
        by_id = {e.sample_id: e for e in log.entries}
        entries = [by_id[sid] for sid in sample_ids]
        sensor_states[sensor] = [node.state_index(e.predicted_label)
                                 for e in entries]
        if fused_states is None:
            fused_states = [fused_node.state_index(e.true_label) for e in entries]
    return _populate(net, sensor_states, fused_states, alpha)


def populate_confidence_cpts(net: BayesNet, logs: dict[str, PredictionLog],
                             binning: BinningSpec | None = None,
                             alpha: float = 1.0) -> BayesNet:
    """Confidence-binned population: sensor state = bin of the stress-class
    confidence; the fused outcome maps truth through the same rule
    (stress -> bin(1.0) = 9, otherwise bin(0.0) = 0)."""
    binning = binning or BinningSpec()
    sample_ids = align_logs(logs)
    roots = net.roots()
    missing = sorted(set(roots) - set(logs))
    if missing:
        raise MisalignedLogs(f"no log supplied for sensor node(s) {missing}")
    for nid in [n.id for n in net.nodes]:
        if net.node(nid).states != binning.states:
            raise UnknownState(
                f"node {nid!r} states must be confidence bins {binning.states}")

    sensor_states = {}
    fused_states = None
    for sensor in roots:
        log = logs[sensor]
        stress_idx = log.class_index("stress")
        by_id = {e.sample_id: e for e in log.entries}
        entries = [by_id[sid] for sid in sample_ids]
        sensor_states[sensor] = [binning.bin(float(e.confidence[stress_idx]))
                                 for e in entries]
        if fused_states is None:
            fused_states = [binning.bin(1.0 if e.true_label == "stress" else 0.0)
                            for e in entries]
    return _populate(net, sensor_states, fused_states, alpha)


def apply_sem_weights(net: BayesNet, weights: dict[str, float]) -> BayesNet:
    """Replace the fused CPT with a weighted vote over the parents'
    predictions: P(fused=c | parents) proportional to the summed weight of
    sensors voting c."""
    roots = net.roots()
    fused_ids = [n.id for n in net.nodes if n.id not in roots]
    if len(fused_ids) != 1:
        raise ValueError("weighted voting requires one fused child")
    fused_id = fused_ids[0]
    unknown = sorted(set(weights) - set(roots))
    if unknown:
        raise UnknownNode(f"weights reference unknown sensor(s) {unknown}")
    w = {s: float(weights.get(s, 0.0)) for s in roots}
    if any(v < 0 for v in w.values()):
        raise ValueError("weights must be nonnegative")
    total = sum(w.values())
    if total <= 0:
        raise AllZeroWeights("at least one sensor weight must be positive")

    fused_node = net.node(fused_id)
    parents = net.parents_of(fused_id)
    for p in parents:
        if net.node(p).states != fused_node.states:
            raise ValueError(
                "weighted voting requires parent and fused state labels to match")
    shape = tuple(net.node(p).n_states for p in parents)
    C = fused_node.n_states
    table = np.zeros(shape + (C,), dtype=np.float64)
    for assignment in np.ndindex(*shape):
        row = np.zeros(C)
        for p, state in zip(parents, assignment):
            row[state] += w[p]
        table[assignment] = row / total

    out = BayesNet([Node(nd.id, list(nd.states)) for nd in net.nodes],
                   list(net.edges))
    out.cpts = {nid: Cpt(nid, list(c.parents), c.table.copy())
                for nid, c in net.cpts.items()}
    out.cpts[fused_id] = Cpt(fused_id, parents, table)
    out.validate_cpts()
    return out


# ---------------------------------------------------------------------------
# Exact inference
# ---------------------------------------------------------------------------

def _check_query_evidence(net: BayesNet, evidence: dict[str, str], query: str):
    net.node(query)
    for nid, state in evidence.items():
        net.node(nid).state_index(state)
    if query in evidence:
        raise ValueError(f"query node {query!r} may not also be evidence")


def infer(net: BayesNet, evidence: dict[str, str], query: str) -> Posterior:
    """Exact posterior by variable elimination."""
    net.validate_cpts()
    _check_query_evidence(net, evidence, query)
    ev_idx = {nid: net.node(nid).state_index(s) for nid, s in evidence.items()}

    # Factors: (ordered var tuple, table); reduce evidence axes immediately.
    factors: list[tuple[tuple[str, ...], np.ndarray]] = []
    for node in net.nodes:
        cpt = net.cpts[node.id]
        vars_ = tuple(cpt.parents) + (node.id,)
        table = cpt.table
        for axis in reversed(range(len(vars_))):
            if vars_[axis] in ev_idx:
                table = np.take(table, ev_idx[vars_[axis]], axis=axis)
                vars_ = vars_[:axis] + vars_[axis + 1:]
        factors.append((vars_, table))

    hidden = [n.id for n in net.nodes if n.id != query and n.id not in ev_idx]
    # Greedy ordering: eliminate the variable whose combined factor is smallest.
    while hidden:
        best, best_size = None, None
        for var in hidden:
            joined = set()
            for vars_, _ in factors:
                if var in vars_:
                    joined.update(vars_)
            size = int(np.prod([net.node(v).n_states for v in joined])) if joined else 1
            if best_size is None or size < best_size:
                best, best_size = var, size
        hidden.remove(best)
        involved = [f for f in factors if best in f[0]]
        factors = [f for f in factors if best not in f[0]]
        if not involved:
            continue
        vars_, table = _multiply(involved, net)
        axis = vars_.index(best)
        table = table.sum(axis=axis)
        factors.append((vars_[:axis] + vars_[axis + 1:], table))

    vars_, table = _multiply(factors, net)
    if vars_ == ():
        raise ValueError("query eliminated; internal error")
    if vars_ != (query,):
        axes = tuple(i for i, v in enumerate(vars_) if v != query)
        table = table.sum(axis=axes)
    total = float(table.sum())
    if total <= 0.0:
        raise ImpossibleEvidence(f"evidence {evidence} has probability 0")
    node = net.node(query)
    return Posterior(query, list(node.states), table / total)


def _multiply(factors, net: BayesNet) -> tuple[tuple[str, ...], np.ndarray]:
    """Product of factors over the union of their variables."""
    union: list[str] = []
    for vars_, _ in factors:
        for v in vars_:
            if v not in union:
                union.append(v)
    shape = tuple(net.node(v).n_states for v in union)
    out = np.ones(shape)
    for vars_, table in factors:
        idx = [union.index(v) for v in vars_]
        expanded = np.moveaxis(
            table.reshape(table.shape + (1,) * (len(union) - len(vars_))),
            range(len(vars_)), idx)
        out = out * expanded
    return tuple(union), out


def brute_force_joint(net: BayesNet, evidence: dict[str, str],
                      query: str, max_states: int = 10_000_000) -> Posterior:
    """Enumeration oracle: build the dense joint, condition, marginalize."""
    net.validate_cpts()
    _check_query_evidence(net, evidence, query)
    order = [n.id for n in net.nodes]
    sizes = [net.node(v).n_states for v in order]
    total_states = int(np.prod(sizes))
    if total_states > max_states:
        raise StateSpaceTooLarge(
            f"joint state space {total_states} exceeds {max_states}")

    joint = np.ones(tuple(sizes))
    for node in net.nodes:
        cpt = net.cpts[node.id]
        vars_ = tuple(cpt.parents) + (node.id,)
        idx = [order.index(v) for v in vars_]
        expanded = np.moveaxis(
            cpt.table.reshape(cpt.table.shape + (1,) * (len(order) - len(vars_))),
            range(len(vars_)), idx)
        joint = joint * expanded

    for nid, state in evidence.items():
        axis = order.index(nid)
        sel = net.node(nid).state_index(state)
        mask_shape = [1] * len(order)
        mask_shape[axis] = sizes[axis]
        mask = np.zeros(sizes[axis])
        mask[sel] = 1.0
        joint = joint * mask.reshape(mask_shape)

    qaxis = order.index(query)
    others = tuple(i for i in range(len(order)) if i != qaxis)
    dist = joint.sum(axis=others)
    total = float(dist.sum())
    if total <= 0.0:
        raise ImpossibleEvidence(f"evidence {evidence} has probability 0")
    node = net.node(query)
    return Posterior(query, list(node.states), dist / total)
