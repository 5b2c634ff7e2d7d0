"""Problem instances: pools, request types, patterns and their derived structure.

Scenario documents are JSON with three lists::

    pools:          [{capacity, cost_rate}]
    request_types:  [{arrival_rate, reward}]
    patterns:       [{request_type, service_rate, weights: {pool: count}}]

Pool and request-type references inside a document are 1-based, as printed in
the fixture tables.  In the Python API every index is 0-based.  Dummy
(blocking) patterns are never listed in documents; one per request type is
appended after the declared patterns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

FIXTURES = ("fig1a", "fig1b", "fig2")


class ScenarioError(ValueError):
    """Raised when a scenario document or model violates an invariant."""

    def __init__(self, invariant: str, detail: str):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Immutable problem instance.

    Attributes
    ----------
    capacities : (J,) int array
        Base capacity C0_j of each pool, in resource units.
    cost_rates : (J,) float array
        Cost per occupied resource unit per unit time.
    arrival_rates : (L,) float array
        Base arrival rate of each request type.
    rewards : (L,) float array
        Reward per served request.
    weights : (J, I) int array
        Resource units of pool j taken by one instantiation of pattern i.
    service_rates : (I,) float array
        Departure rate per instantiation.  Dummy patterns carry the rate of
        their request type's first pattern; it is never used.
    owner : (I,) int array
        Request type served by each pattern.
    dummy : (I,) bool array
        True for the blocking pattern of each request type.
    """

    capacities: np.ndarray
    cost_rates: np.ndarray
    arrival_rates: np.ndarray
    rewards: np.ndarray
    weights: np.ndarray
    service_rates: np.ndarray
    owner: np.ndarray
    dummy: np.ndarray
    name: str = ""

    def __post_init__(self):
        for f in ("capacities", "cost_rates", "arrival_rates", "rewards",
                  "weights", "service_rates", "owner", "dummy"):
            arr = np.array(getattr(self, f))
            arr.setflags(write=False)
            object.__setattr__(self, f, arr)
        _validate(self)

    @property
    def num_pools(self) -> int:
        return len(self.capacities)

    @property
    def num_request_types(self) -> int:
        return len(self.arrival_rates)

    @property
    def num_patterns(self) -> int:
        return len(self.owner)

    def dummy_of(self, rt: int) -> int:
        """Index of the blocking pattern of request type ``rt``."""
        return int(np.flatnonzero(self.dummy & (self.owner == rt))[0])

    def patterns_of(self, rt: int) -> np.ndarray:
        """All patterns (dummy included) serving request type ``rt``."""
        return np.flatnonzero(self.owner == rt)

    def pools_of(self, i: int) -> np.ndarray:
        """Pools with a positive weight in pattern ``i``."""
        return np.flatnonzero(self.weights[:, i] > 0)

    @property
    def pattern_cost(self) -> np.ndarray:
        """Cost rate sum_j eps_j w_{j,i} of one instantiation, per pattern."""
        return self.cost_rates @ self.weights

    @property
    def net_rate(self) -> np.ndarray:
        """Net revenue rate r mu - sum_j w eps of one instantiation (0 for dummies)."""
        r = self.rewards[self.owner] * self.service_rates - self.pattern_cost
        return np.where(self.dummy, 0.0, r)


def _validate(m: SystemModel):
    J, L = len(m.capacities), len(m.arrival_rates)
    W = m.weights
    if W.ndim != 2 or W.shape[0] != J:
        raise ScenarioError("shape", f"weights must be ({J}, I), got {W.shape}")
    I = W.shape[1]
    if not (len(m.service_rates) == len(m.owner) == len(m.dummy) == I):
        raise ScenarioError("shape", "per-pattern arrays disagree in length")
    if len(m.cost_rates) != J or len(m.rewards) != L:
        raise ScenarioError("shape", "per-pool or per-request-type arrays disagree in length")
    if np.any(W < 0) or not np.issubdtype(W.dtype, np.integer):
        raise ScenarioError("integer-weights", "weights must be nonnegative integers")
    if np.any((m.owner < 0) | (m.owner >= L)):
        raise ScenarioError("partition", "pattern owner out of range")
    for rt in range(L):
        d = np.flatnonzero(m.dummy & (m.owner == rt))
        if len(d) != 1:
            raise ScenarioError("one-dummy-per-type",
                                f"request type {rt} has {len(d)} dummy patterns")
    if np.any(W[:, m.dummy] != 0):
        raise ScenarioError("dummy-zero-weights", "dummy patterns must have zero weights")
    live = ~m.dummy
    empty = np.flatnonzero(live & (W.sum(axis=0) == 0))
    if len(empty):
        raise ScenarioError("nonzero-pattern",
                            f"pattern(s) {empty.tolist()} have all-zero weights but are not dummies")
    unused = np.flatnonzero(W.sum(axis=1) == 0)
    if len(unused):
        raise ScenarioError("no-zero-row", f"pool(s) {unused.tolist()} used by no pattern")
    if np.any(m.capacities < 1):
        raise ScenarioError("positive", "capacities must be >= 1")
    if np.any(m.arrival_rates <= 0) or np.any(m.rewards <= 0) or np.any(m.service_rates <= 0):
        raise ScenarioError("positive", "rates and rewards must be strictly positive")
    if np.any(m.cost_rates < 0):
        raise ScenarioError("positive", "cost rates must be nonnegative")


def build_model(capacities, cost_rates, request_types, patterns, name: str = "") -> SystemModel:
    """Assemble a model from 0-based Python data, appending dummy patterns.

    Parameters
    ----------
    capacities, cost_rates : sequences of length J
    request_types : sequence of (arrival_rate, reward)
    patterns : sequence of (request_type, service_rate, {pool: weight})
        Patterns with an empty weight map are rejected; dummies are implicit.
    """
    J, L = len(capacities), len(request_types)
    cols, mu, owner = [], [], []
    for rt, rate, w in patterns:
        col = np.zeros(J, dtype=np.int64)
        for j, c in dict(w).items():
            if int(c) != c:
                raise ScenarioError("integer-weights", f"weight {c} is not an integer")
            if not 0 <= int(j) < J:
                raise ScenarioError("pool-index", f"pool {j} out of range")
            col[int(j)] = int(c)
        if not 0 <= int(rt) < L:
            raise ScenarioError("partition", f"request type {rt} out of range")
        cols.append(col)
        mu.append(float(rate))
        owner.append(int(rt))
    for rt in range(L):
        rates = [r for o, r in zip(owner, mu) if o == rt]
        cols.append(np.zeros(J, dtype=np.int64))
        mu.append(rates[0] if rates else 1.0)
        owner.append(rt)
    n_live = len(patterns)
    W = np.array(cols, dtype=np.int64).T.reshape(J, len(cols))
    return SystemModel(
        capacities=np.asarray(capacities, dtype=np.int64),
        cost_rates=np.asarray(cost_rates, dtype=float),
        arrival_rates=np.array([a for a, _ in request_types], dtype=float),
        rewards=np.array([r for _, r in request_types], dtype=float),
        weights=W,
        service_rates=np.array(mu, dtype=float),
        owner=np.array(owner, dtype=np.int64),
        dummy=np.arange(len(cols)) >= n_live,
        name=name,
    )


def _require(doc: dict, key: str, ctx: str) -> Any:
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioError("schema", f"missing field '{key}' in {ctx}")
    return doc[key]


def _parse_weights(w) -> dict:
    if isinstance(w, dict):
        items = w.items()
    elif isinstance(w, list):
        items = [tuple(p) for p in w]
    else:
        raise ScenarioError("schema", "weights must be a mapping or a list of [pool, count]")
    out = {}
    for k, v in items:
        if not isinstance(v, (int, float)) or int(v) != v:
            raise ScenarioError("integer-weights", f"weight {v!r} is not an integer")
        out[int(k) - 1] = int(v)
    return out


def model_from_dict(doc: dict, name: str = "") -> SystemModel:
    """Validate a parsed scenario document and build the model."""
    pools = _require(doc, "pools", "document")
    rts = _require(doc, "request_types", "document")
    pats = _require(doc, "patterns", "document")
    caps = []
    for p in pools:
        c = _require(p, "capacity", "pool")
        if int(c) != c:
            raise ScenarioError("integer-capacity", f"capacity {c!r} is not an integer")
        caps.append(int(c))
    costs = [float(_require(p, "cost_rate", "pool")) for p in pools]
    req = [(float(_require(r, "arrival_rate", "request type")),
            float(_require(r, "reward", "request type"))) for r in rts]
    plist = []
    for p in pats:
        if p.get("dummy"):
            continue
        w = _parse_weights(_require(p, "weights", "pattern"))
        if not any(w.values()):
            raise ScenarioError("nonzero-pattern", "pattern with all-zero weights is not a dummy")
        plist.append((int(_require(p, "request_type", "pattern")) - 1,
                      float(_require(p, "service_rate", "pattern")), w))
    return build_model(caps, costs, req, plist, name=name or doc.get("name", ""))


def load_scenario(source: str | Path | dict) -> SystemModel:
    """Load a scenario from a fixture name, a file path, JSON text or a dict."""
    if isinstance(source, dict):
        return model_from_dict(source)
    s = str(source)
    if s in FIXTURES:
        text = resources.files("resalloc.fixtures").joinpath(f"{s}.json").read_text()
        return model_from_dict(json.loads(text), name=s)
    if s.lstrip().startswith("{"):
        text, name = s, ""
    else:
        path = Path(s)
        if not path.is_file():
            raise ScenarioError("schema", f"no such scenario file or fixture: {s}")
        text, name = path.read_text(), path.stem
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("schema", f"not valid JSON ({e})") from None
    return model_from_dict(doc, name=name)


def serialize(model: SystemModel) -> dict:
    """Inverse of :func:`model_from_dict` (dummies omitted)."""
    pats = []
    for i in np.flatnonzero(~model.dummy):
        pats.append({
            "request_type": int(model.owner[i]) + 1,
            "service_rate": float(model.service_rates[i]),
            "weights": {str(j + 1): int(model.weights[j, i]) for j in model.pools_of(i)},
        })
    return {
        "name": model.name,
        "pools": [{"capacity": int(c), "cost_rate": float(e)}
                  for c, e in zip(model.capacities, model.cost_rates)],
        "request_types": [{"arrival_rate": float(a), "reward": float(r)}
                          for a, r in zip(model.arrival_rates, model.rewards)],
        "patterns": pats,
    }


def models_equal(a: SystemModel, b: SystemModel) -> bool:
    fields = ("capacities", "cost_rates", "arrival_rates", "rewards", "weights",
              "owner", "dummy")
    same = all(np.array_equal(getattr(a, f), getattr(b, f)) for f in fields)
    live = ~a.dummy
    return same and np.array_equal(a.service_rates[live], b.service_rates[live])


def state_space_size(model: SystemModel, i: int) -> int:
    """Number of states of one sub-process of pattern ``i``.

    min_j ceil(C0_j / w_{j,i}) + 1 over the pools used by ``i``; 1 for dummies.
    """
    if model.dummy[i]:
        return 1
    return min(math.ceil(model.capacities[j] / model.weights[j, i])
               for j in model.pools_of(i)) + 1


def state_space_sizes(model: SystemModel) -> np.ndarray:
    return np.array([state_space_size(model, i) for i in range(model.num_patterns)],
                    dtype=np.int64)


def classify_rows(model: SystemModel) -> np.ndarray:
    """Row type per pool: 2 if more than one pattern uses the pool, else 1."""
    users = (model.weights > 0).sum(axis=1)
    return np.where(users > 1, 2, 1)


def weak_coupling_check(model: SystemModel) -> tuple[bool, list[int]]:
    """True when every pattern touches at most one shared (type-2) pool.

    Returns the flag and the list of offending patterns.
    """
    shared = classify_rows(model) == 2
    touches = ((model.weights > 0) & shared[:, None]).sum(axis=0)
    bad = [int(i) for i in np.flatnonzero(touches >= 2)]
    return not bad, bad
