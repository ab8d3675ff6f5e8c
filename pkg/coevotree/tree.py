"""
Tree - Arrival-indexed parent-array tree shared by simulators and observables
"""
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np

from .errors import InvariantViolation

# Parent of the root in memory; files store it as 0xFFFFFFFFFFFFFFFF
ROOT = -1


class TreeState:
    """Parent and depth arrays with optional birth times"""

    def __init__(self, parent: np.ndarray, depth: np.ndarray, birth_time: Optional[np.ndarray] = None,
                 seed: Optional[int] = None, variant: str = "", pmf: str = "",
                 rng_state: Optional[Dict] = None, truncated: bool = False):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.depth = np.asarray(depth, dtype=np.int32)
        self.birth_time = None if birth_time is None else np.asarray(birth_time, dtype=np.float64)
        self.seed = seed
        self.variant = variant
        self.pmf = pmf
        self.rng_state = rng_state
        self.truncated = truncated
        self._children: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def from_parents(cls, parent, birth_time=None, **provenance) -> "TreeState":
        """Rebuild depths from a parent array (parents precede children)"""
        parent = np.asarray(parent, dtype=np.int64)
        n = len(parent)
        if n == 0 or parent[0] != ROOT:
            raise InvariantViolation("vertex 0 must be the root")
        idx = np.arange(1, n)
        bad = np.nonzero((parent[1:] < 0) | (parent[1:] >= idx))[0]
        if len(bad):
            i = int(bad[0]) + 1
            raise InvariantViolation(f"parent[{i}]={int(parent[i])} must lie in [0, {i})")
        depth = np.zeros(n, dtype=np.int32)
        plist = parent.tolist()
        dlist = depth.tolist()
        for i in range(1, n):
            dlist[i] = dlist[plist[i]] + 1
        return cls(plist, dlist, birth_time=birth_time, **provenance)

    @property
    def n(self) -> int:
        return len(self.parent)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"TreeState(n={self.n}, variant={self.variant!r}, pmf={self.pmf!r})"

    def validate(self) -> None:
        """Check every structural invariant; raises InvariantViolation"""
        n = self.n
        if n == 0:
            raise InvariantViolation("empty tree")
        if len(self.depth) != n:
            raise InvariantViolation("depth array length differs from parent array")
        if self.parent[0] != ROOT or self.depth[0] != 0:
            raise InvariantViolation("vertex 0 must be the root at depth 0")
        if n > 1:
            idx = np.arange(1, n)
            par = self.parent[1:]
            if np.any(par < 0) or np.any(par >= idx):
                i = int(np.nonzero((par < 0) | (par >= idx))[0][0]) + 1
                raise InvariantViolation(f"parent[{i}]={int(self.parent[i])} must lie in [0, {i})")
            if np.any(self.depth[1:] != self.depth[par] + 1):
                raise InvariantViolation("depth[i] != depth[parent[i]] + 1")
        if self.birth_time is not None:
            if len(self.birth_time) != n:
                raise InvariantViolation("birth_time length differs from parent array")
            if n > 1 and np.any(np.diff(self.birth_time) <= 0):
                raise InvariantViolation("birth times must be strictly increasing")

    def children(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Children in CSR form: children of v are order[offsets[v]:offsets[v+1]],
        listed in arrival order
        """
        if self._children is None:
            n = self.n
            counts = np.bincount(self.parent[1:], minlength=n) if n > 1 else np.zeros(n, dtype=np.int64)
            offsets = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=offsets[1:])
            order = np.argsort(self.parent[1:], kind="stable") + 1
            self._children = (offsets, order.astype(np.int64))
        return self._children

    def child_counts(self) -> np.ndarray:
        if self.n == 1:
            return np.zeros(1, dtype=np.int64)
        return np.bincount(self.parent[1:], minlength=self.n)

    def to_networkx(self) -> nx.DiGraph:
        """DiGraph with edges parent -> child and depth/birth attributes"""
        graph = nx.DiGraph()
        for v in range(self.n):
            attrs = {"depth": int(self.depth[v])}
            if self.birth_time is not None:
                attrs["birth_time"] = float(self.birth_time[v])
            graph.add_node(v, **attrs)
        graph.add_edges_from((int(self.parent[v]), v) for v in range(1, self.n))
        return graph
