"""Augmenting-path max-flow / min-cut on real-valued capacities (Dinic).

Terminals are implicit: :meth:`FlowGraph.add_tweights` attaches source and
sink capacities to a node, mirroring the usual graph-cut API.  After
:meth:`maxflow`, nodes reachable from the source in the residual graph form
the source segment.
"""

from __future__ import annotations

from collections import deque

# Residual capacity at or below this counts as saturated.
EPS = 1e-12


class FlowGraph:
    def __init__(self, num_nodes: int = 0):
        self.n = 0
        self._adj: list[list[int]] = []
        self._to: list[int] = []
        self._cap: list[float] = []
        self._source_side: list[bool] | None = None
        self.s = -1
        self.t = -1
        self._tw: list[tuple[int, float, float]] = []
        if num_nodes:
            self.add_nodes(num_nodes)

    def add_nodes(self, k: int) -> int:
        first = self.n
        self.n += k
        self._adj.extend([] for _ in range(k))
        return first

    def _arc(self, u: int, v: int, cap: float, rev_cap: float) -> None:
        self._adj[u].append(len(self._to))
        self._to.append(v)
        self._cap.append(cap)
        self._adj[v].append(len(self._to))
        self._to.append(u)
        self._cap.append(rev_cap)

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> None:
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be non-negative")
        if cap or rev_cap:
            self._arc(u, v, float(cap), float(rev_cap))

    def add_tweights(self, u: int, cap_source: float, cap_sink: float) -> None:
        """Add terminal capacities; the common part is pushed through directly."""
        if cap_source < 0 or cap_sink < 0:
            raise ValueError("capacities must be non-negative")
        self._tw.append((u, float(cap_source), float(cap_sink)))

    def maxflow(self) -> float:
        # Fold terminal weights into real arcs; a node with both gets min() as free flow.
        s = self.add_nodes(1)
        t = self.add_nodes(1)
        self.s, self.t = s, t
        src = [0.0] * self.n
        snk = [0.0] * self.n
        for u, a, b in self._tw:
            src[u] += a
            snk[u] += b
        flow = 0.0
        for u in range(self.n - 2):
            m = min(src[u], snk[u])
            flow += m
            if src[u] - m > EPS:
                self._arc(s, u, src[u] - m, 0.0)
            if snk[u] - m > EPS:
                self._arc(u, t, snk[u] - m, 0.0)

        adj, to, cap = self._adj, self._to, self._cap
        n = self.n
        while True:
            level = [-1] * n
            level[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for e in adj[u]:
                    v = to[e]
                    if level[v] < 0 and cap[e] > EPS:
                        level[v] = level[u] + 1
                        q.append(v)
            if level[t] < 0:
                break
            it = [0] * n
            while True:
                pushed = self._augment(s, t, level, it)
                if pushed <= 0:
                    break
                flow += pushed
        self._source_side = [False] * n
        side = self._source_side
        side[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for e in adj[u]:
                v = to[e]
                if not side[v] and cap[e] > EPS:
                    side[v] = True
                    q.append(v)
        return flow

    def _augment(self, s: int, t: int, level: list[int], it: list[int]) -> float:
        """Find one blocking-flow path with current-arc pointers; 0 if none."""
        adj, to, cap = self._adj, self._to, self._cap
        path: list[int] = []
        u = s
        while True:
            if u == t:
                bottleneck = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= bottleneck
                    cap[e ^ 1] += bottleneck
                return bottleneck
            edges = adj[u]
            advanced = False
            while it[u] < len(edges):
                e = edges[it[u]]
                v = to[e]
                if cap[e] > EPS and level[v] == level[u] + 1:
                    path.append(e)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if u == s:
                    return 0.0
                level[u] = -1  # dead end
                e = path.pop()
                u = to[e ^ 1]
                it[u] += 1

    def in_source_segment(self, u: int) -> bool:
        if self._source_side is None:
            raise RuntimeError("call maxflow() first")
        return self._source_side[u]
