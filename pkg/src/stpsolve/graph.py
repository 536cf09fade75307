"""Immutable weighted graphs and the shared algorithms built on them.

Vertices are dense 0-based integers.  Edge costs are positive integers, and
the sum of all edge costs doubles as the "unreachable" sentinel so that every
quantity computed here stays a plain int.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

# Instances whose total edge cost exceeds this are rejected at load time so
# that all arithmetic (including doubled bounds) fits comfortably in 64 bits.
MAX_TOTAL_COST = 1 << 62


class StpError(Exception):
    """Base class for errors raised by this package."""


class InputError(StpError):
    """Malformed arguments: unknown vertices, bad roots, empty subsets."""


class NotATree(StpError):
    """Edge set is cyclic or disconnected."""


class TerminalMissing(StpError):
    """A tree does not cover every terminal."""


class UnknownEdge(StpError):
    """A tree references an edge id the network does not have."""


class InternalError(StpError):
    """Invariant violation inside the solver; indicates a bug."""


class Network:
    """Undirected connected-or-not graph with positive integer edge costs.

    Parallel edge inserts keep the minimum cost; self loops are rejected.
    Networks are immutable after construction and safe to share between
    concurrent solves.
    """

    __hash__ = object.__hash__

    def __init__(self, vertex_count: int, edges: Iterable[tuple[int, int, int]]):
        if vertex_count <= 0:
            raise InputError("network needs at least one vertex")
        best: dict[tuple[int, int], int] = {}
        for u, v, cost in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise InputError(f"edge endpoint out of range: ({u}, {v})")
            if u == v:
                raise InputError(f"self loop at vertex {u}")
            if not isinstance(cost, int) or isinstance(cost, bool) or cost < 1:
                raise InputError(f"edge cost must be a positive integer, got {cost!r}")
            key = (u, v) if u < v else (v, u)
            old = best.get(key)
            if old is None or cost < old:
                best[key] = cost

        self.vertex_count = vertex_count
        self.edges: tuple[tuple[int, int, int], ...] = tuple(
            (u, v, best[(u, v)]) for (u, v) in sorted(best)
        )
        self.edge_index: dict[tuple[int, int], int] = {
            (u, v): i for i, (u, v, _) in enumerate(self.edges)
        }
        adjacency: list[list[tuple[int, int, int]]] = [[] for _ in range(vertex_count)]
        for eid, (u, v, cost) in enumerate(self.edges):
            adjacency[u].append((v, cost, eid))
            adjacency[v].append((u, cost, eid))
        self.adjacency: tuple[tuple[tuple[int, int, int], ...], ...] = tuple(
            tuple(sorted(nbrs)) for nbrs in adjacency
        )
        self.total_cost = sum(c for _, _, c in self.edges)
        if self.total_cost > MAX_TOTAL_COST:
            raise InputError("total edge cost exceeds the supported range")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[tuple[int, int, int], ...]:
        """(neighbor, cost, edge id) triples of ``u``, sorted by neighbor."""
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def edge_between(self, u: int, v: int) -> Optional[int]:
        """Edge id of {u, v}, or None."""
        key = (u, v) if u < v else (v, u)
        return self.edge_index.get(key)

    def cost_of(self, eid: int) -> int:
        return self.edges[eid][2]

    def is_connected(self) -> bool:
        if self.vertex_count == 1:
            return True
        seen = [False] * self.vertex_count
        seen[0] = True
        stack = [0]
        count = 1
        while stack:
            u = stack.pop()
            for v, _, _ in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.vertex_count


@dataclass(frozen=True)
class Instance:
    """A network plus the terminals that a Steiner tree must connect."""

    network: Network
    terminals: frozenset[int]
    root: Optional[int] = None

    def __post_init__(self):
        net = self.network
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        if not self.terminals:
            raise InputError("terminal set must be non-empty")
        for z in self.terminals:
            if not 0 <= z < net.vertex_count:
                raise InputError(f"terminal {z} is not a vertex")
        if self.root is not None and self.root not in self.terminals:
            raise InputError("root must be a terminal")
        if not net.is_connected():
            raise InputError("instance network must be connected")


@dataclass(frozen=True)
class SteinerTree:
    """An edge set forming a tree that spans the terminals of its instance."""

    edges: frozenset[int]
    root: int
    cost: int

    @classmethod
    def from_edges(cls, network: Network, edge_ids: Iterable[int], root: int) -> "SteinerTree":
        ids = frozenset(edge_ids)
        return cls(ids, root, sum(network.cost_of(e) for e in ids))


@dataclass(frozen=True)
class VoronoiPartition:
    """Nearest terminal (``base``) and its distance for every vertex."""

    base: tuple[int, ...]
    dist: tuple[int, ...]


def shortest_path_distances(network: Network, source: int) -> list[int]:
    """Single-source shortest path distances.

    Unreachable vertices carry ``network.total_cost``, which can only happen
    on intermediate reduced graphs.
    """
    if not 0 <= source < network.vertex_count:
        raise InputError(f"invalid source vertex {source}")
    inf = network.total_cost
    dist = [inf] * network.vertex_count
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, cost, _ in network.adjacency[u]:
            nd = d + cost
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path_edges(network: Network, source: int, target: int) -> list[int]:
    """Edge ids of one shortest source-target path (deterministic choice)."""
    dist: dict[int, int] = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == target:
            break
        for v, cost, _ in network.adjacency[u]:
            nd = d + cost
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if target not in dist:
        raise InputError(f"no path from {source} to {target}")
    path = []
    u = target
    while u != source:
        # Walk backwards along any tight predecessor, smallest vertex first.
        for v, cost, eid in network.adjacency[u]:
            if v in dist and dist[v] + cost == dist[u]:
                path.append(eid)
                u = v
                break
        else:
            raise InternalError("shortest path retrace failed")
    path.reverse()
    return path


def distance_matrix(network: Network) -> tuple[list[int], ...]:
    """All-pairs distances, memoized on the network."""
    cached = getattr(network, "_distance_matrix", None)
    if cached is None:
        cached = tuple(
            shortest_path_distances(network, s) for s in range(network.vertex_count)
        )
        network._distance_matrix = cached
    return cached


def distance_network(network: Network, subset: Iterable[int]) -> Network:
    """Complete graph on ``subset`` with shortest-path distances as costs.

    Vertex ``i`` of the result corresponds to ``sorted(subset)[i]``.
    """
    members = sorted(set(subset))
    if not members:
        raise InputError("distance network needs a non-empty vertex subset")
    for u in members:
        if not 0 <= u < network.vertex_count:
            raise InputError(f"invalid vertex {u} in subset")
    if len(members) == 1:
        return Network(1, [])
    edges = []
    for i, u in enumerate(members):
        row = shortest_path_distances(network, u)
        for j in range(i + 1, len(members)):
            edges.append((i, j, row[members[j]]))
    return Network(len(members), edges)


def minimum_spanning_tree(network: Network) -> tuple[tuple[int, ...], int]:
    """Kruskal MST; returns (edge ids, total cost).  Raises if disconnected."""
    parent = list(range(network.vertex_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    total = 0
    order = sorted(range(len(network.edges)), key=lambda e: (network.edges[e][2], e))
    for eid in order:
        u, v, cost = network.edges[eid]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            chosen.append(eid)
            total += cost
    if len(chosen) != network.vertex_count - 1:
        raise InputError("minimum spanning tree of a disconnected network")
    return tuple(chosen), total


def mst_over_points(count: int, dist) -> tuple[int, list[tuple[int, int, int]]]:
    """Prim MST over ``count`` points with ``dist(i, j)`` costs.

    Returns (total cost, edges as (i, j, cost)).  Deterministic: ties prefer
    the smaller point index.
    """
    if count <= 1:
        return 0, []
    in_tree = [False] * count
    best_cost = [None] * count
    best_from = [0] * count
    in_tree[0] = True
    for j in range(1, count):
        best_cost[j] = dist(0, j)
    total = 0
    edges = []
    for _ in range(count - 1):
        pick = None
        for j in range(count):
            if not in_tree[j] and (pick is None or best_cost[j] < best_cost[pick]):
                pick = j
        in_tree[pick] = True
        total += best_cost[pick]
        edges.append((best_from[pick], pick, best_cost[pick]))
        for j in range(count):
            if not in_tree[j]:
                d = dist(pick, j)
                if d < best_cost[j]:
                    best_cost[j] = d
                    best_from[j] = pick
    return total, edges


def voronoi_partition(network: Network, terminals: Iterable[int]) -> VoronoiPartition:
    """Assign every vertex to its nearest terminal, ties to the smallest id."""
    terms = sorted(set(terminals))
    if not terms:
        raise InputError("voronoi partition needs at least one terminal")
    n = network.vertex_count
    dist: list[Optional[int]] = [None] * n
    base = [-1] * n
    heap = []
    for z in terms:
        if not 0 <= z < n:
            raise InputError(f"invalid terminal {z}")
        dist[z] = 0
        base[z] = z
        heap.append((0, z, z))
    heapq.heapify(heap)
    while heap:
        d, b, u = heapq.heappop(heap)
        if (d, b) != (dist[u], base[u]):
            continue
        for v, cost, _ in network.adjacency[u]:
            nd = d + cost
            if dist[v] is None or nd < dist[v] or (nd == dist[v] and b < base[v]):
                dist[v] = nd
                base[v] = b
                heapq.heappush(heap, (nd, b, v))
    inf = network.total_cost
    return VoronoiPartition(tuple(base), tuple(inf if d is None else d for d in dist))


class BottleneckOracle:
    """Safe over-approximation of bottleneck Steiner distances.

    A path's Steiner distance is the maximum cost among its elementary
    pieces, splitting the path at intermediate terminals; the bottleneck
    Steiner distance s(u, v) is the minimum Steiner distance over all
    terminal-mediated routes from u to v.  Exact values are expensive, so
    this oracle returns the minimum over a candidate family (direct edge,
    one-terminal relays, and routes through the k nearest terminals of each
    endpoint glued by the terminal-MST bottleneck).  Every candidate is the
    max-piece value of an actual route, hence every returned value is >= the
    true minimum, which is the safety direction edge-exclusion tests need.
    """

    def __init__(self, network: Network, terminals: Iterable[int], nearest_k: int = 3):
        self.network = network
        self.terminals = tuple(sorted(set(terminals)))
        self.inf = network.total_cost
        self.rows: dict[int, list[int]] = {
            z: shortest_path_distances(network, z) for z in self.terminals
        }
        n = network.vertex_count
        self.nearest: list[tuple[int, ...]] = []
        for u in range(n):
            ranked = sorted(self.terminals, key=lambda z: (self.rows[z][u], z))
            self.nearest.append(tuple(ranked[:nearest_k]))
        # MST over the terminal distance network, used as the relay backbone.
        terms = self.terminals
        k = len(terms)
        _, mst = mst_over_points(k, lambda i, j: self.rows[terms[i]][terms[j]])
        adj: dict[int, list[tuple[int, int]]] = {z: [] for z in terms}
        for i, j, cost in mst:
            adj[terms[i]].append((terms[j], cost))
            adj[terms[j]].append((terms[i], cost))
        # For every terminal pair: the max edge on the MST path and the path
        # edges themselves (needed to certify edge-avoiding routes).
        self._bottleneck: dict[int, dict[int, int]] = {}
        self._path_edges: dict[int, dict[int, tuple[tuple[int, int, int], ...]]] = {}
        for z in terms:
            maxedge = {z: 0}
            pedges: dict[int, tuple[tuple[int, int, int], ...]] = {z: ()}
            stack = [z]
            seen = {z}
            while stack:
                x = stack.pop()
                for y, cost in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        maxedge[y] = max(maxedge[x], cost)
                        pedges[y] = pedges[x] + ((x, y, cost),)
                        stack.append(y)
            self._bottleneck[z] = maxedge
            self._path_edges[z] = pedges

    def terminal_bottleneck(self, z1: int, z2: int) -> int:
        return self._bottleneck[z1][z2]

    def _segment_from_endpoint_ok(self, endpoint_dist, other_dist, edge_cost) -> bool:
        # A cheapest path leaving an endpoint of the excluded edge can use
        # that edge only as its first step; strict inequality rules that out.
        return endpoint_dist < edge_cost + other_dist

    def _mst_path_ok(self, z1: int, z2: int, u: int, v: int, edge_cost: int) -> bool:
        for a, b, d in self._path_edges[z1][z2]:
            if d >= self.rows[a][u] + edge_cost + self.rows[b][v]:
                return False
            if d >= self.rows[a][v] + edge_cost + self.rows[b][u]:
                return False
        return True

    def query(self, u: int, v: int, exclude_direct_edge: bool = False) -> int:
        """Upper bound on the bottleneck Steiner distance between u and v.

        With ``exclude_direct_edge`` the bound holds for routes avoiding the
        edge {u, v}; candidates that cannot be certified edge-avoiding are
        dropped, which only raises the returned value.
        """
        eid = self.network.edge_between(u, v)
        edge_cost = self.network.cost_of(eid) if eid is not None else None
        exclude = exclude_direct_edge and edge_cost is not None
        best = self.inf
        if edge_cost is not None and not exclude:
            best = edge_cost
        rows = self.rows
        # Single-terminal relay: u -> z -> v, split at z.
        for z in self.terminals:
            du, dv = rows[z][u], rows[z][v]
            if exclude:
                if not self._segment_from_endpoint_ok(du, rows[z][v], edge_cost):
                    continue
                if not self._segment_from_endpoint_ok(dv, rows[z][u], edge_cost):
                    continue
            cand = du + dv
            if cand < best:
                best = cand
        # Nearest-terminal pairs glued by the terminal MST.
        for z1 in self.nearest[u]:
            du = rows[z1][u]
            if exclude and not self._segment_from_endpoint_ok(du, rows[z1][v], edge_cost):
                continue
            for z2 in self.nearest[v]:
                dv = rows[z2][v]
                if exclude:
                    if not self._segment_from_endpoint_ok(dv, rows[z2][u], edge_cost):
                        continue
                    if not self._mst_path_ok(z1, z2, u, v, edge_cost):
                        continue
                cand = max(du, self._bottleneck[z1][z2], dv)
                if cand < best:
                    best = cand
        return best


def bottleneck_upper(
    oracle: BottleneckOracle, u: int, v: int, exclude_direct_edge: bool = False
) -> int:
    return oracle.query(u, v, exclude_direct_edge)


def validate_tree(instance: Instance, tree: SteinerTree) -> int:
    """Check a tree against its instance and return its recomputed cost."""
    net = instance.network
    if tree.root not in instance.terminals:
        raise InputError("tree root must be a terminal")
    vertices = {tree.root}
    adj: dict[int, list[int]] = {tree.root: []}
    cost = 0
    for eid in tree.edges:
        if not isinstance(eid, int) or not 0 <= eid < len(net.edges):
            raise UnknownEdge(f"edge id {eid!r} not in network")
        u, v, c = net.edges[eid]
        cost += c
        for x in (u, v):
            if x not in adj:
                adj[x] = []
                vertices.add(x)
        adj[u].append(v)
        adj[v].append(u)
    if len(tree.edges) != len(vertices) - 1:
        raise NotATree("edge count does not match a tree on the touched vertices")
    # Connectivity from the root.
    seen = {tree.root}
    stack = [tree.root]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if seen != vertices:
        raise NotATree("edge set is disconnected")
    for z in instance.terminals:
        if z not in vertices:
            raise TerminalMissing(f"terminal {z} not covered")
    if cost != tree.cost:
        raise InternalError("cached tree cost disagrees with its edges")
    return cost
