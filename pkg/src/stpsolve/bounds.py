"""Lower and upper bound machinery.

Lower bounds: a dual-ascent construction on the bidirected arc graph and a
1-tree bound; both are exposed through the guiding-heuristic contract used by
the exact search (admissible: never above the true sub-instance optimum).
Upper bounds: the repeated shortest path heuristic plus local search.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Optional

from .graph import (
    InputError,
    Instance,
    Network,
    SteinerTree,
    shortest_path_distances,
    mst_over_points,
)

# Auto-selection: dual ascent pays off on small graphs, the cheaper 1-tree
# bound takes over on larger ones.
DUAL_ASCENT_EDGE_LIMIT = 10_000


class TerminalIndex:
    """Frozen ordering of the non-root terminals backing the subset bitmasks."""

    def __init__(self, terminals: Iterable[int], root: int):
        self.root = root
        self.order: tuple[int, ...] = tuple(sorted(set(terminals) - {root}))
        self.bit = {z: 1 << i for i, z in enumerate(self.order)}
        self.full_mask = (1 << len(self.order)) - 1

    def mask_of(self, vertices: Iterable[int]) -> int:
        mask = 0
        for z in vertices:
            try:
                mask |= self.bit[z]
            except KeyError:
                raise InputError(f"{z} is not a non-root terminal") from None
        return mask

    def members(self, mask: int) -> tuple[int, ...]:
        out = []
        while mask:
            low = mask & -mask
            out.append(self.order[low.bit_length() - 1])
            mask ^= low
        return tuple(out)


@dataclass(frozen=True)
class DualAscentResult:
    """Outcome of one dual-ascent run.

    ``reduced_cost`` maps each directed arc (u, v) to its remaining cost;
    ``root_component`` is the set of vertices the root reaches along
    zero-reduced-cost arcs, which contains every terminal of the subset at
    termination.
    """

    lower_bound: int
    reduced_cost: dict[tuple[int, int], int]
    root_component: frozenset[int]
    root: int
    terminal_subset: frozenset[int]


def _zero_cut(network: Network, reduced, z: int) -> set[int]:
    """Vertices that can reach ``z`` along arcs of reduced cost zero."""
    cut = {z}
    stack = [z]
    while stack:
        x = stack.pop()
        for y, _, _ in network.adjacency[x]:
            if y not in cut and reduced[(y, x)] == 0:
                cut.add(y)
                stack.append(y)
    return cut


def _zero_closure_from(network: Network, reduced, source: int) -> set[int]:
    """Vertices reachable from ``source`` along arcs of reduced cost zero."""
    comp = {source}
    stack = [source]
    while stack:
        x = stack.pop()
        for y, _, _ in network.adjacency[x]:
            if y not in comp and reduced[(x, y)] == 0:
                comp.add(y)
                stack.append(y)
    return comp


def _incoming_arcs(network: Network, cut: set[int]) -> list[tuple[int, int]]:
    arcs = []
    for x in cut:
        for y, _, _ in network.adjacency[x]:
            if y not in cut:
                arcs.append((y, x))
    return arcs


def dual_ascent(
    instance: Instance, root: int, terminal_subset: Optional[Iterable[int]] = None
) -> DualAscentResult:
    """Greedy feasible dual of the directed cut relaxation.

    Repeatedly grows the zero-reduced-cost cut around an active terminal,
    paying the cheapest incoming arc and shrinking all incoming arcs by that
    amount.  Terminals are processed smallest-frontier first through a lazily
    re-evaluated queue: only the popped terminal's cut is recomputed, and it
    is pushed back when its frontier grew past the current minimum.  The sum
    of payments is a lower bound on the cost of any tree spanning the subset.
    """
    net = instance.network
    subset = (
        instance.terminals
        if terminal_subset is None
        else frozenset(terminal_subset)
    )
    if root not in subset:
        raise InputError("dual ascent root must belong to the terminal subset")
    if not subset <= instance.terminals:
        raise InputError("terminal subset must consist of instance terminals")

    reduced: dict[tuple[int, int], int] = {}
    for u, v, c in net.edges:
        reduced[(u, v)] = c
        reduced[(v, u)] = c
    lower = 0
    active = set(subset) - {root}
    queue = [(net.degree(z), z) for z in sorted(active)]
    heapq.heapify(queue)

    while queue:
        count, z = heapq.heappop(queue)
        if z not in active:
            continue
        cut = _zero_cut(net, reduced, z)
        if root in cut or any(x in cut and x != z for x in active):
            active.discard(z)
            continue
        arcs = _incoming_arcs(net, cut)
        if queue and len(arcs) > queue[0][0]:
            heapq.heappush(queue, (len(arcs), z))
            continue
        step = min(reduced[a] for a in arcs)
        lower += step
        for a in arcs:
            reduced[a] -= step
        heapq.heappush(queue, (len(arcs), z))

    component = _zero_closure_from(net, reduced, root)
    return DualAscentResult(lower, reduced, frozenset(component), root, subset)


def directed_distances(
    network: Network,
    arc_costs,
    sources: Iterable[int],
    reverse: bool = False,
) -> list[int]:
    """Dijkstra over directed arc costs; multi-source; ``reverse`` flips arcs."""
    inf = network.total_cost + 1
    dist = [inf] * network.vertex_count
    heap = []
    for s in sorted(set(sources)):
        dist[s] = 0
        heap.append((0, s))
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, _, _ in network.adjacency[u]:
            cost = arc_costs[(v, u)] if reverse else arc_costs[(u, v)]
            nd = d + cost
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class SteinerHeuristic:
    """Guiding function: a lower bound on the cost of connecting a vertex
    with a terminal subset that always contains the search root."""

    name = "base"
    root: int
    index: TerminalIndex

    def eval_mask(self, u: int, mask: int) -> int:
        raise NotImplementedError

    def eval(self, u: int, terminal_subset: Iterable[int]) -> int:
        subset = set(terminal_subset)
        if self.root not in subset:
            raise InputError("queried subset must contain the root")
        return self.eval_mask(u, self.index.mask_of(subset - {self.root}))


class ZeroHeuristic(SteinerHeuristic):
    name = "zero"

    def __init__(self, instance: Instance, root: int):
        if root not in instance.terminals:
            raise InputError("root must be a terminal")
        self.root = root
        self.index = TerminalIndex(instance.terminals, root)

    def eval_mask(self, u: int, mask: int) -> int:
        return 0


class DualAscentHeuristic(SteinerHeuristic):
    """One dual-ascent run per queried terminal subset, cached.

    The value for (u, J) is the subset's dual-ascent bound plus the shortest
    root-to-u distance under the subset's reduced arc costs: any tree
    spanning J together with u pays at least that much.  Admissible but not
    consistent.
    """

    name = "da"

    def __init__(self, instance: Instance, root: int):
        if root not in instance.terminals:
            raise InputError("root must be a terminal")
        self.instance = instance
        self.root = root
        self.index = TerminalIndex(instance.terminals, root)
        self._cache: dict[int, tuple[int, list[int]]] = {}

    def _tables(self, mask: int) -> tuple[int, list[int]]:
        entry = self._cache.get(mask)
        if entry is None:
            subset = frozenset(self.index.members(mask)) | {self.root}
            run = dual_ascent(self.instance, self.root, subset)
            rows = directed_distances(
                self.instance.network, run.reduced_cost, (self.root,)
            )
            entry = (run.lower_bound, rows)
            self._cache[mask] = entry
        return entry

    def eval_mask(self, u: int, mask: int) -> int:
        lower, rows = self._tables(mask)
        return lower + rows[u]


class OneTreeHeuristic(SteinerHeuristic):
    """Half of (terminal-subset MST cost + two cheapest links from u).

    For the queried subset J, u plays the role of the designated terminal:
    the spanning structure of J plus two u-arms, halved and rounded up
    (valid for integer costs).  Consistent, so the search never re-expands.
    """

    name = "onetree"

    def __init__(self, instance: Instance, root: int):
        if root not in instance.terminals:
            raise InputError("root must be a terminal")
        self.instance = instance
        self.root = root
        self.index = TerminalIndex(instance.terminals, root)
        net = instance.network
        self.rows: dict[int, list[int]] = {
            z: shortest_path_distances(net, z) for z in sorted(instance.terminals)
        }
        self._mst_cache: dict[int, int] = {}

    def _subset_mst(self, mask: int) -> int:
        cached = self._mst_cache.get(mask)
        if cached is None:
            points = (self.root, *self.index.members(mask))
            cached, _ = mst_over_points(
                len(points), lambda i, j: self.rows[points[i]][points[j]]
            )
            self._mst_cache[mask] = cached
        return cached

    def eval_mask(self, u: int, mask: int) -> int:
        members = (self.root, *self.index.members(mask))
        if len(members) == 1:
            arms = 2 * self.rows[self.root][u]
        else:
            d1, d2 = sorted(self.rows[z][u] for z in members)[:2]
            arms = d1 + d2
        return (self._subset_mst(mask) + arms + 1) // 2


def zero_heuristic(instance: Instance, root: int) -> SteinerHeuristic:
    return ZeroHeuristic(instance, root)


def da_heuristic(instance: Instance, root: int) -> SteinerHeuristic:
    return DualAscentHeuristic(instance, root)


def one_tree_heuristic(instance: Instance, root: int) -> SteinerHeuristic:
    return OneTreeHeuristic(instance, root)


def auto_heuristic(instance: Instance, root: int) -> SteinerHeuristic:
    if instance.network.edge_count <= DUAL_ASCENT_EDGE_LIMIT:
        return DualAscentHeuristic(instance, root)
    return OneTreeHeuristic(instance, root)


def _tree_vertices(network: Network, edges: Iterable[int]) -> set[int]:
    verts = set()
    for eid in edges:
        u, v, _ = network.edges[eid]
        verts.add(u)
        verts.add(v)
    return verts


def _prune_leaves(network: Network, edges: set[int], keep: frozenset[int]) -> set[int]:
    """Repeatedly delete degree-1 vertices that are not in ``keep``."""
    edges = set(edges)
    incident: dict[int, set[int]] = {}
    for eid in edges:
        u, v, _ = network.edges[eid]
        incident.setdefault(u, set()).add(eid)
        incident.setdefault(v, set()).add(eid)
    while True:
        leaf = None
        for v in sorted(incident):
            if v not in keep and len(incident[v]) == 1:
                leaf = v
                break
        if leaf is None:
            return edges
        eid = incident[leaf].pop()
        del incident[leaf]
        edges.remove(eid)
        u, v, _ = network.edges[eid]
        other = v if u == leaf else u
        incident[other].discard(eid)
        if not incident[other] and other not in keep:
            del incident[other]


def rsph(
    instance: Instance,
    within: Optional[Iterable[int]] = None,
    start: Optional[int] = None,
) -> SteinerTree:
    """Repeated shortest path heuristic: grow a tree from ``start`` by
    repeatedly attaching the terminal nearest to the current tree, then prune
    non-terminal leaves.  Returns a feasible tree, hence an upper bound."""
    net = instance.network
    terms = instance.terminals
    if start is None:
        start = min(terms)
    if start not in terms:
        raise InputError("rsph start must be a terminal")
    allowed = None if within is None else frozenset(within)
    if allowed is not None and not terms <= allowed:
        raise InputError("restriction set must contain every terminal")

    tree_vertices = {start}
    tree_edges: set[int] = set()
    remaining = set(terms) - {start}
    while remaining:
        dist = {v: 0 for v in tree_vertices}
        pred: dict[int, tuple[int, int]] = {}
        heap = [(0, v) for v in sorted(tree_vertices)]
        heapq.heapify(heap)
        reached = None
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            if u in remaining:
                reached = u
                break
            for v, cost, eid in net.adjacency[u]:
                if allowed is not None and v not in allowed:
                    continue
                nd = d + cost
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    pred[v] = (u, eid)
                    heapq.heappush(heap, (nd, v))
        if reached is None:
            raise InputError("restriction set does not connect the terminals")
        x = reached
        while x not in tree_vertices:
            u, eid = pred[x]
            tree_vertices.add(x)
            tree_edges.add(eid)
            x = u
        remaining -= tree_vertices
    tree_edges = _prune_leaves(net, tree_edges, terms)
    return SteinerTree.from_edges(net, tree_edges, start)


def _induced_mst_pruned(
    network: Network, vertices: set[int], keep: frozenset[int]
) -> Optional[set[int]]:
    """MST of the induced subgraph, leaf-pruned; None if it cannot span."""
    inside = vertices
    cand = [
        eid
        for eid, (u, v, _) in enumerate(network.edges)
        if u in inside and v in inside
    ]
    cand.sort(key=lambda e: (network.edges[e][2], e))
    parent = {v: v for v in inside}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = set()
    merged = 0
    for eid in cand:
        u, v, _ = network.edges[eid]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            chosen.add(eid)
            merged += 1
    if merged != len(inside) - 1:
        return None
    return _prune_leaves(network, chosen, keep)


def _tree_adjacency(network: Network, edges: Iterable[int]):
    adj: dict[int, list[tuple[int, int]]] = {}
    for eid in edges:
        u, v, _ = network.edges[eid]
        adj.setdefault(u, []).append((v, eid))
        adj.setdefault(v, []).append((u, eid))
    return adj


def _key_paths(network: Network, edges: set[int], terminals: frozenset[int]):
    """Maximal tree paths whose interior vertices are degree-2 non-terminals."""
    adj = _tree_adjacency(network, edges)
    key = {v for v in adj if v in terminals or len(adj[v]) >= 3}
    paths = []
    seen: set[int] = set()
    for a in sorted(key):
        for nbr, eid in sorted(adj[a]):
            if eid in seen:
                continue
            path = [eid]
            prev, cur = a, nbr
            while cur not in key:
                nxt = [(n, e) for n, e in sorted(adj[cur]) if e != path[-1]]
                n, e = nxt[0]
                path.append(e)
                prev, cur = cur, n
            seen.update(path)
            paths.append((a, cur, tuple(path)))
    return paths


def local_search(instance: Instance, tree: SteinerTree) -> SteinerTree:
    """Improve a tree by key-vertex insertion and key-path exchange.

    Repeats full passes until neither move lowers the cost; the result is a
    valid tree of cost at most the input cost.
    """
    net = instance.network
    terms = instance.terminals
    best = set(tree.edges)
    best_cost = tree.cost
    if not best:
        return tree

    def cost_of(edges):
        return sum(net.cost_of(e) for e in edges)

    improved = True
    while improved:
        improved = False

        # Key-vertex insertion: connect one outside vertex, rebuild an MST
        # over the enlarged vertex set and prune.
        tv = _tree_vertices(net, best)
        for v in range(net.vertex_count):
            if v in tv:
                continue
            cand = _induced_mst_pruned(net, tv | {v}, terms)
            if cand is not None:
                c = cost_of(cand)
                if c < best_cost:
                    best, best_cost = cand, c
                    improved = True
                    break
        if improved:
            continue

        # Key-path exchange: reroute one path between key vertices through
        # the cheapest connection between the two split components.
        for a, b, path in _key_paths(net, best, terms):
            path_cost = sum(net.cost_of(e) for e in path)
            removed = set(path)
            kept = best - removed
            adj_kept = _tree_adjacency(net, kept)
            comp_a = {a}
            stack = [a]
            while stack:
                x = stack.pop()
                for y, _ in adj_kept.get(x, ()):
                    if y not in comp_a:
                        comp_a.add(y)
                        stack.append(y)
            comp_b = (_tree_vertices(net, kept) | {b}) - comp_a
            dist = {v: 0 for v in comp_a}
            pred: dict[int, tuple[int, int]] = {}
            heap = [(0, v) for v in sorted(comp_a)]
            heapq.heapify(heap)
            hit = None
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                if u in comp_b:
                    hit = u
                    break
                for w, cost, eid in net.adjacency[u]:
                    nd = d + cost
                    if w not in dist or nd < dist[w]:
                        dist[w] = nd
                        pred[w] = (u, eid)
                        heapq.heappush(heap, (nd, w))
            if hit is None or dist[hit] >= path_cost:
                continue
            new_path = set()
            x = hit
            while x not in comp_a:
                u, eid = pred[x]
                new_path.add(eid)
                x = u
            best = kept | new_path
            best_cost = cost_of(best)
            improved = True
            break

    return SteinerTree.from_edges(net, best, tree.root)


def _spread(items: list[int], cap: int) -> list[int]:
    """Up to ``cap`` elements spread evenly over a sorted list."""
    if len(items) <= cap:
        return list(items)
    picked = []
    for i in range(cap):
        j = round(i * (len(items) - 1) / (cap - 1))
        if not picked or items[j] != picked[-1]:
            picked.append(items[j])
    return picked


def upper_bound_pipeline(instance: Instance, root: int) -> SteinerTree:
    """Best tree among RSPH runs on the full graph and on the dual-ascent
    root component, post-processed by local search."""
    terms = sorted(instance.terminals)
    candidates = [rsph(instance, None, s) for s in _spread(terms, 16)]
    run = dual_ascent(instance, root)
    candidates.append(rsph(instance, run.root_component, root))
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.cost < best.cost:
            best = cand
    return local_search(instance, best)


def select_root(instance: Instance) -> int:
    """Terminal whose dual-ascent bound is highest; ties to the smallest id."""
    terms = sorted(instance.terminals)
    if len(terms) == 1:
        return terms[0]
    best_root = None
    best_bound = -1
    for r in _spread(terms, 50):
        bound = dual_ascent(instance, r).lower_bound
        if bound > best_bound:
            best_root, best_bound = r, bound
    return best_root
