"""Reversible preprocessing: shrink an instance while preserving at least one
optimal Steiner tree, and map solutions of the reduced instance back.

Every live edge of the working graph carries a provenance: the set of
original edge ids it stands for.  Contractions move their provenance into a
"forced" list and add their cost to the offset, so that
``csmt(original) == csmt(reduced) + offset`` and any reduced solution expands
to an original solution by unioning provenances with the forced paths.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from .graph import (
    BottleneckOracle,
    InputError,
    Instance,
    InternalError,
    Network,
    SteinerTree,
    shortest_path_distances,
    mst_over_points,
    voronoi_partition,
)
from . import bounds as _bounds


class SolveTimeout(Exception):
    """Raised internally when a cooperative deadline passes."""


@dataclass(frozen=True)
class EdgeIntroduced:
    edge: tuple[int, int]
    cost: int
    replaces: tuple[int, ...]


@dataclass(frozen=True)
class EdgeContracted:
    edge: tuple[int, int]
    cost: int
    absorbed: int
    path: tuple[int, ...]


@dataclass(frozen=True)
class VertexRemoved:
    vertex: int
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class EdgeRemoved:
    edge: tuple[int, int]
    cost: int


@dataclass
class ReductionLog:
    original: Instance
    records: list = field(default_factory=list)
    forced: list[tuple[int, ...]] = field(default_factory=list)
    offset: int = 0
    edge_expansion: dict[int, tuple[int, ...]] = field(default_factory=dict)


@dataclass
class PreprocessResult:
    original: Instance
    reduced: Instance
    log: ReductionLog
    offset: int
    stats: dict
    vertex_image: dict[int, Optional[int]]
    changed: int


@dataclass
class PipelineConfig:
    threshold_ratio: float = 0.01
    ntdk_max_degree: int = 4
    nearest_terminals: int = 3
    deadline: Optional[float] = None


def _check_deadline(deadline: Optional[float]):
    if deadline is not None and time.monotonic() > deadline:
        raise SolveTimeout()


class _Working:
    """Mutable reduction state over the original vertex ids."""

    def __init__(self, instance: Instance):
        net = instance.network
        self.instance = instance
        self.alive: set[int] = set(range(net.vertex_count))
        self.terminals: set[int] = set(instance.terminals)
        # adj[u][v] = (cost, provenance as original edge ids)
        self.adj: dict[int, dict[int, tuple[int, tuple[int, ...]]]] = {
            v: {} for v in self.alive
        }
        for eid, (u, v, c) in enumerate(net.edges):
            entry = (c, (eid,))
            self.adj[u][v] = entry
            self.adj[v][u] = entry
        self.offset = 0
        self.records: list = []
        self.forced: list[tuple[int, ...]] = []
        self.merged_into: dict[int, int] = {}

    # -- primitive mutations -------------------------------------------------

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def edge_count(self) -> int:
        return sum(len(d) for d in self.adj.values()) // 2

    def edge_list(self) -> list[tuple[int, int, int]]:
        out = []
        for u in sorted(self.alive):
            for v, (c, _) in self.adj[u].items():
                if u < v:
                    out.append((u, v, c))
        return out

    def remove_edge(self, u: int, v: int):
        c, _ = self.adj[u].pop(v)
        self.adj[v].pop(u)
        self.records.append(EdgeRemoved((min(u, v), max(u, v)), c))

    def remove_vertex(self, v: int):
        incident = tuple(
            (min(v, n), max(v, n)) for n in sorted(self.adj[v])
        )
        for n in list(self.adj[v]):
            self.adj[n].pop(v)
        del self.adj[v]
        self.alive.discard(v)
        self.terminals.discard(v)
        self.records.append(VertexRemoved(v, incident))

    def add_or_min_edge(self, u: int, v: int, cost: int, prov: tuple[int, ...]) -> bool:
        """Insert {u, v}; on collision keep the cheaper edge (ties keep the
        existing one).  Returns True when the new edge becomes live."""
        cur = self.adj[u].get(v)
        if cur is not None and cur[0] <= cost:
            return False
        entry = (cost, prov)
        self.adj[u][v] = entry
        self.adj[v][u] = entry
        self.records.append(EdgeIntroduced((min(u, v), max(u, v)), cost, prov))
        return True

    def contract_edge_pair(self, a: int, b: int) -> int:
        """Contract the live edge {a, b}: the edge is forced into the
        solution, one endpoint absorbs the other, and the survivor becomes a
        terminal.  Returns the survivor."""
        if b not in self.adj.get(a, {}):
            raise InputError(f"cannot contract missing edge ({a}, {b})")
        a_term, b_term = a in self.terminals, b in self.terminals
        if a_term and not b_term:
            survivor, absorbed = b, a
        elif b_term and not a_term:
            survivor, absorbed = a, b
        else:
            survivor, absorbed = (a, b) if a < b else (b, a)
        cost, prov = self.adj[survivor].pop(absorbed)
        self.adj[absorbed].pop(survivor)
        self.offset += cost
        self.forced.append(prov)
        self.records.append(
            EdgeContracted((min(a, b), max(a, b)), cost, absorbed, prov)
        )
        for nbr, entry in list(self.adj[absorbed].items()):
            self.adj[nbr].pop(absorbed)
            cur = self.adj[survivor].get(nbr)
            if cur is None or entry[0] < cur[0]:
                self.adj[survivor][nbr] = entry
                self.adj[nbr][survivor] = entry
        del self.adj[absorbed]
        self.alive.discard(absorbed)
        self.terminals.discard(absorbed)
        self.terminals.add(survivor)
        self.merged_into[absorbed] = survivor
        return survivor

    # -- shared helpers ------------------------------------------------------

    def dijkstra(self, source: int) -> dict[int, int]:
        dist = {source: 0}
        heap = [(0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, (c, _) in self.adj[u].items():
                nd = d + c
                if v not in dist or nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist

    def restrict_to_terminal_component(self) -> int:
        """Drop vertices outside the terminals' component (always safe)."""
        if not self.terminals:
            return 0
        start = min(self.terminals)
        comp = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in self.adj[x]:
                if y not in comp:
                    comp.add(y)
                    stack.append(y)
        for t in self.terminals:
            if t not in comp:
                raise InternalError("reduction separated two terminals")
        strays = sorted(self.alive - comp)
        for v in strays:
            self.remove_vertex(v)
        return len(strays)

    def snapshot(self) -> tuple[Instance, list[int]]:
        """Materialize the current graph as an immutable Instance.

        Returns the instance and the ordered list mapping its dense ids back
        to working ids.  Call after ``restrict_to_terminal_component``.
        """
        order = sorted(self.alive)
        pos = {v: i for i, v in enumerate(order)}
        edges = []
        for u in order:
            for v, (c, _) in self.adj[u].items():
                if u < v:
                    edges.append((pos[u], pos[v], c))
        net = Network(len(order), edges)
        inst = Instance(net, frozenset(pos[t] for t in self.terminals))
        return inst, order

    # -- simple operations ---------------------------------------------------

    def simple_fixpoint(self) -> int:
        total = 0
        while len(self.terminals) > 1:
            changed = self.restrict_to_terminal_component()
            changed += self._nonterminals_low_degree()
            changed += self._terminals_degree_one()
            changed += self._minimum_terminal_edge()
            total += changed
            if not changed:
                break
        return total

    def _nonterminals_low_degree(self) -> int:
        count = 0
        again = True
        while again:
            again = False
            for v in sorted(self.alive):
                if v in self.terminals:
                    continue
                deg = self.degree(v)
                if deg <= 1:
                    self.remove_vertex(v)
                    count += 1
                    again = True
                elif deg == 2:
                    (x, (c1, p1)), (y, (c2, p2)) = sorted(self.adj[v].items())
                    self.remove_vertex(v)
                    self.add_or_min_edge(x, y, c1 + c2, p1 + p2)
                    count += 1
                    again = True
        return count

    def _terminals_degree_one(self) -> int:
        count = 0
        again = True
        while again:
            again = False
            for z in sorted(self.terminals):
                if len(self.terminals) <= 1:
                    return count
                if self.degree(z) == 1:
                    nbr = next(iter(self.adj[z]))
                    self.contract_edge_pair(z, nbr)
                    count += 1
                    again = True
                    break
        return count

    def _minimum_terminal_edge(self) -> int:
        count = 0
        again = True
        while again:
            again = False
            for z in sorted(self.terminals):
                if len(self.terminals) <= 1:
                    return count
                if self.degree(z) == 0:
                    continue
                cheapest = min(c for c, _ in self.adj[z].values())
                mates = sorted(
                    v for v, (c, _) in self.adj[z].items() if c == cheapest
                )
                terminal_mates = [v for v in mates if v in self.terminals]
                if terminal_mates:
                    self.contract_edge_pair(z, terminal_mates[0])
                    count += 1
                    again = True
                    break
        return count

    # -- exclusion operations ------------------------------------------------

    def long_edges(self) -> int:
        if len(self.terminals) <= 1:
            return 0
        terms = sorted(self.terminals)
        rows = {z: self.dijkstra(z) for z in terms}
        _, mst = mst_over_points(
            len(terms), lambda i, j: rows[terms[i]][terms[j]]
        )
        if not mst:
            return 0
        cmax = max(c for _, _, c in mst)
        doomed = [(u, v) for u, v, c in self.edge_list() if c > cmax]
        for u, v in doomed:
            self.remove_edge(u, v)
        return len(doomed)

    def steiner_distance(
        self, nearest_k: int = 3, oracle: Optional[BottleneckOracle] = None
    ) -> int:
        if len(self.terminals) <= 1:
            return 0
        removed = 0
        self.restrict_to_terminal_component()
        inst, order = self.snapshot()
        pos = {v: i for i, v in enumerate(order)}
        if oracle is None:
            oracle = BottleneckOracle(inst.network, inst.terminals, nearest_k)
        # Strictly dominated edges can all go at once: no optimal tree uses
        # any of them.
        doomed = [
            (u, v)
            for u, v, c in self.edge_list()
            if c > oracle.query(pos[u], pos[v])
        ]
        for u, v in doomed:
            self.remove_edge(u, v)
        removed += len(doomed)
        # Ties against the restricted distance only guarantee that *some*
        # optimal tree avoids the edge, so apply them one per fresh oracle.
        for _ in range(16):
            if len(self.terminals) <= 1:
                break
            self.restrict_to_terminal_component()
            inst, order = self.snapshot()
            pos = {v: i for i, v in enumerate(order)}
            fresh = BottleneckOracle(inst.network, inst.terminals, nearest_k)
            sentinel = inst.network.total_cost
            fired = False
            for u, v, c in self.edge_list():
                alt = fresh.query(pos[u], pos[v], exclude_direct_edge=True)
                if alt >= sentinel:
                    continue  # no certified alternative route
                if c >= alt:
                    self.remove_edge(u, v)
                    removed += 1
                    fired = True
                    break
            if not fired:
                break
        return removed

    def ntdk(
        self,
        max_degree: int = 4,
        nearest_k: int = 3,
        oracle: Optional[BottleneckOracle] = None,
    ) -> int:
        replaced = 0
        while len(self.terminals) > 1:
            self.restrict_to_terminal_component()
            inst, order = self.snapshot()
            pos = {v: i for i, v in enumerate(order)}
            cur_oracle = oracle if (oracle is not None and replaced == 0) else None
            if cur_oracle is None:
                cur_oracle = BottleneckOracle(
                    inst.network, inst.terminals, nearest_k
                )
            fired = False
            for u in sorted(self.alive):
                if u in self.terminals:
                    continue
                deg = self.degree(u)
                if deg < 3 or deg > max_degree:
                    continue
                nbrs = sorted(self.adj[u].items())
                costs = [c for _, (c, _) in nbrs]
                ids = [v for v, _ in nbrs]
                ok = True
                for size in range(3, deg + 1):
                    for combo in combinations(range(deg), size):
                        incident = sum(costs[i] for i in combo)
                        pts = [pos[ids[i]] for i in combo]
                        mst_cost, _ = mst_over_points(
                            len(pts),
                            lambda i, j: cur_oracle.query(pts[i], pts[j]),
                        )
                        if incident < mst_cost:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    continue
                # Keep the instance shrinking: a replacement may not add more
                # edges than it deletes.
                fresh_pairs = sum(
                    1
                    for i, j in combinations(range(deg), 2)
                    if ids[j] not in self.adj[ids[i]]
                )
                if fresh_pairs > deg:
                    continue
                pairs = [
                    (ids[i], ids[j], costs[i] + costs[j], nbrs[i][1][1] + nbrs[j][1][1])
                    for i, j in combinations(range(deg), 2)
                ]
                self.remove_vertex(u)
                for x, y, c, prov in pairs:
                    self.add_or_min_edge(x, y, c, prov)
                replaced += 1
                fired = True
                break
            if not fired:
                break
        return replaced

    def dual_ascent_elimination(self, upper_bound: int) -> int:
        if len(self.terminals) <= 1:
            return 0
        self.restrict_to_terminal_component()
        inst, order = self.snapshot()
        if upper_bound >= inst.network.total_cost:
            return 0  # the total-cost surrogate means "no bound known"
        pos = {v: i for i, v in enumerate(order)}
        root = _bounds.select_root(inst)
        run = _bounds.dual_ascent(inst, root)
        net = inst.network
        lower = run.lower_bound
        from_root = _bounds.directed_distances(net, run.reduced_cost, (root,))
        nonroot = sorted(inst.terminals - {root})
        if not nonroot:
            return 0
        to_terminal = _bounds.directed_distances(
            net, run.reduced_cost, nonroot, reverse=True
        )
        doomed_vertices = []
        for v in sorted(self.alive):
            if v in self.terminals:
                continue
            i = pos[v]
            if lower + from_root[i] + to_terminal[i] > upper_bound:
                doomed_vertices.append(v)
        doomed_edges = []
        for u, v, c in self.edge_list():
            i, j = pos[u], pos[v]
            via_u = from_root[i] + run.reduced_cost[(i, j)] + to_terminal[j]
            via_v = from_root[j] + run.reduced_cost[(j, i)] + to_terminal[i]
            if lower + min(via_u, via_v) > upper_bound:
                doomed_edges.append((u, v))
        for v in doomed_vertices:
            self.remove_vertex(v)
        for u, v in doomed_edges:
            if v in self.adj.get(u, {}):
                self.remove_edge(u, v)
        return len(doomed_vertices) + len(doomed_edges)

    # -- inclusion operations ------------------------------------------------

    def short_links(self) -> int:
        if len(self.terminals) < 2:
            return 0
        self.restrict_to_terminal_component()
        inst, order = self.snapshot()
        vor = voronoi_partition(inst.network, inst.terminals)
        regions: dict[int, list[tuple[int, int, int]]] = {}
        for u, v, c in inst.network.edges:
            bu, bv = vor.base[u], vor.base[v]
            if bu != bv:
                regions.setdefault(bu, []).append((c, u, v))
                regions.setdefault(bv, []).append((c, v, u))
        for z in sorted(regions):
            links = sorted(regions[z])
            if len(links) < 2:
                continue
            c1, u1, v1 = links[0]
            c2, _, _ = links[1]
            if c2 >= vor.dist[u1] + c1 + vor.dist[v1]:
                self.contract_edge_pair(order[u1], order[v1])
                return 1
        return 0

    def _dijkstra_avoiding(self, source: int, banned: int) -> dict[int, int]:
        dist = {source: 0}
        heap = [(0, source)]
        while heap:
            d, x = heapq.heappop(heap)
            if d > dist[x]:
                continue
            for y, (c, _) in self.adj[x].items():
                if y == banned:
                    continue
                nd = d + c
                if y not in dist or nd < dist[y]:
                    dist[y] = nd
                    heapq.heappush(heap, (nd, y))
        return dist

    def nearest_vertex(self) -> int:
        """Contract a terminal's cheapest edge when every alternative exit is
        provably no cheaper than rerouting through that edge.

        The reroute distance from the cheap neighbor to another terminal is
        measured with the terminal itself deleted; going back through it
        would not reconnect anything, so the plain distance would over-fire
        (for example on pendant non-terminal neighbors).
        """
        if len(self.terminals) < 2:
            return 0
        contracted = 0
        for z in sorted(self.terminals):
            if z not in self.terminals or z not in self.alive:
                continue
            if self.degree(z) < 2:
                continue
            items = sorted((c, v) for v, (c, _) in self.adj[z].items())
            c1, u = items[0]
            c2, second = items[1]
            reach = self._dijkstra_avoiding(u, z)
            detour = None
            for t in self.terminals:
                if t != z and t in reach:
                    d = reach[t]
                    if detour is None or d < detour:
                        detour = d
            if detour is None:
                continue
            fire = c2 >= c1 + detour
            if not fire and second not in self.terminals:
                others = [
                    c
                    for side in (z, second)
                    for n, (c, _) in self.adj[side].items()
                    if {side, n} not in ({z, u}, {z, second})
                ]
                fire = all(c >= c1 + detour for c in others)
            if fire:
                self.contract_edge_pair(z, u)
                contracted += 1
        return contracted

    def compute_upper_bound(self) -> Optional[int]:
        if len(self.terminals) <= 1:
            return None
        self.restrict_to_terminal_component()
        inst, _ = self.snapshot()
        root = _bounds.select_root(inst)
        return _bounds.upper_bound_pipeline(inst, root).cost

    # -- finalization ----------------------------------------------------------

    def finalize(self, stats: dict, changed: int) -> PreprocessResult:
        self.restrict_to_terminal_component()
        order = sorted(self.alive)
        pos = {v: i for i, v in enumerate(order)}
        edges = []
        prov_by_pair = {}
        for u in order:
            for v, (c, prov) in self.adj[u].items():
                if u < v:
                    edges.append((pos[u], pos[v], c))
                    prov_by_pair[(pos[u], pos[v])] = prov
        net = Network(len(order), edges)
        reduced = Instance(net, frozenset(pos[t] for t in self.terminals))
        expansion = {
            eid: prov_by_pair[(u, v)] for (u, v), eid in net.edge_index.items()
        }
        log = ReductionLog(
            original=self.instance,
            records=self.records,
            forced=list(self.forced),
            offset=self.offset,
            edge_expansion=expansion,
        )
        image: dict[int, Optional[int]] = {}
        for v in range(self.instance.network.vertex_count):
            x = v
            while x in self.merged_into:
                x = self.merged_into[x]
            image[v] = pos.get(x)
        return PreprocessResult(
            original=self.instance,
            reduced=reduced,
            log=log,
            offset=self.offset,
            stats=stats,
            vertex_image=image,
            changed=changed,
        )


# -- public operation drivers ---------------------------------------------


def _driver(instance: Instance, name: str, op) -> PreprocessResult:
    w = _Working(instance)
    changed = op(w)
    return w.finalize({name: {"changed": changed}}, changed)


def contract_edge(instance: Instance, edge: tuple[int, int]) -> PreprocessResult:
    u, v = edge

    def op(w: _Working) -> int:
        w.contract_edge_pair(u, v)
        return 1

    return _driver(instance, "contract", op)


def simple_reductions(instance: Instance) -> PreprocessResult:
    return _driver(instance, "simple", lambda w: w.simple_fixpoint())


def long_edge_test(instance: Instance) -> PreprocessResult:
    return _driver(instance, "long_edges", lambda w: w.long_edges())


def steiner_distance_test(
    instance: Instance, oracle: Optional[BottleneckOracle] = None
) -> PreprocessResult:
    return _driver(
        instance, "steiner_distance", lambda w: w.steiner_distance(oracle=oracle)
    )


def ntdk_test(
    instance: Instance,
    oracle: Optional[BottleneckOracle] = None,
    max_degree: int = 4,
) -> PreprocessResult:
    return _driver(instance, "ntdk", lambda w: w.ntdk(max_degree, oracle=oracle))


def dual_ascent_elimination(instance: Instance, upper_bound: int) -> PreprocessResult:
    return _driver(
        instance, "dual_ascent_bounds", lambda w: w.dual_ascent_elimination(upper_bound)
    )


def short_links_test(instance: Instance) -> PreprocessResult:
    return _driver(instance, "short_links", lambda w: w.short_links())


def nearest_vertex_test(instance: Instance) -> PreprocessResult:
    return _driver(instance, "nearest_vertex", lambda w: w.nearest_vertex())


def identity_preprocess(instance: Instance) -> PreprocessResult:
    """A no-op PreprocessResult so downstream code has one uniform shape."""
    log = ReductionLog(
        original=instance,
        edge_expansion={
            eid: (eid,) for eid in range(len(instance.network.edges))
        },
    )
    image = {v: v for v in range(instance.network.vertex_count)}
    return PreprocessResult(instance, instance, log, 0, {}, image, 0)


_EXCLUSIONS = ("long_edges", "steiner_distance", "ntdk", "dual_ascent_bounds")
_INCLUSIONS = ("short_links", "nearest_vertex")


def run_pipeline(
    instance: Instance, config: Optional[PipelineConfig] = None
) -> PreprocessResult:
    """Run simple reductions to a fixpoint, then the exclusion and inclusion
    tests with per-operation deactivation thresholds, interleaving simple
    reductions after every productive operation."""
    cfg = config or PipelineConfig()
    w = _Working(instance)
    stats: dict[str, dict] = {}

    def note(name: str, n: int):
        stats.setdefault(name, {"changed": 0})["changed"] += n

    total = w.simple_fixpoint()
    note("simple", total)
    active = {op: True for op in _EXCLUSIONS + _INCLUSIONS}
    while len(w.terminals) > 1 and any(active.values()):
        _check_deadline(cfg.deadline)
        round_changed = 0
        upper = None
        for op in _EXCLUSIONS + _INCLUSIONS:
            if not active[op] or len(w.terminals) <= 1:
                continue
            _check_deadline(cfg.deadline)
            units_before = len(w.alive) + w.edge_count()
            if op == "long_edges":
                n = w.long_edges()
            elif op == "steiner_distance":
                n = w.steiner_distance(cfg.nearest_terminals)
            elif op == "ntdk":
                n = w.ntdk(cfg.ntdk_max_degree, cfg.nearest_terminals)
            elif op == "dual_ascent_bounds":
                if upper is None:
                    upper = w.compute_upper_bound()
                n = 0 if upper is None else w.dual_ascent_elimination(upper)
            elif op == "short_links":
                n = w.short_links()
            else:
                n = w.nearest_vertex()
            note(op, n)
            if n:
                ns = w.simple_fixpoint()
                note("simple", ns)
                round_changed += n + ns
            threshold = max(1, int(cfg.threshold_ratio * units_before))
            if n < threshold:
                active[op] = False
        total += round_changed
        if round_changed == 0:
            break
    return w.finalize(stats, total)


def unreduce(tree: SteinerTree, log: ReductionLog) -> SteinerTree:
    """Expand a reduced-instance tree to a tree on the original instance."""
    edges: set[int] = set()
    for eid in tree.edges:
        expansion = log.edge_expansion.get(eid)
        if expansion is None:
            raise InternalError(f"reduced edge {eid} has no provenance record")
        edges.update(expansion)
    for path in log.forced:
        edges.update(path)
    root = min(log.original.terminals)
    return SteinerTree.from_edges(log.original.network, edges, root)
