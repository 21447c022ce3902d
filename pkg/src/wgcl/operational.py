"""Small-step execution: the weighted computation forest and its analyses.

Configurations are `(program-or-terminated, state, step count, branch
history)`.  Step counts and L/R histories make the transition structure a
forest (each tree rooted at an initial configuration), so paths from a root
are in bijection with nondeterministic resolutions.  The exposed analyses:

* `successors` - the one-step transition relation,
* `enumerate_paths` - depth-bounded path listing,
* `op_oracle` - brute-force sum over terminating paths of weight (x) post,
* `olp_oracle` - the descending chain over all length-n paths of
  weight (x) top, whose limit captures nonterminating behavior,
* `uct_check` - certain-termination check with lasso counterexamples,
* `diverging_weights` - exact limit of the olp chain from the finite
  (program, state) quotient graph, where the instance allows it.

The quotient graph drops step counts and histories; its cycles are exactly
the shapes of infinite paths, which drives both the termination check and
the divergence analysis.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator

from .algebra import (
    Algebra, INF, ModuleValue, NEG_INF, OmegaLangAlgebra, Weight, make_omega,
)
from .syntax import (
    Assign, Branch, Ite, Program, Seq, State, Weigh, Weighting, While,
    eval_arith, eval_bool, eval_weight,
)


class BudgetError(Exception):
    """A node or depth budget was exhausted."""


class DivergenceError(Exception):
    """The divergence analysis does not apply (instance or cycle structure)."""


class _Terminated:
    __slots__ = ()

    def __repr__(self) -> str:
        return "TERMINATED"


TERMINATED = _Terminated()


@dataclass(frozen=True)
class Configuration:
    program: object  # Program | TERMINATED
    state: State
    steps: int = 0
    history: tuple[str, ...] = ()

    @property
    def final(self) -> bool:
        return self.program is TERMINATED


@dataclass(frozen=True)
class Transition:
    weight: Weight
    target: Configuration


def initial(program: Program, state: State) -> Configuration:
    return Configuration(program, state, 0, ())


def successors(conf: Configuration, algebra: Algebra) -> tuple[Transition, ...]:
    """All transitions licensed by the step rules; empty for final configs."""
    prog = conf.program
    sigma = conf.state
    n1 = conf.steps + 1
    one = algebra.mon_one()

    if prog is TERMINATED:
        return ()
    if isinstance(prog, Assign):
        sigma2 = sigma.set(prog.var, eval_arith(prog.expr, sigma))
        return (Transition(one, Configuration(TERMINATED, sigma2, n1, conf.history)),)
    if isinstance(prog, Weigh):
        w = eval_weight(prog.weight, sigma, algebra)
        return (Transition(w, Configuration(TERMINATED, sigma, n1, conf.history)),)
    if isinstance(prog, Seq):
        inner = successors(Configuration(prog.first, sigma, conf.steps, conf.history), algebra)
        out = []
        for tr in inner:
            follow = prog.second if tr.target.program is TERMINATED \
                else Seq(tr.target.program, prog.second)
            out.append(Transition(tr.weight, Configuration(
                follow, tr.target.state, n1, tr.target.history)))
        return tuple(out)
    if isinstance(prog, Ite):
        chosen = prog.then if eval_bool(prog.guard, sigma) else prog.orelse
        return (Transition(one, Configuration(chosen, sigma, n1, conf.history)),)
    if isinstance(prog, Branch):
        return (
            Transition(one, Configuration(prog.left, sigma, n1, conf.history + ("L",))),
            Transition(one, Configuration(prog.right, sigma, n1, conf.history + ("R",))),
        )
    if isinstance(prog, While):
        if eval_bool(prog.guard, sigma):
            return (Transition(one, Configuration(
                Seq(prog.body, prog), sigma, n1, conf.history)),)
        return (Transition(one, Configuration(TERMINATED, sigma, n1, conf.history)),)
    raise TypeError(f"not a program node: {prog!r}")


# ---------------------------------------------------------------------------
# Path enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Path:
    configurations: tuple[Configuration, ...]
    weight: Weight
    terminal: bool

    @property
    def history(self) -> tuple[str, ...]:
        return self.configurations[-1].history

    @property
    def last_state(self) -> State:
        return self.configurations[-1].state


@dataclass
class PathReport:
    paths: list[Path]
    truncated: bool


def enumerate_paths(start: Configuration, depth: int, algebra: Algebra,
                    node_budget: int = 10 ** 6) -> PathReport:
    """All maximal paths of length <= depth, plus the depth-cut open ones.

    Paths come out in L-before-R order, i.e. sorted by branch history.
    """
    report = PathReport(paths=[], truncated=False)
    budget = [node_budget]

    def walk(trace: list[Configuration], weight: Weight):
        budget[0] -= 1
        if budget[0] < 0:
            raise BudgetError(f"node budget {node_budget} exceeded")
        conf = trace[-1]
        if conf.final:
            report.paths.append(Path(tuple(trace), weight, True))
            return
        if len(trace) - 1 >= depth:
            report.paths.append(Path(tuple(trace), weight, False))
            report.truncated = True
            return
        for tr in successors(conf, algebra):
            trace.append(tr.target)
            walk(trace, algebra.mon_mul(weight, tr.weight))
            trace.pop()

    walk([start], algebra.mon_one())
    report.paths.sort(key=lambda p: p.history)
    return report


def _frontier_layers(program: Program, state: State, algebra: Algebra,
                     fuel: int, node_budget: int) -> Iterator[list[tuple[Configuration, Weight]]]:
    """Yield the length-n path frontier for n = 0..fuel (paths as leaf+weight).

    Stops early when the frontier empties (every path has terminated).
    """
    frontier = [(initial(program, state), algebra.mon_one())]
    nodes = 0
    for _ in range(fuel + 1):
        yield frontier
        nxt = []
        for conf, w in frontier:
            for tr in successors(conf, algebra):
                nodes += 1
                if nodes > node_budget:
                    raise BudgetError(f"node budget {node_budget} exceeded")
                nxt.append((tr.target, algebra.mon_mul(w, tr.weight)))
        if not nxt:
            return
        frontier = nxt


@dataclass
class OracleResult:
    value: ModuleValue
    exact: bool
    layers: int = 0


def _node_fingerprint(frontier) -> frozenset:
    counts: dict = {}
    for conf, _ in frontier:
        key = (conf.program, conf.state)
        counts[key] = counts.get(key, 0) + 1
    return frozenset(counts.items())


def _full_fingerprint(frontier) -> frozenset:
    counts: dict = {}
    for conf, w in frontier:
        key = (conf.program, conf.state, w.value)
        counts[key] = counts.get(key, 0) + 1
    return frozenset(counts.items())


class _Stabilization:
    """Convergence certificates for layered sums.

    Tier 1 is sound: once a layer frontier repeats exactly (program, state,
    and accumulated weight, as a multiset), the process is periodic, so a
    sum that did not move over the repetition never moves again.  Tier 2 is
    the configurable-window heuristic: the sum sat still for at least
    `window` layers spanning a full repetition of the frontier's
    (program, state) structure.  Tier 2 can in principle be fooled by
    weight-dependent behavior; tier 1 cannot.
    """

    MAX_FRONTIER = 512  # repetition needs a small frontier; skip huge ones

    def __init__(self, window: int):
        self.window = window
        self.layer = -1
        self.full_seen: dict[frozenset, int] = {}
        self.node_seen: dict[frozenset, int] = {}
        self.constant_since = 0
        self.last_value = None
        self.certified = False

    def feed(self, frontier, value) -> None:
        self.layer += 1
        if value != self.last_value:
            self.constant_since = self.layer
            self.last_value = value
        if len(frontier) > self.MAX_FRONTIER:
            self.full_seen.clear()
            self.node_seen.clear()
            return
        full_fp = _full_fingerprint(frontier)
        node_fp = _node_fingerprint(frontier)
        if self.layer == self.constant_since:
            # the sum just moved: only this layer can anchor a repetition
            self.full_seen = {full_fp: self.layer}
            self.node_seen = {node_fp: self.layer}
            return
        full_prev = self.full_seen.get(full_fp)
        node_prev = self.node_seen.get(node_fp)
        self.full_seen[full_fp] = self.layer
        self.node_seen[node_fp] = self.layer
        stretch = self.layer - self.constant_since + 1
        if full_prev is not None and full_prev >= self.constant_since:
            self.certified = True
        elif (node_prev is not None and node_prev >= self.constant_since
              and stretch >= self.window):
            self.certified = True


def op_oracle(program: Program, state: State, post: Weighting, algebra: Algebra,
              fuel: int = 64, node_budget: int = 10 ** 6,
              window: int = 3) -> OracleResult:
    """Sum weight (x) post(final state) over terminating paths, within fuel.

    Exact when the computation forest was exhausted (no paths remain beyond
    the horizon) or the layer partial sums stabilized (see _Stabilization).
    """
    total = algebra.mod_zero()
    exhausted = True
    layers = 0
    stab = _Stabilization(window)
    for frontier in _frontier_layers(program, state, algebra, fuel, node_budget):
        layers += 1
        for conf, w in frontier:
            if conf.final:
                total = algebra.mod_add(total, algebra.scalar_mul(w, post.at(conf.state)))
        live = [(c, w) for c, w in frontier if not c.final]
        stab.feed(live, total)
        if layers == fuel + 1 and live:
            exhausted = False
    return OracleResult(total, exhausted or stab.certified, layers)


def olp_oracle(program: Program, state: State, algebra: Algebra,
               fuel: int = 64, node_budget: int = 10 ** 6, window: int = 3,
               top: ModuleValue | None = None,
               lasso_fallback: bool = True) -> OracleResult:
    """Evaluate the descending chain s_n = sum over length-n paths of
    weight (x) top, and report its limit when certified.

    Once no paths of some length remain the chain has hit the module zero
    for good (certain termination).  Otherwise the last value is an upper
    bound in the natural order; it is exact if the chain stabilized (see
    _Stabilization), or, for omega-language instances, the lasso analysis
    supplies the exact limit.
    """
    if top is None:
        top = algebra.top()
    last = None
    count = 0
    extendable = False
    stab = _Stabilization(window)
    for frontier in _frontier_layers(program, state, algebra, fuel, node_budget):
        s_n, _ = algebra.big_add([algebra.scalar_mul(w, top) for _, w in frontier])
        last = s_n
        count += 1
        extendable = any(not c.final for c, _ in frontier)
        stab.feed(frontier, s_n)
    if not extendable:
        # the next chain element is the empty sum, and stays there
        return OracleResult(algebra.mod_zero(), True, count)
    if stab.certified:
        return OracleResult(last, True, count)
    if lasso_fallback and isinstance(algebra, OmegaLangAlgebra):
        try:
            report = diverging_weights(program, state, algebra, node_budget)
            return OracleResult(report.value, True, count)
        except (DivergenceError, BudgetError):
            pass
    return OracleResult(last, False, count)


def olp_chain(program: Program, state: State, algebra: Algebra,
              fuel: int = 64, node_budget: int = 10 ** 6,
              top: ModuleValue | None = None) -> list[ModuleValue]:
    """The raw s_n values for n = 0..fuel (shorter if paths run out)."""
    if top is None:
        top = algebra.top()
    out = []
    for frontier in _frontier_layers(program, state, algebra, fuel, node_budget):
        s_n, _ = algebra.big_add([algebra.scalar_mul(w, top) for _, w in frontier])
        out.append(s_n)
    return out


# ---------------------------------------------------------------------------
# Quotient graph, termination, divergence
# ---------------------------------------------------------------------------

QNode = tuple  # (program-or-TERMINATED, State)


def build_quotient(program: Program, state: State, algebra: Algebra,
                   node_budget: int = 10 ** 6) -> dict[QNode, list[tuple[object, QNode]]]:
    """Reachable (program, state) graph with raw edge weights.

    Paths in the computation forest project onto walks in this graph, and
    every walk lifts back, so cycles here are exactly the shapes of
    infinite paths.
    """
    root = (program, state)
    graph: dict[QNode, list[tuple[object, QNode]]] = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node in graph:
            continue
        if len(graph) >= node_budget:
            raise BudgetError(f"quotient node budget {node_budget} exceeded")
        prog, sigma = node
        edges = []
        if prog is not TERMINATED:
            conf = Configuration(prog, sigma, 0, ())
            seen = set()
            for tr in successors(conf, algebra):
                succ = (tr.target.program, tr.target.state)
                key = (tr.weight.value, succ)
                if key in seen:
                    continue  # duplicate branch arms collapse in the quotient
                seen.add(key)
                edges.append((tr.weight.value, succ))
        graph[node] = edges
        for _, succ in edges:
            if succ not in graph:
                stack.append(succ)
    return graph


@dataclass
class UctResult:
    kind: str  # 'certain' | 'refuted' | 'unknown'
    maxlen: int | None = None
    lasso: tuple[list[QNode], list[QNode]] | None = None

    @property
    def certain(self) -> bool:
        return self.kind == "certain"


def uct_check(program: Program, state: State, algebra: Algebra,
              bound: int = 10 ** 4, node_budget: int = 10 ** 6) -> UctResult:
    """Decide certain termination from one initial state.

    `certain(maxlen)` if exhaustive exploration bounds every path; `refuted`
    with a lasso witness if a (program, state) pair repeats along a path;
    `unknown` if a budget ran out or the bound was exceeded.
    """
    try:
        graph = build_quotient(program, state, algebra, node_budget)
    except BudgetError:
        return UctResult("unknown")

    root = (program, state)
    GRAY, BLACK = 1, 2
    color: dict[QNode, int] = {root: GRAY}
    longest: dict[QNode, int] = {}
    parent: dict[QNode, QNode] = {}
    stack: list[tuple[QNode, Iterator]] = [(root, iter(graph[root]))]
    while stack:
        node, edges = stack[-1]
        pushed = False
        for _, succ in edges:
            c = color.get(succ)
            if c == GRAY:
                # a (program, state) pair repeats: lasso witnessing divergence
                cycle = [node]
                cur = node
                while cur != succ:
                    cur = parent[cur]
                    cycle.append(cur)
                cycle.reverse()  # [succ, ..., node]
                prefix = []
                cur = succ
                while cur != root:
                    cur = parent[cur]
                    prefix.append(cur)
                prefix.reverse()
                return UctResult("refuted", lasso=(prefix, cycle))
            if c is None:
                color[succ] = GRAY
                parent[succ] = node
                stack.append((succ, iter(graph[succ])))
                pushed = True
                break
        if not pushed:
            stack.pop()
            color[node] = BLACK
            longest[node] = max((1 + longest[s] for _, s in graph[node]), default=0)
    maxlen = longest[root]
    if maxlen > bound:
        return UctResult("unknown")
    return UctResult("certain", maxlen=maxlen)


def _nontrivial_sccs(graph: dict[QNode, list[tuple[object, QNode]]]) -> list[set[QNode]]:
    """Tarjan SCCs that contain a cycle (size > 1 or a self-loop)."""
    index: dict[QNode, int] = {}
    low: dict[QNode, int] = {}
    on_stack: set[QNode] = set()
    stack: list[QNode] = []
    sccs: list[set[QNode]] = []
    counter = [0]

    def strong(v: QNode):
        work = [(v, iter(graph[v]))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for _, succ in it:
                if succ not in index:
                    index[succ] = low[succ] = counter[0]
                    counter[0] += 1
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(graph[succ])))
                    advanced = True
                    break
                if succ in on_stack:
                    low[node] = min(low[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                if len(comp) > 1 or any(s == node for _, s in graph[node]):
                    sccs.append(comp)

    for v in graph:
        if v not in index:
            strong(v)
    return sccs


@dataclass
class DivergenceReport:
    """Exact limit of the olp chain, plus the witnessing lassos."""

    value: ModuleValue
    lassos: frozenset  # (prefix weight, cycle weight) pairs, raw carriers


def diverging_weights(program: Program, state: State, algebra: Algebra,
                      node_budget: int = 10 ** 6) -> DivergenceReport:
    """Evaluate nonterminating behavior exactly on the finite quotient.

    For omega-language instances the result collects one lasso per way of
    reaching a cycle: prefix label plus the cycle label repeated forever (a
    cycle with empty label contributes the full cylinder after its prefix).
    For the idempotent numeric instances the limit is characterized by
    cycle reachability: tropical takes the cheapest route to a zero-weight
    cycle, arctic and boolean only ask whether a (weight-preserving) cycle
    is reachable at all.  Other instances are rejected.
    """
    graph = build_quotient(program, state, algebra, node_budget)
    root = (program, state)
    name = algebra.name

    if isinstance(algebra, OmegaLangAlgebra):
        return _diverge_omega(graph, root, algebra, node_budget)
    if name == "tropical":
        dist = _shortest_distances(graph, root)
        zero_graph = {v: [(w, s) for (w, s) in es if w == 0] for v, es in graph.items()}
        cyc = set().union(*_nontrivial_sccs(zero_graph)) if _nontrivial_sccs(zero_graph) else set()
        best = INF
        lassos = set()
        for v in cyc:
            d = dist.get(v)
            if d is not None and (best is INF or d < best):
                best = d
        if best is not INF:
            lassos.add((best, 0))
        return DivergenceReport(algebra.value(best), frozenset(lassos))
    if name == "arctic":
        reachable_cycle = any(_nontrivial_sccs(graph))
        if reachable_cycle:
            return DivergenceReport(algebra.value(INF), frozenset({(0, 0)}))
        return DivergenceReport(algebra.value(NEG_INF), frozenset())
    if name == "boolean":
        live = {v: [(w, s) for (w, s) in es if w] for v, es in graph.items()}
        sccs = _nontrivial_sccs(live)
        cyc = set().union(*sccs) if sccs else set()
        alive = _reachable_through(live, root, cyc)
        return DivergenceReport(algebra.value(bool(alive)),
                                frozenset({(True, True)} if alive else ()))
    raise DivergenceError(f"{name}: no exact divergence analysis")


def _shortest_distances(graph, root):
    dist = {root: 0}
    heap = [(0, 0, root)]
    tie = 0
    while heap:
        d, _, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for w, succ in graph[node]:
            if w is INF:
                continue
            nd = d + w
            if succ not in dist or nd < dist[succ]:
                dist[succ] = nd
                tie += 1
                heapq.heappush(heap, (nd, tie, succ))
    return dist


def _reachable_through(graph, root, targets):
    if root not in graph:
        return False
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        if node in targets:
            return True
        for _, succ in graph.get(node, ()):
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return False


def _diverge_omega(graph, root, algebra: OmegaLangAlgebra, node_budget: int) -> DivergenceReport:
    sccs = _nontrivial_sccs(graph)
    in_scc: dict[QNode, int] = {}
    for i, comp in enumerate(sccs):
        for v in comp:
            in_scc[v] = i

    # each component must be one simple cycle: within it, out-degree one
    cycle_next: dict[QNode, tuple[str, QNode]] = {}
    for i, comp in enumerate(sccs):
        for v in comp:
            inside = [(w, s) for (w, s) in graph[v] if s in comp]
            if len(inside) != 1:
                raise DivergenceError(
                    "diverging words are not ultimately periodic "
                    "(a reachable component branches within itself)")
            cycle_next[v] = inside[0]

    # no component may reach another (else prefixes pump through cycles)
    for i, comp in enumerate(sccs):
        seen = set(comp)
        stack = [s for v in comp for (_, s) in graph[v] if s not in comp]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            if node in in_scc:
                raise DivergenceError(
                    "diverging words are not ultimately periodic "
                    "(a reachable cycle feeds another cycle)")
            stack.extend(s for (_, s) in graph.get(node, ()))

    # enumerate label-distinct prefixes: the region outside the cycles is
    # acyclic, and walking past the first cycle vertex only pumps the period
    lassos: set[tuple[str, str]] = set()
    cylinders: set[str] = set()
    raw_lassos: set[tuple[str, str]] = set()

    def cycle_label(entry: QNode) -> str:
        label = ""
        cur = entry
        while True:
            w, nxt = cycle_next[cur]
            label += w
            cur = nxt
            if cur == entry:
                return label

    budget = node_budget
    if root in graph and graph[root]:
        stack: list[tuple[QNode, str]] = [(root, "")]
        while stack:
            node, label = stack.pop()
            budget -= 1
            if budget < 0:
                raise BudgetError(f"node budget {node_budget} exceeded")
            if node in in_scc:
                period = cycle_label(node)
                raw_lassos.add((label, period))
                if period:
                    lassos.add((label, period))
                else:
                    cylinders.add(label)
                continue
            for w, succ in graph[node]:
                stack.append((succ, label + w))
    value = algebra.value(make_omega((), lassos, cylinders, algebra.alphabet))
    return DivergenceReport(value, frozenset(raw_lassos))
