"""Weakest-preweighting transformers and invariant checking.

`wp` maps a postweighting f backwards through a program: assignments
substitute, sequencing composes, conditionals select, branching adds,
weighing scales, and a loop takes the least fixed point of its
characteristic map

    X  |->  [not guard] (x) f  (+)  [guard] (x) wp(body)(X),

computed by Kleene iteration from the zero weighting.  `wlp` runs the same
recursion but takes the greatest fixed point, iterating downward from the
top weighting (or from the constant one in `leq_one` mode, for probability
programs); the difference wlp(zero) is exactly the weight of the
nonterminating behavior, and wlp(f) = wp(f) (+) wlp(zero).

Fixed points over an infinite state space are evaluated lazily: each loop
keeps a table of the states its iteration has touched, and one iteration
pass recomputes the characteristic map at every touched state against a
snapshot of the previous pass (discovering new states as the body reaches
them).  A result is reported `exact` only under a certificate:

* the dependency closure of the queried state sat still for a full pass,
  so the table is a genuine fixed point of the restricted system (for UCT
  loops this always happens within the fuel), or
* for wlp, the lasso route: wlp(f) = wp(f) (+) wlp(zero) with the
  divergence part taken exactly from the quotient-graph analysis.

Anything else is a flagged bound: below the answer for wp, above for wlp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal

from .algebra import Algebra, ModuleValue, NoTopError
from .syntax import (
    Assign, Branch, ExprWeighting, FnWeighting, Ite, Program, Seq, State,
    Weigh, Weighting, While, eval_arith, eval_bool, eval_weight,
)
from .operational import BudgetError, DivergenceError, diverging_weights


class CertificationError(Exception):
    """An invariant check hit an inner result it could not certify."""


class NotALoopError(Exception):
    pass


Direction = Literal["wp", "wlp"]


@dataclass
class TransformResult:
    value: ModuleValue
    exact: bool
    iterations: int = 0
    touched_states: int = 0


def as_weighting(algebra: Algebra, f) -> Weighting:
    if isinstance(f, Weighting):
        return f
    if isinstance(f, ModuleValue):
        return FnWeighting(algebra, lambda _s, _v=f: _v)
    if isinstance(f, str):
        from .parser import parse_weighting
        return ExprWeighting(algebra, parse_weighting(f, algebra))
    # a WeightingExpr AST node
    return ExprWeighting(algebra, f)


# ---------------------------------------------------------------------------
# Continuations: weightings that remember whether they are exact
# ---------------------------------------------------------------------------

class _Cont:
    def at_ex(self, sigma: State) -> tuple[ModuleValue, bool]:
        raise NotImplementedError


class _ExactCont(_Cont):
    def __init__(self, weighting: Weighting):
        self.weighting = weighting

    def at_ex(self, sigma):
        return self.weighting.at(sigma), True


class _NodeCont(_Cont):
    """wp/wlp of a program node with a fixed continuation, memoized."""

    def __init__(self, engine: "Engine", node: Program, cont: _Cont, memo: "_Memo"):
        self.engine = engine
        self.node = node
        self.cont = cont
        self.memo = memo
        self.cache: dict[State, tuple[ModuleValue, bool]] = {}

    def at_ex(self, sigma):
        hit = self.cache.get(sigma)
        if hit is None:
            hit = self.engine._eval(self.node, self.cont, sigma, self.memo)
            self.cache[sigma] = hit
        return hit


class _IterateCont(_Cont):
    """One Kleene iterate of a loop, read from a pass snapshot.

    Reading a state the table has not seen yet seeds it with the iteration's
    start value and schedules it, unless it lies beyond the unrolling
    horizon (more body-hops away than the fuel allows): such a read keeps
    the seed, like the leaf of a bounded unrolling, and poisons the reading
    state's certificate.  Every read is recorded as a dependency of the
    state currently being re-evaluated.
    """

    def __init__(self, table: "_LoopTable", horizon: int):
        self.table = table
        self.horizon = horizon
        self.snapshot: dict[State, ModuleValue] = {}
        self.current_depth = 0
        self.deps: set[State] = set()
        self.far: set[State] = set()
        self.current: State | None = None
        self.discovered = False

    def begin_pass(self):
        self.snapshot = dict(self.table.vals)
        self.discovered = False
        self.far = set()

    def begin_state(self, sigma: State):
        self.current = sigma
        self.current_depth = self.table.depth.get(sigma, 0)
        self.deps = set()

    def at_ex(self, sigma):
        if sigma not in self.snapshot:
            if self.current_depth + 1 > self.horizon:
                # beyond the horizon: an unrolling leaf, never certified
                self.far.add(self.current)
                self.discovered = True
                return self.table.seed, True
            self.table.add_state(sigma, self.current_depth + 1)
            self.snapshot[sigma] = self.table.seed
            self.discovered = True
        self.deps.add(sigma)
        return self.snapshot[sigma], True


class _LoopTable:
    def __init__(self, seed: ModuleValue):
        self.seed = seed
        self.order: list[State] = []
        self.vals: dict[State, ModuleValue] = {}
        self.depth: dict[State, int] = {}
        self.deps: dict[State, frozenset[State]] = {}
        self.inner_exact: dict[State, bool] = {}
        self.changed_last: set[State] = set()
        self.far_last: set[State] = set()
        self.stable = False
        self.iterations = 0

    def add_state(self, sigma: State, depth: int):
        if sigma not in self.vals:
            self.order.append(sigma)
            self.vals[sigma] = self.seed
            self.depth[sigma] = depth
        elif depth < self.depth.get(sigma, depth):
            self.depth[sigma] = depth

    def closure(self, sigma: State) -> set[State]:
        seen = {sigma}
        stack = [sigma]
        while stack:
            for dep in self.deps.get(stack.pop(), ()):
                if dep not in seen:
                    seen.add(dep)
                    stack.append(dep)
        return seen

    def exact_at(self, sigma: State) -> bool:
        closure = self.closure(sigma)
        return all(tau not in self.changed_last
                   and tau not in self.far_last
                   and tau in self.inner_exact and self.inner_exact[tau]
                   for tau in closure)


class _Memo:
    """Evaluation context: continuation cache and loop tables.

    Loop-pass evaluation gets a fresh memo because everything in it may
    depend on the pass snapshot; the top-level memo persists on the engine
    so grid sweeps share converged loop tables.  Keys pair the program node
    (structural equality; equal subprograms compute the same transformer)
    with the identity of the continuation, which is kept alive here.
    """

    def __init__(self):
        self.conts: dict[tuple[Program, int], _NodeCont] = {}
        self.tables: dict[tuple[Program, int], _LoopTable] = {}
        self.keepalive: list[object] = []


class Engine:
    """A wp or wlp evaluator over one algebra, reusable across states."""

    def __init__(self, algebra: Algebra, direction: Direction = "wp",
                 fuel: int = 64, node_budget: int = 10 ** 6,
                 seed_one: bool = False):
        if direction not in ("wp", "wlp"):
            raise ValueError(f"bad direction {direction!r}")
        self.algebra = algebra
        self.direction = direction
        self.fuel = fuel
        self.node_budget = node_budget
        self.seed_one = seed_one  # wlp restricted to the gfp below the constant one
        self._memo = _Memo()
        self._top_conts: dict[int, _ExactCont] = {}
        self._passes = 0
        self._touched = 0

    # -- public -------------------------------------------------------------
    def run(self, program: Program, f, sigma: State) -> TransformResult:
        w = as_weighting(self.algebra, f)
        cont = self._top_conts.get(id(w))
        if cont is None:
            cont = _ExactCont(w)
            self._top_conts[id(w)] = cont  # also pins w, keeping its id stable
        self._passes = 0
        self._touched = 0
        value, exact = self._eval(program, cont, sigma, self._memo)
        return TransformResult(value, exact, self._passes, self._touched)

    # -- structural recursion -------------------------------------------------
    def _cont(self, node: Program, cont: _Cont, memo: _Memo) -> _NodeCont:
        key = (node, id(cont))
        found = memo.conts.get(key)
        if found is not None:
            return found
        made = _NodeCont(self, node, cont, memo)
        memo.conts[key] = made
        memo.keepalive.append(cont)
        return made

    def _eval(self, node: Program, cont: _Cont, sigma: State,
              memo: _Memo) -> tuple[ModuleValue, bool]:
        alg = self.algebra
        if isinstance(node, Assign):
            return cont.at_ex(sigma.set(node.var, eval_arith(node.expr, sigma)))
        if isinstance(node, Weigh):
            w = eval_weight(node.weight, sigma, alg)
            value, exact = cont.at_ex(sigma)
            return alg.scalar_mul(w, value), exact
        if isinstance(node, Seq):
            return self._eval(node.first, self._cont(node.second, cont, memo), sigma, memo)
        if isinstance(node, Ite):
            chosen = node.then if eval_bool(node.guard, sigma) else node.orelse
            return self._eval(chosen, cont, sigma, memo)
        if isinstance(node, Branch):
            lv, le = self._eval(node.left, cont, sigma, memo)
            rv, re_ = self._eval(node.right, cont, sigma, memo)
            return alg.mod_add(lv, rv), le and re_
        if isinstance(node, While):
            return self._loop(node, cont, sigma, memo)
        raise TypeError(f"not a program node: {node!r}")

    # -- loops ---------------------------------------------------------------
    def _seed(self) -> ModuleValue:
        if self.direction == "wp":
            return self.algebra.mod_zero()
        if self.seed_one:
            return self.algebra.module_one()
        return self.algebra.top()  # may raise NoTopError; that is the contract

    def _loop(self, node: While, cont: _Cont, sigma: State,
              memo: _Memo) -> tuple[ModuleValue, bool]:
        key = (node, id(cont))
        table = memo.tables.get(key)
        if table is None:
            table = _LoopTable(self._seed())
            memo.tables[key] = table
            memo.keepalive.append(cont)
        if sigma in table.vals and table.stable:
            return table.vals[sigma], table.exact_at(sigma)
        table.add_state(sigma, 0)
        self._solve(node, cont, table)
        return table.vals[sigma], table.exact_at(sigma)

    def _solve(self, node: While, cont: _Cont, table: _LoopTable):
        table.stable = False
        for _ in range(self.fuel + 1):
            pass_memo = _Memo()
            iterate = _IterateCont(table, self.fuel + 1)
            iterate.begin_pass()
            newvals: dict[State, ModuleValue] = {}
            deps: dict[State, frozenset[State]] = {}
            inner_exact: dict[State, bool] = {}
            i = 0
            while i < len(table.order):
                tau = table.order[i]
                i += 1
                if len(table.order) > self.node_budget:
                    raise BudgetError(f"loop touched more than {self.node_budget} states")
                iterate.begin_state(tau)
                if eval_bool(node.guard, tau):
                    v, ex = self._eval(node.body, iterate, tau, pass_memo)
                else:
                    v, ex = cont.at_ex(tau)
                newvals[tau] = v
                deps[tau] = frozenset(iterate.deps)
                inner_exact[tau] = ex
            changed = {tau for tau, v in newvals.items() if table.vals[tau] != v}
            table.vals.update(newvals)
            table.deps = deps
            table.inner_exact = inner_exact
            table.changed_last = changed
            table.far_last = iterate.far
            table.iterations += 1
            self._passes += 1
            if not changed and not iterate.discovered:
                table.stable = True
                break
        self._touched += len(table.order)


# ---------------------------------------------------------------------------
# Public evaluation entry points
# ---------------------------------------------------------------------------

def wp_eval(program: Program, f, sigma: State, algebra: Algebra,
            fuel: int = 64, node_budget: int = 10 ** 6) -> TransformResult:
    """Weakest preweighting of `program` for postweighting `f` at one state."""
    return Engine(algebra, "wp", fuel, node_budget).run(program, f, sigma)


def wlp_eval(program: Program, f, sigma: State, algebra: Algebra,
             fuel: int = 64, node_budget: int = 10 ** 6,
             mode: Literal["gfp", "gfp_leq_one"] = "gfp",
             method: Literal["auto", "chain", "lasso"] = "auto") -> TransformResult:
    """Weakest liberal preweighting.

    `mode="gfp"` needs a top element and iterates down from it;
    `mode="gfp_leq_one"` starts from the constant one (probability
    programs).  `method` picks between the fixed-point chain, the lasso
    decomposition wlp(f) = wp(f) (+) wlp(zero), or trying both.
    """
    def chain() -> TransformResult:
        engine = Engine(algebra, "wlp", fuel, node_budget,
                        seed_one=(mode == "gfp_leq_one"))
        return engine.run(program, f, sigma)

    def lasso() -> TransformResult:
        if mode != "gfp":
            raise DivergenceError("lasso decomposition needs the plain gfp mode")
        wp_part = wp_eval(program, f, sigma, algebra, fuel, node_budget)
        div = diverging_weights(program, sigma, algebra, node_budget)
        value = algebra.mod_add(wp_part.value, div.value)
        return TransformResult(value, wp_part.exact, wp_part.iterations,
                               wp_part.touched_states)

    if method == "chain":
        return chain()
    if method == "lasso":
        return lasso()
    result = chain()
    if result.exact:
        return result
    try:
        alt = lasso()
    except (DivergenceError, BudgetError, NoTopError):
        return result
    return alt if alt.exact else result


# ---------------------------------------------------------------------------
# Characteristic functions and invariant checking
# ---------------------------------------------------------------------------

@dataclass
class CharacteristicFn:
    """The loop-unrolling map X |-> [not g](x)f (+) [g](x)T(body)(X)."""

    guard: object
    body: Program
    post: Weighting
    direction: Direction = "wp"


def char_fn(loop: Program, f, algebra: Algebra,
            direction: Direction = "wp") -> CharacteristicFn:
    if not isinstance(loop, While):
        raise NotALoopError("not a loop")
    return CharacteristicFn(loop.guard, loop.body, as_weighting(algebra, f), direction)


def apply_char_fn(phi: CharacteristicFn, invariant, sigma: State, algebra: Algebra,
                  fuel: int = 64, node_budget: int = 10 ** 6) -> ModuleValue:
    """One application of the characteristic map to an evaluable weighting.

    The body transform must come back exact; an invariant check may not
    rest on an approximation.
    """
    inv = as_weighting(algebra, invariant)
    if not eval_bool(phi.guard, sigma):
        return phi.post.at(sigma)
    engine = Engine(algebra, phi.direction, fuel, node_budget)
    res = engine.run(phi.body, inv, sigma)
    if not res.exact:
        raise CertificationError(
            "cannot certify the characteristic-function application "
            f"(inner {phi.direction} at {sigma!r} is not exact)")
    return res.value


@dataclass
class InvariantVerdict:
    state: State
    holds: bool
    detail: str = ""


@dataclass
class InvariantReport:
    mode: str
    verdicts: list[InvariantVerdict]

    @property
    def all_hold(self) -> bool:
        return all(v.holds for v in self.verdicts)


def check_superinvariant(loop: Program, f, invariant, states: Iterable[State],
                         algebra: Algebra, fuel: int = 64,
                         node_budget: int = 10 ** 6) -> InvariantReport:
    """Pointwise `phi(I) <= I`: where it holds everywhere, induction bounds
    wp of the loop from above by I."""
    phi = char_fn(loop, f, algebra, "wp")
    inv = as_weighting(algebra, invariant)
    verdicts = []
    for sigma in states:
        applied = apply_char_fn(phi, inv, sigma, algebra, fuel, node_budget)
        ok = algebra.nat_leq(applied, inv.at(sigma))
        verdicts.append(InvariantVerdict(sigma, ok))
    return InvariantReport("super", verdicts)


def check_subinvariant(loop: Program, f, invariant, states: Iterable[State],
                       algebra: Algebra, fuel: int = 64,
                       node_budget: int = 10 ** 6,
                       mode: Literal["gfp", "gfp_leq_one"] = "gfp") -> InvariantReport:
    """Pointwise `I <= phi~(I)` with the liberal characteristic map: where it
    holds everywhere, I bounds wlp of the loop from below."""
    phi = char_fn(loop, f, algebra, "wlp")
    inv = as_weighting(algebra, invariant)
    verdicts = []
    for sigma in states:
        applied = apply_char_fn(phi, inv, sigma, algebra, fuel, node_budget)
        ok = algebra.nat_leq(inv.at(sigma), applied)
        verdicts.append(InvariantVerdict(sigma, ok))
    return InvariantReport("sub", verdicts)


@dataclass
class FixedPointVerdict:
    state: State
    fixed: bool
    certainly_terminates: bool

    @property
    def exact_claim(self) -> bool:
        """True when wp = wlp = I is certified at this state."""
        return self.fixed and self.certainly_terminates


@dataclass
class FixedPointReport:
    verdicts: list[FixedPointVerdict]

    @property
    def all_fixed(self) -> bool:
        return all(v.fixed for v in self.verdicts)

    @property
    def all_exact(self) -> bool:
        return all(v.exact_claim for v in self.verdicts)


def check_fixed_point(loop: Program, f, invariant, states: Iterable[State],
                      algebra: Algebra, fuel: int = 64,
                      node_budget: int = 10 ** 6,
                      uct_bound: int = 10 ** 4) -> FixedPointReport:
    """Check `phi(I) = I` per state, plus certain termination from it.

    At states where both hold, the loop's fixed point is unique, so
    wp = wlp = I there.
    """
    from .operational import uct_check
    phi = char_fn(loop, f, algebra, "wp")
    inv = as_weighting(algebra, invariant)
    verdicts = []
    for sigma in states:
        applied = apply_char_fn(phi, inv, sigma, algebra, fuel, node_budget)
        fixed = applied == inv.at(sigma)
        uct = uct_check(loop, sigma, algebra, uct_bound, node_budget)
        verdicts.append(FixedPointVerdict(sigma, fixed, uct.certain))
    return FixedPointReport(verdicts)


@dataclass
class DecompositionVerdict:
    state: State
    status: Literal["holds", "fails", "untested"]


def check_decomposition(program: Program, f, states: Iterable[State],
                        algebra: Algebra, fuel: int = 64,
                        node_budget: int = 10 ** 6,
                        mode: Literal["gfp", "gfp_leq_one"] = "gfp",
                        method: Literal["auto", "chain", "lasso"] = "auto",
                        require_exact: bool = True) -> list[DecompositionVerdict]:
    """Per state: wlp(f) = wp(f) (+) wlp(zero), skipped unless both sides
    certify exact (reported `untested`)."""
    out = []
    zero = algebra.mod_zero()
    for sigma in states:
        left = wlp_eval(program, f, sigma, algebra, fuel, node_budget, mode, method)
        wp_part = wp_eval(program, f, sigma, algebra, fuel, node_budget)
        div_part = wlp_eval(program, zero, sigma, algebra, fuel, node_budget, mode, method)
        if require_exact and not (left.exact and wp_part.exact and div_part.exact):
            out.append(DecompositionVerdict(sigma, "untested"))
            continue
        rhs = algebra.mod_add(wp_part.value, div_part.value)
        out.append(DecompositionVerdict(sigma, "holds" if left.value == rhs else "fails"))
    return out
