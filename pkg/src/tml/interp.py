"""Timed interpreter for tml configurations.

A configuration holds objects grouped into cogs, futures, and undelivered
invocation messages. Each cog has a capacity and at most one token holder;
only the token holder's active process may execute. Time is dense: ordinary
statements are instantaneous, and only job(e) consumes e/capacity time units.

Execution alternates two phases. While any instantaneous rule applies the
configuration makes discrete steps; when none does, every active process is
parked on a positive job and the clock advances by the least job(e)/capacity
remaining, rewriting each pending job amount in place. That least value is
achieved by construction, so after every clock advance at least one job
completes.

The discrete scan is deterministic except for one point: which suspended
process a free cog activates next. That choice is delegated to a scheduling
policy (fifo, seeded random), or forked over exhaustively by explore(),
which is enough to cover all observable schedules: every other rule either
involves no choice or commutes with the scan order.

Simulation outcomes:
  terminated        every object idle with an empty queue
  deadlock          progress impossible but processes remain (cross-cog
                    synchronous calls, circular gets, negative job amounts)
  zeno-suspected    more than max_steps instantaneous steps between two
                    clock advances
  budget-exhausted  more than max_ticks clock advances (convergent job
                    cascades burn ticks without reaching their limit point)
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .ast import (
    Assign,
    AsyncCall,
    BinOp,
    Expr,
    Get,
    If,
    Job,
    MethodDecl,
    NewLocal,
    NewWith,
    Num,
    Program,
    Pure,
    Return,
    Stmt,
    SyncCall,
    This,
    ThisCapacity,
    Var,
    method_table,
    stmt_list,
)
from .errors import (
    DivisionByZero,
    RuntimeTypeError,
    TypeMismatch,
    UnboundVariable,
    UnknownMethod,
)

DEFAULT_MAX_STEPS = 10**5
DEFAULT_MAX_TICKS = 10**4

TERMINATED = "terminated"
DEADLOCK = "deadlock"
ZENO_SUSPECTED = "zeno-suspected"
BUDGET_EXHAUSTED = "budget-exhausted"


# ---------------------------------------------------------------------------
# runtime values

class _Bottom:
    __slots__ = ()

    def __repr__(self) -> str:
        return "<uninitialized>"


BOTTOM = _Bottom()


@dataclass(frozen=True)
class ObjectRef:
    name: str


@dataclass(frozen=True)
class FutureRef:
    name: str


Value = Union[Fraction, ObjectRef, FutureRef, _Bottom]


@dataclass(frozen=True)
class ValueExpr:
    """Expression wrapper around an already-computed value.

    Only the interpreter builds these: a synchronous call suspends its caller
    on a get whose future is a value, not a name in scope.
    """

    value: Value


@dataclass(frozen=True)
class Cont:
    """Trailing marker of a synchronous callee: wake the caller of fut."""

    fut: str


# ---------------------------------------------------------------------------
# configurations

@dataclass
class ProcState:
    destiny: str
    env: dict[str, Value]
    stmts: list  # Stmt | Cont, head first

    def clone(self) -> "ProcState":
        return ProcState(self.destiny, dict(self.env), list(self.stmts))


@dataclass
class ObjState:
    name: str
    cog: str
    active: Optional[ProcState] = None
    queue: list[ProcState] = field(default_factory=list)

    def clone(self) -> "ObjState":
        active = self.active.clone() if self.active is not None else None
        return ObjState(self.name, self.cog, active, [p.clone() for p in self.queue])


@dataclass
class CogState:
    name: str
    capacity: Fraction
    token: Optional[str]  # holder object name, None when free


@dataclass(frozen=True)
class Invoc:
    callee: str
    fut: str
    method: str
    args: tuple[Value, ...]


@dataclass(frozen=True)
class StepEvent:
    rule: str
    obj: Optional[str]
    elapsed: Fraction


@dataclass(frozen=True)
class NeedsChoice:
    """The scan is quiescent up to activation; a scheduler must pick one."""

    candidates: tuple[tuple[str, int], ...]  # (object name, queue index)


@dataclass
class Config:
    methods: dict[str, MethodDecl]
    objects: dict[str, ObjState]
    cogs: dict[str, CogState]
    futures: dict[str, Value]  # BOTTOM marks an unresolved future
    invocs: list[Invoc]
    elapsed: Fraction
    counters: dict[str, int]

    def clone(self) -> "Config":
        return Config(
            self.methods,
            {n: o.clone() for n, o in self.objects.items()},
            {n: CogState(c.name, c.capacity, c.token) for n, c in self.cogs.items()},
            dict(self.futures),
            list(self.invocs),
            self.elapsed,
            dict(self.counters),
        )

    def fresh(self, kind: str) -> str:
        n = self.counters[kind] = self.counters.get(kind, 0) + 1
        return f"{kind}{n}"


def init_configuration(
    program: Program, bindings: Optional[dict[str, Fraction]] = None
) -> Config:
    """The start configuration: one object running the main body.

    bindings gives values to main locals the program never assigns, which is
    how a driver is simulated for a concrete argument.
    """
    bindings = bindings or {}
    declared = {d.name for d in program.main.locals_}
    for name in bindings:
        if name not in declared:
            raise RuntimeTypeError(f"binding for undeclared main local {name!r}")
    env: dict[str, Value] = {"this": ObjectRef("start")}
    for d in program.main.locals_:
        env[d.name] = bindings.get(d.name, BOTTOM)
    proc = ProcState("fstart", env, stmt_list(program.main.body))
    return Config(
        methods=method_table(program),
        objects={"start": ObjState("start", "start", proc, [])},
        cogs={"start": CogState("start", program.main.capacity, "start")},
        futures={"fstart": BOTTOM},
        invocs=[],
        elapsed=Fraction(0),
        counters={},
    )


# ---------------------------------------------------------------------------
# expression evaluation

def eval_pure(e, env: dict[str, Value], cfg: Config, obj: ObjState) -> Value:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, ValueExpr):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundVariable(f"undeclared variable {e.name!r}")
        # an uninitialized local reads as BOTTOM; only operators reject it
        return env[e.name]
    if isinstance(e, This):
        return ObjectRef(obj.name)
    if isinstance(e, ThisCapacity):
        return cfg.cogs[obj.cog].capacity
    if isinstance(e, BinOp):
        l = eval_pure(e.left, env, cfg, obj)
        r = eval_pure(e.right, env, cfg, obj)
        if e.op in ("and", "or"):
            lt, rt = _truth(l, e), _truth(r, e)
            res = (lt and rt) if e.op == "and" else (lt or rt)
            return Fraction(1 if res else 0)
        if not isinstance(l, Fraction) or not isinstance(r, Fraction):
            raise TypeMismatch(f"non-integer operand of {e.op!r}")
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            if r == 0:
                raise DivisionByZero("division by zero")
            return l / r
        if e.op == "<=":
            return Fraction(1 if l <= r else 0)
    raise RuntimeTypeError(f"cannot evaluate {e!r}")


def _truth(v: Value, e: Expr) -> bool:
    if not isinstance(v, Fraction):
        raise TypeMismatch(f"boolean operand is not an integer in {e!r}")
    return v != 0


# ---------------------------------------------------------------------------
# method binding

def bind(cfg: Config, callee: str, fut: str, method: str, args: tuple[Value, ...]) -> ProcState:
    m = cfg.methods.get(method)
    if m is None:
        raise UnknownMethod(f"call to unknown method {method!r}")
    if len(m.params) != len(args):
        raise RuntimeTypeError(
            f"method {method!r} takes {len(m.params)} arguments, got {len(args)}"
        )
    env: dict[str, Value] = {"this": ObjectRef(callee)}
    for p, v in zip(m.params, args):
        env[p.name] = v
    for d in m.locals_:
        env[d.name] = BOTTOM
    return ProcState(fut, env, stmt_list(m.body))


# ---------------------------------------------------------------------------
# the discrete step scan

def step(cfg: Config) -> Union[StepEvent, NeedsChoice, None]:
    """Apply one instantaneous rule, deterministically.

    Scan order: active-process rules in object insertion order, then delivery
    of the oldest invocation message, then token release, then activation.
    Activation is the one genuine choice, reported as NeedsChoice; None means
    the configuration is quiescent.
    """
    for obj in list(cfg.objects.values()):
        if obj.active is None:
            continue
        ev = _step_active(cfg, obj)
        if ev is not None:
            return ev
    if cfg.invocs:
        inv = cfg.invocs.pop(0)
        if inv.callee not in cfg.objects:
            raise RuntimeTypeError(f"invocation for unknown object {inv.callee!r}")
        cfg.objects[inv.callee].queue.append(bind(cfg, inv.callee, inv.fut, inv.method, inv.args))
        return StepEvent("bind", inv.callee, cfg.elapsed)
    for obj in cfg.objects.values():
        if obj.active is None and cfg.cogs[obj.cog].token == obj.name:
            cfg.cogs[obj.cog].token = None
            return StepEvent("release", obj.name, cfg.elapsed)
    cands = activation_candidates(cfg)
    if cands:
        # Choices only compete within one cog (one token): activations on
        # distinct cogs commute, and an active run can only enlarge another
        # cog's candidate set, so handing out tokens one cog at a time loses
        # no observable schedule. A process that blocks because its future
        # resolves later in the scan is rewoken at the same instant.
        first_cog = cfg.objects[cands[0][0]].cog
        cands = [c for c in cands if cfg.objects[c[0]].cog == first_cog]
        return NeedsChoice(tuple(cands))
    return None


def _step_active(cfg: Config, obj: ObjState) -> Optional[StepEvent]:
    proc = obj.active
    assert proc is not None
    if not proc.stmts:
        # a body without a trailing return (or main) simply finishes; its
        # destiny future stays unresolved
        obj.active = None
        return StepEvent("finish", obj.name, cfg.elapsed)
    head = proc.stmts[0]

    if isinstance(head, Cont):
        return _step_cont(cfg, obj, head.fut)

    if isinstance(head, If):
        v = eval_pure(head.cond, proc.env, cfg, obj)
        taken = _truth(v, head.cond)
        branch = head.then_branch if taken else head.else_branch
        proc.stmts[0:1] = stmt_list(branch)
        return StepEvent("cond-true" if taken else "cond-false", obj.name, cfg.elapsed)

    if isinstance(head, Job):
        v = eval_pure(head.amount, proc.env, cfg, obj)
        if isinstance(v, Fraction) and v == 0:
            proc.stmts.pop(0)
            return StepEvent("job-done", obj.name, cfg.elapsed)
        return None  # positive amounts wait for the clock; negative ones stick

    if isinstance(head, Return):
        v = eval_pure(head.value, proc.env, cfg, obj)
        f = proc.destiny
        if cfg.futures.get(f, None) is not BOTTOM:
            return None  # destiny missing or already resolved: cannot fire
        cfg.futures[f] = v
        proc.stmts.pop(0)
        if not (proc.stmts and isinstance(proc.stmts[0], Cont)):
            obj.active = None
        return StepEvent("return", obj.name, cfg.elapsed)

    assert isinstance(head, Assign), head
    return _step_assign(cfg, obj, head)


def _step_assign(cfg: Config, obj: ObjState, head: Assign) -> Optional[StepEvent]:
    proc = obj.active
    assert proc is not None
    rhs = head.rhs
    if head.target not in proc.env:
        raise RuntimeTypeError(f"assignment to undeclared variable {head.target!r}")

    if isinstance(rhs, Pure):
        proc.env[head.target] = eval_pure(rhs.expr, proc.env, cfg, obj)
        proc.stmts.pop(0)
        return StepEvent("assign", obj.name, cfg.elapsed)

    if isinstance(rhs, NewWith):
        k = eval_pure(rhs.capacity, proc.env, cfg, obj)
        if not isinstance(k, Fraction) or k <= 0:
            raise RuntimeTypeError(f"cog capacity must be a positive number, got {k!r}")
        oname = cfg.fresh("o")
        cname = cfg.fresh("c")
        cfg.objects[oname] = ObjState(oname, cname)
        cfg.cogs[cname] = CogState(cname, k, token=oname)
        proc.env[head.target] = ObjectRef(oname)
        proc.stmts.pop(0)
        return StepEvent("new-cog", obj.name, cfg.elapsed)

    if isinstance(rhs, NewLocal):
        oname = cfg.fresh("o")
        cfg.objects[oname] = ObjState(oname, obj.cog)
        proc.env[head.target] = ObjectRef(oname)
        proc.stmts.pop(0)
        return StepEvent("new-local", obj.name, cfg.elapsed)

    if isinstance(rhs, Get):
        v = eval_pure(rhs.expr, proc.env, cfg, obj)
        if not isinstance(v, FutureRef):
            raise RuntimeTypeError(f"get on a non-future value {v!r}")
        if cfg.futures[v.name] is BOTTOM:
            obj.active = None
            obj.queue.append(proc)
            return StepEvent("get-block", obj.name, cfg.elapsed)
        proc.env[head.target] = cfg.futures[v.name]
        proc.stmts.pop(0)
        return StepEvent("get", obj.name, cfg.elapsed)

    if isinstance(rhs, AsyncCall):
        callee = eval_pure(rhs.callee, proc.env, cfg, obj)
        if not isinstance(callee, ObjectRef):
            raise RuntimeTypeError(f"asynchronous call on non-object {callee!r}")
        args = tuple(eval_pure(a, proc.env, cfg, obj) for a in rhs.args)
        f = cfg.fresh("f")
        cfg.futures[f] = BOTTOM
        cfg.invocs.append(Invoc(callee.name, f, rhs.method, args))
        proc.env[head.target] = FutureRef(f)
        proc.stmts.pop(0)
        return StepEvent("async-call", obj.name, cfg.elapsed)

    assert isinstance(rhs, SyncCall), rhs
    callee = eval_pure(rhs.callee, proc.env, cfg, obj)
    if not isinstance(callee, ObjectRef):
        raise RuntimeTypeError(f"synchronous call on non-object {callee!r}")
    args = tuple(eval_pure(a, proc.env, cfg, obj) for a in rhs.args)

    if callee.name == obj.name:
        # the callee replaces the caller in place; the caller waits for the
        # fresh future at the front of its own queue
        f = cfg.fresh("f")
        cfg.futures[f] = BOTTOM
        callee_proc = bind(cfg, obj.name, f, rhs.method, args)
        callee_proc.stmts.append(Cont(proc.destiny))
        proc.stmts[0] = Assign(head.target, Get(ValueExpr(FutureRef(f))))
        obj.queue.append(proc)
        obj.active = callee_proc
        return StepEvent("self-sync-call", obj.name, cfg.elapsed)

    callee_obj = cfg.objects[callee.name]
    if callee_obj.cog != obj.cog:
        return None  # synchronous calls do not cross cogs: stuck
    if callee_obj.active is not None:
        return None  # unreachable while the token invariant holds
    f = cfg.fresh("f")
    cfg.futures[f] = BOTTOM
    callee_proc = bind(cfg, callee.name, f, rhs.method, args)
    callee_proc.stmts.append(Cont(proc.destiny))
    proc.stmts[0] = Assign(head.target, Get(ValueExpr(FutureRef(f))))
    obj.queue.append(proc)
    obj.active = None
    callee_obj.active = callee_proc
    cfg.cogs[obj.cog].token = callee_obj.name
    return StepEvent("cog-sync-call", obj.name, cfg.elapsed)


def _step_cont(cfg: Config, obj: ObjState, f: str) -> Optional[StepEvent]:
    """Wake the synchronous caller whose destiny is f."""
    for i, p in enumerate(obj.queue):
        if p.destiny == f:
            obj.queue.pop(i)
            obj.active = p
            return StepEvent("sync-return", obj.name, cfg.elapsed)
    for other in cfg.objects.values():
        if other is obj or other.cog != obj.cog or other.active is not None:
            continue
        for i, p in enumerate(other.queue):
            if p.destiny == f:
                other.queue.pop(i)
                other.active = p
                obj.active = None
                cfg.cogs[obj.cog].token = other.name
                return StepEvent("cog-sync-return", obj.name, cfg.elapsed)
    return None  # no matching caller: stuck


def _runnable(cfg: Config, obj: ObjState, proc: ProcState) -> bool:
    """Suspended processes blocked on an unresolved future cannot activate."""
    if not proc.stmts:
        return True
    head = proc.stmts[0]
    if isinstance(head, Assign) and isinstance(head.rhs, Get):
        try:
            v = eval_pure(head.rhs.expr, proc.env, cfg, obj)
        except Exception:
            return True  # let the error surface when it runs
        if isinstance(v, FutureRef) and cfg.futures[v.name] is BOTTOM:
            return False
    return True


def activation_candidates(cfg: Config) -> list[tuple[str, int]]:
    cands: list[tuple[str, int]] = []
    for obj in cfg.objects.values():
        if obj.active is not None:
            continue
        if cfg.cogs[obj.cog].token is not None:
            continue
        for i, p in enumerate(obj.queue):
            if _runnable(cfg, obj, p):
                cands.append((obj.name, i))
    return cands


def apply_activation(cfg: Config, cand: tuple[str, int]) -> StepEvent:
    name, idx = cand
    obj = cfg.objects[name]
    proc = obj.queue.pop(idx)
    obj.active = proc
    cfg.cogs[obj.cog].token = name
    return StepEvent("activate", name, cfg.elapsed)


# ---------------------------------------------------------------------------
# stability and the clock

@dataclass(frozen=True)
class Quiescence:
    kind: str  # "stable" | "terminated" | "deadlock"
    time: Optional[Fraction] = None


def classify_quiescent(cfg: Config) -> Quiescence:
    """Classify a configuration on which step() returns no rule.

    With the scan exhausted, every remaining active process is either parked
    on a job or genuinely stuck. Positive jobs admit a clock advance by the
    least remaining job time; the least is attained, so the advance is
    productive. No jobs and no processes means termination; anything else
    cannot progress at any time and is a deadlock.
    """
    times: list[Fraction] = []
    for obj in cfg.objects.values():
        if obj.active is None:
            continue
        head = obj.active.stmts[0] if obj.active.stmts else None
        if isinstance(head, Job):
            v = eval_pure(head.amount, obj.active.env, cfg, obj)
            if isinstance(v, Fraction) and v > 0:
                times.append(v / cfg.cogs[obj.cog].capacity)
                continue
        return Quiescence("deadlock")
    if times:
        return Quiescence("stable", min(times))
    if any(obj.queue for obj in cfg.objects.values()):
        return Quiescence("deadlock")
    return Quiescence("terminated")


@dataclass(frozen=True)
class StronglyStable:
    time: Fraction


@dataclass(frozen=True)
class StableNoJob:
    pass


@dataclass(frozen=True)
class NotStable:
    pass


def stability_time(cfg: Config):
    """Decide whether only the clock can move, and by how much.

    NotStable when some discrete rule still applies (probed on a copy, so the
    configuration is untouched). Otherwise StronglyStable(t) when pending jobs
    admit an advance by t, the least remaining time, which some job attains;
    StableNoJob when there is no job to wait for and the run is over, either
    complete or wedged.
    """
    probe = cfg.clone()
    if step(probe) is not None:
        return NotStable()
    q = classify_quiescent(cfg)
    if q.kind == "stable":
        return StronglyStable(q.time)
    return StableNoJob()


def tick(cfg: Config, t: Fraction) -> None:
    """Advance time: rewrite every pending job amount by t times its cog capacity."""
    assert t > 0
    completed = 0
    for obj in cfg.objects.values():
        if obj.active is None or not obj.active.stmts:
            continue
        head = obj.active.stmts[0]
        if isinstance(head, Job):
            v = eval_pure(head.amount, obj.active.env, cfg, obj)
            left = v - cfg.cogs[obj.cog].capacity * t
            assert left >= 0, "clock advanced past a job"
            obj.active.stmts[0] = Job(Num(left))
            if left == 0:
                completed += 1
    assert completed > 0, "clock advance completed no job"
    cfg.elapsed += t


# ---------------------------------------------------------------------------
# scheduling policies and the run loop

class FifoPolicy:
    """First object in creation order, oldest runnable process first."""

    def choose(self, candidates: tuple[tuple[str, int], ...]) -> tuple[str, int]:
        return candidates[0]


class SeededRandomPolicy:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose(self, candidates: tuple[tuple[str, int], ...]) -> tuple[str, int]:
        return self.rng.choice(list(candidates))


@dataclass
class RunResult:
    outcome: str
    elapsed: Fraction
    ticks: int
    steps: int
    config: Config


def run(
    cfg: Config,
    policy=None,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_ticks: int = DEFAULT_MAX_TICKS,
    trace: Optional[list] = None,
) -> RunResult:
    policy = policy or FifoPolicy()
    steps = 0
    ticks = 0
    while True:
        window = 0
        while True:
            r = step(cfg)
            if r is None:
                break
            if isinstance(r, NeedsChoice):
                r = apply_activation(cfg, policy.choose(r.candidates))
            if trace is not None:
                trace.append(r)
            steps += 1
            window += 1
            if window >= max_steps:
                return RunResult(ZENO_SUSPECTED, cfg.elapsed, ticks, steps, cfg)
        q = classify_quiescent(cfg)
        if q.kind == "terminated":
            return RunResult(TERMINATED, cfg.elapsed, ticks, steps, cfg)
        if q.kind == "deadlock":
            return RunResult(DEADLOCK, cfg.elapsed, ticks, steps, cfg)
        if ticks >= max_ticks:
            return RunResult(BUDGET_EXHAUSTED, cfg.elapsed, ticks, steps, cfg)
        tick(cfg, q.time)
        ticks += 1
        if trace is not None:
            trace.append(StepEvent("tick", None, cfg.elapsed))


def simulate(
    program: Program,
    bindings: Optional[dict[str, Fraction]] = None,
    policy=None,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_ticks: int = DEFAULT_MAX_TICKS,
    trace: Optional[list] = None,
) -> RunResult:
    return run(init_configuration(program, bindings), policy, max_steps, max_ticks, trace)


# ---------------------------------------------------------------------------
# exhaustive schedule exploration

@dataclass
class ExploreResult:
    results: list[RunResult]
    fork_events: int
    truncated: bool


def explore(
    program: Program,
    bindings: Optional[dict[str, Fraction]] = None,
    max_forks: int = 256,
    max_steps: int = DEFAULT_MAX_STEPS,
    max_ticks: int = DEFAULT_MAX_TICKS,
) -> ExploreResult:
    """Run every schedule, forking at each activation with several candidates.

    Forking only at activation covers all observable behaviours: the rest of
    the scan is deterministic, and any cross-cog interleaving it fixes can be
    reproduced by a later activation choice. The fork budget caps the number
    of multi-candidate choice points over the whole exploration; exceeding it
    returns a truncated result, which callers must treat as inconclusive.
    """
    out = ExploreResult([], 0, False)
    stack: list[tuple[Config, int, int, int]] = [
        (init_configuration(program, bindings), 0, 0, 0)
    ]
    while stack:
        cfg, window, ticks, steps = stack.pop()
        result = None
        while result is None:
            r = step(cfg)
            if r is None:
                q = classify_quiescent(cfg)
                if q.kind == "terminated":
                    result = RunResult(TERMINATED, cfg.elapsed, ticks, steps, cfg)
                elif q.kind == "deadlock":
                    result = RunResult(DEADLOCK, cfg.elapsed, ticks, steps, cfg)
                elif ticks >= max_ticks:
                    result = RunResult(BUDGET_EXHAUSTED, cfg.elapsed, ticks, steps, cfg)
                else:
                    tick(cfg, q.time)
                    ticks += 1
                    window = 0
            elif isinstance(r, NeedsChoice):
                cands = r.candidates
                if len(cands) > 1:
                    out.fork_events += 1
                    if out.fork_events > max_forks:
                        out.truncated = True
                        return out
                    for cand in cands[1:]:
                        child = cfg.clone()
                        apply_activation(child, cand)
                        stack.append((child, window + 1, ticks, steps + 1))
                apply_activation(cfg, cands[0])
                steps += 1
                window += 1
            else:
                steps += 1
                window += 1
                if window >= max_steps:
                    result = RunResult(ZENO_SUSPECTED, cfg.elapsed, ticks, steps, cfg)
        out.results.append(result)
    return out
