"""The labelled transition system over usages.

Actions are method names (on branch usages) and enum labels (on choice
usages). Recursive usages step through their one-level unfolding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .ast import Branch, Choice, Continuation, Rec, UVar, free_usage_vars


class OpenUsage(ValueError):
    """A usage with free recursion variables was given where a closed one is required."""


class NonContractive(ValueError):
    """``rec X.U`` whose body can unfold forever without reaching a branch."""


@dataclass(frozen=True, order=True)
class MethodAct:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class LabelAct:
    name: str

    def __str__(self) -> str:
        return self.name


UsageAction = MethodAct | LabelAct


def substitute(u: Continuation, var: str, repl: Continuation) -> Continuation:
    """``u[var := repl]`` for closed ``repl``, so no capture can occur."""
    if isinstance(u, UVar):
        return repl if u.name == var else u
    if isinstance(u, Rec):
        if u.var == var:
            return u
        return Rec(u.var, substitute(u.body, var, repl))
    if isinstance(u, Branch):
        return Branch(tuple((m, substitute(w, var, repl)) for m, w in u.arms))
    if isinstance(u, Choice):
        return Choice(tuple((l, substitute(w, var, repl)) for l, w in u.arms))
    return u


def is_contractive(u: Continuation) -> bool:
    """Every ``rec`` reaches a branch, choice or ``end`` before any variable."""
    if isinstance(u, Rec):
        head = u.body
        while isinstance(head, Rec):
            head = head.body
        if isinstance(head, UVar):
            return False
        return is_contractive(u.body)
    if isinstance(u, (Branch, Choice)):
        return all(is_contractive(w) for _, w in u.arms)
    return True


def _require_closed(u: Continuation) -> None:
    if free_usage_vars(u):
        raise OpenUsage(f"usage {u} has free variables {sorted(free_usage_vars(u))}")


def unfold(u: Continuation) -> Continuation:
    """One unfolding of a top-level ``rec``; the identity on anything else."""
    if isinstance(u, Rec):
        if isinstance(u.body, UVar) and u.body.name == u.var:
            raise NonContractive(f"rec {u.var}.{u.var} never unfolds to a branch")
        return substitute(u.body, u.var, u)
    return u


@lru_cache(maxsize=None)
def head_normal(u: Continuation) -> Continuation:
    """Unfold until the head is not a ``rec``."""
    _require_closed(u)
    seen = 0
    while isinstance(u, Rec):
        u = unfold(u)
        seen += 1
        if seen > 10_000:
            raise NonContractive(f"usage does not reach a branch: {u}")
    return u


def usage_step(u: Continuation, a: UsageAction) -> Continuation | None:
    """The successor of ``u`` under ``a``, or ``None`` if ``u`` cannot do ``a``.

    A method on a branch whose continuation is a choice returns the choice
    itself; the following label step resolves it.
    """
    h = head_normal(u)
    if isinstance(h, Branch) and isinstance(a, MethodAct):
        for m, w in h.arms:
            if m == a.name:
                return w
    elif isinstance(h, Choice) and isinstance(a, LabelAct):
        for l, w in h.arms:
            if l == a.name:
                return w
    return None


def available(u: Continuation) -> frozenset[UsageAction]:
    h = head_normal(u)
    if isinstance(h, Branch):
        return frozenset(MethodAct(m) for m, _ in h.arms)
    if isinstance(h, Choice):
        return frozenset(LabelAct(l) for l, _ in h.arms)
    return frozenset()


def successors(u: Continuation) -> list[tuple[UsageAction, Continuation]]:
    h = head_normal(u)
    if isinstance(h, Branch):
        return [(MethodAct(m), w) for m, w in h.arms]
    if isinstance(h, Choice):
        return [(LabelAct(l), w) for l, w in h.arms]
    return []


def terminated(u: Continuation) -> bool:
    """No transitions left, i.e. bisimilar to ``end``."""
    return not available(u)


def reachable(u: Continuation) -> set[Continuation]:
    """States reachable from ``u``, each in head-normal form."""
    start = head_normal(u)
    seen = {start}
    todo = [start]
    while todo:
        s = todo.pop()
        for _, t in successors(s):
            t = head_normal(t)
            if t not in seen:
                seen.add(t)
                todo.append(t)
    return seen


@lru_cache(maxsize=65536)
def bisimilar(u1: Continuation, u2: Continuation) -> bool:
    """Strong bisimilarity by partition refinement over the joint state space."""
    h1, h2 = head_normal(u1), head_normal(u2)
    if h1 == h2:
        return True
    states = sorted(reachable(h1) | reachable(h2), key=str)
    index = {s: i for i, s in enumerate(states)}
    edges = [
        [(a, index[head_normal(t)]) for a, t in successors(s)]
        for s in states
    ]
    # initial partition: same set of enabled actions
    block = {}
    sig0 = [frozenset(a for a, _ in es) for es in edges]
    ids: dict[frozenset, int] = {}
    for i, sig in enumerate(sig0):
        block[i] = ids.setdefault(sig, len(ids))
    while True:
        sigs: dict[tuple, int] = {}
        new_block = {}
        for i, es in enumerate(edges):
            sig = (block[i], frozenset((a, block[j]) for a, j in es))
            new_block[i] = sigs.setdefault(sig, len(sigs))
        if len(sigs) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    return block[index[h1]] == block[index[h2]]
