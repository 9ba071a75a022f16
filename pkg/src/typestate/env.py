"""Typing environments: the checker's abstract heap.

A :class:`TypeEnv` maps object references to an object type (class plus
current usage) and a field environment of field-type tags. Environments are
values: every update returns a new one, so the checker can keep snapshots
for loops and recursive calls and compare them later.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .ast import ClassDecl, Continuation, FieldDecl, TypeAnnot, ref_name
from .usage import LabelAct, MethodAct, bisimilar, terminated, usage_step

# ---------------------------------------------------------------------------
# Field-type tags
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Base:
    """``basetype t`` for t in bool, void, float and the null type."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BaseEnum:
    enum: str

    def __str__(self) -> str:
        return self.enum


@dataclass(frozen=True)
class Reference:
    ref: int

    def __str__(self) -> str:
        return ref_name(self.ref)


BASE_BOOL = Base("bool")
BASE_VOID = Base("void")
BASE_FLOAT = Base("float")
BASE_BOT = Base("⊥")

FieldType = Union[Base, BaseEnum, Reference]

# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectType:
    ref: int
    cls: str
    usage: Continuation

    def __str__(self) -> str:
        return f"{ref_name(self.ref)}[{self.cls}, {self.usage}]"


@dataclass(frozen=True)
class Prim:
    """void, bool, float or ⊥."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class EnumType:
    enum: str

    def __str__(self) -> str:
        return self.enum


@dataclass(frozen=True)
class EnumLink:
    """``L link o``: an enum value whose label resolves ``o``'s choice."""

    enum: str
    ref: int

    def __str__(self) -> str:
        return f"{self.enum} link {ref_name(self.ref)}"


VOID_T = Prim("void")
BOOL_T = Prim("bool")
FLOAT_T = Prim("float")
BOT_T = Prim("⊥")

ValueType = Union[ObjectType, Prim, EnumType, EnumLink]


class DanglingReference(LookupError):
    pass


class LinkNotStorable(TypeError):
    pass


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Binding:
    type: ObjectType
    fields: tuple[tuple[str, FieldType], ...]

    def field(self, name: str) -> FieldType | None:
        for f, z in self.fields:
            if f == name:
                return z
        return None

    def with_field(self, name: str, z: FieldType) -> "Binding":
        return Binding(self.type, tuple((f, z if f == name else old) for f, old in self.fields))

    def with_usage(self, usage: Continuation) -> "Binding":
        t = self.type
        return Binding(ObjectType(t.ref, t.cls, usage), self.fields)


class TypeEnv(Mapping[int, Binding]):
    """Persistent map from object reference to :class:`Binding`."""

    __slots__ = ("_map",)

    def __init__(self, bindings: Mapping[int, Binding] | Iterable[tuple[int, Binding]] = ()):
        self._map = dict(bindings)
        for ref, b in self._map.items():
            if b.type.ref != ref:
                raise ValueError(f"binding for {ref_name(ref)} carries type of {ref_name(b.type.ref)}")

    def __getitem__(self, ref: int) -> Binding:
        return self._map[ref]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._map))

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypeEnv) and self._map == other._map

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._map.items())))

    def __repr__(self) -> str:
        return f"TypeEnv({render_env(self)})"

    def fresh_ref(self) -> int:
        return max(self._map, default=-1) + 1

    def set(self, ref: int, binding: Binding) -> "TypeEnv":
        new = dict(self._map)
        new[ref] = binding
        return TypeEnv(new)

    def with_usage(self, ref: int, usage: Continuation) -> "TypeEnv":
        return self.set(ref, self._map[ref].with_usage(usage))

    def with_field(self, ref: int, name: str, z: FieldType) -> "TypeEnv":
        return self.set(ref, self._map[ref].with_field(name, z))

    def usage(self, ref: int) -> Continuation:
        return self._map[ref].type.usage


def init_types(fields: Iterable[FieldDecl]) -> tuple[tuple[str, FieldType], ...]:
    """Initial field environment of a fresh object: class fields start null."""
    out = []
    for f in fields:
        t = f.type
        if t.kind == "class":
            z: FieldType = BASE_BOT
        elif t.kind == "enum":
            z = BaseEnum(t.name)
        else:
            z = Base(t.kind)
        out.append((f.name, z))
    return tuple(out)


def new_binding(ref: int, cls: ClassDecl) -> Binding:
    return Binding(ObjectType(ref, cls.name, cls.usage), init_types(cls.fields))


def agree(t: TypeAnnot, T: ValueType) -> bool:
    if t.kind == "class":
        return T == BOT_T or (isinstance(T, ObjectType) and T.cls == t.name)
    if t.kind == "enum":
        return isinstance(T, EnumType) and T.enum == t.name
    return isinstance(T, Prim) and T.name == t.kind


def returns(t: TypeAnnot, T: ValueType) -> bool:
    if agree(t, T):
        return True
    return t.kind == "enum" and isinstance(T, EnumLink) and T.enum == t.name


def get_type(z: FieldType, env: TypeEnv) -> ValueType:
    if isinstance(z, Reference):
        if z.ref not in env:
            raise DanglingReference(f"field refers to {ref_name(z.ref)}, which is not in the environment")
        return env[z.ref].type
    if isinstance(z, BaseEnum):
        return EnumType(z.enum)
    return Prim(z.name)


def vtype(T: ValueType) -> FieldType:
    if isinstance(T, ObjectType):
        return Reference(T.ref)
    if isinstance(T, EnumLink):
        raise LinkNotStorable(f"{T} cannot be stored in a field")
    if isinstance(T, EnumType):
        return BaseEnum(T.enum)
    return Base(T.name)


def term(env: TypeEnv) -> bool:
    return all(terminated(env.usage(o)) for o in env)


def types_equal(a: ValueType, b: ValueType) -> bool:
    """Equality of value types with object usages compared up to bisimilarity."""
    if isinstance(a, ObjectType) and isinstance(b, ObjectType):
        return a.ref == b.ref and a.cls == b.cls and bisimilar(a.usage, b.usage)
    return a == b


def _binding_equal(b1: Binding, b2: Binding) -> bool:
    return b1.fields == b2.fields and types_equal(b1.type, b2.type)


def env_equal(g1: TypeEnv, g2: TypeEnv) -> bool:
    if g1 is g2:
        return True
    if set(g1) != set(g2):
        return False
    return all(_binding_equal(g1[o], g2[o]) for o in g1)


# ---------------------------------------------------------------------------
# Environment transitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Eps:
    def __str__(self) -> str:
        return "eps"


@dataclass(frozen=True)
class MethodLabel:
    ref: int
    method: str

    def __str__(self) -> str:
        return f"{ref_name(self.ref)}.{self.method}"


@dataclass(frozen=True)
class ChoiceLabel:
    ref: int
    label: str

    def __str__(self) -> str:
        return f"{ref_name(self.ref)}#{self.label}"


EPS = Eps()
EnvLabel = Union[Eps, MethodLabel, ChoiceLabel]


def _differing(g: TypeEnv, g2: TypeEnv) -> list[int]:
    return [o for o in g if not _binding_equal(g[o], g2[o])]


def env_step_check(
    g: TypeEnv,
    label: EnvLabel,
    g2: TypeEnv,
    classes: Mapping[str, ClassDecl] | None = None,
) -> bool:
    """Is ``g --label--> g2`` derivable by one environment transition rule?

    ``classes`` is needed to verify the shape of a freshly allocated object;
    without it the new binding is only checked for an unstepped usage slot.
    """
    if isinstance(label, (MethodLabel, ChoiceLabel)):
        if set(g) != set(g2) or label.ref not in g:
            return False
        act = MethodAct(label.method) if isinstance(label, MethodLabel) else LabelAct(label.label)
        nxt = usage_step(g.usage(label.ref), act)
        if nxt is None:
            return False
        b, b2 = g[label.ref], g2[label.ref]
        if b.fields != b2.fields or b.type.cls != b2.type.cls or not bisimilar(nxt, b2.type.usage):
            return False
        return all(_binding_equal(g[o], g2[o]) for o in g if o != label.ref)

    # epsilon: empty, update or new
    if set(g) == set(g2):
        diff = _differing(g, g2)
        if not diff:
            return True
        if len(diff) != 1:
            return False
        b, b2 = g[diff[0]], g2[diff[0]]
        if not types_equal(b.type, b2.type):
            return False
        changed = [f for (f, z), (_, z2) in zip(b.fields, b2.fields) if z != z2]
        return len(changed) == 1 and [f for f, _ in b.fields] == [f for f, _ in b2.fields]

    extra = set(g2) - set(g)
    if not set(g) <= set(g2) or len(extra) != 1:
        return False
    new = extra.pop()
    nb = g2[new]
    if classes is not None:
        cls = classes.get(nb.type.cls)
        if cls is None or nb != new_binding(new, cls):
            return False
    # exactly one existing field now points at the new object
    repointed = []
    for o in g:
        b, b2 = g[o], g2[o]
        if not types_equal(b.type, b2.type):
            return False
        for (f, z), (f2, z2) in zip(b.fields, b2.fields):
            if f != f2:
                return False
            if z != z2:
                repointed.append((o, f, z2))
    return len(repointed) == 1 and repointed[0][2] == Reference(new)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_binding(ref: int, b: Binding) -> str:
    fields = ", ".join(f"{f} ↦ {z}" for f, z in b.fields)
    return f"{ref_name(ref)} ↦ ({b.type.cls}[{b.type.usage}], {{{fields}}})"


def render_env(env: TypeEnv) -> str:
    return "{" + ", ".join(render_binding(o, env[o]) for o in env) + "}"


def render_env_lines(env: TypeEnv) -> str:
    return "\n".join(render_binding(o, env[o]) for o in env)
