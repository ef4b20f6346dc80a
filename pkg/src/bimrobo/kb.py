"""Construction robot knowledge base: task specifications and the robot skill database."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ._io import InputError, context, data_path, load_yaml_validated

DEFAULT_KB_PATH = data_path("default_kb.yaml")


class KBError(InputError):
    pass


class SpecNotFound(KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0])


class SemanticType(str, enum.Enum):
    WORLD_POSE = "world_pose"
    LOCAL_POINT = "local_point"
    METRIC_MAP = "metric_map"
    TARGET_ELEMENT_POSE = "target_element_pose"
    SCALAR_PARAM = "scalar_param"


class Source(str, enum.Enum):
    WORLD_OBJECT_POSE = "world_object_pose"
    ELEMENT_LOCAL_POINT = "element_local_point"
    ELEMENT_TARGET_POSE = "element_target_pose"
    USER_PARAM = "user_param"
    GENERATED_MAP = "generated_map"


# which binding sources may feed which argument types
_COMPATIBLE = {
    Source.WORLD_OBJECT_POSE: {SemanticType.WORLD_POSE},
    Source.ELEMENT_LOCAL_POINT: {SemanticType.LOCAL_POINT},
    Source.ELEMENT_TARGET_POSE: {SemanticType.TARGET_ELEMENT_POSE, SemanticType.WORLD_POSE},
    Source.USER_PARAM: set(SemanticType),
    Source.GENERATED_MAP: {SemanticType.METRIC_MAP},
}

_FIELDS = {
    Source.WORLD_OBJECT_POSE: {"category", "tag"},
    Source.ELEMENT_LOCAL_POINT: {"point_name"},
    Source.ELEMENT_TARGET_POSE: set(),
    Source.USER_PARAM: {"param_name"},
    Source.GENERATED_MAP: set(),
}


@dataclass(frozen=True)
class ArgSpec:
    arg_name: str
    semantic_type: SemanticType


@dataclass(frozen=True)
class SkillDef:
    skill_id: str
    name: str
    input_args: tuple[ArgSpec, ...]
    required_capabilities: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        names = [a.arg_name for a in self.input_args]
        if len(set(names)) != len(names):
            raise ValueError(f"skill {self.skill_id}: duplicate input argument names")

    @property
    def arg_names(self) -> tuple[str, ...]:
        return tuple(a.arg_name for a in self.input_args)


@dataclass(frozen=True)
class BindingExpr:
    """Where a skill argument's value comes from. Only the fields of ``source`` are set."""

    source: Source
    category: str | None = None
    tag: str | None = None
    point_name: str | None = None
    param_name: str | None = None

    def __post_init__(self) -> None:
        need = _FIELDS[self.source]
        for name in ("category", "tag", "point_name", "param_name"):
            present = getattr(self, name) is not None
            if present != (name in need):
                state = "missing" if name in need else "not allowed"
                raise ValueError(f"binding {self.source.value}: field {name!r} {state}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "BindingExpr":
        return cls(
            Source(d["source"]),
            category=d.get("category"),
            tag=d.get("tag"),
            point_name=d.get("point"),
            param_name=d.get("param"),
        )

    def describe(self) -> str:
        s = self.source
        if s is Source.WORLD_OBJECT_POSE:
            return f"world_object_pose({self.category}, {self.tag!r})"
        if s is Source.ELEMENT_LOCAL_POINT:
            return f"element_local_point({self.point_name!r})"
        if s is Source.USER_PARAM:
            return f"user_param({self.param_name!r})"
        return s.value


@dataclass(frozen=True)
class ActionDef:
    action_name: str
    skill_id: str
    input_bindings: Mapping[str, BindingExpr]


@dataclass(frozen=True)
class TaskSpecification:
    spec_id: str
    actions: tuple[ActionDef, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.actions:
            raise ValueError(f"task specification {self.spec_id} has no actions")


@dataclass(frozen=True)
class KnowledgeBase:
    specs: Mapping[str, TaskSpecification] = field(default_factory=dict)
    skills: Mapping[str, SkillDef] = field(default_factory=dict)


@dataclass(frozen=True)
class ResolvedSkills:
    """Ordered (action, skill) pairs plus the union of required capabilities."""

    pairs: tuple[tuple[ActionDef, SkillDef], ...]
    required_capabilities: frozenset[str]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def load_kb(paths: str | os.PathLike | Iterable[str | os.PathLike] | None = None) -> KnowledgeBase:
    """Load one or more KB files and check cross references.

    ``None`` (or the string ``"default"``) loads the shipped default KB.
    """
    if paths is None or paths == "default":
        paths = [DEFAULT_KB_PATH]
    elif isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    specs: dict[str, TaskSpecification] = {}
    skills: dict[str, SkillDef] = {}
    raw_actions: list[tuple[str, dict, ActionDef, str]] = []

    for path in paths:
        path = DEFAULT_KB_PATH if path == "default" else os.fspath(path)
        data, lines = load_yaml_validated(path, "kb")
        for i, raw in enumerate(data.get("skills", [])):
            where = context(path, lines, ("skills", i))
            if raw["skill_id"] in skills:
                raise KBError(f"{where}: duplicate skill_id {raw['skill_id']!r}")
            try:
                skills[raw["skill_id"]] = SkillDef(
                    skill_id=raw["skill_id"],
                    name=raw["name"],
                    input_args=tuple(ArgSpec(a["arg_name"], SemanticType(a["semantic_type"]))
                                     for a in raw["input_args"]),
                    required_capabilities=frozenset(raw.get("required_capabilities", ())),
                )
            except ValueError as exc:
                raise KBError(f"{where}: {exc}") from exc
        for i, raw in enumerate(data.get("specs", [])):
            where = context(path, lines, ("specs", i))
            if raw["spec_id"] in specs:
                raise KBError(f"{where}: duplicate spec_id {raw['spec_id']!r}")
            actions = []
            for j, ra in enumerate(raw["actions"]):
                awhere = context(path, lines, ("specs", i, "actions", j))
                try:
                    bindings = {k: BindingExpr.from_dict(v) for k, v in ra["input_bindings"].items()}
                except ValueError as exc:
                    raise KBError(f"{awhere}: {exc}") from exc
                action = ActionDef(ra["action_name"], ra["skill_id"], bindings)
                actions.append(action)
                raw_actions.append((raw["spec_id"], ra, action, awhere))
            specs[raw["spec_id"]] = TaskSpecification(raw["spec_id"], tuple(actions), raw.get("name", ""))

    # cross-file checks run after everything is loaded, so file order does not matter
    for spec_id, _, action, where in sorted(raw_actions, key=lambda r: (r[0], r[3])):
        skill = skills.get(action.skill_id)
        if skill is None:
            raise KBError(f"{where}: action {action.action_name!r} references undefined skill "
                          f"{action.skill_id!r}")
        bound, wanted = set(action.input_bindings), set(skill.arg_names)
        if wanted - bound:
            raise KBError(f"{where}: unbound skill argument(s) {sorted(wanted - bound)} "
                          f"of {skill.skill_id}")
        if bound - wanted:
            raise KBError(f"{where}: binding(s) {sorted(bound - wanted)} are not arguments "
                          f"of {skill.skill_id}")
        for arg in skill.input_args:
            b = action.input_bindings[arg.arg_name]
            if arg.semantic_type not in _COMPATIBLE[b.source]:
                raise KBError(f"{where}: {b.source.value} cannot bind {arg.arg_name} "
                              f"({arg.semantic_type.value})")
    return KnowledgeBase(specs=specs, skills=skills)


def lookup_spec(kb: KnowledgeBase, spec_id: str) -> TaskSpecification:
    try:
        return kb.specs[spec_id]
    except KeyError:
        known = ", ".join(sorted(kb.specs)) or "<none>"
        raise SpecNotFound(f"unknown task specification {spec_id!r}; known: {known}") from None


def resolve_skills(kb: KnowledgeBase, spec: TaskSpecification) -> ResolvedSkills:
    pairs = tuple((a, kb.skills[a.skill_id]) for a in spec.actions)
    caps: frozenset[str] = frozenset().union(*(s.required_capabilities for _, s in pairs))
    return ResolvedSkills(pairs, caps)


def required_capabilities(kb: KnowledgeBase, spec_ids: Sequence[str]) -> frozenset[str]:
    caps: frozenset[str] = frozenset()
    for sid in spec_ids:
        caps |= resolve_skills(kb, lookup_spec(kb, sid)).required_capabilities
    return caps
