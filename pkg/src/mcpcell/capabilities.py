"""Capability declarations and their rendering into MCP tool descriptors.

A capability is the implementation-independent declaration (description,
typed properties, constraints); the bound skill names how it executes:
locally on the server for virtual effects, or through a device-bus binding
for physical ones. The natural-language tool description produced here is
the only capability model the planner ever sees, so everything a caller
must know (units, bounds, ordering rules) has to be written into it.

Declarations live in a YAML file (one document per server); that file is
the single source for the servers and for generated docs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .jsonrpc import ToolDescriptor

TOOL_NAME_RE = r"[a-z][a-z0-9_]*"

SEMANTIC_TYPES = ("number", "integer", "string", "boolean")

_PY_TYPES = {
    "number": (int, float),
    "integer": int,
    "string": str,
    "boolean": bool,
}


class RegistrationError(Exception):
    pass


class ValidationError(Exception):
    pass


@dataclass
class PropertyDecl:
    name: str
    semantic_type: str = "string"
    unit: Optional[str] = None
    required: bool = True
    doc: str = ""


@dataclass
class PropertyConstraint:
    """A predicate checkable from one argument map alone.

    violation_category feeds the machine-readable error payload; member_of
    violations default to it so callers can tell "not supported" apart from
    "out of range".
    """

    property: str
    predicate: str  # "max" | "min" | "member_of"
    bound: Optional[float] = None
    values: Optional[list] = None
    message_template: str = ""
    violation_category: str = "constraint_violation"

    def sentence(self, unit: Optional[str]) -> str:
        suffix = f" {unit}" if unit else ""
        if self.predicate == "max":
            return f"{self.property} ≤ {_fmt(self.bound)}{suffix}"
        if self.predicate == "min":
            return f"{self.property} ≥ {_fmt(self.bound)}{suffix}"
        listed = ", ".join(_fmt(v) for v in self.values or [])
        return f"{self.property} ∈ {{{listed}}}{suffix}"

    def check(self, value, unit: Optional[str] = None) -> Optional[str]:
        """Return a filled violation message, or None when satisfied."""
        if self.predicate == "max":
            ok = _is_number(value) and value <= self.bound
        elif self.predicate == "min":
            ok = _is_number(value) and value >= self.bound
        elif self.predicate == "member_of":
            ok = value in (self.values or [])
        else:
            raise ValidationError(f"unknown predicate {self.predicate!r}")
        if ok:
            return None
        template = self.message_template or self.sentence(unit) + " violated (got {value})"
        return template.format(
            property=self.property,
            value=value,
            bound=_fmt(self.bound) if self.bound is not None else "",
            set=", ".join(_fmt(v) for v in self.values or []),
            unit=unit or "",
        )


@dataclass
class Skill:
    """How a capability executes: a local function for virtual effects, or
    a device-bus binding for physical ones."""

    kind: str  # "direct" | "gateway"
    entrypoint: Optional[str] = None  # direct: registered function name
    bus_nodes: dict = field(default_factory=dict)  # gateway: role -> bus address
    parameters: list = field(default_factory=list)


@dataclass
class CapabilityDecl:
    name: str
    description: str
    effect_kind: str  # "virtual" | "physical"
    properties: list = field(default_factory=list)
    property_constraints: list = field(default_factory=list)
    transition_constraints: list = field(default_factory=list)
    descriptive_only: list = field(default_factory=list)
    skill: Optional[Skill] = None

    def property_map(self) -> dict:
        return {p.name: p for p in self.properties}

    def validate(self) -> None:
        import re

        if not re.fullmatch(TOOL_NAME_RE, self.name):
            raise ValidationError(f"capability name {self.name!r} is not a valid tool name")
        if not self.description.strip():
            raise ValidationError(f"{self.name}: description must be non-empty")
        if self.effect_kind not in ("virtual", "physical"):
            raise ValidationError(f"{self.name}: effect_kind must be virtual or physical")
        seen = set()
        for prop in self.properties:
            if prop.name in seen:
                raise ValidationError(f"{self.name}: duplicate property {prop.name!r}")
            seen.add(prop.name)
            if prop.semantic_type not in SEMANTIC_TYPES:
                raise ValidationError(
                    f"{self.name}.{prop.name}: unknown type {prop.semantic_type!r}"
                )
        for constraint in self.property_constraints:
            if constraint.property not in seen:
                raise ValidationError(
                    f"{self.name}: constraint references unknown property "
                    f"{constraint.property!r}"
                )
        if self.skill is not None:
            if self.effect_kind == "virtual" and self.skill.kind != "direct":
                raise ValidationError(f"{self.name}: virtual effects need a direct skill")
            if self.effect_kind == "physical" and self.skill.kind != "gateway":
                raise ValidationError(f"{self.name}: physical effects need a gateway skill")
            missing = [
                p.name
                for p in self.properties
                if p.name not in self.skill.parameters and p.name not in self.descriptive_only
            ]
            if missing:
                raise ValidationError(
                    f"{self.name}: properties {missing} neither skill parameters "
                    "nor descriptive-only"
                )


@dataclass
class Violation:
    property: str
    category: str
    message: str
    supported: Optional[list] = None


def _fmt(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def render_tool(cap: CapabilityDecl) -> ToolDescriptor:
    """Deterministically render a capability into its MCP advertisement.

    The description concatenates the capability text, per-property docs with
    units, property-constraint sentences, and the transition-constraint
    sentences verbatim under a fixed heading.
    """
    parts = [cap.description.strip()]

    if cap.properties:
        lines = ["Arguments:"]
        for prop in cap.properties:
            qualifiers = [prop.semantic_type]
            if prop.unit:
                qualifiers.append(prop.unit)
            if not prop.required:
                qualifiers.append("optional")
            doc = f" {prop.doc.strip()}" if prop.doc.strip() else ""
            lines.append(f"- {prop.name} ({', '.join(qualifiers)}):{doc}")
        parts.append("\n".join(lines))

    if cap.property_constraints:
        units = {p.name: p.unit for p in cap.properties}
        lines = ["Constraints:"]
        for constraint in cap.property_constraints:
            lines.append(f"- {constraint.sentence(units.get(constraint.property))}")
        parts.append("\n".join(lines))

    if cap.transition_constraints:
        lines = ["Usage constraints:"]
        for sentence in cap.transition_constraints:
            lines.append(f"- {sentence}")
        parts.append("\n".join(lines))

    schema_props = {}
    required = []
    for prop in cap.properties:
        entry: dict = {"type": prop.semantic_type}
        if prop.doc.strip():
            entry["description"] = prop.doc.strip()
        if prop.unit:
            entry["unit"] = prop.unit
        schema_props[prop.name] = entry
        if prop.required:
            required.append(prop.name)

    return ToolDescriptor(
        name=cap.name,
        description="\n\n".join(parts),
        input_schema={"type": "object", "properties": schema_props, "required": required},
    )


def check_property_constraints(cap: CapabilityDecl, args: dict) -> list[Violation]:
    """Evaluate every property constraint against one argument map.

    Returns all violations (empty list means ok); missing required
    properties become violations rather than crashes, and transition
    constraints never participate. Pure: neither cap nor args is touched.
    """
    violations: list[Violation] = []
    props = cap.property_map()

    for prop in cap.properties:
        if prop.required and prop.name not in args:
            violations.append(
                Violation(prop.name, "missing_argument", f"missing required property {prop.name}")
            )
        elif prop.name in args:
            expected = _PY_TYPES[prop.semantic_type]
            value = args[prop.name]
            if isinstance(value, bool) and prop.semantic_type != "boolean":
                violations.append(
                    Violation(prop.name, "invalid_type", f"{prop.name} must be {prop.semantic_type}")
                )
            elif not isinstance(value, expected):
                violations.append(
                    Violation(prop.name, "invalid_type", f"{prop.name} must be {prop.semantic_type}")
                )

    flagged = {v.property for v in violations}
    for constraint in cap.property_constraints:
        if constraint.property in flagged or constraint.property not in args:
            continue
        message = constraint.check(args[constraint.property], props[constraint.property].unit)
        if message is not None:
            violations.append(
                Violation(
                    constraint.property,
                    constraint.violation_category,
                    message,
                    supported=list(constraint.values) if constraint.values else None,
                )
            )
    return violations


class CapabilityRegistry:
    """Write-at-startup, read-many lookup of capability declarations."""

    def __init__(self):
        self._caps: dict[str, CapabilityDecl] = {}

    def register(self, cap: CapabilityDecl) -> str:
        cap.validate()
        if cap.name in self._caps:
            raise RegistrationError(f"capability {cap.name!r} already registered")
        self._caps[cap.name] = cap
        return cap.name

    def get(self, name: str) -> CapabilityDecl:
        try:
            return self._caps[name]
        except KeyError:
            raise KeyError(f"no capability named {name!r}") from None

    def names(self) -> list[str]:
        return list(self._caps)

    def __iter__(self):
        return iter(self._caps.values())

    def __len__(self) -> int:
        return len(self._caps)


# --- config file loading ----------------------------------------------------


def _parse_property(raw: dict) -> PropertyDecl:
    return PropertyDecl(
        name=raw["name"],
        semantic_type=raw.get("type", "string"),
        unit=raw.get("unit"),
        required=bool(raw.get("required", True)),
        doc=raw.get("doc", ""),
    )


def _parse_constraint(raw: dict) -> PropertyConstraint:
    predicate = raw["predicate"]
    if predicate not in ("max", "min", "member_of"):
        raise ValidationError(f"unknown predicate {predicate!r}")
    return PropertyConstraint(
        property=raw["property"],
        predicate=predicate,
        bound=raw.get("bound"),
        values=list(raw["values"]) if "values" in raw else None,
        message_template=raw.get("message", ""),
        violation_category=raw.get("category", "constraint_violation"),
    )


def _parse_skill(raw: Optional[dict]) -> Optional[Skill]:
    if raw is None:
        return None
    return Skill(
        kind=raw["kind"],
        entrypoint=raw.get("entrypoint"),
        bus_nodes=dict(raw.get("bus_nodes", {})),
        parameters=list(raw.get("parameters", [])),
    )


def parse_capability(raw: dict) -> CapabilityDecl:
    cap = CapabilityDecl(
        name=raw["name"],
        description=raw["description"],
        effect_kind=raw["effect_kind"],
        properties=[_parse_property(p) for p in raw.get("properties", [])],
        property_constraints=[_parse_constraint(c) for c in raw.get("property_constraints", [])],
        transition_constraints=list(raw.get("transition_constraints", [])),
        descriptive_only=list(raw.get("descriptive_only", [])),
        skill=_parse_skill(raw.get("skill")),
    )
    cap.validate()
    return cap


def _parse_documents(handle) -> dict[str, list[CapabilityDecl]]:
    documents = [d for d in yaml.safe_load_all(handle) if d is not None]
    servers: dict[str, list[CapabilityDecl]] = {}
    for doc in documents:
        if "server" not in doc:
            raise ValidationError("capability document missing 'server'")
        name = doc["server"]
        if name in servers:
            raise ValidationError(f"duplicate server document {name!r}")
        servers[name] = [parse_capability(c) for c in doc.get("capabilities", [])]
    return servers


def load_capability_file(path) -> dict[str, list[CapabilityDecl]]:
    """Parse the multi-document capability config: one document per server,
    each {server: name, capabilities: [...]}. Returns server -> decls."""
    with open(path, "r", encoding="utf-8") as handle:
        return _parse_documents(handle)


def builtin_capabilities() -> dict[str, list[CapabilityDecl]]:
    """The declarations shipped with the package (config/capabilities.yaml)."""
    from importlib.resources import files

    resource = files("mcpcell").joinpath("config/capabilities.yaml")
    with resource.open("r", encoding="utf-8") as handle:
        return _parse_documents(handle)
