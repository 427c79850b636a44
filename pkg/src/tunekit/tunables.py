"""Tunable parameter declarations and the unit-hypercube embedding used by optimizers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

KINDS = ("integer", "real", "boolean", "categorical")
SCALES = ("linear", "log")

U32_MAX = 2**32 - 1


class SpecError(ValueError):
    """Raised for a malformed component declaration or search-space document."""


class AssignmentError(ValueError):
    """Raised when an operation needs a valid assignment and did not get one."""

    def __init__(self, issues: Sequence["ValidationIssue"]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class ValidationIssue:
    name: str
    code: str  # "unknown parameter" | "missing parameter" | "out of bounds" | "kind mismatch"
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.name}: {self.code}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class TunableDef:
    name: str
    param_id: int
    kind: str
    lower: float | int | None = None
    upper: float | int | None = None
    scale: str = "linear"
    categories: tuple[str, ...] = ()
    default: Any = None

    def __post_init__(self) -> None:
        if not self.name or not self.name.isidentifier():
            raise SpecError(f"tunable name {self.name!r} is not an identifier")
        if not (0 <= self.param_id <= U32_MAX):
            raise SpecError(f"{self.name}: param_id outside u32")
        if self.kind not in KINDS:
            raise SpecError(f"{self.name}: unknown kind {self.kind!r}")
        if self.scale not in SCALES:
            raise SpecError(f"{self.name}: unknown scale {self.scale!r}")
        if self.kind in ("integer", "real"):
            if self.lower is None or self.upper is None:
                raise SpecError(f"{self.name}: numeric kinds need lower and upper")
            if self.kind == "integer" and not (_is_int(self.lower) and _is_int(self.upper)):
                raise SpecError(f"{self.name}: integer bounds must be integers")
            if self.lower > self.upper:
                raise SpecError(f"{self.name}: lower > upper")
            if self.scale == "log" and self.lower <= 0:
                raise SpecError(f"{self.name}: log scale requires lower > 0")
        elif self.scale == "log":
            raise SpecError(f"{self.name}: log scale only applies to numeric kinds")
        if self.kind == "categorical":
            object.__setattr__(self, "categories", tuple(self.categories))
            if not self.categories:
                raise SpecError(f"{self.name}: categorical needs at least one category")
            if len(set(self.categories)) != len(self.categories):
                raise SpecError(f"{self.name}: duplicate categories")
        if self.default is None:
            raise SpecError(f"{self.name}: missing default")
        issue = self.check(self.default)
        if issue is not None:
            raise SpecError(f"{self.name}: invalid default ({issue.code})")

    def check(self, value: Any) -> ValidationIssue | None:
        """Return the first problem with ``value`` for this tunable, or None."""
        if self.kind == "integer":
            if not _is_int(value):
                return ValidationIssue(self.name, "kind mismatch", f"expected integer, got {value!r}")
        elif self.kind == "real":
            if not _is_number(value) or not math.isfinite(value):
                return ValidationIssue(self.name, "kind mismatch", f"expected real, got {value!r}")
        elif self.kind == "boolean":
            if not isinstance(value, bool):
                return ValidationIssue(self.name, "kind mismatch", f"expected boolean, got {value!r}")
            return None
        else:
            if not isinstance(value, str):
                return ValidationIssue(self.name, "kind mismatch", f"expected category, got {value!r}")
            if value not in self.categories:
                return ValidationIssue(self.name, "out of bounds", f"{value!r} not in {list(self.categories)}")
            return None
        if not (self.lower <= value <= self.upper):
            return ValidationIssue(self.name, "out of bounds", f"{value} not in [{self.lower}, {self.upper}]")
        return None

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {"name": self.name, "param_id": self.param_id, "kind": self.kind}
        if self.kind in ("integer", "real"):
            doc.update(lower=self.lower, upper=self.upper, scale=self.scale)
        if self.kind == "categorical":
            doc["categories"] = list(self.categories)
        doc["default"] = self.default
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "TunableDef":
        try:
            kind = doc["kind"]
            lower, upper, default = doc.get("lower"), doc.get("upper"), doc["default"]
            if kind == "real":
                lower = None if lower is None else float(lower)
                upper = None if upper is None else float(upper)
                default = float(default) if _is_number(default) else default
            return cls(
                name=doc["name"],
                param_id=int(doc["param_id"]),
                kind=kind,
                lower=lower,
                upper=upper,
                scale=doc.get("scale") or "linear",
                categories=tuple(doc.get("categories") or ()),
                default=default,
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed tunable entry {dict(doc)!r}: {exc}") from exc


@dataclass(frozen=True)
class MetricDef:
    metric_id: int
    name: str
    unit: str = ""


@dataclass(frozen=True)
class ComponentSpec:
    component_id: int
    name: str
    tunables: tuple[TunableDef, ...]
    metrics: tuple[MetricDef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tunables", tuple(self.tunables))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not (0 <= self.component_id <= U32_MAX):
            raise SpecError("component_id outside u32")
        if not self.name or not self.name.isidentifier():
            raise SpecError(f"component name {self.name!r} is not an identifier")
        _require_unique([t.name for t in self.tunables], "tunable name")
        _require_unique([t.param_id for t in self.tunables], "param_id")
        _require_unique([m.metric_id for m in self.metrics], "metric_id")
        _require_unique([m.name for m in self.metrics], "metric name")

    @property
    def dim(self) -> int:
        return len(self.tunables)

    def tunable(self, name: str) -> TunableDef:
        for t in self.tunables:
            if t.name == name:
                return t
        raise KeyError(name)

    def by_param_id(self, param_id: int) -> TunableDef:
        for t in self.tunables:
            if t.param_id == param_id:
                return t
        raise KeyError(param_id)

    def metric(self, name: str) -> MetricDef:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def metric_by_id(self, metric_id: int) -> MetricDef:
        for m in self.metrics:
            if m.metric_id == metric_id:
                return m
        raise KeyError(metric_id)

    def defaults(self) -> "TunableAssignment":
        return TunableAssignment(self.component_id, {t.name: t.default for t in self.tunables})

    def to_doc(self) -> dict:
        return {
            "component_id": self.component_id,
            "name": self.name,
            "tunables": [t.to_doc() for t in self.tunables],
            "metrics": [{"metric_id": m.metric_id, "name": m.name, "unit": m.unit} for m in self.metrics],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"))

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "ComponentSpec":
        if not isinstance(doc, Mapping):
            raise SpecError("search-space document must be an object")
        try:
            return cls(
                component_id=int(doc["component_id"]),
                name=doc["name"],
                tunables=tuple(TunableDef.from_doc(t) for t in doc["tunables"]),
                metrics=tuple(
                    MetricDef(int(m["metric_id"]), m["name"], m.get("unit", "")) for m in doc.get("metrics", ())
                ),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed search-space document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str | bytes) -> "ComponentSpec":
        try:
            doc = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SpecError(f"search-space document is not valid JSON: {exc}") from exc
        return cls.from_doc(doc)

    @classmethod
    def load(cls, path) -> "ComponentSpec":
        with open(path, "rb") as f:
            return cls.from_json(f.read())


@dataclass
class TunableAssignment:
    component_id: int
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Any:
        return self.values[name]


def validate_assignment(spec: ComponentSpec, a: TunableAssignment) -> list[ValidationIssue]:
    """Every violation of ``a`` against ``spec``; an empty list means valid."""
    issues = []
    declared = {t.name: t for t in spec.tunables}
    for name in a.values:
        if name not in declared:
            issues.append(ValidationIssue(name, "unknown parameter"))
    for t in spec.tunables:
        if t.name not in a.values:
            issues.append(ValidationIssue(t.name, "missing parameter"))
            continue
        issue = t.check(a.values[t.name])
        if issue is not None:
            issues.append(issue)
    return issues


def encode_unit(spec: ComponentSpec, a: TunableAssignment) -> list[float]:
    issues = validate_assignment(spec, a)
    if issues:
        raise AssignmentError(issues)
    return [_encode_one(t, a.values[t.name]) for t in spec.tunables]


def decode_unit(spec: ComponentSpec, u: Sequence[float]) -> TunableAssignment:
    if len(u) != spec.dim:
        raise ValueError(f"expected {spec.dim} coordinates, got {len(u)}")
    for x in u:
        if not (0.0 <= x <= 1.0):
            raise ValueError(f"coordinate {x!r} outside [0, 1]")
    return TunableAssignment(spec.component_id, {t.name: _decode_one(t, float(x)) for t, x in zip(spec.tunables, u)})


def _encode_one(t: TunableDef, v: Any) -> float:
    if t.kind == "boolean":
        return 1.0 if v else 0.0
    if t.kind == "categorical":
        k = len(t.categories)
        return 0.0 if k == 1 else t.categories.index(v) / (k - 1)
    if t.upper == t.lower:
        return 0.0
    if t.scale == "log":
        lo = math.log(t.lower)
        return (math.log(v) - lo) / (math.log(t.upper) - lo)
    return (v - t.lower) / (t.upper - t.lower)


def _decode_one(t: TunableDef, u: float) -> Any:
    if t.kind == "boolean":
        return u >= 0.5
    if t.kind == "categorical":
        k = len(t.categories)
        return t.categories[min(k - 1, _round_half_up(u * (k - 1)))]
    if t.upper == t.lower:
        return t.lower
    if t.scale == "log":
        lo = math.log(t.lower)
        v = math.exp(lo + u * (math.log(t.upper) - lo))
    elif t.kind == "integer":
        # Stretch by half a step at each end so every integer owns an equal share of [0, 1].
        v = (t.lower - 0.5) + u * (t.upper - t.lower + 1)
    else:
        v = t.lower + u * (t.upper - t.lower)
    if t.kind == "integer":
        return min(t.upper, max(t.lower, _round_half_up(v)))
    return min(float(t.upper), max(float(t.lower), v))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require_unique(values: list, what: str) -> None:
    seen = set()
    for v in values:
        if v in seen:
            raise SpecError(f"duplicate {what} {v!r}")
        seen.add(v)
