"""Trace data model, canonical explanation keys and trace file I/O.

A trace is an i.i.d. sample of ``(instance, prediction, explanation)``
records; it is the only thing the estimators need from a black-box system.

Explanation keys are plain strings of the form ``"<kind>:<text>"``.  Two
explanations are the same explanation exactly when their keys are equal.  For
structured payloads ``text`` is a canonical JSON rendering of the content with
numbers rounded to 12 significant digits; an explainer may instead assign its
own token (a tree leaf id, a prototype id), which becomes ``text`` verbatim.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from faithcheck.rules import ScopedRule, canonical_number, is_numeric, rule_from_json

ExplanationKey = str
Label = str

KINDS = ("opaque", "rule", "importance", "counterfactual")


class TraceError(ValueError):
    """A trace record failed validation; ``index`` names the offending record."""

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        prefix = f"record {index}: " if index is not None else ""
        super().__init__(prefix + message)


def _check_features(features: Sequence[Any]) -> tuple:
    out = []
    for v in features:
        if isinstance(v, str):
            out.append(v)
        elif is_numeric(v):
            if not math.isfinite(float(v)):
                raise ValueError(f"non-finite numeric feature {v!r}")
            out.append(v.item() if isinstance(v, np.generic) else v)
        else:
            raise ValueError(f"feature values must be numbers or strings, got {type(v).__name__}")
    return tuple(out)


@dataclass(frozen=True)
class Instance:
    id: str
    features: tuple
    schema: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", _check_features(self.features))
        object.__setattr__(self, "schema", tuple(self.schema))
        if self.schema and len(self.schema) != len(self.features):
            raise ValueError(f"instance {self.id!r} has {len(self.features)} features "
                             f"but the schema has {len(self.schema)}")

    def feature(self, name: str) -> Any:
        try:
            return self.features[self.schema.index(name)]
        except ValueError:
            raise ValueError(f"feature {name!r} not in schema {list(self.schema)}") from None


@dataclass(frozen=True)
class ExplanationPayload:
    """What an explainer returned for one instance, plus its key.

    Build these through the ``opaque`` / ``from_rule`` / ``from_importance`` /
    ``from_counterfactual`` constructors, which fill in the key.
    """

    kind: str
    key: ExplanationKey
    rule: ScopedRule | None = None
    importance: tuple[float, ...] | None = None
    counterfactual: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown explanation kind {self.kind!r}")
        if not self.key.startswith(self.kind + ":"):
            raise ValueError(f"key {self.key!r} does not carry the {self.kind!r} tag")
        if self.kind == "rule" and self.rule is None:
            raise ValueError("rule payload without a rule")
        if self.kind == "importance":
            if self.importance is None:
                raise ValueError("importance payload without an importance vector")
            vec = tuple(float(v) for v in self.importance)
            if not all(math.isfinite(v) for v in vec):
                raise ValueError("non-finite importance value")
            object.__setattr__(self, "importance", vec)
        if self.kind == "counterfactual":
            if self.counterfactual is None:
                raise ValueError("counterfactual payload without a counterfactual instance")
            object.__setattr__(self, "counterfactual", _check_features(self.counterfactual))

    @property
    def text(self) -> str:
        """The key without its kind tag, as written to trace files."""
        return self.key[len(self.kind) + 1:]

    @classmethod
    def opaque(cls, token: str) -> "ExplanationPayload":
        return cls("opaque", f"opaque:{token}")

    @classmethod
    def from_rule(cls, rule: ScopedRule, key: str | None = None) -> "ExplanationPayload":
        return cls._build("rule", key, rule=rule)

    @classmethod
    def from_importance(cls, phi: Iterable[float], key: str | None = None) -> "ExplanationPayload":
        return cls._build("importance", key, importance=tuple(float(v) for v in phi))

    @classmethod
    def from_counterfactual(cls, x_cf: Iterable[Any], key: str | None = None,
                            rule: ScopedRule | None = None) -> "ExplanationPayload":
        return cls._build("counterfactual", key, counterfactual=tuple(x_cf), rule=rule)

    @classmethod
    def _build(cls, kind, key, **content) -> "ExplanationPayload":
        draft = cls(kind, f"{kind}:", **content)
        text = key if key is not None else _content_text(draft)
        return replace(draft, key=f"{kind}:{text}")


def _render(value: Any) -> Any:
    return canonical_number(value) if is_numeric(value) else value


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _content_text(payload: ExplanationPayload) -> str:
    if payload.kind == "rule":
        return _dumps(payload.rule.to_json(canonical=True))
    if payload.kind == "importance":
        return _dumps([_render(v) for v in payload.importance])
    if payload.kind == "counterfactual":
        return _dumps([_render(v) for v in payload.counterfactual])
    return payload.text


def canonical_key(payload: ExplanationPayload) -> ExplanationKey:
    """Key derived from the payload's content alone.

    For opaque payloads the content *is* the token, so the payload's own key
    is returned.  Structured payloads ignore any explainer-assigned token.
    """
    return f"{payload.kind}:{_content_text(payload)}"


@dataclass(frozen=True)
class TraceRecord:
    instance: Instance
    prediction: Label
    explanation: ExplanationPayload

    @property
    def key(self) -> ExplanationKey:
        return self.explanation.key


@dataclass(frozen=True)
class Trace:
    schema: tuple[str, ...]
    records: tuple[TraceRecord, ...] = ()
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "provenance", dict(self.provenance))
        records = list(self.records)
        for i, rec in enumerate(records):
            _validate_record(rec, self.schema, i)
            if not rec.instance.schema and self.schema:
                records[i] = replace(rec, instance=replace(rec.instance, schema=self.schema))
        object.__setattr__(self, "records", tuple(records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @cached_property
    def keys(self) -> list[ExplanationKey]:
        return [r.key for r in self.records]

    @cached_property
    def labels(self) -> list[Label]:
        return [r.prediction for r in self.records]

    @cached_property
    def table(self) -> "FeatureTable":
        return FeatureTable([r.instance for r in self.records], self.schema)

    def with_records(self, records: Iterable[TraceRecord], **provenance) -> "Trace":
        return Trace(self.schema, tuple(records), {**self.provenance, **provenance})


def _validate_record(rec: TraceRecord, schema: tuple[str, ...], index: int) -> None:
    x = rec.instance
    if len(x.features) != len(schema) or (x.schema and x.schema != schema):
        raise TraceError(f"instance {x.id!r} does not match the trace schema", index)
    if not isinstance(rec.prediction, str):
        raise TraceError("prediction label must be a string", index)
    p = rec.explanation
    if p.kind == "importance" and len(p.importance) != len(schema):
        raise TraceError(f"importance vector of length {len(p.importance)} for schema of "
                         f"length {len(schema)}", index)
    if p.kind == "counterfactual" and len(p.counterfactual) != len(schema):
        raise TraceError(f"counterfactual of length {len(p.counterfactual)} for schema of "
                         f"length {len(schema)}", index)


class FeatureTable:
    """Column view of a list of instances for vectorised rule checks.

    ``numeric`` holds floats with NaN where a value is categorical;
    ``categorical`` holds the raw tokens with None where a value is numeric.
    """

    def __init__(self, instances: Sequence[Instance], schema: Sequence[str]):
        self.instances = list(instances)
        self.schema = tuple(schema)
        n, d = len(self.instances), len(self.schema)
        self.numeric = np.full((n, d), np.nan)
        self.categorical = np.full((n, d), None, dtype=object)
        for i, x in enumerate(self.instances):
            for j, v in enumerate(x.features):
                if isinstance(v, str):
                    self.categorical[i, j] = v
                else:
                    self.numeric[i, j] = float(v)
        self._index = {name: j for j, name in enumerate(self.schema)}

    def __len__(self) -> int:
        return len(self.instances)

    def column(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValueError(f"feature {name!r} not in schema {list(self.schema)}") from None


# ---------------------------------------------------------------- file I/O

def _payload_to_json(p: ExplanationPayload) -> dict:
    out: dict[str, Any] = {"kind": p.kind, "key": p.text}
    if p.rule is not None:
        out["rule"] = p.rule.to_json()
    if p.importance is not None:
        out["importance"] = list(p.importance)
    if p.counterfactual is not None:
        out["counterfactual"] = list(p.counterfactual)
    return out


def _payload_from_json(obj: Mapping[str, Any]) -> ExplanationPayload:
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ValueError(f"missing or unknown explanation kind {kind!r}")
    key = obj.get("key")
    rule = rule_from_json(obj["rule"]) if obj.get("rule") is not None else None
    if kind == "opaque":
        if key is None:
            raise ValueError("opaque explanation without a key")
        return ExplanationPayload("opaque", f"opaque:{key}", rule=rule)
    if kind == "rule":
        if rule is None:
            raise ValueError("rule explanation without a rule")
        return ExplanationPayload.from_rule(rule, key)
    if kind == "importance":
        if obj.get("importance") is None:
            raise ValueError("importance explanation without an importance vector")
        return ExplanationPayload._build("importance", key, importance=tuple(obj["importance"]), rule=rule)
    if obj.get("counterfactual") is None:
        raise ValueError("counterfactual explanation without a counterfactual")
    return ExplanationPayload.from_counterfactual(obj["counterfactual"], key, rule=rule)


def _record_from_json(obj: Mapping[str, Any], schema: tuple[str, ...]) -> TraceRecord:
    for name in ("id", "features", "label", "explanation"):
        if name not in obj:
            raise ValueError(f"missing required field {name!r}")
    inst = Instance(str(obj["id"]), tuple(obj["features"]), schema)
    return TraceRecord(inst, obj["label"], _payload_from_json(obj["explanation"]))


def _read_jsonl(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    schema: tuple[str, ...] = ()
    provenance: dict = {}
    if lines and "schema" in (head := json.loads(lines[0])) and "id" not in head:
        schema = tuple(head["schema"])
        provenance = head.get("provenance", {})
        lines = lines[1:]
    records = []
    for i, line in enumerate(lines):
        try:
            obj = json.loads(line)
            if not schema and not records:
                schema = tuple(f"x{j}" for j in range(len(obj.get("features", []))))
            records.append(_record_from_json(obj, schema))
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceError(str(exc), i) from None
    try:
        return Trace(schema, records, provenance)
    except TraceError:
        raise
    except ValueError as exc:
        raise TraceError(str(exc)) from None


def _write_jsonl(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write(json.dumps({"schema": list(trace.schema), "provenance": trace.provenance},
                         sort_keys=True, ensure_ascii=False) + "\n")
    for rec in trace.records:
        obj = {"id": rec.instance.id, "features": list(rec.instance.features),
               "label": rec.prediction, "explanation": _payload_to_json(rec.explanation)}
        buf.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")
    return buf.getvalue()


def _parse_csv_value(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return text
    return value if math.isfinite(value) else text


def _read_csv(text: str) -> Trace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise TraceError("empty csv file (no header)")
    header = rows[0]
    required = ["id", "label", "explanation_key"]
    if header[:3] != required:
        raise TraceError(f"csv header must start with {','.join(required)}")
    feat_cols = header[3:]
    bad = [c for c in feat_cols if not c.startswith("f_")]
    if bad:
        raise TraceError(f"feature columns must be prefixed 'f_': {bad}")
    schema = tuple(c[2:] for c in feat_cols)
    records = []
    for i, row in enumerate(rows[1:]):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceError(f"expected {len(header)} columns, got {len(row)}", i)
        try:
            inst = Instance(row[0], tuple(_parse_csv_value(v) for v in row[3:]), schema)
        except ValueError as exc:
            raise TraceError(str(exc), i) from None
        records.append(TraceRecord(inst, row[1], ExplanationPayload.opaque(row[2])))
    return Trace(schema, records)


def _write_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "label", "explanation_key"] + [f"f_{name}" for name in trace.schema])
    for i, rec in enumerate(trace.records):
        if rec.explanation.kind != "opaque":
            raise TraceError("csv traces carry opaque keys only; use jsonl for structured payloads", i)
        row = [rec.instance.id, rec.prediction, rec.explanation.text]
        for v in rec.instance.features:
            if isinstance(v, str) and _parse_csv_value(v) != v:
                raise TraceError(f"categorical value {v!r} would be read back as a number", i)
            row.append(repr(v) if isinstance(v, float) else v)
        w.writerow(row)
    return buf.getvalue()


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown trace format {fmt!r}")
    return fmt


def load_trace(path: str | Path, format: str | None = None) -> Trace:
    """Read and validate a trace file (format inferred from the suffix if omitted)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if _infer_format(path, format) == "csv":
        return _read_csv(text)
    return _read_jsonl(text)


def write_trace(trace: Trace, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    text = _write_csv(trace) if _infer_format(path, format) == "csv" else _write_jsonl(trace)
    path.write_text(text, encoding="utf-8")


def dumps_trace(trace: Trace, format: str = "jsonl") -> str:
    return _write_csv(trace) if format == "csv" else _write_jsonl(trace)


def loads_trace(text: str, format: str = "jsonl") -> Trace:
    return _read_csv(text) if format == "csv" else _read_jsonl(text)
