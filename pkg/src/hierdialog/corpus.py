"""Corpus data model and the line-delimited record format.

A corpus file holds one JSON record per line::

    {"id": "d1-0", "turns": [{"speaker": "Speaker 1", "text": "hi Frank"}],
     "arguments": ["Speaker 1", "Frank"], "label": "per:friends"}

Class names live in a separate schema file::

    {"class_names": ["per:friends", ...], "neutral_class": "per:friends"}
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import DataError

MAX_ARGUMENTS = 2


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    @property
    def tokens(self) -> list[str]:
        return self.text.split()


@dataclass(frozen=True)
class Query:
    arguments: tuple[str, ...]

    @property
    def k(self) -> int:
        return len(self.arguments)


@dataclass(frozen=True)
class Instance:
    id: str
    dialogue: tuple[Turn, ...]
    query: Query
    label: int

    @property
    def m(self) -> int:
        return len(self.dialogue)

    @property
    def k(self) -> int:
        return self.query.k


@dataclass(frozen=True)
class Schema:
    class_names: tuple[str, ...]
    neutral_class: int | None = None
    # optional class -> group name map, used by grouped evaluation reports
    class_groups: dict[str, str] | None = None

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise DataError("UNKNOWN_CLASS", f"unknown class {name!r}") from None


@dataclass
class Corpus:
    instances: list[Instance]
    class_names: list[str]
    neutral_class: int | None = None
    class_groups: dict[str, str] | None = field(default=None)

    @property
    def schema(self) -> Schema:
        return Schema(tuple(self.class_names), self.neutral_class, self.class_groups)

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


def contains_phrase(tokens: Sequence[str], phrase: Sequence[str]) -> bool:
    """Whole-token, case-sensitive test for a contiguous token run."""
    n = len(phrase)
    if n == 0:
        return False
    return any(list(tokens[i:i + n]) == list(phrase) for i in range(len(tokens) - n + 1))


def is_mentioned(argument: str, turn: Turn) -> bool:
    """True when the argument is the turn's speaker or occurs in its text."""
    return turn.speaker == argument or contains_phrase(turn.tokens, argument.split())


def validate_instance(inst: Instance, class_count: int) -> list[Violation]:
    """Check every Instance invariant; an empty list means the instance is valid."""
    report: list[Violation] = []
    if not inst.dialogue:
        report.append(Violation("NO_TURNS", "dialogue has no turns"))
    for i, turn in enumerate(inst.dialogue):
        if not turn.speaker.strip():
            report.append(Violation("EMPTY_SPEAKER", f"turn {i} has an empty speaker"))
        if not turn.tokens:
            report.append(Violation("EMPTY_TEXT", f"turn {i} has no tokens"))
    k = inst.query.k
    if not 1 <= k <= MAX_ARGUMENTS:
        report.append(Violation("ARG_COUNT", f"expected 1..{MAX_ARGUMENTS} arguments, got {k}"))
    for j, arg in enumerate(inst.query.arguments):
        if not arg.strip():
            report.append(Violation("EMPTY_ARGUMENT", f"argument {j} is empty"))
        elif not any(is_mentioned(arg, t) for t in inst.dialogue):
            report.append(Violation("ARG_NOT_MENTIONED", f"argument {arg!r} is never mentioned"))
    if not 0 <= inst.label < class_count:
        report.append(Violation("LABEL_OUT_OF_RANGE", f"label {inst.label} not in [0, {class_count})"))
    return report


def load_schema(stream: IO[bytes] | IO[str] | str | bytes) -> Schema:
    if isinstance(stream, (str, bytes)):
        raw = stream
    else:
        raw = stream.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError("MALFORMED_SCHEMA", str(exc)) from None
    if not isinstance(obj, dict):
        raise DataError("MALFORMED_SCHEMA", "schema must be a JSON object")
    names = obj.get("class_names")
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        raise DataError("MALFORMED_SCHEMA", "class_names must be a non-empty list of strings")
    if len(set(names)) != len(names):
        raise DataError("MALFORMED_SCHEMA", "class_names must be unique")
    neutral = obj.get("neutral_class")
    if neutral is not None:
        if isinstance(neutral, str):
            if neutral not in names:
                raise DataError("MALFORMED_SCHEMA", f"neutral_class {neutral!r} is not a class")
            neutral = names.index(neutral)
        elif not isinstance(neutral, int) or isinstance(neutral, bool) or not 0 <= neutral < len(names):
            raise DataError("MALFORMED_SCHEMA", "neutral_class must be a class name or index")
    groups = obj.get("class_groups")
    if groups is not None:
        if not isinstance(groups, dict):
            raise DataError("MALFORMED_SCHEMA", "class_groups must map class names to groups")
        unknown = set(groups) - set(names)
        if unknown:
            raise DataError("MALFORMED_SCHEMA", f"class_groups names unknown classes {sorted(unknown)}")
    return Schema(tuple(names), neutral, groups)


def dump_schema(schema: Schema) -> str:
    obj: dict = {"class_names": list(schema.class_names)}
    if schema.neutral_class is not None:
        obj["neutral_class"] = schema.class_names[schema.neutral_class]
    if schema.class_groups is not None:
        obj["class_groups"] = dict(schema.class_groups)
    return json.dumps(obj, indent=2) + "\n"


def _record_to_instance(obj: object, schema: Schema) -> Instance:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    rid, turns, args, label = obj["id"], obj["turns"], obj["arguments"], obj["label"]
    if not isinstance(rid, str) or not isinstance(label, str):
        raise ValueError("id and label must be strings")
    if not isinstance(turns, list) or not isinstance(args, list):
        raise ValueError("turns and arguments must be arrays")
    dialogue = []
    for t in turns:
        if not isinstance(t, dict) or not isinstance(t["speaker"], str) or not isinstance(t["text"], str):
            raise ValueError("each turn needs string speaker and text")
        dialogue.append(Turn(t["speaker"], t["text"]))
    if not all(isinstance(a, str) for a in args):
        raise ValueError("arguments must be strings")
    return Instance(rid, tuple(dialogue), Query(tuple(args)), schema.index(label))


def parse_corpus(stream: IO[bytes] | IO[str] | bytes | str, schema: Schema) -> Corpus:
    """Parse a line-delimited corpus, validating every instance.

    Any error aborts the whole parse; no partial corpus is returned.
    Blank lines are skipped but still counted for line numbers.
    """
    if isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    instances: list[Instance] = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError:
                raise DataError("MALFORMED_LINE", f"line {lineno}: not valid UTF-8") from None
        if not line.strip():
            continue
        try:
            inst = _record_to_instance(json.loads(line), schema)
        except DataError as exc:
            raise DataError(exc.code, f"line {lineno}: {exc.message}") from None
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError("MALFORMED_LINE", f"line {lineno}: {exc}") from None
        if inst.id in seen:
            raise DataError("DUPLICATE_ID", f"line {lineno}: duplicate id {inst.id!r}")
        seen.add(inst.id)
        problems = validate_instance(inst, schema.num_classes)
        if problems:
            detail = "; ".join(f"{v.code} ({v.detail})" for v in problems)
            raise DataError(problems[0].code, f"line {lineno}: {detail}")
        instances.append(inst)
    return Corpus(instances, list(schema.class_names), schema.neutral_class, schema.class_groups)


def instance_to_record(inst: Instance, class_names: Sequence[str]) -> dict:
    return {
        "id": inst.id,
        "turns": [{"speaker": t.speaker, "text": t.text} for t in inst.dialogue],
        "arguments": list(inst.query.arguments),
        "label": class_names[inst.label],
    }


def dump_corpus(instances: Iterable[Instance], class_names: Sequence[str]) -> str:
    return "".join(
        json.dumps(instance_to_record(inst, class_names), ensure_ascii=False) + "\n"
        for inst in instances
    )


def read_corpus(path: str, schema_path: str) -> Corpus:
    with open(schema_path, "rb") as fh:
        schema = load_schema(fh)
    with open(path, "rb") as fh:
        return parse_corpus(fh, schema)
