import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional


LABOR = "LABOR"
DELTA = "DELTA"
VOTE = "VOTE"
KINDS = (LABOR, DELTA, VOTE)


class ActionParseError(ValueError):
    pass


class NoJsonFound(ActionParseError):
    pass


class WrongKey(ActionParseError):
    pass


class WrongArity(ActionParseError):
    pass


class NonNumeric(ActionParseError):
    pass


@dataclass(frozen=True)
class ActionMessage:
    kind: str
    labor: Optional[float] = None
    delta: Optional[tuple] = None
    vote: Optional[int] = None
    raw_text: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        payloads = {LABOR: self.labor, DELTA: self.delta, VOTE: self.vote}
        if self.kind not in payloads:
            raise ValueError(f"unknown action kind {self.kind!r}")
        populated = [kind for kind, value in payloads.items() if value is not None]
        if populated != [self.kind]:
            raise ValueError(f"{self.kind} action must carry exactly its own payload, got {populated}")
        if self.delta is not None:
            object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))


def _json_objects(text: str) -> list[dict]:
    """
    Every JSON object embedded in the text, in order of their opening brace
    """
    decoder = json.JSONDecoder()
    objects = []
    for start, char in enumerate(text):
        if char != "{":
            continue
        try:
            value, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            objects.append(value)

    return objects


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def parse_action(raw: str, kind: str, arity: int = 1) -> ActionMessage:
    """
    Takes the last JSON object in the text that carries the expected key
    """
    if kind not in KINDS:
        raise ValueError(f"unknown action kind {kind!r}")
    objects = _json_objects(raw or "")
    if not objects:
        raise NoJsonFound(f"no JSON object in reply: {raw!r:.200}")
    matching = [obj for obj in objects if kind in obj]
    if not matching:
        raise WrongKey(f"expected key {kind!r}, found {sorted({key for obj in objects for key in obj})}")
    value = matching[-1][kind]

    if kind == LABOR:
        if not _is_number(value):
            raise NonNumeric(f"LABOR must be a finite number, got {value!r}")
        return ActionMessage(kind=LABOR, labor=float(value), raw_text=raw)

    if kind == VOTE:
        if not _is_number(value) or float(value) != int(value):
            raise NonNumeric(f"VOTE must be an integer candidate id, got {value!r}")
        return ActionMessage(kind=VOTE, vote=int(value), raw_text=raw)

    if not isinstance(value, list):
        raise WrongArity(f"DELTA must be an array of {arity} numbers, got {value!r}")
    if len(value) != arity:
        raise WrongArity(f"DELTA has {len(value)} entries, expected {arity}")
    if not all(_is_number(v) for v in value):
        raise NonNumeric(f"DELTA entries must be finite numbers, got {value!r}")

    return ActionMessage(kind=DELTA, delta=tuple(float(v) for v in value), raw_text=raw)


def render_action(message: ActionMessage) -> str:
    if message.kind == LABOR:
        return json.dumps({LABOR: message.labor})
    if message.kind == VOTE:
        return json.dumps({VOTE: message.vote})

    return json.dumps({DELTA: list(message.delta)})
