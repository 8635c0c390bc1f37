import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

HEADER = "HEADER"
ELECTION = "ELECTION"
POLICY = "POLICY"
PARSE_FAILURE = "PARSE_FAILURE"
STEP = "STEP"
# order of records sharing a step
KIND_RANK = {ELECTION: 0, POLICY: 1, PARSE_FAILURE: 2, STEP: 3}
REQUIRED_FIELDS = {
    STEP: ("t", "tax_year", "rates", "labor", "pre_tax", "post_tax", "utilities", "swf", "rebate"),
    POLICY: ("t", "tax_year", "old_schedule", "new_schedule", "delta"),
    ELECTION: ("t", "tax_year", "platforms", "votes", "winner"),
    PARSE_FAILURE: ("t", "failures"),
}


class EventLogError(ValueError):
    """
    Malformed or out-of-order record; `line` is 1-based, `last_valid` the
    line of the last record that passed
    """

    def __init__(self, message: str, line: int, last_valid: int) -> None:
        self.line = line
        self.last_valid = last_valid
        super().__init__(f"line {line}: {message} (last valid record at line {last_valid})")


def _problem(record, previous: Optional[dict]) -> Optional[str]:
    if not isinstance(record, dict):
        return "record is not a JSON object"
    kind = record.get("kind")
    if kind not in REQUIRED_FIELDS:
        return f"unknown record kind {kind!r}"
    missing = [name for name in REQUIRED_FIELDS[kind] if name not in record]
    if missing:
        return f"{kind} record lacks {', '.join(missing)}"
    if previous is not None and (record["t"], KIND_RANK[kind]) <= (previous["t"], KIND_RANK[previous["kind"]]):
        return f"{kind} at t={record['t']} does not follow {previous['kind']} at t={previous['t']}"

    return None


@dataclass
class EventLog:
    """
    Append-only record of a run, a header then records ordered by
    (t, kind rank)
    """

    header: Optional[dict] = None
    records: list = field(default_factory=list)

    def _append(self, record: dict, line: int, last_valid: int) -> None:
        problem = _problem(record, self.records[-1] if self.records else None)
        if problem:
            raise EventLogError(problem, line, last_valid)
        self.records.append(record)

    def append(self, record: dict) -> None:
        self._append(record, len(self.records) + 2, len(self.records) + 1)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, kind: str) -> list[dict]:
        return [record for record in self.records if record["kind"] == kind]

    @property
    def steps(self) -> list[dict]:
        return self.of_kind(STEP)

    def lines(self) -> Iterator[str]:
        if self.header is not None:
            yield json.dumps(self.header, sort_keys=True)
        for record in self.records:
            yield json.dumps(record, sort_keys=True)

    def write(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as file:
            for line in self.lines():
                file.write(line + "\n")


def make_header(config: dict, n_workers: int, thresholds, version: str) -> dict:
    return {
        "kind": HEADER,
        "schema_version": SCHEMA_VERSION,
        "version": version,
        "n_workers": n_workers,
        "thresholds": list(thresholds),
        "config": config,
    }


def parse_event_log(lines: list[str]) -> EventLog:
    log = EventLog()
    last_valid = 0
    for number, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as error:
            raise EventLogError(f"unreadable record ({error.msg})", number, last_valid) from error
        if log.header is None and not log.records:
            if not isinstance(record, dict) or record.get("kind") != HEADER:
                raise EventLogError("first record must be the header", number, last_valid)
            if record.get("schema_version") != SCHEMA_VERSION:
                raise EventLogError(
                    f"schema version {record.get('schema_version')!r}, expected {SCHEMA_VERSION}", number, last_valid
                )
            log.header = record
            last_valid = number
            continue
        log._append(record, number, last_valid)
        last_valid = number

    return log


def read_event_log(path: Union[str, Path]) -> EventLog:
    with open(path, "r") as file:
        log = parse_event_log(file.read().split("\n"))
    logger.debug("read %d records from %s", len(log), path)

    return log
