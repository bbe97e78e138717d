"""
Append-only event trace of a simulation run.

Records are totally ordered by (time, sequence number) and serialize to
one JSON object per line with sorted keys, so two runs with the same
inputs produce byte-identical files.
"""

from dataclasses import dataclass
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Union

from ..core.errors import SimulationAbort

EVENT_KINDS = (
    "spawn",
    "edge-enter",
    "edge-exit",
    "stop-arrival",
    "dwell",
    "trigger",
    "reroute",
    "trip-complete",
)


@dataclass(frozen=True)
class TraceRecord:
    time: int
    seq: int
    kind: str
    fields: Dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.fields[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)

    def to_json(self) -> str:
        payload = dict(self.fields)
        payload.update({"t": self.time, "seq": self.seq, "kind": self.kind})
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TraceRecord":
        payload = json.loads(line)
        time = payload.pop("t")
        seq = payload.pop("seq")
        kind = payload.pop("kind")
        return cls(time, seq, kind, payload)


class EventTrace:
    """Ordered log of everything that happened in a run."""

    def __init__(self, records: Iterable[TraceRecord] = ()):
        self._records: List[TraceRecord] = list(records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self._records)

    @property
    def last_time(self) -> int:
        return self._records[-1].time if self._records else 0

    def append(self, time: int, kind: str, **fields: Any) -> TraceRecord:
        if kind not in EVENT_KINDS:
            raise ValueError(f"Unknown event kind: {kind}")
        if self._records and time < self._records[-1].time:
            raise SimulationAbort(
                f"Event at t={time} recorded after t={self._records[-1].time}"
            )
        record = TraceRecord(time, len(self._records), kind, fields)
        self._records.append(record)
        return record

    def since(self, index: int) -> List[TraceRecord]:
        return self._records[index:]

    def of_kind(self, *kinds: str) -> List[TraceRecord]:
        return [r for r in self._records if r.kind in kinds]

    def lines(self) -> Iterator[str]:
        for record in self._records:
            yield record.to_json()

    def digest(self) -> str:
        sha = hashlib.sha256()
        for line in self.lines():
            sha.update(line.encode("utf-8"))
            sha.update(b"\n")
        return sha.hexdigest()

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for line in self.lines():
                f.write(line)
                f.write("\n")

    @classmethod
    def read(cls, path: Union[str, Path]) -> "EventTrace":
        with open(path, encoding="utf-8") as f:
            return cls(TraceRecord.from_json(line) for line in f if line.strip())
