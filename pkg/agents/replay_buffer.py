from dataclasses import dataclass, field, replace
from typing import Optional

from fiscal_core.tax_schedule import TaxSchedule


@dataclass(frozen=True)
class BufferEntry:
    schedule: TaxSchedule
    swf: float
    tax_year: int = 0


@dataclass(frozen=True)
class ReplayBuffer:
    """
    Top-h (schedule, year-average SWF) pairs, best first
    """

    capacity: int = 5
    entries: tuple = field(default=())

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"buffer capacity must be at least 1, got {self.capacity}")

    @property
    def best(self) -> Optional[BufferEntry]:
        return self.entries[0] if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "entries": [
                {"schedule": entry.schedule.to_dict(), "swf": entry.swf, "tax_year": entry.tax_year}
                for entry in self.entries
            ],
        }


def buffer_update(buffer: ReplayBuffer, schedule: TaxSchedule, swf: float, tax_year: int = 0) -> ReplayBuffer:
    """
    Inserts and keeps the h best; equal SWF keeps the older entry first
    """
    entries = sorted(
        buffer.entries + (BufferEntry(schedule=schedule, swf=float(swf), tax_year=tax_year),),
        key=lambda entry: -entry.swf,
    )

    return replace(buffer, entries=tuple(entries[: buffer.capacity]))
