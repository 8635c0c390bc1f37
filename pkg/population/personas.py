import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np


PERSONA_LIBRARY_PATH = Path(__file__).parent / "data" / "personas.json"


@dataclass(frozen=True)
class Persona:
    id: int
    text: str
    age: int
    occupation: str
    income_anchor: float
    # (max_effective_rate, min_marginal_retention)
    satisfaction_rule: tuple = (1.0, 0.0)

    def __post_init__(self) -> None:
        max_effective_rate, min_marginal_retention = (float(v) for v in self.satisfaction_rule)
        object.__setattr__(self, "satisfaction_rule", (max_effective_rate, min_marginal_retention))
        if not 0 <= max_effective_rate <= 1:
            raise ValueError(f"max_effective_rate {max_effective_rate} outside [0, 1]")
        if not 0 <= min_marginal_retention <= 1:
            raise ValueError(f"min_marginal_retention {min_marginal_retention} outside [0, 1]")

    @property
    def max_effective_rate(self) -> float:
        return self.satisfaction_rule[0]

    @property
    def min_marginal_retention(self) -> float:
        return self.satisfaction_rule[1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "age": self.age,
            "occupation": self.occupation,
            "income_anchor": self.income_anchor,
            "satisfaction_rule": {
                "max_effective_rate": self.max_effective_rate,
                "min_marginal_retention": self.min_marginal_retention,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Persona":
        rule = data.get("satisfaction_rule", {})
        if isinstance(rule, dict):
            rule = (rule.get("max_effective_rate", 1.0), rule.get("min_marginal_retention", 0.0))

        return cls(
            id=int(data["id"]),
            text=data["text"],
            age=int(data["age"]),
            occupation=data["occupation"],
            income_anchor=float(data["income_anchor"]),
            satisfaction_rule=tuple(rule),
        )


def load_persona_library(path: Union[str, Path] = PERSONA_LIBRARY_PATH) -> list[Persona]:
    with open(path, "r") as file:
        return [Persona.from_dict(entry) for entry in json.load(file)]


def assign_personas(n: int, library: list[Persona], seed: int) -> list[Persona]:
    """
    Seeded sampling with replacement; ids are renumbered 0..n-1
    """
    if n == 0:
        return []
    if not library:
        raise ValueError("persona library is empty")
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(library), size=n)

    return [replace(library[pick], id=index) for index, pick in enumerate(picks)]
