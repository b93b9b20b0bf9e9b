"""Built-in task bundles."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..curriculum import Curriculum, QuerySet, parse_curriculum
from ..fol import KnowledgeBase, parse_kb, validate_kb


def data_text(name: str) -> str:
    return resources.files("contreason.data").joinpath(name).read_text(encoding="utf-8")


def load_kb(name: str) -> KnowledgeBase:
    return parse_kb(data_text(name))


def load_curriculum(name: str, label: str) -> Curriculum:
    return parse_curriculum(data_text(name), label)


@dataclass
class TaskBundle:
    name: str
    kb: KnowledgeBase
    curricula: dict[str, Curriculum]
    queries: QuerySet

    def validate(self) -> list[str]:
        problems = [str(i) for i in validate_kb(self.kb, dict(self.queries))]
        for c in self.curricula.values():
            problems.extend(c.validate(self.kb))
        return problems


def build_task(name: str, seed: int = 0) -> TaskBundle:
    from .pet import PetConfig, build_pet
    from .sf import SfConfig, build_sf

    if name == "pet":
        return build_pet(PetConfig(seed=seed))
    if name == "sf":
        return build_sf(SfConfig(seed=seed))
    raise ValueError(f"unknown task {name!r} (expected 'pet' or 'sf')")
