"""Penguin Exception Task: normal birds, cows and penguins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..curriculum import Curriculum, make_random_curriculum
from ..fol import GroundingTable, KnowledgeBase, Partition, parse_formula
from ..nn import DenseNetwork
from . import TaskBundle, load_curriculum, load_kb

GROUPS = ("Norm_Birds", "Cows", "Penguins")

QUERIES = {
    "is_bird(Normal_Birds)": "forall Norm_Birds: is_bird(Norm_Birds)",
    "is_bird(Penguins)": "forall Penguins: is_bird(Penguins)",
    "can_fly(Normal_Birds)": "forall Norm_Birds: can_fly(Norm_Birds)",
    "not(can_fly(Penguins))": "forall Penguins: not can_fly(Penguins)",
}


@dataclass(frozen=True)
class PetConfig:
    n_norm_birds: int = 100
    n_cows: int = 100
    n_penguins: int = 50
    feature_dim: int = 4
    cluster_std: float = 0.3
    # distance of each cluster mean from the origin, along its own axis
    separation: float = 1.0
    hidden: tuple[int, ...] = (16, 16)
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_norm_birds, self.n_cows, self.n_penguins) < 1:
            raise ValueError("every animal group needs at least one individual")
        if not self.cluster_std > 0:
            raise ValueError("cluster_std must be positive")
        if self.feature_dim < 3:
            raise ValueError("need at least 3 feature dimensions for 3 axis-aligned clusters")

    def means(self) -> np.ndarray:
        return self.separation * np.eye(3, self.feature_dim)


def make_data(cfg: PetConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    counts = (cfg.n_norm_birds, cfg.n_cows, cfg.n_penguins)
    return {
        name: mean + cfg.cluster_std * rng.standard_normal((n, cfg.feature_dim))
        for name, mean, n in zip(GROUPS, cfg.means(), counts)
    }


def pet_curricula() -> dict[str, Curriculum]:
    """The fixed curricula; random ones come from :func:`random_curriculum`."""
    return {name: load_curriculum(f"pet_{name}.cur", name) for name in ("baseline", "kc", "ts")}


def random_curriculum(rng: np.random.Generator, n_stages: int = 3) -> Curriculum:
    return make_random_curriculum(load_kb("pet.kb").ids, n_stages, rng, name="random")


def build_pet(cfg: PetConfig = PetConfig()) -> TaskBundle:
    data = make_data(cfg)
    birds, cows, penguins = (data[k] for k in GROUPS)
    variables = {
        "Norm_Birds": Partition(data=birds),
        "Cows": Partition(data=cows),
        "Penguins": Partition(data=penguins),
        "Non_Penguins": Partition(data=np.vstack([birds, cows])),
        "Animals": Partition(data=np.vstack([birds, cows, penguins])),
    }
    rng = np.random.default_rng(cfg.seed + 1)
    predicates = {
        name: DenseNetwork.init(cfg.feature_dim, cfg.hidden, rng) for name in ("is_bird", "can_fly", "is_penguin")
    }
    kb = load_kb("pet.kb")
    kb = KnowledgeBase(kb.rules, GroundingTable(variables, predicates))
    queries = {name: parse_formula(text) for name, text in QUERIES.items()}
    return TaskBundle("pet", kb, pet_curricula(), queries)
