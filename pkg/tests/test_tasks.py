from pathlib import Path

import numpy as np
import pytest

from contreason.curriculum import Curriculum, StageConfig, run_curriculum
from contreason.fol import to_text, validate_kb
from contreason.semantics import evaluate
from contreason.tasks import build_task, data_text, load_curriculum
from contreason.tasks.pet import PetConfig, build_pet, make_data, random_curriculum
from contreason.tasks.sf import QUERY_RULES, FactsError, SfConfig, build_sf, default_facts, parse_facts

GOLDEN = Path(__file__).parent / "golden"


# --- PET ------------------------------------------------------------------


def test_pet_partition_sizes():
    g = build_pet().kb.groundings
    assert len(g.variables["Animals"]) == 250
    assert len(g.variables["Non_Penguins"]) == 200
    assert len(g.variables["Animals"]) == sum(len(g.variables[k]) for k in ("Norm_Birds", "Cows", "Penguins"))


def test_pet_unions_are_exact():
    g = build_pet().kb.groundings
    v = g.variables
    np.testing.assert_array_equal(v["Animals"].data, np.vstack([v["Norm_Birds"].data, v["Cows"].data, v["Penguins"].data]))
    np.testing.assert_array_equal(v["Non_Penguins"].data, np.vstack([v["Norm_Birds"].data, v["Cows"].data]))


def test_pet_cluster_means_are_far_apart():
    cfg = PetConfig()
    m = cfg.means()
    for i in range(3):
        for j in range(i + 1, 3):
            assert np.linalg.norm(m[i] - m[j]) >= 4 * cfg.cluster_std
    # axis-aligned
    assert all(np.count_nonzero(row) == 1 for row in m)


def test_pet_data_is_deterministic():
    a, b = make_data(PetConfig(seed=3)), make_data(PetConfig(seed=3))
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(make_data(PetConfig(seed=4))["Cows"], a["Cows"])


@pytest.mark.parametrize("bad", [dict(n_cows=0), dict(cluster_std=0.0), dict(feature_dim=2)])
def test_pet_config_validation(bad):
    with pytest.raises(ValueError):
        PetConfig(**bad)


def test_pet_kb_and_queries():
    pet = build_pet()
    assert len(pet.kb) == 8
    assert to_text(pet.kb.rules[7].formula) == "forall Animals: is_penguin(Animals) => not can_fly(Animals)"
    assert list(pet.queries) == [
        "is_bird(Normal_Birds)",
        "is_bird(Penguins)",
        "can_fly(Normal_Birds)",
        "not(can_fly(Penguins))",
    ]
    assert validate_kb(pet.kb, pet.queries) == []


def test_pet_curricula():
    c = build_pet().curricula
    ids = build_pet().kb.ids
    assert c["baseline"].stages == [ids]
    assert c["kc"].stages == [
        ["normal_birds_are_birds", "cows_are_not_birds", "penguins_are_penguins", "non_penguins_not_penguins"],
        ["birds_fly", "non_birds_dont_fly", "penguins_are_birds"],
        ["penguins_dont_fly"],
    ]
    assert "penguins_are_birds" in c["ts"].stages[0] and "penguins_are_birds" in c["kc"].stages[1]
    assert c["ts"].stages[2] == ["penguins_dont_fly"]
    for cur in c.values():
        assert sorted(cur.rule_ids) == sorted(ids)


def test_pet_random_curricula_cover_the_kb():
    ids = sorted(build_pet().kb.ids)
    rng = np.random.default_rng(0)
    for _ in range(50):
        cur = random_curriculum(rng)
        assert len(cur.stages) == 3 and sorted(cur.rule_ids) == ids


def test_pet_clusters_are_separable():
    pet = build_pet()
    probe = Curriculum("probe", [["penguins_are_penguins", "non_penguins_not_penguins"]])
    res = run_curriculum(pet.kb, probe, StageConfig(epochs=400, lr=0.01), pet.queries, seed=0)
    g = pet.kb.groundings
    for rid in ("penguins_are_penguins", "non_penguins_not_penguins"):
        assert evaluate(pet.kb[rid].formula, g) >= 0.99
    assert len(res.trace) == 400


def test_appendix_random_split_learns_the_exception():
    pet = build_pet()
    cur = load_curriculum("pet_random_success.cur", "random")
    assert cur.stages[2] == ["penguins_dont_fly", "penguins_are_birds"]
    res = run_curriculum(pet.kb, cur, StageConfig(epochs=400, lr=0.01), pet.queries, seed=0)
    assert res.final["not(can_fly(Penguins))"] >= 0.95


# --- Smokers & Friends ----------------------------------------------------


def test_sf_kb_shape():
    sf = build_sf()
    assert len(sf.kb) == 9
    assert list(sf.queries) == list(QUERY_RULES)
    labels = [r.label for r in sf.kb.rules[:3]]
    assert labels == ["identify known friendships", "identify known smokers", "identify known cancer"]
    g = sf.kb.groundings
    assert g.embeddings.shape == (14, 8)
    assert {k: v.input_dim for k, v in g.predicates.items()} == {"F": 16, "S": 8, "C": 8}
    assert validate_kb(sf.kb, sf.queries) == []


def test_sf_curricula():
    c = build_sf().curricula
    assert c["kc"].stages[2] == ["smokers_have_cancer", "non_smokers_healthy"]
    assert c["ts"].stages[0] == ["friend_facts", "antireflexive", "symmetric", "has_friend"]
    assert c["baseline"].stages == [build_sf().kb.ids]
    for cur in c.values():
        assert sorted(cur.rule_ids) == sorted(build_sf().kb.ids)


def test_sf_facts_are_irreflexive_and_listed_once():
    f = default_facts()
    for pairs in (f.friends, f.not_friends):
        assert all(a != b for a, b in pairs)
        assert len(set(pairs)) == len(pairs)
    assert not {frozenset(p) for p in f.friends} & {frozenset(p) for p in f.not_friends}


def test_sf_default_facts_match_canonical_set():
    f = default_facts()
    assert f.friends == [tuple(p) for p in "ab ae af ag bc cd ef gh ij jm kl mn".split()]
    assert f.smokes == list("aefgjn")
    assert f.cancer == ["a", "e"]
    assert f.not_cancer == list("bcdfgh")
    assert f.not_smokes == list("bcdhiklm")
    # every unlisted same-group ordered pair, both ways round: 2 * (28 - 8) + 2 * (15 - 4)
    assert len(f.not_friends) == 62
    assert ("c", "a") in f.not_friends and ("a", "c") in f.not_friends
    assert not any(set(p) <= set("abcdefgh") and set(p) & set("ijklmn") for p in f.not_friends)


def test_sf_facts_file_golden():
    assert data_text("sf_facts.txt") == (GOLDEN / "sf_facts.txt").read_text()


@pytest.mark.parametrize(
    "text, msg",
    [
        ("friend a z\n", "unknown person"),
        ("likes a b\n", "unknown fact kind"),
        ("friend a\n", "takes 2"),
        ("friend a a\n", "own friend"),
        ("smokes a\nsmokes a\n", "duplicate"),
        ("cancer a\nnot-cancer a\n", "contradictory"),
        ("friend a b\nnot-friend b a\n", "both friends and non-friends"),
    ],
)
def test_sf_facts_errors(text, msg):
    with pytest.raises(FactsError, match=msg):
        parse_facts(text)


def test_sf_explicit_negatives_replace_the_derived_ones():
    f = parse_facts("friend a b\nnot-friend a c\nsmokes a\nnot-smokes b\n")
    assert f.not_friends == [("a", "c")]
    assert f.not_smokes == ["b"]


def test_sf_zero_networks_give_half_on_antireflexivity():
    from contreason.nn import DenseNetwork

    sf = build_sf()
    g = sf.kb.groundings
    for k, net in g.predicates.items():
        g.predicates[k] = DenseNetwork.zeros(net.input_dim)
    assert evaluate(sf.queries["not F(x,x)"], g) == pytest.approx(0.5, abs=1e-15)


def test_sf_config_validation():
    with pytest.raises(ValueError):
        SfConfig(n_persons=30)
    with pytest.raises(ValueError):
        SfConfig(groups=("abc", "def"))


@pytest.mark.parametrize("task", ["pet", "sf"])
def test_bundles_are_deterministic(task):
    a, b = build_task(task, seed=2), build_task(task, seed=2)
    pa, pb = a.kb.groundings.parameters(), b.kb.groundings.parameters()
    assert all(np.array_equal(pa[k], pb[k]) for k in pa)
    assert a.validate() == []


def test_unknown_task():
    with pytest.raises(ValueError):
        build_task("babi")
