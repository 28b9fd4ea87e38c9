import math

import pytest
from hypothesis import given, strategies as st

from adm_broadcast.model import (
    ConfigError, DensityClass, KnowledgeBase, ObjectiveVector, PacketId, Priority, Strategy,
    classify_density, kb_lookup, strategy_problems, union_kb,
)
from adm_broadcast.scenarios import table_kb


@pytest.mark.parametrize("n, expected", [
    (0, DensityClass.VeryLow), (1, DensityClass.VeryLow), (2.99, DensityClass.VeryLow),
    (3, DensityClass.Low), (5, DensityClass.Low), (8, DensityClass.Medium),
    (10, DensityClass.Medium), (17.9, DensityClass.Medium), (18, DensityClass.High),
    (26, DensityClass.High), (1e6, DensityClass.High),
])
def test_classify_examples(n, expected):
    assert classify_density(n) == expected


def test_table_neighbour_counts_land_in_their_class():
    # neighbour counts of the four density levels
    for n, d in ((26, "High"), (10, "Medium"), (5, "Low"), (1, "VeryLow")):
        assert classify_density(n).name == d


@given(st.floats(0, 1e4), st.floats(0, 1e4))
def test_classify_monotone(a, b):
    lo, hi = sorted((a, b))
    assert classify_density(lo) <= classify_density(hi)


@pytest.mark.parametrize("bad", [-1.0, math.nan])
def test_classify_rejects(bad):
    with pytest.raises(ValueError):
        classify_density(bad)


@given(st.floats(-2, 3, allow_nan=False), st.integers(-3, 50),
       st.floats(-1, 3, allow_nan=False), st.integers(-3, 50))
def test_strategy_validation_matches_ranges(p, nr, dr, ttl):
    ok = 0 <= p <= 1 and nr >= 1 and dr >= 0 and ttl >= 1
    assert (not strategy_problems(p, nr, dr, ttl)) == ok
    if ok:
        assert Strategy(p, nr, dr, ttl).as_tuple() == (p, nr, dr, ttl)
    else:
        with pytest.raises(ConfigError):
            Strategy(p, nr, dr, ttl)


def test_strategy_rejects_non_integer_counts():
    with pytest.raises(ConfigError):
        Strategy(0.5, 2.5, 0.1, 3)
    with pytest.raises(ConfigError):
        Strategy(0.5, True, 0.1, 3)
    with pytest.raises(ConfigError):
        Strategy(0.5, 1, math.inf, 3)


def test_objective_orientation():
    assert ObjectiveVector(1, 2, 3, 0.5).oriented() == (1, 2, 3, -0.5)


def test_packet_id_text():
    pid = PacketId(12, 3)
    assert str(pid) == "12:3"
    assert PacketId.parse("12:3") == pid


def test_kb_round_trip_table():
    kb = table_kb()
    assert kb.complete and len(kb) == 12
    text = kb.serialize()
    assert KnowledgeBase.parse(text).serialize() == text
    assert kb_lookup(kb, DensityClass.Low, Priority.HL) == Strategy(0.999, 4, 1.147, 40)


strategies = st.builds(Strategy, st.floats(0, 1), st.integers(1, 30),
                       st.floats(0, 2), st.integers(1, 40))


@given(st.dictionaries(st.tuples(st.sampled_from(list(DensityClass)), st.sampled_from(list(Priority))),
                       strategies))
def test_kb_round_trip_property(entries):
    kb = KnowledgeBase(entries)
    back = KnowledgeBase.parse(kb.serialize())
    assert back.entries == kb.entries


def test_kb_lookup_names_missing_key():
    kb = table_kb()
    del kb.entries[DensityClass.Medium, Priority.LL]
    with pytest.raises(ConfigError, match="Medium LL"):
        kb_lookup(kb, DensityClass.Medium, Priority.LL)


@pytest.mark.parametrize("text, msg", [
    ("High HL 0.5 1 0.0\n", "6 fields"),
    ("Dense HL 0.5 1 0.0 3\n", "density"),
    ("High XL 0.5 1 0.0 3\n", "priority"),
    ("High HL 1.5 1 0.0 3\n", "p=1.5"),
    ("High HL 0.5 1 0.0 3\nHigh HL 0.5 1 0.0 3\n", "duplicate"),
])
def test_kb_parse_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        KnowledgeBase.parse(text)


def test_kb_parse_skips_comments():
    kb = KnowledgeBase.parse("# hi\n\nLow ML 0.9 2 0.5 10  # trailing\n")
    assert kb.entries == {(DensityClass.Low, Priority.ML): Strategy(0.9, 2, 0.5, 10)}
    assert not kb.complete


def test_union_later_wins():
    a = KnowledgeBase({(DensityClass.Low, Priority.HL): Strategy(0.1, 1, 0.0, 1)})
    b = KnowledgeBase({(DensityClass.Low, Priority.HL): Strategy(0.2, 1, 0.0, 1),
                       (DensityClass.High, Priority.LL): Strategy(0.3, 1, 0.0, 1)})
    u = union_kb([a, b])
    assert len(u) == 2 and u.entries[DensityClass.Low, Priority.HL].p == 0.2


def test_priority_and_density_parse():
    assert Priority.parse("hl") == Priority.HL
    assert DensityClass.parse("verylow") == DensityClass.VeryLow
    with pytest.raises(ConfigError):
        Priority.parse("urgent")
