import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gustvqa.qagen import (
    EMPTY_LIST,
    EMPTY_SLOT,
    GenConfig,
    GenStats,
    JSONLError,
    NamedPoints,
    QARecord,
    description_text,
    dumps_jsonl,
    gen_description,
    gen_enumeration,
    gen_geoindex,
    gen_verification,
    generate_dataset,
    generate_image,
    read_jsonl,
    split_dataset,
    write_jsonl,
)

from helpers import named, rich


def test_verification_true_example():
    np_ = named(red=[("Tasman Sea", "ocean", "Pacific Ocean", (-38.0, 160.0))])
    recs = gen_verification(np_, GenConfig(), gazetteer=[f"Place{i}" for i in range(20)])
    trues = [r for r in recs if r.answer == "True"]
    assert len(trues) == 1
    assert trues[0].question == (
        "Can you verify whether it is true or false that the location specified as Tasman Sea "
        "is currently experiencing strong gales, storm or hurricane?"
    )
    assert len(recs) == 10


def test_verification_no_red_all_false():
    np_ = named(yellow=[("A", "land", "X", (0, 0))])
    recs = gen_verification(np_, GenConfig(), gazetteer=[f"P{i}" for i in range(30)])
    assert recs and all(r.answer == "False" for r in recs)


def test_verification_semantics_and_no_duplicates():
    np_ = rich()
    recs = gen_verification(np_, GenConfig(), gazetteer=["Z1", "Z2", "R0"])
    red = np_.names("red")
    assert sum(r.answer == "True" for r in recs) == 5
    for r in recs:
        assert (r.meta["location"] in red) == (r.answer == "True")
    locs = [r.meta["location"] for r in recs]
    assert len(locs) == len(set(locs))


def test_verification_shortfall_recorded():
    stats = GenStats()
    recs = gen_verification(named(red=[("A", "land", None, (0, 0))]), GenConfig(), gazetteer=["B"], stats=stats)
    assert len(recs) == 2
    assert stats.shortfalls == [{"image": "img.png", "qtype": "verification", "wanted": 10, "got": 2}]


def test_verification_deterministic():
    a = gen_verification(rich(), GenConfig(seed=4), ["Q"])
    b = gen_verification(rich(), GenConfig(seed=4), ["Q"])
    assert a == b


def test_enumeration_answers():
    np_ = named(
        red=[("Tasman Sea", "ocean", "Pacific Ocean", (0, 0)), ("B", "land", "Asia", (1, 1)), ("A", "land", "Asia", (2, 2))],
    )
    recs = gen_enumeration(np_)
    assert len(recs) == 8
    by = {(r.meta["kind"], r.meta["color"], r.meta["variant"]): r.answer for r in recs}
    assert by[("ocean", "red", 0)] == "Pacific Ocean: Tasman Sea"
    assert by[("land", "red", 1)] == "Asia: A; Asia: B"
    assert by[("land", "yellow", 0)] == EMPTY_LIST
    assert "strong gales, storm or hurricane" in recs[0].question
    assert "strong breeze or gale" in [r for r in recs if r.meta["color"] == "yellow"][0].question


def test_geoindex_format_and_meta():
    np_ = named(red=[("X", "ocean", None, (-58.82, 176.31))], yellow=[("O", "land", None, (0.0, -0.0))])
    recs = gen_geoindex(np_)
    ans = {r.meta["location"]: r.answer for r in recs}
    assert ans == {"X": "(-58.82, 176.31)", "O": "(0.00, 0.00)"}
    assert recs[0].question.startswith("What is the latitude and longitude")
    coords = {r.meta["location"]: r.meta["coordinate"] for r in recs}
    assert coords["X"] == [-58.82, 176.31]


def test_geoindex_distinct_and_seeded():
    a = gen_geoindex(rich(), GenConfig(seed=1))
    assert len(a) == 10 and len({r.meta["location"] for r in a}) == 10
    assert a == gen_geoindex(rich(), GenConfig(seed=1))


def test_description_empty_and_filled():
    empty = description_text(named())
    assert empty.count(EMPTY_SLOT) == 4
    assert "wind gusts surpassing 20.7 m/s" in empty
    text = description_text(named(red=[("Tasman Sea", "ocean", "Pacific Ocean", (0, 0))]))
    assert "areas such as Tasman Sea." in text and text.count(EMPTY_SLOT) == 3
    (rec,) = gen_description(named())
    assert rec.qtype == "description" and rec.answer == empty


def test_per_image_count():
    recs = generate_image(rich(), GenConfig(), ["Z"])
    assert len(recs) == 29
    assert [r.qtype for r in recs].count("verification") == 10
    assert len({r.id for r in recs}) == 29


@pytest.mark.parametrize("n,expected", [(10, (7, 1, 2)), (1, (1, 0, 0)), (3, (3, 0, 0)), (20, (14, 2, 4))])
def test_split_counts(n, expected):
    s = split_dataset([f"i{k}" for k in range(n)], (7, 1, 2), seed=0)
    assert tuple(list(s.values()).count(x) for x in ("train", "val", "test")) == expected


def test_split_deterministic_and_order_free():
    ids = [f"i{k}" for k in range(50)]
    assert split_dataset(ids, seed=3) == split_dataset(list(reversed(ids)), seed=3)


def test_dataset_splits_do_not_straddle():
    recs, stats = generate_dataset([rich(f"im{i}.png") for i in range(10)], GenConfig(seed=2), ["Z"])
    assert stats["records"] == 290 == len(recs)
    per_image = {}
    for r in recs:
        per_image.setdefault(r.image, set()).add(r.split)
    assert all(len(v) == 1 for v in per_image.values())
    assert stats["per_split"] == {"train": 203, "val": 29, "test": 58}


def test_jsonl_empty_and_errors():
    assert dumps_jsonl([]) == ""
    assert read_jsonl("") == []
    with pytest.raises(JSONLError) as exc:
        read_jsonl("not json\n")
    assert exc.value.line == 1
    with pytest.raises(JSONLError) as exc:
        read_jsonl('{"id": "a"}\n[1]\n', as_records=False)
    assert exc.value.line == 2


records = st.builds(
    QARecord,
    id=st.text(min_size=1, max_size=20),
    image=st.text(min_size=1, max_size=20),
    split=st.sampled_from(["train", "val", "test"]),
    qtype=st.sampled_from(["verification", "enumeration", "geo_indexing", "description"]),
    question=st.text(min_size=1, max_size=60),
    answer=st.text(min_size=1, max_size=60),
    meta=st.dictionaries(st.sampled_from(["color", "location"]), st.text(max_size=10), max_size=2),
)


@settings(max_examples=25, deadline=None)
@given(st.lists(records, max_size=40))
def test_jsonl_round_trip(recs):
    buf = io.StringIO()
    write_jsonl(recs, buf)
    assert read_jsonl(buf.getvalue()) == recs


def test_jsonl_thousand_records_round_trip():
    recs = generate_dataset([rich(f"im{i}.png") for i in range(35)], GenConfig(), ["Z"])[0]
    assert len(recs) >= 1000
    assert read_jsonl(dumps_jsonl(recs)) == recs


def test_named_points_json_round_trip():
    np_ = rich()
    assert NamedPoints.from_dict(json.loads(np_.to_json())).to_json() == np_.to_json()


def test_genconfig_validation():
    with pytest.raises(ValueError):
        GenConfig(counts={"verification": -1})
    with pytest.raises(ValueError):
        GenConfig(split_ratio=(7, 0, 2))
