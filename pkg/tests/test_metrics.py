import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gustvqa.metrics import (
    EARTH_RADIUS_KM,
    bleu,
    bleu_report,
    f1_verification,
    haversine,
    lcs_length,
    match_score,
    normalize_name,
    parse_coordinate,
    parse_name_set,
    parse_verification,
    rouge,
)


@pytest.mark.parametrize(
    "text,want",
    [("True.", "true"), ("I cannot determine this from the image.", "abstain"), ("False, it is true that", "abstain"),
     ("false", "false"), ("FALSE!", "false"), ("untrue", "abstain"), ("", "abstain")],
)
def test_parse_verification(text, want):
    assert parse_verification(text) == want


def test_f1_examples():
    assert f1_verification(["true", "false"], [True, False])["f1"] == 1.0
    assert f1_verification(["abstain"] * 4, [True, False, True, False])["f1"] == 0.0
    preds = ["true"] * 3 + ["true"] + ["false"] * 2
    golds = [True] * 3 + [False] + [True] * 2
    r = f1_verification(preds, golds)
    assert (r["precision"], r["recall"]) == (0.75, 0.6)
    assert r["f1"] == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        f1_verification(["true"], [])


@given(st.lists(st.tuples(st.sampled_from(["true", "false", "abstain"]), st.booleans()), max_size=50))
def test_f1_matches_confusion_oracle(pairs):
    preds = [p for p, _ in pairs]
    golds = [g for _, g in pairs]
    tp = sum(1 for p, g in pairs if g and p == "true")
    fp = sum(1 for p, g in pairs if not g and p != "false")
    fn = sum(1 for p, g in pairs if g and p != "true")
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    r = f1_verification(preds, golds)
    assert (r["precision"], r["recall"]) == (prec, rec)
    assert r["f1"] == pytest.approx(f1) and 0 <= r["f1"] <= 1


@pytest.mark.parametrize("text,want", [("The Tasman Sea.", "tasman sea"), ("  NEW   SOUTH WALES ", "new south wales")])
def test_normalize(text, want):
    assert normalize_name(text) == want


@given(st.text())
def test_normalize_idempotent(t):
    assert normalize_name(normalize_name(t)) == normalize_name(t)


def test_parse_name_set():
    assert parse_name_set("Pacific Ocean: Tasman Sea; Indian Ocean: Bass Strait") == {"tasman sea", "bass strait"}
    assert parse_name_set("None") == set()
    assert parse_name_set("A, a, A.") == {"a"}
    assert parse_name_set("no notable regions") == set()


@pytest.mark.parametrize(
    "x,y,want",
    [({"a", "b"}, {"a", "b"}, 1.0), (set(), set(), 0.0), ({"a"}, {"b"}, -1.0), ({"a", "b", "c"}, {"b", "c", "d"}, 0.0)],
)
def test_match_score_examples(x, y, want):
    assert match_score(x, y) == want


@given(st.sets(st.integers(0, 8)), st.sets(st.integers(0, 8)))
def test_match_score_properties(x, y):
    ms = match_score(x, y)
    assert -1 <= ms <= 1 and ms == match_score(y, x)
    if x:
        assert match_score(x, x) == 1
    assert (ms == -1) == (bool(x or y) and not (x & y))


@pytest.mark.parametrize(
    "text,want",
    [("(-58.82, 176.31)", (-58.82, 176.31)), ("around (200, 10)", None), ("no idea", None), ("at (+1.5,-2) then (3, 4)", (1.5, -2.0))],
)
def test_parse_coordinate(text, want):
    assert parse_coordinate(text) == want


def test_haversine_reference_values():
    r = EARTH_RADIUS_KM
    assert haversine((10, 20), (10, 20)) == 0
    assert haversine((0, 0), (0, 180)) == pytest.approx(math.pi * r, rel=1e-6)
    assert haversine((0, 0), (0, 90)) == pytest.approx(math.pi * r / 2, rel=1e-6)
    assert abs(math.pi * r - 20015.1) < 0.05 and abs(math.pi * r / 2 - 10007.5) < 0.1


coords = st.tuples(st.floats(-90, 90), st.floats(-180, 180))


@given(coords, coords, coords)
def test_haversine_metric(a, b, c):
    dab, dba = haversine(a, b), haversine(b, a)
    assert dab >= 0 and dab == pytest.approx(dba, abs=1e-9)
    assert dab <= math.pi * EARTH_RADIUS_KM + 1e-6
    assert dab <= haversine(a, c) + haversine(c, b) + 1e-6


def test_bleu_examples():
    assert bleu("the cat sat", "the cat sat", 1) == bleu("the cat sat", "the cat sat", 2) == 1.0
    assert bleu("dog", "the cat", 1) == 0.0
    assert bleu("the cat", "the cat sat", 1) == pytest.approx(math.exp(1 - 3 / 2), abs=1e-9)
    assert bleu("", "x") == 0.0
    assert bleu_report("a b", "a b")["bleu"] == 1.0


def test_bleu_single_token_identical():
    assert bleu_report("True", "True")["bleu"] == 1.0


def test_rouge_examples():
    assert rouge("a b c", "a b c")["rouge"] == 1.0
    assert rouge("a b", "c d")["rouge"] == 0.0
    assert rouge("a b c d", "a c d")["rougeL_f"] == pytest.approx(2 * 0.75 / 1.75, abs=1e-9)
    assert rouge("", "")["rouge"] == 0.0


def test_lcs_oracle():
    def brute(a, b):
        best = 0
        for r in range(len(a) + 1):
            for sub in itertools.combinations(a, r):
                it = iter(b)
                if all(any(x == y for y in it) for x in sub):
                    best = max(best, r)
        return best

    for a, b in [("abcbdab", "bdcaba"), ("", "abc"), ("aaaa", "aa"), ("xyz", "zyx")]:
        assert lcs_length(a, b) == brute(a, b)


words = st.lists(st.sampled_from(["a", "b", "c", "d", "e", "."]), min_size=1, max_size=12).map(" ".join)


@given(words, words)
def test_text_metric_bounds_and_whitespace(c, r):
    for m in (bleu_report(c, r)["bleu"], rouge(c, r)["rouge"]):
        assert 0 <= m <= 1
    assert bleu_report(c + "   ", r)["bleu"] == bleu_report(c, r)["bleu"]
    assert rouge(c + "\n", r)["rouge"] == rouge(c, r)["rouge"]
    assert bleu_report(c, c)["bleu"] == pytest.approx(1.0) and rouge(c, c)["rouge"] == pytest.approx(1.0)
