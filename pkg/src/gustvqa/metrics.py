"""Answer parsing and scoring for the four question types."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from typing import Iterable, Optional, Sequence

EARTH_RADIUS_KM = 6371.0088

_TRUE = re.compile(r"\btrue\b", re.IGNORECASE)
_FALSE = re.compile(r"\bfalse\b", re.IGNORECASE)
_COORD = re.compile(r"\(\s*([-+]?\d+(?:\.\d+)?)\s*,\s*([-+]?\d+(?:\.\d+)?)\s*\)")
_SENTINELS = {"none", "no notable regions"}


def parse_verification(text: str) -> str:
    """'true', 'false' or 'abstain' (both or neither keyword present)."""
    has_true = bool(_TRUE.search(text or ""))
    has_false = bool(_FALSE.search(text or ""))
    if has_true and not has_false:
        return "true"
    if has_false and not has_true:
        return "false"
    return "abstain"


def f1_verification(preds: Sequence[str], golds: Sequence[bool]) -> dict:
    """Precision/recall/F1 with True as the positive class.

    An abstention is always scored as the wrong label.
    """
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    tp = fp = fn = tn = 0
    for p, g in zip(preds, golds):
        if g:
            if p == "true":
                tp += 1
            else:
                fn += 1
        else:
            if p == "false":
                tn += 1
            else:
                fp += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "tp": tp, "fp": fp, "fn": fn, "tn": tn}


def normalize_name(text: str) -> str:
    chars = [" " if unicodedata.category(c).startswith("P") else c for c in text.lower()]
    out = " ".join("".join(chars).split())
    while out.startswith("the "):
        out = out[4:]
    return out


def parse_name_set(text: str) -> set[str]:
    names = set()
    for piece in re.split(r"[;,\n]", text or ""):
        if ":" in piece:
            piece = piece.rsplit(":", 1)[1]
        name = normalize_name(piece)
        if name and name not in _SENTINELS:
            names.add(name)
    return names


def match_score(x: set, y: set) -> float:
    """Element match score in [-1, 1]: intersection minus symmetric difference, over the union."""
    union = len(x | y)
    if union == 0:
        return 0.0
    return (len(x & y) - (len(x - y) + len(y - x))) / union


def parse_coordinate(text: str) -> Optional[tuple[float, float]]:
    m = _COORD.search(text or "")
    if m is None:
        return None
    lat, lon = float(m.group(1)), float(m.group(2))
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    return (lat, lon)


def haversine(a, b, r: float = EARTH_RADIUS_KM) -> float:
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat1 - lat2) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon1 - lon2) / 2) ** 2
    return 2 * r * math.asin(math.sqrt(min(1.0, h)))


# -- BLEU / ROUGE --------------------------------------------------------------------

_TOKEN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercased words, with each punctuation mark as its own token."""
    return _TOKEN.findall((text or "").lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = 2) -> float:
    """Sentence BLEU with uniform weights up to ``max_n`` and a brevity penalty."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        c_ngrams = _ngrams(cand, n)
        total = sum(c_ngrams.values())
        if total == 0:
            # too short to have n-grams: only an exact copy counts as a match
            if cand == ref:
                continue
            return 0.0
        clipped = sum(min(c, _ngrams(ref, n)[g]) for g, c in c_ngrams.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    bp = math.exp(min(0.0, 1.0 - len(ref) / len(cand)))
    return bp * math.exp(log_sum / max_n)


def bleu_report(candidate: str, reference: str) -> dict:
    b1 = bleu(candidate, reference, 1)
    b2 = bleu(candidate, reference, 2)
    return {"bleu1": b1, "bleu2": b2, "bleu": (b1 + b2) / 2}


def _f(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def _rouge_n(cand: list[str], ref: list[str], n: int) -> float:
    c, r = _ngrams(cand, n), _ngrams(ref, n)
    ct, rt = sum(c.values()), sum(r.values())
    if ct == 0 and rt == 0:
        return 1.0 if cand and cand == ref else 0.0
    if ct == 0 or rt == 0:
        return 0.0
    overlap = sum((c & r).values())
    return _f(overlap / ct, overlap / rt)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str) -> dict:
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return {"rouge1_f": 0.0, "rouge2_f": 0.0, "rougeL_f": 0.0, "rouge": 0.0}
    r1 = _rouge_n(cand, ref, 1)
    r2 = _rouge_n(cand, ref, 2)
    lcs = lcs_length(cand, ref)
    rl = _f(lcs / len(cand), lcs / len(ref))
    return {"rouge1_f": r1, "rouge2_f": r2, "rougeL_f": rl, "rouge": (r1 + r2 + rl) / 3}
