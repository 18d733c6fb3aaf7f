"""Score a prediction file against a gold dataset."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

from . import metrics
from .qagen import QARecord

log = logging.getLogger(__name__)


class EvalError(ValueError):
    pass


def _mean(xs: Sequence[float]) -> Optional[float]:
    return sum(xs) / len(xs) if xs else None


def _index_preds(preds: Sequence[dict]) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, p in enumerate(preds, start=1):
        if "id" not in p or "answer" not in p:
            raise EvalError(f"prediction {i} lacks 'id' or 'answer'")
        pid = str(p["id"])
        if pid in out:
            raise EvalError(f"duplicate prediction id {pid!r}")
        out[pid] = "" if p["answer"] is None else str(p["answer"])
    return out


def evaluate(preds: Sequence[dict], golds: Sequence[QARecord], judge=None) -> tuple[dict, list[dict]]:
    """Return (report, per-record details).

    Gold records without a prediction are scored as an empty answer and
    counted under ``unmatched_gold``. ``judge`` is an optional JudgeClient
    used for description records only.
    """
    gold_by_id: dict[str, QARecord] = {}
    for g in golds:
        if g.id in gold_by_id:
            raise EvalError(f"duplicate gold id {g.id!r}")
        gold_by_id[g.id] = g
    answers = _index_preds(preds)
    missing = sorted(set(answers) - set(gold_by_id))
    if missing:
        raise EvalError(f"{len(missing)} prediction id(s) not in gold, first: {missing[0]!r}")

    details: list[dict] = []
    v_preds, v_golds = [], []
    ms_scores: list[float] = []
    distances: list[float] = []
    geo_fail = 0
    text_scores: list[dict] = []
    desc_items: list[tuple[int, QARecord, str]] = []

    for g in sorted(gold_by_id.values(), key=lambda r: r.id):
        answer = answers.get(g.id, "")
        d = {"id": g.id, "qtype": g.qtype, "matched": g.id in answers}
        if g.qtype == "verification":
            parsed = metrics.parse_verification(answer)
            v_preds.append(parsed)
            v_golds.append(g.answer.strip().lower() == "true")
            d["parsed"] = parsed
            d["correct"] = parsed == ("true" if v_golds[-1] else "false")
        elif g.qtype == "enumeration":
            ms = metrics.match_score(metrics.parse_name_set(g.answer), metrics.parse_name_set(answer))
            ms_scores.append(ms)
            d["match_score"] = ms
        elif g.qtype == "geo_indexing":
            gold_pt = metrics.parse_coordinate(g.answer)
            pred_pt = metrics.parse_coordinate(answer)
            if gold_pt is None:
                raise EvalError(f"gold answer of {g.id!r} is not a coordinate")
            if pred_pt is None:
                geo_fail += 1
                d["parse_failure"] = True
            else:
                km = metrics.haversine(pred_pt, gold_pt)
                distances.append(km)
                d["haversine_km"] = km
        elif g.qtype == "description":
            scores = {**metrics.bleu_report(answer, g.answer), **metrics.rouge(answer, g.answer)}
            text_scores.append(scores)
            d.update(scores)
            desc_items.append((len(details), g, answer))
        else:
            raise EvalError(f"unknown qtype {g.qtype!r} in gold record {g.id!r}")
        details.append(d)

    report: dict = {"records": len(gold_by_id), "unmatched_gold": len(gold_by_id) - len(answers)}

    vf = metrics.f1_verification(v_preds, v_golds)
    report["verification"] = {
        "count": len(v_preds),
        "precision": vf["precision"],
        "recall": vf["recall"],
        "f1": vf["f1"],
        "abstain": v_preds.count("abstain"),
    }
    report["enumeration"] = {"count": len(ms_scores), "mean_ms": _mean(ms_scores)}
    report["geo_indexing"] = {
        "count": len(distances) + geo_fail,
        "mean_haversine_km": _mean(distances),
        "parse_failures": geo_fail,
    }
    desc = {"count": len(text_scores)}
    for key, src in (("bleu", "bleu"), ("bleu1", "bleu1"), ("bleu2", "bleu2"), ("rouge", "rouge"),
                     ("rouge1", "rouge1_f"), ("rouge2", "rouge2_f"), ("rougeL", "rougeL_f")):
        desc[key] = _mean([s[src] for s in text_scores])

    if judge is not None and desc_items:
        outcomes = judge.judge_batch([(g.question, g.answer, ans) for _, g, ans in desc_items])
        totals, sims = [], []
        failures = 0
        for (pos, _, _), out in zip(desc_items, outcomes):
            details[pos]["judge"] = out.to_dict()
            if out.scores is None:
                failures += 1
                log.warning("judge failed for %s: %s", details[pos]["id"], out.error)
                continue
            totals.append(out.scores[0])
            sims.append(out.scores[1])
        desc["judge_total"] = _mean(totals)
        desc["judge_similarity"] = _mean(sims)
        desc["judge_failures"] = failures
    report["description"] = desc
    return report, details
