"""Score annotation texts against mask-derived ground-truth regions."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import EmptyInput, LengthMismatch
from .region import REGION_NAMES

# The mandatory caption prefix is a label signal, not a region mention, so it
# is masked out before any lexicon matching.
_MANDATORY_RE = re.compile(r"this is a (?:real|fake) (?:face|person)", re.IGNORECASE)
_WORD_RE = re.compile(r"[a-z0-9']+")


def load_lexicon(path=None) -> dict[str, frozenset[str]]:
    """Region term sets; the packaged defaults unless a JSON path is given."""
    if path is None:
        raw = json.loads(resources.files("forgetext").joinpath("lexicon.json").read_text())
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    lexicon = {name: frozenset(terms) for name, terms in raw.items()}
    seen: set[str] = set()
    for name, terms in lexicon.items():
        for term in terms:
            if term != term.lower():
                raise ValueError(f"lexicon term {term!r} must be lowercase")
            if term in seen:
                raise ValueError(f"lexicon term {term!r} appears under two regions")
            seen.add(term)
    return lexicon


def extract_region_mentions(text: str, lexicon: dict[str, frozenset[str]]) -> set[str]:
    """Region names whose terms appear as whole words in the text."""
    cleaned = _MANDATORY_RE.sub(" ", text)
    words = set(_WORD_RE.findall(cleaned.lower()))
    return {name for name, terms in lexicon.items() if words & terms}


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    mode: str
    counts: dict[str, dict[str, int]]  # per region: tp / fp / fn
    per_record: tuple[dict, ...]

    def totals(self) -> dict[str, int]:
        return {
            key: sum(c[key] for c in self.counts.values()) for key in ("tp", "fp", "fn")
        }

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mode": self.mode,
            "counts": self.counts,
            "totals": self.totals(),
            "per_record": list(self.per_record),
        }

    def to_table(self) -> str:
        rows = [("region", "tp", "fp", "fn")]
        for name in REGION_NAMES:
            c = self.counts[name]
            rows.append((name, str(c["tp"]), str(c["fp"]), str(c["fn"])))
        totals = self.totals()
        rows.append(("total", str(totals["tp"]), str(totals["fp"]), str(totals["fn"])))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
        lines.append("")
        lines.append(
            f"precision={self.precision:.4f}  recall={self.recall:.4f}  "
            f"f1={self.f1:.4f}  ({self.mode})"
        )
        return "\n".join(lines)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def score_annotations(
    records: list[tuple[str, set[str]]],
    lexicon: dict[str, frozenset[str]] | None = None,
    mode: str = "micro",
) -> EvalReport:
    """Precision/recall/F1 of region mentions against ground-truth region sets.

    Micro mode counts region instances across all records; macro mode
    averages per-record scores. Zero denominators score 0.
    """
    if not records:
        raise EmptyInput("no records to score")
    if mode not in ("micro", "macro"):
        raise ValueError(f"unknown averaging mode {mode!r}")
    lexicon = lexicon if lexicon is not None else load_lexicon()

    counts = {name: {"tp": 0, "fp": 0, "fn": 0} for name in REGION_NAMES}
    per_record = []
    for text, truth in records:
        mentioned = extract_region_mentions(text, lexicon)
        tp = fp = fn = 0
        for name in REGION_NAMES:
            said = name in mentioned
            true = name in truth
            if said and true:
                counts[name]["tp"] += 1
                tp += 1
            elif said and not true:
                counts[name]["fp"] += 1
                fp += 1
            elif true and not said:
                counts[name]["fn"] += 1
                fn += 1
        p, r, f = _prf(tp, fp, fn)
        per_record.append(
            {
                "mentioned": sorted(mentioned),
                "truth": sorted(truth),
                "precision": p,
                "recall": r,
                "f1": f,
            }
        )

    if mode == "micro":
        totals = {key: sum(c[key] for c in counts.values()) for key in ("tp", "fp", "fn")}
        precision, recall, f1 = _prf(totals["tp"], totals["fp"], totals["fn"])
    else:
        n = len(per_record)
        precision = sum(r["precision"] for r in per_record) / n
        recall = sum(r["recall"] for r in per_record) / n
        f1 = sum(r["f1"] for r in per_record) / n
    return EvalReport(precision, recall, f1, mode, counts, tuple(per_record))


def first_label_word(text: str) -> str | None:
    """First whole-word occurrence of 'real' or 'fake', or None."""
    for word in _WORD_RE.findall(text.lower()):
        if word in ("real", "fake"):
            return word
    return None


def response_accuracy(responses: list[str], labels: list[str]) -> float:
    """Fraction of responses whose first decisive word matches the label.

    A response containing neither word, or whose first occurrence is the
    opposite word, counts incorrect.
    """
    if len(responses) != len(labels):
        raise LengthMismatch(f"{len(responses)} responses vs {len(labels)} labels")
    if not responses:
        raise EmptyInput("no responses to score")
    correct = sum(1 for text, label in zip(responses, labels) if first_label_word(text) == label)
    return correct / len(responses)
