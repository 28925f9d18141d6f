"""Runtime query parser: an averaged structured-perceptron slot tagger.

Queries are labeled token-by-token with a BIO scheme derived from the tag
schema (``B-COLOR``, ``I-COLOR``, ... plus ``O``, ``NUM`` and the comparison
phrasing labels ``OP-LT``/``OP-GT``). Decoding is exact Viterbi over emission
and transition weights; the top-2 score margin feeds a monotone calibration
table that turns it into a confidence in [0, 1]. Labeled spans become atoms
by lookup in a gazetteer built from the knowledge base's vocabularies plus
surface aliases harvested from the training alignments.

The train/parse/evaluate contracts are deliberately architecture-agnostic:
anything that maps a query to a logical form with a confidence can replace
this tagger.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .catalog import PRICE, KnowledgeBase
from .errors import SchemaMismatchError, TrainingError
from .forms import Atom, Comparison, LogicalForm, Predicate
from .grammar import SynthTriple, dataset_hash
from .text import is_number, tokenize

START = "<s>"
END = "</s>"
OP_LABELS = {"<": "OP-LT", "<=": "OP-LT", ">": "OP-GT", ">=": "OP-GT"}


@dataclass(frozen=True)
class TrainingConfig:
    seed: int = 13
    epochs: int = 5
    calibration_split: float = 0.1
    use_prev_next: bool = True
    use_shape: bool = True
    use_gazetteer: bool = True


@dataclass(frozen=True)
class CalibrationTable:
    """Step function from decode margin to confidence; non-decreasing."""

    lower_bounds: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, margin: float) -> float:
        idx = bisect.bisect_right(self.lower_bounds, margin) - 1
        return self.values[max(idx, 0)]


@dataclass(frozen=True)
class ParserModel:
    labels: tuple[str, ...]
    weights: Mapping[tuple[str, str], float]
    transitions: Mapping[tuple[str, str], float]
    gazetteer: Mapping[str, tuple[tuple[str, str], ...]]
    token_kinds: Mapping[str, tuple[str, ...]]
    calibration: CalibrationTable
    schema_fingerprint: str
    dataset_hash: str
    config: TrainingConfig
    metadata: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ParseResult:
    form: LogicalForm
    confidence: float
    labeled: tuple[tuple[str, str], ...]
    margin: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ParseFailure:
    reason: str


@dataclass(frozen=True)
class ParserMetrics:
    exact_match: float
    failure_rate: float
    per_kind: Mapping[str, tuple[float, float, float]]  # precision, recall, f1
    n: int


def label_set(kinds: Sequence[str]) -> tuple[str, ...]:
    labels = ["O", "NUM", "OP-LT", "OP-GT"]
    for kind in sorted(k for k in kinds if k != PRICE):
        labels.extend([f"B-{kind}", f"I-{kind}"])
    return tuple(labels)


def _shape(token: str) -> str:
    classes = ("d" if ch.isdigit() else "." if ch == "." else "a" for ch in token)
    return "".join(ch for ch, _ in groupby(classes))


def _features(
    tokens: Sequence[str],
    i: int,
    token_kinds: Mapping[str, tuple[str, ...]],
    config: TrainingConfig,
) -> list[str]:
    token = tokens[i]
    feats = [f"w={token}"]
    if config.use_shape:
        feats.append(f"shape={_shape(token)}")
    if is_number(token):
        feats.append("isnum")
    if config.use_prev_next:
        feats.append(f"prev={tokens[i - 1] if i > 0 else START}")
        feats.append(f"next={tokens[i + 1] if i + 1 < len(tokens) else END}")
    if config.use_gazetteer:
        for kind in token_kinds.get(token, ()):
            feats.append(f"gaz={kind}")
    return feats


def gold_labels(triple: SynthTriple) -> list[str]:
    tokens = tokenize(triple.query)
    labels = ["O"] * len(tokens)
    by_atom: dict[int, list[int]] = {}
    for token_index, atom_index in triple.alignment:
        by_atom.setdefault(atom_index, []).append(token_index)
    for atom_index, positions in by_atom.items():
        atom = triple.form.atoms[atom_index]
        positions = sorted(positions)
        if isinstance(atom, Predicate):
            labels[positions[0]] = f"B-{atom.kind}"
            for p in positions[1:]:
                labels[p] = f"I-{atom.kind}"
        else:
            for p in positions:
                labels[p] = "NUM" if is_number(tokens[p]) else OP_LABELS[atom.op]
    return labels


def build_gazetteer(
    kb: KnowledgeBase, triples: Sequence[SynthTriple]
) -> tuple[dict[str, tuple[tuple[str, str], ...]], dict[str, tuple[str, ...]]]:
    """Surface n-gram -> (kind, canonical value) entries.

    Knowledge-base vocabulary values map to themselves; training alignments
    contribute alias surfaces (synonym-augmented queries) that still resolve
    to in-vocabulary values.
    """
    entries: dict[str, set[tuple[str, str]]] = {}
    for kind in kb.schema.categorical_kinds:
        for value in kb.vocab.get(kind, frozenset()):
            entries.setdefault(value, set()).add((kind, value))
    for triple in triples:
        tokens = tokenize(triple.query)
        by_atom: dict[int, list[int]] = {}
        for token_index, atom_index in triple.alignment:
            by_atom.setdefault(atom_index, []).append(token_index)
        for atom_index, positions in by_atom.items():
            atom = triple.form.atoms[atom_index]
            if not isinstance(atom, Predicate):
                continue
            surface = " ".join(tokens[p] for p in sorted(positions))
            entries.setdefault(surface, set()).add((atom.kind, atom.value))
    gazetteer = {key: tuple(sorted(vals)) for key, vals in entries.items()}
    token_kinds: dict[str, set[str]] = {}
    for key, vals in gazetteer.items():
        for token in key.split(" "):
            token_kinds.setdefault(token, set()).update(kind for kind, _ in vals)
    return gazetteer, {t: tuple(sorted(ks)) for t, ks in token_kinds.items()}


def _emission_scores(
    feats: Sequence[Sequence[str]],
    labels: Sequence[str],
    weights: Mapping[tuple[str, str], float],
) -> list[list[float]]:
    scores = []
    for token_feats in feats:
        row = []
        for label in labels:
            row.append(sum(weights.get((f, label), 0.0) for f in token_feats))
        scores.append(row)
    return scores


def viterbi_decode(
    emit: Sequence[Sequence[float]],
    labels: Sequence[str],
    transitions: Mapping[tuple[str, str], float],
) -> tuple[list[str], float, float]:
    """Exact best labeling plus the best and second-best sequence scores.

    A sequence score is the sum of emission scores and of transition weights
    including the start and end transitions. The two-slot lattice keeps the
    top two distinct paths per state, which is enough to read off the global
    runner-up for the confidence margin.
    """
    n, L = len(emit), len(labels)
    NEG = -math.inf
    # lattice[i][l] = ((score1, back1), (score2, back2)); back = (prev_label, slot)
    lattice: list[list[tuple[tuple[float, tuple[int, int]], tuple[float, tuple[int, int]]]]] = []
    first = []
    for l in range(L):
        s = emit[0][l] + transitions.get((START, labels[l]), 0.0)
        first.append(((s, (-1, 0)), (NEG, (-1, 0))))
    lattice.append(first)
    for i in range(1, n):
        row = []
        for l in range(L):
            trans_to_l = [transitions.get((labels[p], labels[l]), 0.0) for p in range(L)]
            best1 = (NEG, (-1, 0))
            best2 = (NEG, (-1, 0))
            for p in range(L):
                base = trans_to_l[p]
                for slot in (0, 1):
                    prev_score = lattice[i - 1][p][slot][0]
                    if prev_score == NEG:
                        continue
                    cand = (prev_score + base, (p, slot))
                    if cand[0] > best1[0]:
                        best2 = best1
                        best1 = cand
                    elif cand[0] > best2[0]:
                        best2 = cand
            e = emit[i][l]
            row.append(((best1[0] + e, best1[1]), (best2[0] + e, best2[1])))
        lattice.append(row)

    finals: list[tuple[float, int, int]] = []
    for l in range(L):
        end_w = transitions.get((labels[l], END), 0.0)
        for slot in (0, 1):
            score = lattice[n - 1][l][slot][0]
            if score > NEG:
                finals.append((score + end_w, l, slot))
    finals.sort(key=lambda item: (-item[0], item[1], item[2]))
    best_score, l, slot = finals[0]
    second_score = finals[1][0] if len(finals) > 1 else NEG

    path = [l]
    for i in range(n - 1, 0, -1):
        l, slot = lattice[i][l][slot][1]
        path.append(l)
    path.reverse()
    return [labels[l] for l in path], best_score, second_score


def _spans(labels: Sequence[str]) -> list[tuple[str, int, int]]:
    """(kind, start, end-exclusive) spans; stray I- labels open a span."""
    spans = []
    current: Optional[tuple[str, int]] = None
    for i, label in enumerate(labels):
        if label.startswith("B-") or label.startswith("I-"):
            kind = label[2:]
            if label.startswith("B-") or current is None or current[0] != kind:
                if current is not None:
                    spans.append((current[0], current[1], i))
                current = (kind, i)
        else:
            if current is not None:
                spans.append((current[0], current[1], i))
                current = None
    if current is not None:
        spans.append((current[0], current[1], len(labels)))
    return spans


def train(
    triples: Sequence[SynthTriple], config: TrainingConfig, kb: KnowledgeBase
) -> ParserModel:
    """Averaged-perceptron training, deterministic under ``config.seed``.

    A calibration slice is reserved before training; after the weights are
    averaged it provides both the margin-to-confidence table and the
    reported exact-match estimate (``metadata["calibration_exact_match"]``).
    """
    if not triples:
        raise TrainingError("no training triples")
    labels = label_set(kb.schema.kinds)
    label_index = {label: i for i, label in enumerate(labels)}

    examples = []
    all_gold: set[str] = set()
    for triple in triples:
        tokens = tokenize(triple.query)
        gold = gold_labels(triple)
        all_gold.update(gold)
        examples.append((tokens, gold, triple))
    if len(all_gold) < 2:
        raise TrainingError(f"degenerate training data: every token is labeled {all_gold}")

    gazetteer, token_kinds = build_gazetteer(kb, triples)
    feature_cache = [
        [_features(tokens, i, token_kinds, config) for i in range(len(tokens))]
        for tokens, _, _ in examples
    ]

    rng = random.Random(config.seed)
    order = list(range(len(examples)))
    rng.shuffle(order)
    cal_n = min(int(len(examples) * config.calibration_split), len(examples) - 1)
    cal_idx, train_idx = order[:cal_n], order[cal_n:]

    weights: dict[tuple[str, str], float] = {}
    w_acc: dict[tuple[str, str], float] = {}
    trans: dict[tuple[str, str], float] = {}
    t_acc: dict[tuple[str, str], float] = {}
    counter = 1

    def bump(table, acc, key, delta):
        table[key] = table.get(key, 0.0) + delta
        acc[key] = acc.get(key, 0.0) + counter * delta

    for _ in range(config.epochs):
        rng.shuffle(train_idx)
        for idx in train_idx:
            tokens, gold, _ = examples[idx]
            feats = feature_cache[idx]
            emit = _emission_scores(feats, labels, weights)
            pred, _, _ = viterbi_decode(emit, labels, trans)
            if pred != gold:
                for i, (g, p) in enumerate(zip(gold, pred)):
                    if g != p:
                        for f in feats[i]:
                            bump(weights, w_acc, (f, g), 1.0)
                            bump(weights, w_acc, (f, p), -1.0)
                gold_seq = [START] + gold + [END]
                pred_seq = [START] + pred + [END]
                for a, b in zip(gold_seq, gold_seq[1:]):
                    bump(trans, t_acc, (a, b), 1.0)
                for a, b in zip(pred_seq, pred_seq[1:]):
                    bump(trans, t_acc, (a, b), -1.0)
            counter += 1

    avg_weights = {
        k: v - w_acc.get(k, 0.0) / counter for k, v in weights.items() if v or w_acc.get(k)
    }
    avg_trans = {
        k: v - t_acc.get(k, 0.0) / counter for k, v in trans.items() if v or t_acc.get(k)
    }

    margins: list[tuple[float, bool]] = []
    for idx in cal_idx:
        tokens, gold, triple = examples[idx]
        emit = _emission_scores(feature_cache[idx], labels, avg_weights)
        pred, best, second = viterbi_decode(emit, labels, avg_trans)
        margin = best - second if second > -math.inf else math.inf
        atoms, _ = _labels_to_atoms(tokens, pred, emit, label_index, gazetteer)
        correct = bool(atoms) and LogicalForm.make(atoms) == triple.form
        margins.append((margin, correct))
    calibration = _fit_calibration(margins)
    cal_exact = (
        sum(1 for _, ok in margins if ok) / len(margins) if margins else float("nan")
    )

    return ParserModel(
        labels=labels,
        weights=avg_weights,
        transitions=avg_trans,
        gazetteer=gazetteer,
        token_kinds=token_kinds,
        calibration=calibration,
        schema_fingerprint=kb.fingerprint,
        dataset_hash=dataset_hash(triples),
        config=config,
        metadata={
            "calibration_exact_match": cal_exact,
            "training_examples": float(len(train_idx)),
        },
    )


def _fit_calibration(margins: Sequence[tuple[float, bool]], bins: int = 10) -> CalibrationTable:
    finite = sorted(m for m, _ in margins if m < math.inf)
    if len(margins) < bins or not finite:
        base = (
            sum(1 for _, ok in margins if ok) / len(margins) if margins else 1.0
        )
        return CalibrationTable(lower_bounds=(0.0,), values=(max(base, 0.5),))
    bounds = [0.0]
    for k in range(1, bins):
        bounds.append(finite[min(int(len(finite) * k / bins), len(finite) - 1)])
    bounds = sorted(set(bounds))
    totals = [0] * len(bounds)
    hits = [0] * len(bounds)
    for margin, ok in margins:
        idx = max(bisect.bisect_right(bounds, margin) - 1, 0)
        totals[idx] += 1
        hits[idx] += 1 if ok else 0
    values: list[float] = []
    running = 0.0
    for total, hit in zip(totals, hits):
        rate = hit / total if total else running
        running = max(running, rate)
        values.append(running)
    return CalibrationTable(lower_bounds=tuple(bounds), values=tuple(values))


def _labels_to_atoms(
    tokens: Sequence[str],
    labels: Sequence[str],
    emit: Sequence[Sequence[float]],
    label_index: Mapping[str, int],
    gazetteer: Mapping[str, tuple[tuple[str, str], ...]],
) -> tuple[list[Atom], list[str]]:
    candidates: list[tuple[str, Atom, float, int]] = []  # kind, atom, score, position
    warnings: list[str] = []
    for kind, start, end in _spans(labels):
        surface = " ".join(tokens[start:end])
        values = [v for k, v in gazetteer.get(surface, ()) if k == kind]
        if not values:
            warnings.append(f"span {surface!r} not resolvable as {kind}")
            continue
        score = sum(emit[i][label_index[labels[i]]] for i in range(start, end))
        candidates.append((kind, Predicate(kind, sorted(values)[0]), score, start))
    for i, label in enumerate(labels):
        if label in ("OP-LT", "OP-GT") and i + 1 < len(tokens) and labels[i + 1] == "NUM":
            op = "<" if label == "OP-LT" else ">"
            score = emit[i][label_index[label]] + emit[i + 1][label_index["NUM"]]
            candidates.append(
                (PRICE, Comparison(PRICE, op, float(tokens[i + 1])), score, i)
            )

    chosen: dict[str, tuple[Atom, float, int]] = {}
    for kind, atom, score, position in candidates:
        held = chosen.get(kind)
        if held is None:
            chosen[kind] = (atom, score, position)
            continue
        warnings.append(f"kept only the highest-scoring of duplicate {kind} spans")
        if score > held[1]:
            chosen[kind] = (atom, score, position)
    return [atom for atom, _, _ in chosen.values()], warnings


def parse(model: ParserModel, query: str) -> ParseResult | ParseFailure:
    """Label the query, resolve spans to atoms, calibrate the confidence.

    Returns :class:`ParseFailure` (a value, not an error) when nothing in the
    query resolves against the gazetteer — the caller decides what tier
    handles it. An empty query is a caller bug and raises.
    """
    tokens = tokenize(query)
    if not tokens:
        raise ValueError("empty query")
    label_index = {label: i for i, label in enumerate(model.labels)}
    feats = [_features(tokens, i, model.token_kinds, model.config) for i in range(len(tokens))]
    emit = _emission_scores(feats, model.labels, model.weights)
    labels, best, second = viterbi_decode(emit, model.labels, model.transitions)
    margin = best - second if second > -math.inf else math.inf
    atoms, warnings = _labels_to_atoms(tokens, labels, emit, label_index, model.gazetteer)
    if not atoms:
        return ParseFailure(reason="no gazetteer-resolvable span in query")
    return ParseResult(
        form=LogicalForm.make(atoms),
        confidence=model.calibration(margin),
        labeled=tuple(zip(tokens, labels)),
        margin=margin,
        warnings=tuple(warnings),
    )


def evaluate(model: ParserModel, heldout: Sequence[SynthTriple]) -> ParserMetrics:
    if not heldout:
        raise ValueError("empty heldout set")
    exact = 0
    failures = 0
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for triple in heldout:
        result = parse(model, triple.query)
        gold_atoms: set[Atom] = set(triple.form.atoms)
        if isinstance(result, ParseFailure):
            failures += 1
            predicted: set[Atom] = set()
        else:
            predicted = set(result.form.atoms)
            if result.form == triple.form:
                exact += 1
        for atom in predicted:
            kind = atom.kind if isinstance(atom, Predicate) else atom.attribute
            if atom in gold_atoms:
                tp[kind] = tp.get(kind, 0) + 1
            else:
                fp[kind] = fp.get(kind, 0) + 1
        for atom in gold_atoms - predicted:
            kind = atom.kind if isinstance(atom, Predicate) else atom.attribute
            fn[kind] = fn.get(kind, 0) + 1

    per_kind = {}
    for kind in sorted(set(tp) | set(fp) | set(fn)):
        p_den = tp.get(kind, 0) + fp.get(kind, 0)
        r_den = tp.get(kind, 0) + fn.get(kind, 0)
        precision = tp.get(kind, 0) / p_den if p_den else 0.0
        recall = tp.get(kind, 0) / r_den if r_den else 0.0
        f1 = (
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
        per_kind[kind] = (precision, recall, f1)
    return ParserMetrics(
        exact_match=exact / len(heldout),
        failure_rate=failures / len(heldout),
        per_kind=per_kind,
        n=len(heldout),
    )


# --- model artifact ----------------------------------------------------------

def save_model(model: ParserModel, path: str | Path) -> None:
    weights: dict[str, dict[str, float]] = {}
    for (feature, label), w in model.weights.items():
        weights.setdefault(feature, {})[label] = w
    transitions: dict[str, dict[str, float]] = {}
    for (a, b), w in model.transitions.items():
        transitions.setdefault(a, {})[b] = w
    payload = {
        "format": "shopql-parser/1",
        "labels": list(model.labels),
        "weights": weights,
        "transitions": transitions,
        "gazetteer": {k: [list(e) for e in v] for k, v in model.gazetteer.items()},
        "token_kinds": {k: list(v) for k, v in model.token_kinds.items()},
        "calibration": {
            "lower_bounds": list(model.calibration.lower_bounds),
            "values": list(model.calibration.values),
        },
        "schema_fingerprint": model.schema_fingerprint,
        "dataset_hash": model.dataset_hash,
        "config": {
            "seed": model.config.seed,
            "epochs": model.config.epochs,
            "calibration_split": model.config.calibration_split,
            "use_prev_next": model.config.use_prev_next,
            "use_shape": model.config.use_shape,
            "use_gazetteer": model.config.use_gazetteer,
        },
        "metadata": dict(model.metadata),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, expected_fingerprint: Optional[str] = None) -> ParserModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format") != "shopql-parser/1":
        raise ValueError(f"{path}: not a parser model file")
    if expected_fingerprint and data["schema_fingerprint"] != expected_fingerprint:
        raise SchemaMismatchError(
            f"model schema fingerprint {data['schema_fingerprint']} does not match "
            f"the active knowledge base ({expected_fingerprint})"
        )
    weights = {
        (feature, label): w
        for feature, row in data["weights"].items()
        for label, w in row.items()
    }
    transitions = {
        (a, b): w for a, row in data["transitions"].items() for b, w in row.items()
    }
    return ParserModel(
        labels=tuple(data["labels"]),
        weights=weights,
        transitions=transitions,
        gazetteer={k: tuple(tuple(e) for e in v) for k, v in data["gazetteer"].items()},
        token_kinds={k: tuple(v) for k, v in data["token_kinds"].items()},
        calibration=CalibrationTable(
            lower_bounds=tuple(data["calibration"]["lower_bounds"]),
            values=tuple(data["calibration"]["values"]),
        ),
        schema_fingerprint=data["schema_fingerprint"],
        dataset_hash=data["dataset_hash"],
        config=TrainingConfig(**data["config"]),
        metadata=data["metadata"],
    )
