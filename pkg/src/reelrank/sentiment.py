"""Review-sentiment classifiers and the per-movie positivity score.

Three model kinds over one shared feature pipeline: reviews are tokenized,
count-vectorized, TF-IDF weighted, then L2-normalized per row (normalization
conditions the optimizers and leaves the sign/argmax decision rules
untouched).

- linear_svm: primal subgradient descent on hinge loss + L2
  (lr = 1/(lambda*t), lambda=1e-4, 10 epochs, seeded shuffle)
- logistic_regression: deterministic full-batch gradient descent on log
  loss + L2
- naive_bayes: multinomial with Laplace smoothing alpha=1

The positivity score samples ``sample_size`` reviews per run (without
replacement when enough exist, with replacement otherwise), classifies them,
and averages the positive fraction over ``runs`` seeded runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from . import textvec
from .corpus import ReviewRecord, preprocess_text
from .errors import DataError
from .textvec import TfIdfModel

KINDS = ("linear_svm", "logistic_regression", "naive_bayes")


@dataclass
class TrainOptions:
    seed: int = 0
    svm_lambda: float = 1e-4
    svm_epochs: int = 10
    logreg_lambda: float = 1e-4
    logreg_iters: int = 500
    nb_alpha: float = 1.0


@dataclass
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass
class PositivityScore:
    movie_id: str
    per_run: List[float]
    score: float
    seed: int


@dataclass
class SentimentModel:
    kind: str
    vectorizer: TfIdfModel
    weights: Optional[np.ndarray] = None       # linear kinds: (V,)
    bias: float = 0.0
    class_log_prior: Optional[np.ndarray] = None   # naive_bayes: (2,)
    feature_log_prob: Optional[np.ndarray] = None  # naive_bayes: (2, V)

    def decision_value(self, tokens: Sequence[str]) -> float:
        """Signed score; >= 0 means positive (ties resolve positive)."""
        vec = textvec.transform(self.vectorizer, tokens)
        norm = vec.norm()
        if self.kind == "naive_bayes":
            log_odds = float(self.class_log_prior[1] - self.class_log_prior[0])
            for idx, w in vec.entries.items():
                scaled = w / norm if norm else w
                log_odds += scaled * float(
                    self.feature_log_prob[1, idx] - self.feature_log_prob[0, idx]
                )
            return log_odds
        score = self.bias
        for idx, w in vec.entries.items():
            scaled = w / norm if norm else w
            score += scaled * float(self.weights[idx])
        return score

    def to_dict(self) -> dict:
        data: Dict[str, object] = {
            "kind": self.kind,
            "vectorizer": self.vectorizer.to_dict(),
            "vocab_hash": self.vectorizer.vocabulary_hash(),
        }
        if self.kind == "naive_bayes":
            data["class_log_prior"] = self.class_log_prior.tolist()
            data["feature_log_prob"] = self.feature_log_prob.tolist()
        else:
            data["weights"] = self.weights.tolist()
            data["bias"] = self.bias
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SentimentModel":
        vectorizer = TfIdfModel.from_dict(data["vectorizer"])
        stored_hash = data.get("vocab_hash")
        if stored_hash and stored_hash != vectorizer.vocabulary_hash():
            raise DataError("sentiment model file is corrupt: vocabulary hash mismatch")
        kind = data["kind"]
        if kind == "naive_bayes":
            return cls(
                kind=kind,
                vectorizer=vectorizer,
                class_log_prior=np.asarray(data["class_log_prior"], dtype=np.float64),
                feature_log_prob=np.asarray(data["feature_log_prob"], dtype=np.float64),
            )
        return cls(
            kind=kind,
            vectorizer=vectorizer,
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "SentimentModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def tokenize_review(text: str) -> List[str]:
    return preprocess_text(text, mode="review")


def feature_matrix(model: TfIdfModel, token_docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
    """Stack TF-IDF vectors into a CSR matrix with L2-normalized rows."""
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for tokens in token_docs:
        vec = textvec.transform(model, tokens)
        norm = vec.norm()
        for idx in sorted(vec.entries):
            indices.append(idx)
            data.append(vec.entries[idx] / norm if norm else vec.entries[idx])
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(token_docs), model.dimension),
    )


def _train_linear_svm(x: sp.csr_matrix, y: np.ndarray, opts: TrainOptions) -> Tuple[np.ndarray, float]:
    n, dim = x.shape
    signs = np.where(y == 1, 1.0, -1.0)
    lam = opts.svm_lambda
    rng = np.random.default_rng(opts.seed)
    # Scale trick: w = scale * base, so the per-step shrink is O(1).
    base = np.zeros(dim)
    scale = 1.0
    bias = 0.0
    t = 0
    for _ in range(opts.svm_epochs):
        order = rng.permutation(n)
        for row in order:
            t += 1
            eta = 1.0 / (lam * t)
            start, end = x.indptr[row], x.indptr[row + 1]
            idx = x.indices[start:end]
            vals = x.data[start:end]
            margin = signs[row] * (scale * float(base[idx] @ vals) + bias)
            shrink = 1.0 - eta * lam
            if shrink == 0.0:
                base[:] = 0.0
                scale = 1.0
            else:
                scale *= shrink
            if margin < 1.0:
                base[idx] += (eta * signs[row] / scale) * vals
                bias += eta * signs[row]
    return scale * base, bias


def _train_logistic(x: sp.csr_matrix, y: np.ndarray, opts: TrainOptions) -> Tuple[np.ndarray, float]:
    n, dim = x.shape
    lam = opts.logreg_lambda
    w = np.zeros(dim)
    bias = 0.0
    # Rows are unit-norm, so the logistic Hessian is bounded by 1/4 + lambda.
    lr = 1.0 / (0.25 + lam)
    for _ in range(opts.logreg_iters):
        z = x @ w + bias
        prob = 1.0 / (1.0 + np.exp(-z))
        err = (prob - y) / n
        grad_w = x.T @ err + lam * w
        grad_b = float(err.sum())
        w -= lr * grad_w
        bias -= lr * grad_b
    return w, bias


def _train_naive_bayes(x: sp.csr_matrix, y: np.ndarray, opts: TrainOptions) -> Tuple[np.ndarray, np.ndarray]:
    alpha = opts.nb_alpha
    dim = x.shape[1]
    priors = np.empty(2)
    log_prob = np.empty((2, dim))
    for cls in (0, 1):
        mask = y == cls
        priors[cls] = math.log(mask.sum() / len(y))
        totals = np.asarray(x[mask].sum(axis=0)).ravel() + alpha
        log_prob[cls] = np.log(totals) - math.log(totals.sum())
    return priors, log_prob


def train(
    kind: str,
    train_set: Sequence[ReviewRecord],
    options: Optional[TrainOptions] = None,
) -> SentimentModel:
    """Fit a sentiment model on labeled reviews.

    Raises on an unknown kind, a single-class training set, or an empty
    vocabulary after preprocessing.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown model kind: {kind!r} (choose from {KINDS})")
    opts = options or TrainOptions()
    labeled = [(tokenize_review(r.text), r.label) for r in train_set if r.label is not None]
    if not labeled:
        raise DataError("training set has no labeled reviews")
    labels = np.array([lab for _, lab in labeled], dtype=np.int64)
    if len(set(labels.tolist())) < 2:
        raise DataError("training set must contain both classes")

    vectorizer = textvec.fit_tfidf([tokens for tokens, _ in labeled])
    x = feature_matrix(vectorizer, [tokens for tokens, _ in labeled])

    if kind == "linear_svm":
        weights, bias = _train_linear_svm(x, labels, opts)
        return SentimentModel(kind=kind, vectorizer=vectorizer, weights=weights, bias=bias)
    if kind == "logistic_regression":
        weights, bias = _train_logistic(x, labels, opts)
        return SentimentModel(kind=kind, vectorizer=vectorizer, weights=weights, bias=bias)
    priors, log_prob = _train_naive_bayes(x, labels, opts)
    return SentimentModel(
        kind=kind, vectorizer=vectorizer, class_log_prior=priors, feature_log_prob=log_prob
    )


def predict(model: SentimentModel, review: Sequence[str]) -> int:
    """Classify one tokenized review; 1 = positive. Ties resolve positive."""
    return 1 if model.decision_value(review) >= 0.0 else 0


def predict_text(model: SentimentModel, text: str) -> int:
    return predict(model, tokenize_review(text))


def evaluate(predictions: Sequence[int], truth: Sequence[int]) -> MetricsReport:
    """Confusion counts plus accuracy/precision/recall/F1; positive class is 1.

    Undefined ratios (zero denominators) are reported as 0.
    """
    if len(predictions) != len(truth):
        raise ValueError("predictions and truth must have equal length")
    if not predictions:
        raise ValueError("cannot evaluate zero predictions")
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    tp = int(np.sum((pred == 1) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / len(pred)
    return MetricsReport(
        tp=tp, tn=tn, fp=fp, fn=fn,
        accuracy=accuracy, precision=precision, recall=recall, f1=f1,
    )


def positivity_score(
    model: SentimentModel,
    reviews: Sequence[ReviewRecord],
    sample_size: int = 50,
    runs: int = 10,
    seed: int = 0,
    movie_id: Optional[str] = None,
) -> PositivityScore:
    """Mean positive fraction over seeded review samples.

    Each run gets an independent child seed, so runs could execute in
    parallel without changing the result.
    """
    if not reviews:
        raise DataError("positivity score needs at least one review")
    token_docs = [tokenize_review(r.text) for r in reviews]
    child_seeds = np.random.SeedSequence(seed).spawn(runs)
    per_run: List[float] = []
    for child in child_seeds:
        rng = np.random.default_rng(child)
        replace = len(reviews) < sample_size
        chosen = rng.choice(len(reviews), size=sample_size, replace=replace)
        positive = sum(predict(model, token_docs[i]) for i in chosen)
        per_run.append(positive / sample_size)
    return PositivityScore(
        movie_id=movie_id if movie_id is not None else reviews[0].movie_id,
        per_run=per_run,
        score=float(np.mean(per_run)),
        seed=seed,
    )


def stratified_split(
    reviews: Sequence[ReviewRecord], test_fraction: float = 0.2, seed: int = 0
) -> Tuple[List[ReviewRecord], List[ReviewRecord]]:
    """Seeded stratified train/test split over labeled reviews."""
    rng = np.random.default_rng(seed)
    train: List[ReviewRecord] = []
    test: List[ReviewRecord] = []
    for cls in (0, 1):
        members = [r for r in reviews if r.label == cls]
        order = rng.permutation(len(members))
        n_test = int(round(len(members) * test_fraction))
        test.extend(members[i] for i in order[:n_test])
        train.extend(members[i] for i in order[n_test:])
    return train, test
