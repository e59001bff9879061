"""Sequential early-exit classifier chains over staged feature sets.

A chain trains one L2-regularized logistic model per stage on the
cumulative feature set (stage j sees every feature acquired in stages
1..j).  At inference an input moves down the chain, paying only for the
features each new stage acquires, and exits at the first stage whose top
class probability reaches the confidence threshold.  An input that
reaches the final stage still unsure is rejected -- but has already paid
for the whole chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "StagePlan",
    "LogisticModel",
    "Standardizer",
    "StageChain",
    "EvaluationTrace",
    "BatchEvaluation",
    "fit_logistic",
    "train_chain",
]


@dataclass(frozen=True)
class StagePlan:
    """Ordered partition of feature indices into chain stages."""

    stages: tuple[tuple[int, ...], ...]
    n_features: int

    def __post_init__(self) -> None:
        if len(self.stages) == 0:
            raise ValueError("plan needs at least one stage")
        seen: set[int] = set()
        for j, stage in enumerate(self.stages):
            if len(stage) == 0:
                raise ValueError(f"stage {j} is empty")
            for f in stage:
                if not 0 <= f < self.n_features:
                    raise ValueError(f"feature index {f} out of range [0, {self.n_features})")
                if f in seen:
                    raise ValueError(f"feature {f} assigned to more than one stage")
                seen.add(f)
        if len(seen) != self.n_features:
            missing = sorted(set(range(self.n_features)) - seen)
            raise ValueError(f"features {missing} not assigned to any stage")

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @cached_property
    def cumulative(self) -> tuple[tuple[int, ...], ...]:
        """Feature indices available at each stage (union of stages 1..j)."""
        out: list[tuple[int, ...]] = []
        acc: list[int] = []
        for stage in self.stages:
            acc.extend(stage)
            out.append(tuple(sorted(acc)))
        return tuple(out)

    @classmethod
    def from_chromosome(cls, chromosome) -> "StagePlan":
        """Build the plan a canonical chromosome encodes."""
        return cls(chromosome.stage_feature_sets(), chromosome.n_features)

    @classmethod
    def single_stage(cls, n_features: int) -> "StagePlan":
        return cls((tuple(range(n_features)),), n_features)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score transform with statistics frozen at fit time."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # constant columns pass through unscaled instead of dividing by zero
        scale = np.where(scale == 0.0, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class LogisticModel:
    """Multinomial logistic model with the lowest class as score reference.

    For K classes the model keeps K-1 weight rows; class probabilities are
    the softmax of [0, x.w_1 + b_1, ..., x.w_{K-1} + b_{K-1}], so they sum
    to one by construction.  Binary problems reduce to standard logistic
    regression.
    """

    classes_: np.ndarray
    coef_: np.ndarray  # (K-1, d)
    intercept_: np.ndarray  # (K-1,)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        scores = X @ self.coef_.T + self.intercept_
        logits = np.hstack([np.zeros((X.shape[0], 1)), scores])
        logits -= logits.max(axis=1, keepdims=True)
        np.exp(logits, out=logits)
        logits /= logits.sum(axis=1, keepdims=True)
        return logits


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 1.0,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> LogisticModel:
    """Fit by full-batch Newton iteration with backtracking.

    Minimizes the summed negative log-likelihood plus (lam/2)*||W||^2 with
    the intercepts left unregularized.  Iteration stops when the gradient
    sup-norm falls to ``tol`` or after ``max_iter`` Newton steps; both the
    objective and the update are deterministic, so refitting on the same
    data reproduces the same model bit for bit.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"shape mismatch: X {X.shape} vs y {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if lam < 0:
        raise ValueError(f"regularization strength must be >= 0, got {lam}")
    classes, y_idx = np.unique(y, return_inverse=True)
    n_classes = len(classes)
    if n_classes < 2:
        raise ValueError("training labels are all one class; need at least two")

    n, d = X.shape
    m = n_classes - 1  # parameterized classes
    p = d + 1  # weights + intercept per class
    Xt = np.hstack([X, np.ones((n, 1))])
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_idx] = 1.0
    theta = np.zeros((m, p))

    def probabilities(params: np.ndarray) -> np.ndarray:
        logits = np.hstack([np.zeros((n, 1)), Xt @ params.T])
        logits -= logits.max(axis=1, keepdims=True)
        np.exp(logits, out=logits)
        logits /= logits.sum(axis=1, keepdims=True)
        return logits

    def objective(params: np.ndarray) -> float:
        logits = np.hstack([np.zeros((n, 1)), Xt @ params.T])
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        nll = float(np.sum(log_norm - shifted[np.arange(n), y_idx]))
        return nll + 0.5 * lam * float(np.sum(params[:, :d] ** 2))

    obj = objective(theta)
    for _ in range(max_iter):
        probs = probabilities(theta)
        grad = (Xt.T @ (probs[:, 1:] - onehot[:, 1:])).T  # (m, p)
        grad[:, :d] += lam * theta[:, :d]
        if np.max(np.abs(grad)) <= tol:
            break

        hess = np.zeros((m * p, m * p))
        for a in range(m):
            pa = probs[:, a + 1]
            for b in range(a, m):
                pb = probs[:, b + 1]
                curvature = pa * ((1.0 if a == b else 0.0) - pb)
                block = Xt.T @ (Xt * curvature[:, None])
                hess[a * p : (a + 1) * p, b * p : (b + 1) * p] = block
                if b != a:
                    hess[b * p : (b + 1) * p, a * p : (a + 1) * p] = block
        weight_coords = np.concatenate([np.arange(a * p, a * p + d) for a in range(m)])
        hess[weight_coords, weight_coords] += lam

        flat_grad = grad.ravel()
        try:
            step = np.linalg.solve(hess, flat_grad).reshape(m, p)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, flat_grad, rcond=None)[0].reshape(m, p)

        scale = 1.0
        for _ in range(50):
            candidate = theta - scale * step
            cand_obj = objective(candidate)
            if cand_obj <= obj:
                break
            scale *= 0.5
        else:
            break  # no descent left at the smallest step; treat as converged
        theta, obj = candidate, cand_obj

    return LogisticModel(
        classes_=classes, coef_=theta[:, :d].copy(), intercept_=theta[:, d].copy()
    )


@dataclass(frozen=True)
class EvaluationTrace:
    """Outcome of pushing one input through the chain.

    exit_stage is 1-based.  A rejected input carries no label but has
    incurred the full chain cost; its confidence field records the
    (sub-threshold) top probability at the final stage.
    """

    exit_stage: int
    accepted: bool
    predicted_label: object
    confidence: float
    incurred_cost: float


@dataclass
class BatchEvaluation:
    """Vectorized traces for a matrix of inputs (arrays indexed per row).

    ``predicted`` always holds the exit-stage argmax label; it is only
    meaningful where ``accepted`` is True.
    """

    exit_stage: np.ndarray
    accepted: np.ndarray
    predicted: np.ndarray
    confidence: np.ndarray
    incurred_cost: np.ndarray


@dataclass
class StageChain:
    """A trained chain: one model per stage plus acquisition accounting."""

    plan: StagePlan
    models: tuple
    threshold: float
    classes_: np.ndarray
    stage_costs: tuple[float, ...]  # cost newly acquired at each stage
    scaler: Standardizer | None = None
    cumulative_costs: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        if not 0.5 <= self.threshold < 1.0:
            raise ValueError(f"confidence threshold must lie in [0.5, 1), got {self.threshold}")
        if len(self.models) != self.plan.n_stages or len(self.stage_costs) != self.plan.n_stages:
            raise ValueError("need exactly one model and one stage cost per stage")
        acc, prefix = 0.0, []
        for c in self.stage_costs:
            acc += c
            prefix.append(acc)
        self.cumulative_costs = tuple(prefix)

    @property
    def n_stages(self) -> int:
        return self.plan.n_stages

    @property
    def total_cost(self) -> float:
        return self.cumulative_costs[-1]

    def stage_probabilities(self, X: np.ndarray) -> list[np.ndarray]:
        """Class probabilities at every stage for every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.plan.n_features:
            raise ValueError(
                f"expected {self.plan.n_features} features, got {X.shape[1]}"
            )
        Xs = self.scaler.transform(X) if self.scaler is not None else X
        return [
            model.predict_proba(Xs[:, list(cols)])
            for model, cols in zip(self.models, self.plan.cumulative)
        ]

    def evaluate(self, x: np.ndarray) -> EvaluationTrace:
        """Walk one input down the chain, stopping at the first confident stage."""
        probs = self.stage_probabilities(np.asarray(x, dtype=np.float64).reshape(1, -1))
        for j, stage_p in enumerate(probs):
            row = stage_p[0]
            confidence = float(row.max())
            if confidence >= self.threshold:
                label = self.classes_[int(np.argmax(row))]  # ties: lowest class index
                return EvaluationTrace(
                    exit_stage=j + 1,
                    accepted=True,
                    predicted_label=label.item() if hasattr(label, "item") else label,
                    confidence=confidence,
                    incurred_cost=self.cumulative_costs[j],
                )
        last = probs[-1][0]
        return EvaluationTrace(
            exit_stage=self.n_stages,
            accepted=False,
            predicted_label=None,
            confidence=float(last.max()),
            incurred_cost=self.cumulative_costs[-1],
        )

    def evaluate_batch(self, X: np.ndarray) -> BatchEvaluation:
        """Vectorized version of ``evaluate`` for a whole matrix."""
        probs = self.stage_probabilities(X)
        n = probs[0].shape[0]
        confidences = np.stack([p.max(axis=1) for p in probs], axis=1)  # (n, S)
        meets = confidences >= self.threshold
        any_accept = meets.any(axis=1)
        first_accept = np.argmax(meets, axis=1)  # 0 where no stage accepts
        exit_idx = np.where(any_accept, first_accept, self.n_stages - 1)

        argmaxes = np.stack([p.argmax(axis=1) for p in probs], axis=1)
        rows = np.arange(n)
        predicted = self.classes_[argmaxes[rows, exit_idx]]
        cum = np.asarray(self.cumulative_costs)
        return BatchEvaluation(
            exit_stage=exit_idx + 1,
            accepted=any_accept,
            predicted=predicted,
            confidence=confidences[rows, exit_idx],
            incurred_cost=cum[exit_idx],
        )


def train_chain(
    plan: StagePlan,
    X: np.ndarray,
    y: np.ndarray,
    costs,
    threshold: float,
    lam: float = 1.0,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> StageChain:
    """Standardize on the given training data and fit one model per stage."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    costs = np.asarray(costs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != plan.n_features:
        raise ValueError(
            f"training matrix has shape {X.shape}; plan expects {plan.n_features} features"
        )
    if len(y) != len(X):
        raise ValueError(f"features have {len(X)} rows but labels {len(y)}")
    if costs.shape != (plan.n_features,):
        raise ValueError(f"need one cost per feature, got shape {costs.shape}")
    if not np.all(np.isfinite(costs)) or np.any(costs <= 0):
        raise ValueError("feature costs must be positive and finite")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")

    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    models = tuple(
        fit_logistic(Xs[:, list(cols)], y, lam=lam, max_iter=max_iter, tol=tol)
        for cols in plan.cumulative
    )
    stage_costs = tuple(float(math.fsum(costs[f] for f in stage)) for stage in plan.stages)
    return StageChain(
        plan=plan,
        models=models,
        threshold=threshold,
        classes_=models[0].classes_,
        stage_costs=stage_costs,
        scaler=scaler,
    )
