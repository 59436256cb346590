"""The two-stream objective: classification, classifier proximity, and alignment.

The total objective is

    ce(W, source) + ce(W*, target) + eta ||W - W*||_F^2
      + (sigma1 / C) sum_c d^2(S_c, S*_c) + (sigma2 / C) sum_c ||mu_c - mu*_c||^2

where the per-class scatters S_c, S*_c are built in the jointly reduced space
(exact isometric projection of that class's source and target columns) and
regularized by eps on both sides. Feature gradients of the scatter term travel
grad_dist_sq -> feature chain rule -> projector transpose; the projector is a
constant in this differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .distances import DistanceKind, dist_sq, grad_dist_sq
from .errors import DimensionError, EmptyClassError, LabelError, ParameterError
from .nystrom import backproject_grad, isometric_project
from .scatter import FeatureBlock, _feature_grad
from .spd import regularize, symmetrize

if TYPE_CHECKING:  # real definition lives in trainer; only the classifiers are used here
    from .trainer import TwoStreamModel


@dataclass(frozen=True)
class AlignConfig:
    """Hyper-parameters of the objective.

    ``tau`` is the squared-norm cap on feature vectors; ``None`` lets the
    trainer derive it from its first batch. ``eps`` keeps every scatter
    strictly positive definite before a non-Euclidean distance sees it.
    """

    sigma1: float
    sigma2: float
    eta: float
    kind: DistanceKind
    class_count: int
    tau: float | None = None
    eps: float = 1e-6

    def __post_init__(self):
        if self.sigma1 < 0:
            raise ParameterError(f"sigma1 must be nonnegative, got {self.sigma1}")
        if self.sigma2 < 0:
            raise ParameterError(f"sigma2 must be nonnegative, got {self.sigma2}")
        if self.eta < 0:
            raise ParameterError(f"eta must be nonnegative, got {self.eta}")
        if self.tau is not None and self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.class_count < 1:
            raise ParameterError(f"class_count must be at least 1, got {self.class_count}")


@dataclass(frozen=True)
class Classifier:
    """Linear classifier: logits = weights^T phi + bias."""

    weights: np.ndarray  # (feature_dim, class_count)
    bias: np.ndarray  # (class_count,)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weights.ndim != 2:
            raise DimensionError(f"weights must be 2-d, got shape {weights.shape}")
        if bias.ndim != 1 or bias.shape[0] != weights.shape[1]:
            raise DimensionError(
                f"bias length {bias.shape} does not match class count {weights.shape[1]}"
            )
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise DimensionError("classifier parameters contain non-finite entries")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class SoftmaxResult:
    loss: float
    grad_weights: np.ndarray
    grad_bias: np.ndarray
    grad_columns: np.ndarray


def softmax_ce(classifier: Classifier, block: FeatureBlock) -> SoftmaxResult:
    """Mean softmax cross-entropy over the block, with all three gradients."""
    if block.count == 0:
        raise EmptyClassError("cross-entropy needs at least one column")
    if block.dim != classifier.feature_dim:
        raise DimensionError(
            f"feature dim {block.dim} does not match classifier dim {classifier.feature_dim}"
        )
    if block.labels.max() >= classifier.class_count:
        raise LabelError(
            f"label {int(block.labels.max())} outside class count {classifier.class_count}"
        )
    logits = classifier.weights.T @ block.columns + classifier.bias[:, None]
    logits -= logits.max(axis=0, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=0, keepdims=True)
    n = block.count
    picked = logits[block.labels, np.arange(n)] - np.log(exp.sum(axis=0))
    loss = float(-picked.mean())
    dlogits = probs.copy()
    dlogits[block.labels, np.arange(n)] -= 1.0
    dlogits /= n
    return SoftmaxResult(
        loss=loss,
        grad_weights=block.columns @ dlogits.T,
        grad_bias=dlogits.sum(axis=1),
        grad_columns=classifier.weights @ dlogits,
    )


def proximity(w: Classifier, w_star: Classifier, eta: float) -> tuple[float, np.ndarray, np.ndarray]:
    """eta ||W - W*||_F^2 with gradients to both weight matrices. Biases excluded."""
    if w.weights.shape != w_star.weights.shape:
        raise DimensionError(
            f"classifier shapes differ: {w.weights.shape} vs {w_star.weights.shape}"
        )
    diff = w.weights - w_star.weights
    value = float(eta * np.sum(diff * diff))
    return value, 2.0 * eta * diff, -2.0 * eta * diff


def clip_feature_norm(column: np.ndarray, tau: float) -> np.ndarray:
    """Rescale a vector onto the ball ||v||^2 <= tau; inside it is left alone."""
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    column = np.asarray(column, dtype=np.float64)
    sq = float(column @ column)
    if sq <= tau:
        return column
    return column * np.sqrt(tau / sq)


@dataclass(frozen=True)
class AlignmentResult:
    """Alignment loss split into its scatter and mean parts, plus feature gradients.

    ``grads_source[c]`` / ``grads_target[c]`` match the shapes of the class-c
    column blocks that were passed in (zeros for skipped classes).
    """

    loss: float
    scatter_term: float
    mean_term: float
    grads_source: list[np.ndarray]
    grads_target: list[np.ndarray]


def alignment_loss(
    per_class: Sequence[tuple[np.ndarray, np.ndarray]], config: AlignConfig
) -> AlignmentResult:
    """Scatter- and mean-alignment loss over per-class (source, target) column pairs.

    Classes where either stream is empty are skipped; they contribute zero while
    the 1/C normalizer keeps the declared class count. For each contributing
    class the source and target columns are jointly projected to dimension
    N_c + N*_c, both reduced scatters are regularized by eps, and the distance
    plus ambient mean term are accumulated in ascending class order.
    """
    if len(per_class) != config.class_count:
        raise DimensionError(
            f"got {len(per_class)} class entries for class_count {config.class_count}"
        )
    scatter_sum = 0.0
    mean_sum = 0.0
    grads_source: list[np.ndarray] = []
    grads_target: list[np.ndarray] = []
    c_norm = float(config.class_count)
    for cols_s, cols_t in per_class:
        cols_s = np.asarray(cols_s, dtype=np.float64)
        cols_t = np.asarray(cols_t, dtype=np.float64)
        gs = np.zeros_like(cols_s)
        gt = np.zeros_like(cols_t)
        if cols_s.shape[1] == 0 or cols_t.shape[1] == 0:
            grads_source.append(gs)
            grads_target.append(gt)
            continue
        if cols_s.shape[0] != cols_t.shape[0]:
            raise DimensionError(
                f"stream dimensions differ: {cols_s.shape[0]} vs {cols_t.shape[0]}"
            )
        if config.sigma1 != 0.0:
            red_s, red_t, proj = isometric_project(cols_s, cols_t)
            mu_s = red_s.mean(axis=1)
            mu_t = red_t.mean(axis=1)
            cen_s = red_s - mu_s[:, None]
            cen_t = red_t - mu_t[:, None]
            sig_s = regularize(symmetrize(cen_s @ cen_s.T / red_s.shape[1]), config.eps)
            sig_t = regularize(symmetrize(cen_t @ cen_t.T / red_t.shape[1]), config.eps)
            scatter_sum += dist_sq(config.kind, sig_s, sig_t)
            ga, gb = grad_dist_sq(config.kind, sig_s, sig_t)
            weight = config.sigma1 / c_norm
            gs += weight * backproject_grad(proj, _feature_grad(ga.entries, red_s, mu_s))
            gt += weight * backproject_grad(proj, _feature_grad(gb.entries, red_t, mu_t))
        if config.sigma2 != 0.0:
            mu_s_amb = cols_s.mean(axis=1)
            mu_t_amb = cols_t.mean(axis=1)
            diff = mu_s_amb - mu_t_amb
            mean_sum += float(diff @ diff)
            weight = config.sigma2 / c_norm
            gs += weight * (2.0 / cols_s.shape[1]) * diff[:, None]
            gt += weight * (-2.0 / cols_t.shape[1]) * diff[:, None]
        grads_source.append(gs)
        grads_target.append(gt)
    scatter_term = config.sigma1 / c_norm * scatter_sum
    mean_term = config.sigma2 / c_norm * mean_sum
    return AlignmentResult(
        loss=scatter_term + mean_term,
        scatter_term=scatter_term,
        mean_term=mean_term,
        grads_source=grads_source,
        grads_target=grads_target,
    )


@dataclass(frozen=True)
class ObjectiveParts:
    ce_source: float
    ce_target: float
    proximity: float
    scatter: float
    mean: float


@dataclass(frozen=True)
class ObjectiveGrads:
    weights_source: np.ndarray
    bias_source: np.ndarray
    weights_target: np.ndarray
    bias_target: np.ndarray
    features_source: np.ndarray
    features_target: np.ndarray


@dataclass(frozen=True)
class ObjectiveResult:
    value: float
    parts: ObjectiveParts
    grads: ObjectiveGrads


def group_columns_by_class(
    batch_s: FeatureBlock, batch_t: FeatureBlock, class_count: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split two batches into per-class (source columns, target columns) pairs."""
    for block in (batch_s, batch_t):
        if block.count and block.labels.max() >= class_count:
            raise LabelError(
                f"label {int(block.labels.max())} outside class count {class_count}"
            )
    return [
        (batch_s.columns[:, batch_s.labels == c], batch_t.columns[:, batch_t.labels == c])
        for c in range(class_count)
    ]


def total_objective(
    model: "TwoStreamModel", batch_s: FeatureBlock, batch_t: FeatureBlock, config: AlignConfig
) -> ObjectiveResult:
    """Full objective value and gradients, with feature columns as the leaves.

    The batches hold already-encoded feature vectors; gradients with respect to
    them are what the trainer chains through its encoders.
    """
    if batch_s.count == 0 or batch_t.count == 0:
        raise EmptyClassError("both batches must be nonempty")
    clf_s = model.classifier_source
    clf_t = model.classifier_target
    ce_s = softmax_ce(clf_s, batch_s)
    ce_t = softmax_ce(clf_t, batch_t)
    prox_value, prox_gw, prox_gw_star = proximity(clf_s, clf_t, config.eta)
    alignment = alignment_loss(
        group_columns_by_class(batch_s, batch_t, config.class_count), config
    )

    feat_grad_s = ce_s.grad_columns.copy()
    feat_grad_t = ce_t.grad_columns.copy()
    for c in range(config.class_count):
        mask_s = batch_s.labels == c
        if mask_s.any():
            feat_grad_s[:, mask_s] += alignment.grads_source[c]
        mask_t = batch_t.labels == c
        if mask_t.any():
            feat_grad_t[:, mask_t] += alignment.grads_target[c]

    parts = ObjectiveParts(
        ce_source=ce_s.loss,
        ce_target=ce_t.loss,
        proximity=prox_value,
        scatter=alignment.scatter_term,
        mean=alignment.mean_term,
    )
    grads = ObjectiveGrads(
        weights_source=ce_s.grad_weights + prox_gw,
        bias_source=ce_s.grad_bias,
        weights_target=ce_t.grad_weights + prox_gw_star,
        bias_target=ce_t.grad_bias,
        features_source=feat_grad_s,
        features_target=feat_grad_t,
    )
    value = ce_s.loss + ce_t.loss + prox_value + alignment.loss
    return ObjectiveResult(value=value, parts=parts, grads=grads)
