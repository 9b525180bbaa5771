"""
Two-layer graph convolutional classifier in plain numpy.

    p = sigmoid(A_hat . relu(A_hat . X . W1 + b1) . W2 + b2)

Inputs may carry a leading sample axis: X is (S, n, F) and every sample is
scored against the same normalized adjacency. Gradients are derived by hand
and trained full-batch with plain gradient descent.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.run_config import TrainConfig
from errors import MetricError, ModelShapeError, TrainingDivergedError
from models.metrics import DEFAULT_THRESHOLD, EvaluationReport, auc, evaluate_scores

logger = logging.getLogger(__name__)


@dataclass
class NormalizedAdjacency:
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def normalize_adjacency(graph, binary: bool = True) -> NormalizedAdjacency:
    """D^-1/2 (A + I) D^-1/2 with D the row sums of A + I."""
    return normalize_dense(graph.adjacency_matrix(binary=binary))


def normalize_dense(adjacency: np.ndarray) -> NormalizedAdjacency:
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ModelShapeError(f"Adjacency must be square, got {a.shape}")
    a_tilde = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return NormalizedAdjacency(matrix=a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :])


@dataclass
class GCNModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float = 0.0

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @classmethod
    def initialize(cls, n_features: int, hidden: int, seed: int) -> 'GCNModel':
        """Glorot-uniform weights from a seeded generator, zero biases."""
        rng = np.random.default_rng(seed)
        lim1 = np.sqrt(6.0 / (n_features + hidden))
        lim2 = np.sqrt(6.0 / (hidden + 1))
        return cls(
            W1=rng.uniform(-lim1, lim1, size=(n_features, hidden)),
            b1=np.zeros(hidden),
            W2=rng.uniform(-lim2, lim2, size=(hidden, 1)),
            b2=0.0,
        )

    @classmethod
    def zeros(cls, n_features: int, hidden: int) -> 'GCNModel':
        return cls(W1=np.zeros((n_features, hidden)), b1=np.zeros(hidden), W2=np.zeros((hidden, 1)), b2=0.0)

    def copy(self) -> 'GCNModel':
        return GCNModel(W1=self.W1.copy(), b1=self.b1.copy(), W2=self.W2.copy(), b2=float(self.b2))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.W1)) and np.all(np.isfinite(self.b1))
                    and np.all(np.isfinite(self.W2)) and np.isfinite(self.b2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'shapes': {'W1': list(self.W1.shape), 'b1': list(self.b1.shape), 'W2': list(self.W2.shape), 'b2': []},
            'parameters': {
                'W1': self.W1.ravel().tolist(),
                'b1': self.b1.tolist(),
                'W2': self.W2.ravel().tolist(),
                'b2': float(self.b2),
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GCNModel':
        shapes = data['shapes']
        params = data['parameters']
        try:
            model = cls(
                W1=np.asarray(params['W1'], dtype=float).reshape(shapes['W1']),
                b1=np.asarray(params['b1'], dtype=float).reshape(shapes['b1']),
                W2=np.asarray(params['W2'], dtype=float).reshape(shapes['W2']),
                b2=float(params['b2']),
            )
        except ValueError as e:
            raise ModelShapeError(f"Checkpoint parameters do not match their shapes: {e}")
        if model.W2.shape != (model.hidden, 1) or model.b1.shape != (model.hidden,):
            raise ModelShapeError("Checkpoint layer sizes are inconsistent")
        return model


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float


@dataclass
class TrainResult:
    model: GCNModel
    best_epoch: int
    pos_weight: float
    trace: List[Tuple[int, float, Optional[float]]] = field(default_factory=list)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_shapes(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray) -> None:
    if X.ndim not in (2, 3):
        raise ModelShapeError(f"Inputs must be (n, F) or (S, n, F), got {X.shape}")
    if X.shape[-2] != a_hat.n:
        raise ModelShapeError(f"Inputs have {X.shape[-2]} nodes but the adjacency has {a_hat.n}")
    if X.shape[-1] != model.n_features:
        raise ModelShapeError(f"Inputs have {X.shape[-1]} features but the model expects {model.n_features}")


def _forward_cache(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray):
    ax = np.matmul(a_hat.matrix, X)
    z1 = np.matmul(ax, model.W1) + model.b1
    h1 = np.maximum(z1, 0.0)
    ah = np.matmul(a_hat.matrix, h1)
    logits = np.matmul(ah, model.W2)[..., 0] + model.b2
    return ax, z1, ah, logits


def logits(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    _check_shapes(model, a_hat, X)
    return _forward_cache(model, a_hat, X)[3]


def forward(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray) -> np.ndarray:
    """Per-node occurrence probabilities, shape (n,) or (S, n)."""
    return sigmoid(logits(model, a_hat, X))


def weighted_bce(z: np.ndarray, y: np.ndarray, pos_weight: float) -> float:
    """Mean of pos_weight*y*softplus(-z) + (1-y)*softplus(z) over every pair."""
    per_pair = pos_weight * y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    return float(per_pair.mean())


def loss_and_gradients(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray, Y: np.ndarray,
                       pos_weight: float) -> Tuple[float, Gradients]:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_shapes(model, a_hat, X)
    if Y.shape != X.shape[:-1]:
        raise ModelShapeError(f"Labels {Y.shape} do not match inputs {X.shape[:-1]}")
    ax, z1, ah, z = _forward_cache(model, a_hat, X)
    loss = weighted_bce(z, Y, pos_weight)

    p = sigmoid(z)
    dz = (pos_weight * Y * (p - 1.0) + (1.0 - Y) * p) / Y.size
    hidden = model.hidden
    dW2 = ah.reshape(-1, hidden).T @ dz.reshape(-1, 1)
    db2 = float(dz.sum())
    d_ah = dz[..., None] * model.W2[:, 0]
    d_h1 = np.matmul(a_hat.matrix.T, d_ah)
    dz1 = d_h1 * (z1 > 0)
    dW1 = ax.reshape(-1, model.n_features).T @ dz1.reshape(-1, hidden)
    db1 = dz1.reshape(-1, hidden).sum(axis=0)
    return loss, Gradients(W1=dW1, b1=db1, W2=dW2, b2=db2)


def resolve_pos_weight(Y: np.ndarray, setting) -> float:
    """'auto' is n_neg / n_pos on the training labels."""
    if setting != 'auto':
        return float(setting)
    n_pos = int(np.count_nonzero(Y))
    n_neg = int(np.asarray(Y).size - n_pos)
    if n_pos == 0 or n_neg == 0:
        logger.warning("⚠️ Training labels hold a single class; using pos_weight = 1")
        return 1.0
    return n_neg / n_pos


def _val_score(model, a_hat, val, pos_weight) -> Tuple[Optional[float], float]:
    X, Y = val
    z = logits(model, a_hat, X)
    try:
        auc_value = auc(z.ravel(), Y.ravel())
    except MetricError:
        auc_value = None
    return auc_value, weighted_bce(z, Y, pos_weight)


def _better(candidate: Tuple[Optional[float], float], best: Tuple[Optional[float], float]) -> bool:
    """Higher val AUC wins; equal AUC falls back to lower val loss."""
    c_auc = -np.inf if candidate[0] is None else candidate[0]
    b_auc = -np.inf if best[0] is None else best[0]
    if c_auc != b_auc:
        return c_auc > b_auc
    return candidate[1] < best[1]


def train(model: GCNModel, a_hat: NormalizedAdjacency, train_data: Tuple[np.ndarray, np.ndarray],
          cfg: TrainConfig, val_data: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> TrainResult:
    """
    Full-batch gradient descent on weighted binary cross-entropy.

    Trace row e holds the training loss of the parameters entering epoch e and
    their validation AUC. The returned model is the best parameters seen on
    validation (including the final ones); without validation data it is the
    final model.
    """
    X, Y = (np.asarray(train_data[0], dtype=float), np.asarray(train_data[1], dtype=float))
    if X.shape[0] == 0:
        raise ModelShapeError("Training split is empty")
    val = None
    if val_data is not None:
        val = (np.asarray(val_data[0], dtype=float), np.asarray(val_data[1], dtype=float))
    pos_weight = resolve_pos_weight(Y, cfg.pos_weight)
    lr = float(cfg.learning_rate)
    current = model.copy()
    result = TrainResult(model=current.copy(), best_epoch=0, pos_weight=pos_weight)
    best_score: Optional[Tuple[Optional[float], float]] = None

    logger.info(f"🎯 Training GCN: {X.shape} inputs, hidden={current.hidden}, lr={lr}, "
                f"epochs={cfg.epochs}, pos_weight={pos_weight:.3f}")
    for epoch in range(1, int(cfg.epochs) + 1):
        loss, grads = loss_and_gradients(current, a_hat, X, Y, pos_weight)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        val_auc = None
        if val is not None:
            score = _val_score(current, a_hat, val, pos_weight)
            val_auc = score[0]
            if best_score is None or _better(score, best_score):
                best_score = score
                result.model = current.copy()
                result.best_epoch = epoch - 1
        result.trace.append((epoch, loss, val_auc))
        if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == 1):
            shown = 'n/a' if val_auc is None else f"{val_auc:.4f}"
            logger.info(f"   epoch {epoch}/{cfg.epochs} loss={loss:.6f} val_auc={shown}")

        current.W1 -= lr * grads.W1
        current.b1 -= lr * grads.b1
        current.W2 -= lr * grads.W2
        current.b2 -= lr * grads.b2
        if not current.is_finite():
            raise TrainingDivergedError(epoch, float('nan'))

    if val is None:
        result.model = current.copy()
        result.best_epoch = int(cfg.epochs)
    else:
        score = _val_score(current, a_hat, val, pos_weight)
        if _better(score, best_score):
            result.model = current.copy()
            result.best_epoch = int(cfg.epochs)
    logger.info(f"✅ Training finished; keeping parameters after {result.best_epoch} update(s)")
    return result


def evaluate(model: GCNModel, a_hat: NormalizedAdjacency, X: np.ndarray, Y: np.ndarray,
             threshold: float = DEFAULT_THRESHOLD) -> EvaluationReport:
    """Score every (sample, node) pair of a split and summarize it."""
    Y = np.asarray(Y)
    if Y.size == 0:
        raise ModelShapeError("Cannot evaluate an empty split")
    scores = forward(model, a_hat, X)
    return evaluate_scores(scores.ravel(), Y.ravel(), threshold)
