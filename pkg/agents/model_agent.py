from typing import List, Dict, Any, Optional, Sequence, Tuple
import io
import logging
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from agents.dataset_agent import SplitDataset, WindowSample
from agents.graph_agent import RegionGraph
from config.run_config import TrainConfig
from errors import DatasetError, ModelShapeError
from models.gcn import (GCNModel, NormalizedAdjacency, TrainResult, evaluate, normalize_adjacency,
                        train)
from models.metrics import EvaluationReport

logger = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')


@dataclass
class FeatureScaler:
    """Per-column standardization fitted on the training split only"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> 'FeatureScaler':
        rows = X.reshape(-1, X.shape[-1])
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std[std == 0] = 1.0
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[-1] != self.mean.shape[0]:
            raise ModelShapeError(f"Scaler fitted on {self.mean.shape[0]} columns, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def to_dict(self) -> Dict[str, List[float]]:
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, List[float]]) -> 'FeatureScaler':
        return cls(mean=np.asarray(data['mean'], dtype=float), std=np.asarray(data['std'], dtype=float))


def stack_inputs(samples: Sequence[WindowSample], static: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(S, n, W + C) raw inputs and (S, n) labels; static features repeat on every sample."""
    if not samples:
        raise DatasetError("Cannot build model inputs from an empty split")
    X = np.stack([s.input for s in samples]).astype(float)
    if static is not None and static.shape[1] > 0:
        tiled = np.broadcast_to(static, (X.shape[0],) + static.shape)
        X = np.concatenate([X, tiled], axis=2)
    Y = np.stack([s.target for s in samples]).astype(float)
    return X, Y


@dataclass
class PreparedData:
    a_hat: NormalizedAdjacency
    scaler: FeatureScaler
    splits: Dict[str, Tuple[np.ndarray, np.ndarray]]
    window: int
    feature_categories: List[str]


class ModelAgent:
    """Agent responsible for training and evaluating the GCN baseline"""

    def __init__(self, config: Optional[TrainConfig] = None):
        self.config = config or TrainConfig()
        logger.info(f"ModelAgent initialized (hidden={self.config.hidden}, lr={self.config.learning_rate}, "
                    f"epochs={self.config.epochs}, seed={self.config.seed})")

    def prepare(self, graph: RegionGraph, dataset: SplitDataset,
                scaler: Optional[FeatureScaler] = None) -> PreparedData:
        static = graph.static_features.matrix if graph.static_features is not None else None
        raw = {name: stack_inputs(dataset.split(name), static) for name in SPLITS}
        if scaler is None:
            scaler = FeatureScaler.fit(raw['train'][0])
        splits = {name: (scaler.transform(X), Y) for name, (X, Y) in raw.items()}
        return PreparedData(
            a_hat=normalize_adjacency(graph, binary=self.config.binary_adjacency),
            scaler=scaler,
            splits=splits,
            window=dataset.train[0].window,
            feature_categories=list(graph.static_features.categories) if graph.static_features else [],
        )

    def train(self, graph: RegionGraph, dataset: SplitDataset) -> Tuple[TrainResult, PreparedData]:
        data = self.prepare(graph, dataset)
        n_features = data.splits['train'][0].shape[-1]
        model = GCNModel.initialize(n_features, self.config.hidden, self.config.seed)
        result = train(model, data.a_hat, data.splits['train'], self.config, val_data=data.splits['val'])
        return result, data

    def evaluate_splits(self, model: GCNModel, data: PreparedData,
                        splits: Sequence[str] = ('val', 'test')) -> Dict[str, EvaluationReport]:
        reports = {}
        for name in splits:
            X, Y = data.splits[name]
            reports[name] = evaluate(model, data.a_hat, X, Y, self.config.threshold)
            r = reports[name]
            auc_text = 'undefined' if r.auc is None else f"{r.auc:.4f}"
            logger.info(f"📊 {name}: AUC={auc_text} Acc={r.accuracy:.4f} BalAcc={r.balanced_accuracy:.4f} "
                        f"F1={r.f1:.4f} MCC={r.mcc:.4f}")
        return reports

    def checkpoint(self, result: TrainResult, data: PreparedData) -> Dict[str, Any]:
        doc = result.model.to_dict()
        doc.update({
            'config': asdict(self.config),
            'seed': self.config.seed,
            'best_epoch': result.best_epoch,
            'pos_weight': result.pos_weight,
            'window': data.window,
            'feature_categories': data.feature_categories,
            'scaler': data.scaler.to_dict(),
        })
        return doc

    def load_checkpoint(self, doc: Dict[str, Any]) -> Tuple[GCNModel, FeatureScaler]:
        try:
            return GCNModel.from_dict(doc), FeatureScaler.from_dict(doc['scaler'])
        except KeyError as e:
            raise ModelShapeError(f"Checkpoint is missing {e}")

    @staticmethod
    def loss_trace_csv(result: TrainResult) -> str:
        frame = pd.DataFrame(result.trace, columns=['epoch', 'train_loss', 'val_auc'])
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator='\n', float_format='%.10g')
        return buf.getvalue()
