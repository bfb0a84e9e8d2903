"""Trainable surrogate models for PPA and system metrics."""

from .ensemble import StackedEnsemble, fit_meta, train_stacked_ensemble
from .gcn import GCNCONV, GRAPHCONV, GcnModel, train_gcn
from .inputs import ModelInputs
from .mlp import MlpModel, TrainingDivergence, hidden_layer_config, train_mlp
from .search import HyperparamSearchSpec, SearchResult, hyperparam_search
from .serialize import SchemaMismatch, load_model, loads_model, save_model
from .trees import BoostedClassifier, TreeEnsembleModel, train_boosted_classifier, train_gbdt, train_rf
from .two_stage import DISCARDED, TwoStageModel, train_two_stage

__all__ = [
    "DISCARDED",
    "GCNCONV",
    "GRAPHCONV",
    "BoostedClassifier",
    "GcnModel",
    "HyperparamSearchSpec",
    "MlpModel",
    "ModelInputs",
    "SchemaMismatch",
    "SearchResult",
    "StackedEnsemble",
    "TrainingDivergence",
    "TreeEnsembleModel",
    "TwoStageModel",
    "fit_meta",
    "hidden_layer_config",
    "hyperparam_search",
    "load_model",
    "loads_model",
    "save_model",
    "train_boosted_classifier",
    "train_gbdt",
    "train_gcn",
    "train_mlp",
    "train_rf",
    "train_stacked_ensemble",
    "train_two_stage",
]
