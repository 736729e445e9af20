"""Fuzzy greedy rule trees."""
from fgrt.data import Dataset, load_bundled, load_csv, stratified_kfold
from fgrt.fuzzy_core import FeaturePartition, LinguisticTerm, TNorm, Trapezoid
from fgrt.inference import Prediction, classify, classify_batch, explain, predict
from fgrt.model_io import load_model, save_model
from fgrt.partition_builder import SearchConfig, optimize_partition, quantile_partition, separability_index
from fgrt.pipeline import fit_model
from fgrt.tree import FgrtModel, FuzzyRule, TreeConfig, fuzzy_gini, grow_tree, impurity_gain

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FeaturePartition", "FgrtModel", "FuzzyRule", "LinguisticTerm", "Prediction", "SearchConfig",
    "TNorm", "Trapezoid", "TreeConfig", "classify", "classify_batch", "explain", "fit_model", "fuzzy_gini",
    "grow_tree", "impurity_gain", "load_bundled", "load_csv", "load_model", "optimize_partition", "predict",
    "quantile_partition", "save_model", "separability_index", "stratified_kfold",
]
