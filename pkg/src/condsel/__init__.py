"""Conditional variable selection: rank candidate variables given a preselected set."""

__version__ = "0.1.0"

from .data import ColumnManifest, Dataset, load_csv, split, standardize, write_csv
from .errors import CondSelError
from .mask import FeatureMask, apply_mask, importance, mask_forward
from .model import MLP, CondSelModel, forward, loss, predict_metric
from .oracle import EvalConfig, enumerate_combinations, evaluate_subset, exhaustive_search
from .selector import SelectionReport, compare_with_oracle, select_top_k, subset_sweep
from .train import TrainConfig, adam_step, train
