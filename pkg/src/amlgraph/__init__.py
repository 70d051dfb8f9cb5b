"""Toolkit for labeled money-laundering subgraph datasets.

Builds licit/suspicious subgraph records from a background transaction
graph, samples subgraph minibatches with nodewise neighborhood fanouts,
quantifies feature-cache policies through vertex-inclusion probability
analysis, and trains/evaluates background-aware and segregated subgraph
classifiers.
"""

__version__ = "0.1.0"

from .builder import (
    BuilderConfig,
    BuildResult,
    ClusterLabel,
    GroupLabel,
    LabeledPath,
    PathClass,
    SubgraphRecord,
    build_dataset,
)
from .graph import (
    BackgroundGraph,
    TimeWindow,
    build_graph,
    filter_time_window,
    largest_weak_component,
    load_cache,
    save_cache,
)
from .metrics import ConfusionMatrix, confusion, micro_f1, pr_auc, roc_auc
from .sampling import Minibatch, Splits, SplitSpec, build_subgraph_minibatch, nodewise_sample, split_dataset
from .vipcache import AugmentedGraph, CachePolicy, VipTable, augment_graph, build_cache_policy, vip_analysis

__all__ = [
    "AugmentedGraph",
    "BackgroundGraph",
    "BuildResult",
    "BuilderConfig",
    "CachePolicy",
    "ClusterLabel",
    "ConfusionMatrix",
    "GroupLabel",
    "LabeledPath",
    "Minibatch",
    "PathClass",
    "Splits",
    "SplitSpec",
    "SubgraphRecord",
    "TimeWindow",
    "VipTable",
    "augment_graph",
    "build_cache_policy",
    "build_dataset",
    "build_graph",
    "build_subgraph_minibatch",
    "confusion",
    "filter_time_window",
    "largest_weak_component",
    "load_cache",
    "micro_f1",
    "nodewise_sample",
    "pr_auc",
    "roc_auc",
    "save_cache",
    "split_dataset",
    "vip_analysis",
]
