"""Sparse modeling of spectral blocks for hyperspectral image classification."""

from .blocks import BlockMask, build_mask, compute_block_variances
from .core import (
    HsiCube,
    LabelMap,
    PartitionPlan,
    build_stacked_observations,
    extract_group_block,
    plan_partition,
)
from .dictlearn import DictLearnConfig, SubDictionary, dictionary_objective, train_subdictionary
from .metrics import ConfusionMatrix, compute_metrics
from .pipeline import (
    FitParams,
    SmsbModel,
    SparseFeatureSet,
    SplitSpec,
    baseline_svm_raw,
    encode,
    fit,
    run_experiment,
)
from .solver import SolverConfig, SparseCodeResult, code_l1, code_l21, code_group_blockwise, prox_l21
from .svm import Kernel, SvmModel, cross_validate, svm_predict, svm_train
from .synth import SynthSpec, generate, oracle_global_solve

__version__ = "0.1.0"
