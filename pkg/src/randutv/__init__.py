"""Randomized rank-revealing UTV factorization, A = U T V^T.

Two drivers compute the same factorization: `randutv` (blocked, sequential)
and `randutv_ab` (algorithm-by-blocks on a dependency-driven task runtime).
"""
from ._accel import BACKEND
from .ab import TaskKind, analyze, randutv_ab, transcript
from .blockcyclic import GridSpec, distribution_report, local_index, owner
from .blocked import UTVConfig, UTVResult, randutv, reconstruct
from .errors import (ConfigError, ConvergenceError, FormatError, GraphError, RandUTVError,
                     ShapeError, TaskError)
from .householder import apply_q_right, apply_qt_left, comp_td_qr, form_compact_wy, hqr
from .io import read_matrix, read_rutv, write_matrix, write_rutv
from .matrix import BlockGrid, RngState, frobenius_norm, gemm, generate_normal_random, spectral_norm_estimate
from .metrics import (diag_accuracy, lowrank_error, make_test_matrix, optimal_error, quality_report,
                      scaled_time)
from .scheduler import build_dag, execute, export_trace
from .svd import svd_block, svd_dense

__version__ = "0.1.0"
