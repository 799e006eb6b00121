"""Metrics, evaluation reports, benchmarking and ablation drivers."""
from .ablate import KINDS, ablate
from .bench import BenchRow, bench, fit_affine, load_config_set, write_bench
from .metrics import bad_percentile, d_thresh, epe, frame_metrics
from .report import (EvaluationError, MetricsReport, eval_sequence, evaluate_frames, read_csv,
                     write_csv, write_report)
