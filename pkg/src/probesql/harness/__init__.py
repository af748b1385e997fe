"""CLI orchestration: pipeline runs, evaluation, ablations, SFT export."""

from .ablation import EXTRA_ROWS, NAMED_ROWS, ablate, resolve_rows
from .evaluate import (
    BUCKETS, EVAL_LIMITS, EvalReport, QuestionVerdict, REFERENCE_RESULTS,
    combined_table, evaluate, write_report,
)
from .pipeline import (
    DISABLE_FLAGS, PipelineConfig, STAGES, Trajectory, WorldContext,
    run_pipeline, validate_flags,
)
from .runner import read_trajectories, run_batch, write_trajectories
from .sft import SftSample, export_sft, extract_samples
