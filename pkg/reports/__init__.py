"""
Reports module for writing metrics, sweep and timing reports
"""

from .reports import (
    generate_eval_report,
    generate_history_report,
    generate_training_recall_report,
    generate_settings_report,
    generate_sweep_report,
    generate_timing_report,
    generate_trace_report,
)

__all__ = [
    "generate_history_report",
    "generate_eval_report",
    "generate_sweep_report",
    "generate_settings_report",
    "generate_timing_report",
    "generate_training_recall_report",
    "generate_trace_report",
]
