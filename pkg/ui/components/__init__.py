"""Native Streamlit components shared by the run explorer"""

from .simple_ui import (
    create_simple_metric_row,
    create_simple_section_header,
    metric_cards,
)

__all__ = [
    "create_simple_metric_row",
    "create_simple_section_header",
    "metric_cards",
]
