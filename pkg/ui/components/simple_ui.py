#!/usr/bin/env python3
"""
Simple UI components
Native Streamlit building blocks shared by the run explorer
"""

import streamlit as st


def create_simple_section_header(title: str, description: str = "", icon: str = ""):
    """Subheader, optional caption and a divider"""
    st.subheader(f"{icon} {title}" if icon else title)
    if description:
        st.caption(description)
    st.markdown("---")


def format_metric(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}" if value <= 1.0 else f"{value:,.1f}"
    return f"{value}"


def metric_cards(metrics: dict, help_texts: dict = None) -> list:
    """Metric dicts (label/value/help) for create_simple_metric_row, in key order"""
    help_texts = help_texts or {}
    return [
        {"label": key, "value": format_metric(value), "help": help_texts.get(key, "")}
        for key, value in metrics.items()
    ]


def create_simple_metric_row(metrics: list, columns: int = 4):
    if not metrics:
        return
    cols = st.columns(min(columns, len(metrics)))
    for i, metric in enumerate(metrics):
        with cols[i % len(cols)]:
            st.metric(
                label=metric.get("label", ""),
                value=metric.get("value", ""),
                help=metric.get("help", "") or None,
            )
