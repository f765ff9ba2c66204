import logging
import os
from typing import Optional

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

logger = logging.getLogger(__name__)


def create_recall_curve(sweep_df: pd.DataFrame) -> Optional[go.Figure]:
    """Answer recall against mean subgraph entity count, one line per retriever"""
    try:
        if not isinstance(sweep_df, pd.DataFrame) or sweep_df.empty:
            logger.warning("Empty or invalid DataFrame provided to recall curve")
            return None
        required = {"retriever", "budget", "mean_recall", "mean_entities"}
        if not required.issubset(sweep_df.columns):
            logger.warning(f"Sweep frame lacks columns {sorted(required - set(sweep_df.columns))}")
            return None

        fig = px.line(
            sweep_df.sort_values(["retriever", "mean_entities"]),
            x="mean_entities",
            y="mean_recall",
            color="retriever",
            markers=True,
            hover_data=["budget"],
            title="Answer recall vs. subgraph size",
        )
        fig.update_layout(
            font=dict(family="Arial", size=12),
            height=400,
            xaxis_title="mean entities in subgraph",
            yaxis_title="answer recall",
            yaxis_range=[0, 1.02],
        )
        return fig

    except Exception as e:
        logger.error(f"Error creating recall curve: {e}")
        return None


def create_training_history(history_df: pd.DataFrame) -> Optional[go.Figure]:
    """Training loss and dev metrics per epoch"""
    try:
        if not isinstance(history_df, pd.DataFrame) or history_df.empty:
            logger.warning("Empty or invalid DataFrame provided to training history")
            return None

        fig = go.Figure()
        fig.add_trace(
            go.Scatter(
                x=history_df["epoch"],
                y=history_df["loss"],
                mode="lines+markers",
                name="train loss",
                line=dict(color="#e74c3c", width=3),
            )
        )
        for column, color in (("dev_hits_at_1", "#27ae60"), ("dev_answer_recall", "#2980b9")):
            if column in history_df.columns and history_df[column].notna().any():
                fig.add_trace(
                    go.Scatter(
                        x=history_df["epoch"],
                        y=history_df[column],
                        mode="lines+markers",
                        name=column,
                        yaxis="y2",
                        line=dict(color=color, width=3),
                    )
                )
        fig.update_layout(
            title="Training history",
            xaxis_title="epoch",
            yaxis=dict(title="loss"),
            yaxis2=dict(title="dev metric", overlaying="y", side="right", range=[0, 1.02]),
            font=dict(family="Arial", size=12),
            height=400,
        )
        return fig

    except Exception as e:
        logger.error(f"Error creating training history chart: {e}")
        return None


def create_training_recall_chart(recall_df: pd.DataFrame) -> Optional[go.Figure]:
    """Dev answer recall against training examples seen"""
    if not isinstance(recall_df, pd.DataFrame) or recall_df.empty:
        return None
    fig = px.line(
        recall_df,
        x="examples_seen",
        y="answer_recall",
        markers=True,
        title="Retrieval recall during training",
    )
    fig.update_layout(font=dict(family="Arial", size=12), height=350, yaxis_range=[0, 1.02])
    return fig


def create_iteration_growth(trace_df: pd.DataFrame) -> Optional[go.Figure]:
    """Stacked subgraph size after each iteration of one question's trace"""
    if not isinstance(trace_df, pd.DataFrame) or trace_df.empty:
        return None
    long = trace_df.melt(
        id_vars=["iteration"],
        value_vars=["entities", "facts", "docs"],
        var_name="kind",
        value_name="count",
    )
    fig = px.bar(long, x="iteration", y="count", color="kind", title="Subgraph growth")
    fig.update_layout(font=dict(family="Arial", size=12), height=350)
    return fig


def save_figure(fig: Optional[go.Figure], path: str) -> Optional[str]:
    """Write a figure as standalone HTML; returns the path or None when there is nothing to save."""
    if fig is None:
        return None
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.write_html(path, include_plotlyjs="cdn")
    logger.info(f"Figure written to {path}")
    return path
