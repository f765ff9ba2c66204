#!/usr/bin/env python3
"""
Run explorer
Browse run directories: training history, recall sweeps, evaluation and per-question traces
"""

import json
import logging
import os
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd
import streamlit as st

from config.config import Config
from reports.reports import read_report
from services.runs import list_runs, read_manifest
from src.data_visualization import (
    create_iteration_growth,
    create_recall_curve,
    create_training_recall_chart,
    create_training_history,
)
from ui.components.simple_ui import (
    create_simple_metric_row,
    create_simple_section_header,
    metric_cards,
)

logger = logging.getLogger(__name__)

NODE_STYLE = {
    "question": {"color": "#e74c3c", "size": 26},
    "pulled": {"color": "#1f77b4", "size": 20},
    "entity": {"color": "#87ceeb", "size": 16},
    "fact": {"color": "#ff7f0e", "size": 10},
    "text": {"color": "#27ae60", "size": 12},
}


def trace_network(
    graph: dict,
    q_entities: Iterable[int] = (),
    entity_names: Optional[Dict[int, str]] = None,
) -> Tuple[List[dict], List[dict]]:
    """Node and edge dicts for a serialized subgraph.

    Entities are "e<id>", facts "f<id>" and documents "d<id>"; each node carries
    the group used for styling. Edges run from the fact/document to the entity.
    """
    q_entities = set(q_entities)
    names = entity_names or {}
    nodes = []
    for entity in graph.get("entities", []):
        e = entity["id"]
        group = "question" if e in q_entities else ("pulled" if entity["pulled"] else "entity")
        nodes.append(
            {
                "id": f"e{e}",
                "label": names.get(e, str(e)),
                "group": group,
                "title": f"entity {e}, added at iteration {entity['added_at']}",
            }
        )
    for f in graph.get("facts", []):
        nodes.append({"id": f"f{f}", "label": "", "group": "fact", "title": f"fact {f}"})
    for d in graph.get("docs", []):
        nodes.append({"id": f"d{d}", "label": f"doc {d}", "group": "text", "title": f"doc {d}"})

    prefix = {"fact": "f", "text": "d"}
    edges = [
        {"from": f"{prefix[kind]}{key}", "to": f"e{e}", "label": kind}
        for kind, key, e in graph.get("edges", [])
    ]
    return nodes, edges


def load_run(run_dir: str) -> Dict[str, object]:
    """Manifest plus whichever known report files the run directory holds"""
    run = {"dir": run_dir, "manifest": read_manifest(run_dir)}
    for key, name in (
        ("history", "metrics.csv"),
        ("timing", "timing.csv"),
        ("training_recall", "training_recall.csv"),
        ("eval_questions", "eval_questions.csv"),
        ("settings", "settings.csv"),
    ):
        path = os.path.join(run_dir, name)
        if os.path.exists(path):
            run[key] = read_report(path)
    sweeps = [name for name in sorted(os.listdir(run_dir)) if name.startswith("sweep_")]
    sweeps = [os.path.join(run_dir, name) for name in sweeps if name.endswith(".csv")]
    if sweeps:
        run["sweep"] = pd.concat([read_report(path) for path in sweeps], ignore_index=True)
    eval_path = os.path.join(run_dir, "eval.json")
    if os.path.exists(eval_path):
        with open(eval_path, encoding="utf-8") as f:
            run["eval"] = json.load(f)
    trace_path = os.path.join(run_dir, "trace.jsonl")
    if os.path.exists(trace_path):
        run["trace"] = pd.read_json(trace_path, lines=True)
    graphs = [name for name in sorted(os.listdir(run_dir)) if name.startswith("graph_")]
    if graphs:
        with open(os.path.join(run_dir, graphs[0]), encoding="utf-8") as f:
            run["graph"] = json.load(f)
    return run


def _plot(fig) -> None:
    if fig is None:
        st.info("Nothing to plot for this run")
    else:
        st.plotly_chart(fig, use_container_width=True)


def render_training(run: dict) -> None:
    create_simple_section_header("Training", "Loss and dev metrics per epoch", "📈")
    if "history" not in run:
        st.info("No training history in this run")
        return
    history = run["history"]
    last = history.iloc[-1].dropna().to_dict()
    create_simple_metric_row(metric_cards({k: v for k, v in last.items() if k != "epoch"}))
    _plot(create_training_history(history))
    if "training_recall" in run:
        _plot(create_training_recall_chart(run["training_recall"]))
    if "timing" in run:
        st.dataframe(run["timing"], use_container_width=True)


def render_evaluation(run: dict) -> None:
    create_simple_section_header("Evaluation", "Hits@1, answer recall and subgraph sizes", "🎯")
    if "eval" in run:
        create_simple_metric_row(metric_cards(run["eval"]), columns=3)
    if "eval_questions" in run:
        st.dataframe(run["eval_questions"], use_container_width=True)
    if "settings" in run:
        st.dataframe(run["settings"], use_container_width=True)
    if "sweep" in run:
        _plot(create_recall_curve(run["sweep"]))
        st.dataframe(run["sweep"], use_container_width=True)
    if not {"eval", "eval_questions", "settings", "sweep"} & set(run):
        st.info("No evaluation output in this run")


def render_trace(run: dict) -> None:
    create_simple_section_header("Trace", "Subgraph growth for one question", "🕸️")
    if "trace" not in run:
        st.info("No trace in this run; use the `trace` command with --graph")
        return
    _plot(create_iteration_growth(run["trace"]))
    st.dataframe(run["trace"], use_container_width=True)
    if "graph" not in run:
        return
    graph = run["graph"]
    q_entities = [e["id"] for e in graph.get("entities", []) if e["added_at"] == 0]
    nodes, edges = trace_network(graph, q_entities)
    try:
        from streamlit_agraph import Config as GraphConfig
        from streamlit_agraph import Edge, Node, agraph

        agraph(
            nodes=[
                Node(
                    id=node["id"],
                    label=node["label"],
                    title=node["title"],
                    font={"size": 8, "color": "#000000", "face": "Arial"},
                    **NODE_STYLE[node["group"]],
                )
                for node in nodes
            ],
            edges=[
                Edge(source=edge["from"], target=edge["to"], color="#333333", width=1.0)
                for edge in edges
            ],
            config=GraphConfig(
                height=600,
                width="100%",
                directed=False,
                physics=True,
                hierarchical=False,
                nodeHighlightBehavior=True,
                highlightColor="#F7A7A6",
                backgroundColor="#ffffff",
            ),
        )
    except ImportError:
        st.warning("streamlit-agraph is not installed; showing the raw subgraph instead")
        st.json(graph)


def run_dashboard(root: Optional[str] = None) -> None:
    root = root or Config.RUNS_DIR
    st.title("PullNet runs")
    runs = list_runs(root)
    if not runs:
        st.info(f"No runs with a manifest under '{root}'")
        return
    selected = st.sidebar.selectbox("Run", runs, format_func=os.path.basename)
    try:
        run = load_run(selected)
    except (OSError, ValueError) as e:
        logger.error(f"Failed to load run {selected}: {e}")
        st.error(f"Could not load {selected}: {e}")
        return

    manifest = run["manifest"]
    st.sidebar.caption(f"command: {manifest.get('command')}")
    st.sidebar.caption(f"config hash: {manifest.get('config_hash', '')[:12]}")
    with st.sidebar.expander("Config"):
        st.json(manifest.get("config", {}))

    training, evaluation, trace = st.tabs(["Training", "Evaluation", "Trace"])
    with training:
        render_training(run)
    with evaluation:
        render_evaluation(run)
    with trace:
        render_trace(run)
