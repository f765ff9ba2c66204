#!/usr/bin/env python3
"""
Streamlit entry point for the PullNet run explorer
Run with `streamlit run streamlit_app.py`
"""

import logging

import streamlit as st

from config.config import Config

logging.basicConfig(level=Config.LOG_LEVEL)
logger = logging.getLogger(__name__)

st.set_page_config(
    page_title="PullNet runs",
    page_icon="🕸️",
    layout="wide",
    initial_sidebar_state="expanded",
)


def main():
    try:
        logger.info("Starting PullNet run explorer")
        from ui.dashboard import run_dashboard

        run_dashboard()
    except ImportError as e:
        st.error(f"Failed to import dashboard modules: {e}")
        logger.error(f"Import error: {e}")
    except Exception as e:
        st.error(f"Dashboard error: {e}")
        logger.error(f"General error: {e}")


if __name__ == "__main__":
    main()
