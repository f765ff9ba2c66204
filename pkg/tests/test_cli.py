#!/usr/bin/env python3
"""
Command line tests
Exit codes and a small synth -> build -> train -> eval / sweep / trace / settings pipeline
"""

import io
import json
import os
import tempfile
import unittest
from argparse import Namespace
from contextlib import redirect_stderr, redirect_stdout

from config.config import RunConfig
from services.datasets import questions_file, read_jsonl
from src.cli import _resolve, main
from src.errors import ConfigError

RUN_CONFIG = {
    "n": 4,
    "L": 1,
    "T": 1,
    "k": 2,
    "mode": "hybrid",
    "train": {"epochs": 1, "batch_size": 4},
    "ppr": {"m": 20},
    "synth": {
        "n_entities": 60,
        "n_relations": 3,
        "n_facts": 120,
        "hops": 1,
        "n_questions": 10,
    },
}


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class TestExitCodes(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_usage_errors(self):
        self.assertEqual(run()[0], 1)
        self.assertEqual(run("frobnicate")[0], 1)
        code, _, err = run("sweep-recall", "--index", "i", "--questions", "q", "--budgets", "a,b")
        self.assertEqual(code, 1)
        self.assertIn("budgets", err)

    def test_missing_config(self):
        missing = os.path.join(self.tmp.name, "missing.json")
        self.assertEqual(run("--config", missing, "synth", "--out", self.tmp.name)[0], 1)

    def test_missing_data(self):
        code, _, _ = run("--quiet", "build", "--data", self.tmp.name, "--index", self.tmp.name)
        self.assertEqual(code, 1)


class TestIterationCount(unittest.TestCase):
    """How T is chosen from --T, the config file and the questions file name"""

    DEV_FILE = os.path.join("data", questions_file(3, "dev"))

    def resolve(self, raw, T=None, path=DEV_FILE):
        return _resolve(RunConfig.from_dict(raw), Namespace(T=T, mode=None), path).engine.T

    def test_defaults_to_hop_count(self):
        self.assertEqual(self.resolve({}), 3)
        self.assertEqual(self.resolve({}, path="questions.jsonl"), RunConfig().engine.T)

    def test_config_file_wins_over_hop_count(self):
        self.assertEqual(self.resolve({"T": 1}), 1)
        self.assertEqual(self.resolve({"T": 1}, T="auto"), 3)

    def test_flag_wins(self):
        self.assertEqual(self.resolve({"T": 1}, T="2"), 2)
        with self.assertRaises(ConfigError):
            self.resolve({}, T="two")
        with self.assertRaises(ConfigError):
            self.resolve({}, T="auto", path="questions.jsonl")


class TestPipeline(unittest.TestCase):
    """Every command against one small synthetic dataset"""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        root = cls.tmp.name
        cls.config = os.path.join(root, "run.json")
        with open(cls.config, "w") as f:
            json.dump(RUN_CONFIG, f)
        cls.data = os.path.join(root, "data")
        cls.index = os.path.join(root, "index")
        cls.train_dir = os.path.join(root, "train")
        cls.train_file = os.path.join(cls.data, questions_file(1, "train"))
        cls.codes = [
            run("--config", cls.config, "--quiet", "synth", "--out", cls.data)[0],
            run(
                "--config", cls.config, "--quiet", "build", "--data", cls.data, "--index", cls.index
            )[0],
            run(
                "--config",
                cls.config,
                "--quiet",
                "train",
                "--index",
                cls.index,
                "--train",
                cls.train_file,
                "--dev",
                os.path.join(cls.data, questions_file(1, "dev")),
                "--T",
                "auto",
                "--run-dir",
                cls.train_dir,
            )[0],
        ]
        cls.checkpoint = os.path.join(cls.train_dir, "model.ckpt")

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def common(self, command):
        return ["--config", self.config, "--quiet", command, "--index", self.index]

    def test_setup_commands_succeed(self):
        self.assertEqual(self.codes, [0, 0, 0])
        for name in ("model.ckpt", "metrics.csv", "timing.csv", "manifest.json"):
            self.assertTrue(os.path.exists(os.path.join(self.train_dir, name)), name)

    def test_eval(self):
        run_dir = os.path.join(self.tmp.name, "eval")
        code, out, _ = run(
            *self.common("eval"),
            "--questions",
            self.train_file,
            "--checkpoint",
            self.checkpoint,
            "--run-dir",
            run_dir,
        )
        self.assertEqual(code, 0)
        metrics = json.loads(out.strip().splitlines()[-1])
        self.assertLessEqual(metrics["hits_at_1"], metrics["answer_recall"])
        self.assertTrue(os.path.exists(os.path.join(run_dir, "eval.json")))

    def test_eval_with_broken_checkpoint(self):
        broken = os.path.join(self.tmp.name, "broken.ckpt")
        with open(broken, "wb") as f:
            f.write(b"not a checkpoint")
        code, _, _ = run(
            *self.common("eval"), "--questions", self.train_file, "--checkpoint", broken
        )
        self.assertEqual(code, 2)

    def test_sweeps(self):
        run_dir = os.path.join(self.tmp.name, "sweep")
        code, out, _ = run(
            *self.common("sweep-recall"),
            "--questions",
            self.train_file,
            "--retriever",
            "ppr",
            "--budgets",
            "5,20",
            "--run-dir",
            run_dir,
        )
        self.assertEqual(code, 0)
        rows = [json.loads(line) for line in out.strip().splitlines()]
        self.assertEqual([row["budget"] for row in rows], [5, 20])
        self.assertTrue(os.path.exists(os.path.join(run_dir, "sweep_ppr.csv")))

        code, _, _ = run(
            *self.common("sweep-recall"),
            "--questions",
            self.train_file,
            "--retriever",
            "pullnet",
            "--budgets",
            "1",
        )
        self.assertEqual(code, 1)

    def test_trace(self):
        qid = int(read_jsonl(self.train_file, ("id",))["id"].iloc[0])
        run_dir = os.path.join(self.tmp.name, "trace")
        args = [
            *self.common("trace"),
            "--questions",
            self.train_file,
            "--checkpoint",
            self.checkpoint,
        ]
        code, out, _ = run(*args, "--qid", str(qid), "--graph", "--run-dir", run_dir)
        self.assertEqual(code, 0)
        first = json.loads(out.splitlines()[0])
        self.assertEqual((first["qid"], first["iteration"]), (qid, 1))
        self.assertTrue(os.path.exists(os.path.join(run_dir, "trace.jsonl")))
        self.assertTrue(os.path.exists(os.path.join(run_dir, f"graph_{qid}.json")))
        self.assertEqual(run(*args, "--qid", "99999")[0], 1)

    def test_settings(self):
        run_dir = os.path.join(self.tmp.name, "settings")
        code, out, _ = run(
            "--config",
            self.config,
            "--quiet",
            "settings",
            "--index",
            self.index,
            "--data",
            self.data,
            "--hops",
            "1",
            "--run-dir",
            run_dir,
        )
        self.assertEqual(code, 0)
        row = json.loads(out.strip().splitlines()[-1])
        self.assertEqual(set(row), {"hops", "kb", "text", "kb_50", "kb_50_text"})
        self.assertTrue(os.path.exists(os.path.join(run_dir, "settings.csv")))


if __name__ == "__main__":
    unittest.main()
