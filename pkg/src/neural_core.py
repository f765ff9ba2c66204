#!/usr/bin/env python3
"""
Neural core
Embeddings, the LSTM encoder, the relation scorer, the heterogeneous graph
convolution and the two entity classification heads.

Message passing, per layer l and entity e:
    fact f=(s,r,o) -> e : sigmoid(h_r . h_q) * W_fact (h_r + h_other)
    doc d -> e          : W_out (LSTM state at the last token of e's mention in d),
                          where the LSTM reads word_emb[w_i] + sum W_in h_e' over
                          entities e' mentioned at position i
    h_e <- ReLU(W_self h_e + mean(fact msgs) + mean(doc msgs) + W_q h_q + b)
"""

import json
import logging
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from config.config import ModelConfig
from src.autograd import Tensor, concat, parameter, scatter_add, segment_mean, stack
from src.errors import CheckpointError, DataValidationError, UnknownKeyError
from src.question_graph import QuestionSubgraph, Stores

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PULLNET\x00"
CHECKPOINT_VERSION = 1


class ModelParams:
    """All trainable tensors, addressed by name"""

    def __init__(
        self,
        config: ModelConfig,
        num_words: int,
        num_relations: int,
        num_entities: int,
        tensors: Optional[Dict[str, Tensor]] = None,
    ):
        self.config = config
        self.num_words = num_words
        self.num_relations = num_relations
        self.num_entities = num_entities
        self.tensors: Dict[str, Tensor] = tensors if tensors is not None else {}

    # -- layout ----------------------------------------------------------------

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        n = self.config.n
        shapes = {
            "word_emb": (self.num_words, n),
            "relation_emb": (self.num_relations, n),
            "entity_emb": (self.num_entities, n),
            "q_feature": (1,),
            "lstm_Wx": (n, 4 * n),
            "lstm_Wh": (n, 4 * n),
            "lstm_b": (4 * n,),
        }
        for layer in range(self.config.L):
            for name in ("W_self", "W_fact", "W_in", "W_out", "W_q"):
                shapes[f"gcn{layer}_{name}"] = (n, n)
            shapes[f"gcn{layer}_b"] = (n,)
        shapes.update(
            {"pull_w": (n,), "pull_b": (1,), "answer_w": (n,), "answer_b": (1,)}
        )
        return shapes

    @classmethod
    def initialize(
        cls, config: ModelConfig, num_words: int, num_relations: int, num_entities: int
    ) -> "ModelParams":
        """Uniform(-1/sqrt(n), 1/sqrt(n)) init from the config seed."""
        params = cls(config.validate(), num_words, num_relations, num_entities)
        rng = np.random.default_rng(config.seed)
        bound = 1.0 / np.sqrt(config.n)
        for name, shape in params.shapes().items():
            params.tensors[name] = parameter(rng.uniform(-bound, bound, size=shape))
        logger.info(
            f"Initialized model n={config.n} L={config.L}: "
            f"{sum(t.data.size for t in params.tensors.values())} parameters"
        )
        return params

    @classmethod
    def zeros(
        cls, config: ModelConfig, num_words: int, num_relations: int, num_entities: int
    ) -> "ModelParams":
        params = cls(config.validate(), num_words, num_relations, num_entities)
        for name, shape in params.shapes().items():
            params.tensors[name] = parameter(np.zeros(shape))
        return params

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def named(self) -> List[Tuple[str, Tensor]]:
        return [(name, self.tensors[name]) for name in self.shapes()]

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            self.num_words,
            self.num_relations,
            self.num_entities,
            {name: parameter(t.data.copy()) for name, t in self.tensors.items()},
        )

    def sizes(self) -> Dict[str, int]:
        return {
            "num_words": self.num_words,
            "num_relations": self.num_relations,
            "num_entities": self.num_entities,
        }


@dataclass
class GraphLayout:
    """Canonical node order and the index arrays message passing needs"""

    entity_ids: np.ndarray
    fact_ids: np.ndarray
    doc_ids: np.ndarray
    q_mask: np.ndarray
    # fact -> entity incidences
    inc_target: np.ndarray
    inc_other: np.ndarray
    inc_relation: np.ndarray
    # documents, padded to (max_len, num_docs)
    doc_tokens: np.ndarray
    inject_pos: np.ndarray
    inject_row: np.ndarray
    read_t: np.ndarray
    read_b: np.ndarray
    read_row: np.ndarray


@dataclass
class EncodedGraph:
    layout: GraphLayout
    h_q: Tensor
    states: List[Tensor]

    @property
    def final(self) -> Tensor:
        return self.states[-1]

    @property
    def entity_ids(self) -> np.ndarray:
        return self.layout.entity_ids


def build_layout(g: QuestionSubgraph, stores: Stores) -> GraphLayout:
    entity_ids = np.array(sorted(g.entity_nodes), dtype=np.int64)
    row = {int(e): i for i, e in enumerate(entity_ids)}
    fact_ids = np.array(sorted(g.fact_nodes), dtype=np.int64)
    doc_ids = np.array(sorted(g.text_nodes), dtype=np.int64)

    inc_target, inc_other, inc_relation = [], [], []
    for f, e in sorted(g.fact_edges):
        fact = stores.kb.facts[f]
        other = fact.object if fact.subject == e else fact.subject
        inc_target.append(row[e])
        inc_other.append(row.get(other, len(entity_ids)))
        inc_relation.append(fact.relation)

    docs = [stores.corpus.docs[d] for d in doc_ids]
    max_len = max((len(d.tokens) for d in docs), default=0)
    doc_tokens = np.zeros((max_len, len(docs)), dtype=np.int64)
    inject_pos, inject_row, read_t, read_b, read_row = [], [], [], [], []
    for b, doc in enumerate(docs):
        doc_tokens[: len(doc.tokens), b] = stores.words.encode(doc.tokens)
        for m in doc.mentions:
            if m.entity not in row:
                continue
            for t in range(m.start, m.end):
                inject_pos.append(t * len(docs) + b)
                inject_row.append(row[m.entity])
            read_t.append(m.end - 1)
            read_b.append(b)
            read_row.append(row[m.entity])

    as_idx = lambda values: np.asarray(values, dtype=np.int64)  # noqa: E731
    return GraphLayout(
        entity_ids=entity_ids,
        fact_ids=fact_ids,
        doc_ids=doc_ids,
        q_mask=np.array([float(int(e) in g.q_entities) for e in entity_ids]),
        inc_target=as_idx(inc_target),
        inc_other=as_idx(inc_other),
        inc_relation=as_idx(inc_relation),
        doc_tokens=doc_tokens,
        inject_pos=as_idx(inject_pos),
        inject_row=as_idx(inject_row),
        read_t=as_idx(read_t),
        read_b=as_idx(read_b),
        read_row=as_idx(read_row),
    )


def lstm_run(params: ModelParams, inputs: Tensor) -> List[Tensor]:
    """Run the shared LSTM over (time, batch, n) inputs; returns per-step hidden states."""
    n = params.config.n
    steps, batch = inputs.shape[0], inputs.shape[1]
    Wx, Wh, b = params["lstm_Wx"], params["lstm_Wh"], params["lstm_b"]
    h = Tensor(np.zeros((batch, n)))
    c = Tensor(np.zeros((batch, n)))
    hidden = []
    for t in range(steps):
        z = inputs[t] @ Wx + h @ Wh + b
        i_gate = z[:, :n].sigmoid()
        f_gate = z[:, n : 2 * n].sigmoid()
        o_gate = z[:, 2 * n : 3 * n].sigmoid()
        g_cell = z[:, 3 * n :].tanh()
        c = f_gate * c + i_gate * g_cell
        h = o_gate * c.tanh()
        hidden.append(h)
    return hidden


def encode_question(params: ModelParams, token_ids: Sequence[int]) -> Tensor:
    """Last LSTM state over the question's word embeddings."""
    if len(token_ids) == 0:
        raise DataValidationError("cannot encode an empty question")
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.min() < 0 or ids.max() >= params.num_words:
        raise UnknownKeyError(f"word id outside vocabulary of size {params.num_words}")
    inputs = params["word_emb"][ids].reshape(len(ids), 1, params.config.n)
    return lstm_run(params, inputs)[-1][0]


def fact_logits(params: ModelParams, relations: Sequence[int], h_q: Tensor) -> Tensor:
    rel = np.asarray(relations, dtype=np.int64)
    return (params["relation_emb"][rel] * h_q).sum(axis=1)


def fact_score(params: ModelParams, r: int, h_q: Tensor) -> float:
    """sigmoid(h_r . h_q)"""
    if not 0 <= r < params.num_relations:
        raise UnknownKeyError(f"relation id {r} outside 0..{params.num_relations - 1}")
    return float(expit(params["relation_emb"].data[r] @ h_q.data))


def _gcn_layer(
    params: ModelParams, layer: int, H: Tensor, h_q: Tensor, lay: GraphLayout, words: Tensor
) -> Tensor:
    num_entities, n = H.shape
    p = f"gcn{layer}_"
    total = H @ params[p + "W_self"] + h_q @ params[p + "W_q"] + params[p + "b"]

    if len(lay.inc_target):
        rel = params["relation_emb"][lay.inc_relation]
        gate = (rel * h_q).sum(axis=1).sigmoid().reshape(-1, 1)
        padded = concat([H, Tensor(np.zeros((1, n)))], axis=0)
        messages = ((rel + padded[lay.inc_other]) @ params[p + "W_fact"]) * gate
        total = total + segment_mean(messages, lay.inc_target, num_entities)

    if len(lay.read_row):
        steps, batch = lay.doc_tokens.shape
        inputs = words
        if len(lay.inject_row):
            injected = (H @ params[p + "W_in"])[lay.inject_row]
            inputs = inputs + scatter_add(injected, lay.inject_pos, steps * batch).reshape(
                steps, batch, n
            )
        hidden = stack(lstm_run(params, inputs), axis=0)
        read = hidden[lay.read_t, lay.read_b] @ params[p + "W_out"]
        total = total + segment_mean(read, lay.read_row, num_entities)

    return total.relu()


def encode_graph(
    params: ModelParams, g: QuestionSubgraph, stores: Stores, h_q: Tensor
) -> EncodedGraph:
    """L rounds of heterogeneous message passing over the subgraph."""
    if not g.entity_nodes:
        raise DataValidationError("cannot encode a subgraph without entity nodes")
    lay = build_layout(g, stores)
    H = params["entity_emb"][lay.entity_ids] + Tensor(lay.q_mask[:, None]) * params["q_feature"]
    words = None
    if len(lay.read_row):
        words = params["word_emb"][lay.doc_tokens]
    states = [H]
    for layer in range(params.config.L):
        H = _gcn_layer(params, layer, H, h_q, lay, words)
        states.append(H)
    return EncodedGraph(layout=lay, h_q=h_q, states=states)


def pull_logits(params: ModelParams, eg: EncodedGraph) -> Tensor:
    return eg.final @ params["pull_w"] + params["pull_b"]


def answer_logits(params: ModelParams, eg: EncodedGraph) -> Tensor:
    return eg.final @ params["answer_w"] + params["answer_b"]


def _as_probabilities(eg: EncodedGraph, logits: Tensor) -> Dict[int, float]:
    probs = expit(logits.data)
    return {int(e): float(p) for e, p in zip(eg.entity_ids, probs)}


def classify_pullnodes(params: ModelParams, eg: EncodedGraph) -> Dict[int, float]:
    """Probability that each entity node should be expanded next."""
    return _as_probabilities(eg, pull_logits(params, eg))


def classify_answer(params: ModelParams, eg: EncodedGraph) -> Dict[int, float]:
    """Probability that each entity node answers the question."""
    return _as_probabilities(eg, answer_logits(params, eg))


# -- checkpoints ----------------------------------------------------------------


def save_checkpoint(path: str, params: ModelParams, extra: Optional[dict] = None) -> None:
    """Version tag + JSON manifest + raw float64 little-endian payloads."""
    manifest = []
    offset = 0
    payloads = []
    for name, tensor in params.named():
        raw = np.ascontiguousarray(tensor.data, dtype="<f8").tobytes()
        manifest.append(
            {"name": name, "shape": list(tensor.shape), "offset": offset, "nbytes": len(raw)}
        )
        payloads.append(raw)
        offset += len(raw)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": {
            "n": params.config.n,
            "L": params.config.L,
            "seed": params.config.seed,
            **params.sizes(),
        },
        "manifest": manifest,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for raw in payloads:
            f.write(raw)
    logger.info(f"Checkpoint written to {path} ({offset} payload bytes)")


def load_checkpoint(path: str) -> Tuple[ModelParams, dict]:
    """Read a checkpoint, validating every tensor shape against the stored config."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    prefix = len(CHECKPOINT_MAGIC)
    if blob[:prefix] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a PullNet checkpoint")
    start = prefix + struct.calcsize("<IQ")
    if len(blob) < start:
        raise CheckpointError(f"{path} ends inside the checkpoint header")
    version, header_len = struct.unpack_from("<IQ", blob, prefix)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if start + header_len > len(blob):
        raise CheckpointError(f"{path}: header length {header_len} runs past the end of the file")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
        cfg = header["config"]
        model_cfg = ModelConfig(n=cfg["n"], L=cfg["L"], seed=cfg["seed"])
        sizes = (cfg["num_words"], cfg["num_relations"], cfg["num_entities"])
        stored = {
            entry["name"]: (tuple(entry["shape"]), int(entry["offset"]), int(entry["nbytes"]))
            for entry in header["manifest"]
        }
        params = ModelParams(model_cfg, *sizes)
        expected = params.shapes()
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint header ({exc})") from exc
    payload = memoryview(blob)[start + header_len :]

    if set(stored) != set(expected):
        raise CheckpointError(
            f"checkpoint tensors {sorted(stored)} do not match model layout {sorted(expected)}"
        )
    for name, shape in expected.items():
        stored_shape, offset, nbytes = stored[name]
        if stored_shape != shape or nbytes != 8 * int(np.prod(shape)):
            raise CheckpointError(
                f"tensor {name}: stored shape {list(stored_shape)}, expected {shape}"
            )
        end = offset + nbytes
        if end > len(payload):
            raise CheckpointError(f"tensor {name} runs past the end of the file")
        data = np.frombuffer(payload[offset:end], dtype="<f8").reshape(shape)
        params.tensors[name] = parameter(data.astype(np.float64))
    return params, header.get("extra", {})
