"""Training and evaluation loops, Adam, and checkpoint files."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import metrics as M
from . import tensorcore as tc
from .config import ConfigError, RunConfig, format_config, parse_config
from .heads import loss_for
from .model import FusionModel
from .plm import PlmState
from .protein.dataset import (
    CLASSIFICATION_TASKS,
    PER_RESIDUE_TASKS,
    Dataset,
    filter_max_length,
    read_dataset,
    read_embeddings,
)
from .protein.graph import ProteinGraph, build_graph
from .protein.structure import LigandGraph
from .tensorcore.rng import make_rng

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch_ids: list[str]):
        super().__init__(f"non-finite loss in epoch {epoch}, batch {batch_ids}")
        self.epoch = epoch
        self.batch_ids = batch_ids


class EmptySplit(ValueError):
    pass


# --- optimizer ---------------------------------------------------------------

class Adam:
    def __init__(self, params: list[tuple[str, tc.Tensor]], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params:
            g = p.grad
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"meta/adam_step": np.array(float(self.t))}
        for k in self.m:
            out[f"adam.m/{k}"] = self.m[k]
            out[f"adam.v/{k}"] = self.v[k]
        return out

    def load(self, tensors: dict[str, np.ndarray]) -> None:
        self.t = int(tensors["meta/adam_step"])
        for k in self.m:
            self.m[k] = tensors[f"adam.m/{k}"].copy()
            self.v[k] = tensors[f"adam.v/{k}"].copy()


# --- examples ----------------------------------------------------------------

@dataclass
class Example:
    id: str
    graph: ProteinGraph
    tokens: list[int]
    label: object
    ligand: LigandGraph | None = None
    precomputed: PlmState | None = None


def prepare_examples(ds: Dataset, cfg: RunConfig) -> list[Example]:
    records, _ = filter_max_length(ds.records, cfg.max_len)
    out = []
    for rec in records:
        s = rec.structure
        label = rec.residue_labels if cfg.task in PER_RESIDUE_TASKS else rec.label
        if label is None:
            raise ValueError(f"record {rec.id!r} has no label")
        pre = None
        if cfg.embeddings:
            emb = read_embeddings(Path(cfg.embeddings) / f"{rec.id}.bhem").astype(np.float64)
            pre = PlmState([tc.Tensor(emb), tc.Tensor(emb)])
        out.append(Example(rec.id, build_graph(s, cfg.cutoff, cfg.level), s.tokens, label, rec.ligand, pre))
    return out


def precomputed_dim(examples: list[Example]) -> int | None:
    for ex in examples:
        if ex.precomputed is not None:
            return ex.precomputed.final.shape[1]
    return None


def build_model(cfg: RunConfig, pre_dim: int | None = None) -> FusionModel:
    return FusionModel(cfg.model_config(pre_dim), cfg.seed)


def item_prediction(model: FusionModel, ex: Example, training: bool = False, rng=None) -> tc.Tensor:
    return model(ex.graph, ex.tokens, ex.ligand, training=training, rng=rng, precomputed=ex.precomputed)


def item_loss(model: FusionModel, ex: Example, training: bool = False, rng=None) -> tc.Tensor:
    return loss_for(model.cfg.task, item_prediction(model, ex, training, rng), ex.label)


def mean_loss(model: FusionModel, examples: list[Example]) -> float:
    if not examples:
        raise EmptySplit("no examples to evaluate")
    with tc.no_grad():
        return float(np.mean([item_loss(model, ex).item() for ex in examples]))


# --- checkpoints -------------------------------------------------------------

@dataclass
class TrainState:
    model: FusionModel
    optimizer: Adam
    cfg: RunConfig
    epoch: int = 0  # epochs completed
    best_val: float = float("inf")
    best_epoch: int = -1
    best_params: dict[str, np.ndarray] | None = None
    history: list[dict] = field(default_factory=list)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v for k, v in self.model.state_dict().items()}
        if self.best_params is not None:
            out.update({f"best/{k}": v for k, v in self.best_params.items()})
        out.update(self.optimizer.state())
        out["meta/epoch"] = np.array(float(self.epoch))
        out["meta/best_val"] = np.array(self.best_val)
        out["meta/best_epoch"] = np.array(float(self.best_epoch))
        out["meta/config_utf8"] = np.frombuffer(format_config(self.cfg).encode("utf-8"), dtype=np.uint8).astype(np.float64)
        hist = np.array([[h["epoch"], h["train_loss"], h["val_loss"]] for h in self.history]).reshape(-1, 3)
        out["meta/history"] = hist
        pre = self.model.cfg.precomputed_dim
        out["meta/precomputed_dim"] = np.array(-1.0 if pre is None else float(pre))
        return out


def save_checkpoint(path, state: TrainState) -> None:
    tc.save(path, state.tensors())


def _config_from(tensors) -> RunConfig:
    raw = tensors["meta/config_utf8"].astype(np.uint8).tobytes().decode("utf-8")
    return parse_config(raw, source="checkpoint")


def load_checkpoint(path, cfg: RunConfig | None = None) -> TrainState:
    """Restore a training state; ``cfg`` (if given) overrides the stored snapshot."""
    tensors = tc.load(path)
    stored = _config_from(tensors)
    cfg = cfg or stored
    pre = int(tensors["meta/precomputed_dim"])
    model = build_model(cfg, None if pre < 0 else pre)
    params = {k[len("param/"):]: v for k, v in tensors.items() if k.startswith("param/")}
    try:
        model.load_state_dict(params)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"checkpoint does not match the configured model: {e}") from None
    opt = Adam(model.trainable_parameters(), cfg.lr)
    opt.load(tensors)
    best = {k[len("best/"):]: v for k, v in tensors.items() if k.startswith("best/")} or None
    hist = [{"epoch": int(e), "train_loss": float(a), "val_loss": float(b)} for e, a, b in tensors["meta/history"]]
    return TrainState(model, opt, cfg, int(tensors["meta/epoch"]), float(tensors["meta/best_val"]),
                      int(tensors["meta/best_epoch"]), best, hist)


def load_for_eval(path) -> tuple[FusionModel, RunConfig]:
    """Model with the best-validation parameters (or the latest ones if none were kept)."""
    st = load_checkpoint(path)
    if st.best_params is not None:
        st.model.load_state_dict(st.best_params)
    return st.model, st.cfg


# --- training ----------------------------------------------------------------

def new_state(cfg: RunConfig, examples: list[Example]) -> TrainState:
    model = build_model(cfg, precomputed_dim(examples))
    return TrainState(model, Adam(model.trainable_parameters(), cfg.lr), cfg)


def train_epoch(state: TrainState, examples: list[Example]) -> float:
    """One pass over the shuffled training set; returns the mean per-item loss."""
    cfg, model, opt = state.cfg, state.model, state.optimizer
    rng = make_rng(cfg.seed, "epoch", state.epoch)
    order = rng.permutation(len(examples))
    total = 0.0
    for start in range(0, len(order), cfg.batch_size):
        batch = [examples[i] for i in order[start:start + cfg.batch_size]]
        model.zero_grad()
        scale = 1.0 / len(batch)
        try:
            for ex in batch:
                loss = item_loss(model, ex, training=True, rng=rng)
                total += loss.item()
                tc.backward(tc.mul(loss, scale))
        except tc.NumericError:
            raise TrainingDiverged(state.epoch, [ex.id for ex in batch]) from None
        if not all(np.all(np.isfinite(p.grad)) for _, p in opt.params):
            raise TrainingDiverged(state.epoch, [ex.id for ex in batch])
        opt.step()
    return total / len(examples)


def train(cfg: RunConfig, train_examples: list[Example], val_examples: list[Example] | None = None,
          state: TrainState | None = None, on_epoch: Callable[[dict], None] | None = None,
          stop_after: int | None = None) -> TrainState:
    """Run (or resume) training up to ``cfg.epochs`` epochs.

    ``stop_after`` ends the run early after that many completed epochs, which
    is how interrupted runs are simulated.
    """
    if not train_examples:
        raise EmptySplit("training split is empty")
    state = state or new_state(cfg, train_examples)
    val_examples = val_examples if val_examples else None
    while state.epoch < cfg.epochs:
        if stop_after is not None and state.epoch >= stop_after:
            break
        train_loss = train_epoch(state, train_examples)
        val_loss = mean_loss(state.model, val_examples) if val_examples else train_loss
        if not np.isfinite(val_loss):
            raise TrainingDiverged(state.epoch, ["<validation>"])
        rec = {"epoch": state.epoch, "train_loss": train_loss, "val_loss": val_loss}
        state.history.append(rec)
        if val_loss < state.best_val:
            state.best_val, state.best_epoch = val_loss, state.epoch
            state.best_params = state.model.state_dict()
        state.epoch += 1
        if on_epoch:
            on_epoch(rec)
    return state


def load_split(cfg: RunConfig, split: str) -> list[Example]:
    path = {"train": cfg.train_path, "val": cfg.val_path, "test": cfg.test_path}[split]
    if not path:
        raise EmptySplit(f"no {split} dataset configured")
    ds = read_dataset(path)
    if ds.task != cfg.task:
        raise ConfigError(f"dataset {path} is for task {ds.task!r} but the config says {cfg.task!r}")
    return prepare_examples(ds, cfg)


def run_training(cfg: RunConfig, resume: bool = False, on_epoch=None) -> TrainState:
    cfg.validate()
    train_ex = load_split(cfg, "train")
    val_ex = load_split(cfg, "val") if cfg.val_path else None
    state = None
    if resume and Path(cfg.checkpoint).is_file():
        state = load_checkpoint(cfg.checkpoint, cfg)
        log.info("resuming from %s at epoch %d", cfg.checkpoint, state.epoch)

    if state is None:
        state = new_state(cfg, train_ex)

    def after(rec):
        save_checkpoint(cfg.checkpoint, state)
        if on_epoch:
            on_epoch(rec)

    train(cfg, train_ex, val_ex, state, after)
    save_checkpoint(cfg.checkpoint, state)
    return state


# --- evaluation --------------------------------------------------------------

def predictions(model: FusionModel, examples: list[Example]) -> list[np.ndarray]:
    with tc.no_grad():
        return [item_prediction(model, ex).numpy() for ex in examples]


def metric_report(task: str, preds: list[np.ndarray], labels: list) -> M.MetricReport:
    if not preds:
        raise EmptySplit("cannot report metrics over an empty split")
    values: dict[str, float] = {}
    if task in CLASSIFICATION_TASKS:
        values["accuracy"] = M.accuracy([int(np.argmax(p)) for p in preds], [int(t) for t in labels])
    elif task in PER_RESIDUE_TASKS:
        s = np.concatenate([np.ravel(p) for p in preds])
        y = np.concatenate([np.ravel(t) for t in labels])
        values["aucpr"] = M.aucpr(s, y)
    else:
        p = np.array([float(v) for v in preds])
        t = np.array([float(v) for v in labels])
        values["rmse"] = M.rmse(p, t)
        values["mse"] = M.mse(p, t)
        for name, fn in (("pearson", M.pearson), ("spearman", M.spearman)):
            try:
                values[name] = fn(p, t)
            except M.DegenerateInput as e:
                log.warning("%s skipped: %s", name, e)
    return M.MetricReport(task, values, len(preds))


def evaluate(model: FusionModel, examples: list[Example]) -> M.MetricReport:
    if not examples:
        raise EmptySplit("cannot evaluate an empty split")
    return metric_report(model.cfg.task, predictions(model, examples), [ex.label for ex in examples])


def evaluate_checkpoint(cfg: RunConfig, checkpoint, split: str) -> M.MetricReport:
    model, stored = load_for_eval(checkpoint)
    if stored.task != cfg.task:
        raise ConfigError(f"checkpoint was trained for {stored.task!r}, not {cfg.task!r}")
    return evaluate(model, load_split(stored.replace(train_path=cfg.train_path, val_path=cfg.val_path,
                                                     test_path=cfg.test_path, embeddings=cfg.embeddings), split))
