"""Training protocol: Adam, stage-wise learning rate, MSE warm-up, plateau-triggered switch.

Training starts under MSE alone. Once more than ``warmup_min_epochs`` epochs
have completed and neither validation PLC nor SRC has beaten its running best
for ``plateau_patience`` consecutive epochs, the correlation losses are
switched on for the rest of the run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ndgrad as nd
from .data import Dataset
from .losses import Batch, LossConfig, Phase, loss_terms
from .metrics import MetricsReport, evaluate
from .model import MlpRegressor

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    lr_initial: float = 3e-4
    lr_decay_factor: float = 0.25
    lr_decay_period_epochs: int = 26
    warmup_min_epochs: int = 11
    plateau_patience: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr_initial <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr_initial > 0 required")
        if not 0 < self.lr_decay_factor < 1:
            raise ValueError("lr_decay_factor must be in (0, 1)")
        if self.lr_decay_period_epochs < 1 or self.plateau_patience < 1:
            raise ValueError("lr_decay_period_epochs and plateau_patience must be >= 1")
        if self.warmup_min_epochs < 0:
            raise ValueError("warmup_min_epochs must be >= 0")

    @classmethod
    def full_scale(cls, **kw) -> "TrainConfig":
        """The full-scale schedule: 160 epochs, batch 160, decay every 70, warm-up >= 30."""
        base = dict(epochs=160, batch_size=160, lr_decay_period_epochs=70, warmup_min_epochs=30)
        base.update(kw)
        return cls(**base)


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, step: int, term: str, value: float):
        self.epoch, self.step, self.term = epoch, step, term
        super().__init__(f"non-finite loss term {term!r}={value} at epoch {epoch}, step {step}")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls([np.zeros(p.shape) for p in params], [np.zeros(p.shape) for p in params],
                   0, beta1, beta2, eps)


def adam_step(params: list[nd.Node], grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update; replaces each ``param.value``."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for idx, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or state.m[idx].shape != p.shape:
            raise nd.ShapeError("adam_step", p.shape, g.shape)
        state.m[idx] = b1 * state.m[idx] + (1.0 - b1) * g
        state.v[idx] = b2 * state.v[idx] + (1.0 - b2) * g * g
        m_hat = state.m[idx] / bc1
        v_hat = state.v[idx] / bc2
        p.value = nd.as_array(p.value - lr * m_hat / (np.sqrt(v_hat) + state.eps))


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    return cfg.lr_initial * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_period_epochs)


@dataclass
class PlateauTracker:
    best_plc: float = -math.inf
    best_src: float = -math.inf
    since_improvement: int = 0

    def update(self, plc: float, src: float) -> None:
        if plc > self.best_plc or src > self.best_src:
            self.best_plc = max(self.best_plc, plc)
            self.best_src = max(self.best_src, src)
            self.since_improvement = 0
        else:
            self.since_improvement += 1


@dataclass
class TrainState:
    adam: AdamState
    # completed epochs
    epoch: int = 0
    phase: Phase = "warmup"
    switched_at: int | None = None
    plateau: PlateauTracker = field(default_factory=PlateauTracker)
    history: list[dict] = field(default_factory=list)

    def record_validation(self, plc: float, src: float) -> None:
        if self.phase == "warmup":
            self.plateau.update(plc, src)


def should_switch_phase(state: TrainState, cfg: TrainConfig) -> bool:
    return (
        state.phase == "warmup"
        and state.epoch > cfg.warmup_min_epochs
        and state.plateau.since_improvement >= cfg.plateau_patience
    )


@dataclass
class TrainResult:
    model: MlpRegressor
    state: TrainState
    reports: list[dict[str, MetricsReport]]

    @property
    def history(self) -> list[dict]:
        return self.state.history


HISTORY_COLUMNS = ("epoch", "phase", "lr", "split", "plc", "src", "klc", "ae_mean", "re_mean", "loss")


def train(
    model: MlpRegressor,
    train_ds: Dataset,
    val_ds: Dataset,
    loss_cfg: LossConfig,
    cfg: TrainConfig,
    on_step: Callable[[int, int, np.ndarray, str, float], None] | None = None,
) -> TrainResult:
    """Run the full protocol in place on ``model`` and return it with per-epoch metrics.

    ``on_step(epoch, step, batch_indices, phase, loss)`` is called before each
    parameter update, while the model still holds the weights that produced ``loss``.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValueError("train and validation splits must be nonempty")
    params = model.parameters()
    state = TrainState(AdamState.for_params(params, cfg.beta1, cfg.beta2, cfg.adam_eps))
    loss_rng = np.random.default_rng([cfg.seed, 7])
    reports: list[dict[str, MetricsReport]] = []
    n = len(train_ds)

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        perm = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        losses = []
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            if state.phase == "correlation" and idx.size < 3:
                # a 1-2 sample tail cannot carry correlation terms
                continue
            pred, emb = model.forward(train_ds.features[idx])
            batch = Batch(pred, train_ds.targets[idx], emb)
            terms = loss_terms(batch, loss_cfg, state.phase, loss_rng)
            total = None
            for name, t in terms.items():
                if not math.isfinite(t.item()):
                    raise TrainingError(epoch, step, name, t.item())
                total = t if total is None else total + t
            model.zero_grad()
            nd.backward(total)
            grads = [p.grad for p in params]
            if not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError(epoch, step, "gradient", float("nan"))
            if on_step is not None:
                on_step(epoch, step, idx, state.phase, total.item())
            adam_step(params, grads, state.adam, lr)
            losses.append(total.item())

        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        rep = {
            "train": evaluate(model.predict(train_ds.features), train_ds.targets),
            "val": evaluate(model.predict(val_ds.features), val_ds.targets),
        }
        reports.append(rep)
        for split_name, r in rep.items():
            state.history.append({
                "epoch": epoch, "phase": state.phase, "lr": lr, "split": split_name,
                "plc": r.plc, "src": r.src, "klc": r.klc, "ae_mean": r.ae_mean,
                "re_mean": r.re_mean, "loss": epoch_loss,
            })
        state.epoch = epoch + 1
        state.record_validation(rep["val"].plc, rep["val"].src)
        if should_switch_phase(state, cfg):
            state.phase = "correlation"
            state.switched_at = state.epoch
            log.info("switching to correlation losses after epoch %d", state.epoch)
    return TrainResult(model, state, reports)
