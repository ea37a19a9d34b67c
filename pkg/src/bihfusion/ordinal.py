"""Held-out loss of the four fusion modes on one synthetic dataset, over several seeds."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .fusion import MODES
from .synth import generate_synthetic
from .train import mean_loss, prepare_examples, train

log = logging.getLogger(__name__)


@dataclass
class OrdinalReport:
    losses: dict[str, list[float]] = field(default_factory=dict)
    seconds: float = 0.0

    def median(self, mode: str) -> float:
        return float(np.median(self.losses[mode]))

    @property
    def fused_best(self) -> float:
        return min(self.median("local_gated"), self.median("global_attention"))

    @property
    def ordering_holds(self) -> bool:
        return self.fused_best <= self.median("serial") <= self.median("none")

    def to_tsv(self) -> str:
        n = max(len(v) for v in self.losses.values())
        lines = ["mode\tmedian\t" + "\t".join(f"seed{k}" for k in range(n))]
        for mode, vals in self.losses.items():
            lines.append(f"{mode}\t{self.median(mode)!r}\t" + "\t".join(repr(v) for v in vals))
        return "\n".join(lines) + "\n"


def ordinal_study(n_proteins: int = 200, seeds=range(5), epochs: int = 20, data_seed: int = 0,
                  len_range=(8, 16), holdout: float = 0.2, base: RunConfig | None = None) -> OrdinalReport:
    t0 = time.perf_counter()
    base = base or RunConfig(task="mqa", level="base", hidden_dim=16, d_model=16, gnn_layers=2, plm_layers=2,
                             ffn_dim=32, plm_heads=2, fusion_heads=2, rbf_count=8, batch_size=8,
                             lr=3e-3, max_len=64)
    base = base.replace(epochs=epochs)
    ds = generate_synthetic(base.task, n_proteins, len_range, data_seed)
    examples = prepare_examples(ds, base)
    n_test = max(1, int(round(holdout * len(examples))))
    train_ex, test_ex = examples[:-n_test], examples[-n_test:]
    rep = OrdinalReport({m: [] for m in MODES})
    for mode in MODES:
        for seed in seeds:
            cfg = base.replace(mode=mode, seed=int(seed))
            st = train(cfg, train_ex)
            loss = mean_loss(st.model, test_ex)
            rep.losses[mode].append(loss)
            log.info("ordinal mode=%s seed=%d held-out=%.5f", mode, seed, loss)
    rep.seconds = time.perf_counter() - t0
    return rep


def write_ordinal_report(rep: OrdinalReport, out_dir) -> list[Path]:
    from .plotting import plot_ordinal

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tsv = out / "ordinal.tsv"
    tsv.write_text(rep.to_tsv(), encoding="utf-8")
    fig = plot_ordinal(rep.losses, out / "ordinal.png")
    return [tsv, fig]
