"""Model builders shared by several test modules."""

import numpy as np

from bihfusion.fusion import FusionConfig
from bihfusion.gnn import GnnConfig
from bihfusion.model import FusionModel, ModelConfig
from bihfusion.plm import PlmConfig


def small_model(mode, task="mqa", seed=0, schedule=None, gnn_layers=3, plm_layers=2):
    cfg = ModelConfig(
        task=task, num_classes=3,
        gnn=GnnConfig(hidden_dim=8, num_layers=gnn_layers, rbf_count=4, seqdist_dim=4, level="backbone"),
        plm=PlmConfig(d_model=8, num_layers=plm_layers, num_heads=2, ffn_dim=16, max_len=32),
        fusion=FusionConfig(mode=mode, shared_dim=8, num_heads=2, schedule=schedule),
    )
    return FusionModel(cfg, seed)


def randomize(module, seed=1, names=("out_gnn", "out_plm", "tags")):
    rng = np.random.default_rng(seed)
    for k, p in module.named_parameters():
        if any(n in k for n in names):
            p.data[...] = rng.normal(scale=0.5, size=p.shape)
