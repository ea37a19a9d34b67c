"""End-to-end acceptance criteria. Each test prints one PASS/FAIL line."""
import time

import numpy as np
import pytest

from bihfusion import tensorcore as tc
from bihfusion.config import RunConfig
from bihfusion.fusion import GlobalAttentionFusion, gate_weights, global_attention_fuse, local_gated_fuse
from bihfusion.metrics import aucpr, pearson, rmse, spearman
from bihfusion.model import run_fused_model
from bihfusion.ordinal import ordinal_study, write_ordinal_report
from bihfusion.protein import build_graph, read_dataset, write_dataset
from bihfusion.suites import GRADCHECK_TOL, INVARIANCE_TOL, gradcheck_suite, invariance_suite
from bihfusion.synth import generate_synthetic
from bihfusion.tensorcore.nn import MLP, MultiheadAttention
from bihfusion.train import evaluate, load_checkpoint, load_for_eval, mean_loss, prepare_examples, save_checkpoint, train

from helpers import randomize, small_model
from oracles import aucpr_bruteforce, pearson_direct, rmse_exact, spearman_bruteforce

MODES = ("none", "serial", "local_gated", "global_attention")


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok
    return emit


def test_1_se3_invariance(verdict):
    rep = invariance_suite(100, 10, seed=0)
    ok = rep.passed and rep.mirror_ok and rep.seconds < 60
    verdict("se3_invariance", ok, f"feature_dev={rep.max_feature_dev:.2e} layer_dev={rep.max_layer_dev:.2e} "
            f"tol={INVARIANCE_TOL} mirror_ok={rep.mirror_ok} seconds={rep.seconds:.1f}")
    assert ok, rep.failures


def test_2_gradient_suite(verdict):
    t0 = time.perf_counter()
    results = gradcheck_suite(seed=0)
    seconds = time.perf_counter() - t0
    worst = max(r.max_error for r in results)
    groups = sum(len(r.errors) for r in results)
    ok = worst < GRADCHECK_TOL and seconds < 300
    verdict("gradient_suite", ok, f"cases={len(results)} groups={groups} max_rel_error={worst:.2e} "
            f"seconds={seconds:.1f}")
    assert ok


def test_3_fusion_algebra(verdict, protein12):
    rng = np.random.default_rng(0)
    worst_gate, convex = 0.0, True
    for k in range(200):
        n = int(rng.integers(1, 12))
        x1, x2 = tc.Tensor(rng.normal(scale=3, size=(n, 8))), tc.Tensor(rng.normal(scale=3, size=(n, 8)))
        f = MLP([8, 8, 2], np.random.default_rng(k))
        worst_gate = max(worst_gate, float(np.abs(gate_weights(x1, x2, f).data.sum(axis=1) - 1).max()))
        out = local_gated_fuse(x1, x2, f).data
        lo, hi = np.minimum(x1.data, x2.data), np.maximum(x1.data, x2.data)
        slack = 1e-12 * (1 + np.abs(hi))
        convex &= bool(np.all(out >= lo - slack) and np.all(out <= hi + slack))

    g = build_graph(protein12, 10.0, "backbone")
    base, _ = run_fused_model(g, protein12.tokens, small_model("none"))
    zero_init = all(np.array_equal(run_fused_model(g, protein12.tokens, small_model(m))[0].data[:8], base.data)
                    for m in ("local_gated", "global_attention"))

    f = MLP([8, 8, 2], rng)
    for lin in f.layers:
        lin.weight.data[...] = 0.0
        lin.bias.data[...] = 0.0
    a, b = rng.normal(size=(6, 8)), rng.normal(size=(6, 8))
    averaging = np.array_equal(local_gated_fuse(tc.Tensor(a), tc.Tensor(b), f).data, (a + b) / 2)

    ok = worst_gate <= 1e-12 and convex and zero_init and averaging
    verdict("fusion_algebra", ok, f"gate_dev={worst_gate:.1e} convex={convex} zero_init_identical={zero_init} "
            f"zero_vote_average={averaging}")
    assert ok


def test_4_global_attention(verdict):
    shapes = True
    for n in (1, 2, 17):
        rng = np.random.default_rng(n)
        mha = MultiheadAttention(8, 2, rng)
        y1, y2 = global_attention_fuse(tc.Tensor(rng.normal(size=(n, 8))), tc.Tensor(rng.normal(size=(n, 8))), mha, 2)
        shapes &= y1.shape == (n, 8) and y2.shape == (n, 8)

    equivariant = True
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x1, x2 = rng.normal(size=(9, 8)), rng.normal(size=(9, 8))
        perm = rng.permutation(9)
        fp = GlobalAttentionFusion(8, 8, 8, 2, np.random.default_rng(seed))
        randomize(fp, seed)
        a1, a2 = fp(tc.Tensor(x1), tc.Tensor(x2))
        b1, b2 = fp(tc.Tensor(x1[perm]), tc.Tensor(x2[perm]))
        equivariant &= np.array_equal(a1.data[perm], b1.data) and np.array_equal(a2.data[perm], b2.data)

    rng = np.random.default_rng(99)
    x1, x2 = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
    y1, y2 = global_attention_fuse(tc.Tensor(x1), tc.Tensor(x2), MultiheadAttention(8, 2, rng, zero_output=True), 2)
    residual = np.array_equal(y1.data, x1) and np.array_equal(y2.data, x2)

    ok = shapes and equivariant and residual
    verdict("global_attention", ok, f"shapes={shapes} permutation_exact={equivariant} zero_init_identity={residual}")
    assert ok


def test_5_metric_oracles(verdict):
    rng = np.random.default_rng(0)
    worst = {"rmse": 0.0, "pearson": 0.0, "spearman": 0.0, "aucpr": 0.0}
    for k in range(1000):
        n = int(rng.integers(3, 30))
        p = rng.normal(size=n) if k % 2 else rng.integers(0, 4, n).astype(float)
        t = rng.normal(size=n) if k % 2 else rng.integers(0, 4, n).astype(float)
        y = rng.integers(0, 2, n)
        y[0] = 1
        worst["rmse"] = max(worst["rmse"], abs(rmse(p, t) - rmse_exact(p, t)))
        worst["aucpr"] = max(worst["aucpr"], abs(aucpr(p, y) - aucpr_bruteforce(p, y)))
        if np.ptp(p) > 0 and np.ptp(t) > 0:
            worst["pearson"] = max(worst["pearson"], abs(pearson(p, t) - pearson_direct(list(p), list(t))))
            worst["spearman"] = max(worst["spearman"], abs(spearman(p, t) - spearman_bruteforce(p, t)))
    perfect = aucpr([0.9, 0.7, 0.4, 0.2], [1, 1, 0, 0]) == 1.0
    mc = 0.0
    for base_rate in (0.1, 0.3, 0.5):
        y = (rng.random(10_000) < base_rate).astype(int)
        mc = max(mc, abs(aucpr(rng.random(10_000), y) - y.mean()))
    ok = max(worst.values()) <= 1e-12 and perfect and mc < 0.03
    verdict("metric_oracles", ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items())
            + f" perfect_aucpr={perfect} random_gap={mc:.4f}")
    assert ok


def overfit(cfg, examples, max_epochs=500):
    st = None
    for k in range(1, max_epochs + 1):
        st = train(cfg, examples, state=st, stop_after=k)
        if st.history[-1]["train_loss"] < 1e-2:
            break
    return st


def test_6_overfit(verdict):
    t0 = time.perf_counter()
    base = RunConfig(hidden_dim=16, d_model=16, plm_heads=2, ffn_dim=32, fusion_heads=2, rbf_count=8, gnn_layers=2,
                     plm_layers=2, batch_size=8, lr=3e-3, level="base", epochs=500, num_classes=4)
    reg = prepare_examples(generate_synthetic("mqa", 8, (8, 16), seed=0), base)
    cls_cfg = base.replace(task="reaction")
    cls = prepare_examples(generate_synthetic("reaction", 8, (8, 16), seed=0, num_classes=4), cls_cfg)
    assert len({ex.label for ex in cls}) > 1
    details, ok = [], True
    for mode in MODES:
        st = overfit(base.replace(mode=mode), reg)
        loss = st.history[-1]["train_loss"]
        acc = evaluate(overfit(cls_cfg.replace(mode=mode), cls).model, cls).values["accuracy"]
        ok &= loss < 1e-2 and acc == 1.0
        details.append(f"{mode}:loss={loss:.2e}@{st.epoch}ep,acc={acc}")
    seconds = time.perf_counter() - t0
    ok &= seconds < 600
    verdict("overfit", ok, " ".join(details) + f" seconds={seconds:.1f}")
    assert ok


def test_7_ordinal_non_gating(verdict, tmp_path_factory):
    out = tmp_path_factory.mktemp("ordinal")
    rep = ordinal_study(200, range(5), 20)
    tsv, fig = write_ordinal_report(rep, out)
    assert tsv.is_file() and fig.is_file()
    medians = " ".join(f"{m}={rep.median(m):.5f}" for m in MODES)
    # best-effort: the outcome is reported, never asserted
    verdict("ordinal (non-gating)", rep.ordering_holds, f"{medians} seconds={rep.seconds:.1f} report={tsv}")


def test_8_determinism_round_trip(verdict, tmp_path):
    cfg = RunConfig(hidden_dim=8, d_model=8, plm_heads=2, ffn_dim=16, fusion_heads=2, rbf_count=4, seqdist_dim=4,
                    gnn_layers=2, plm_layers=1, epochs=3, batch_size=2, dropout=0.1, level="all_atom",
                    task="lba", mode="global_attention")
    write_dataset(tmp_path / "d1.txt", generate_synthetic("lba", 6, (6, 10), seed=4))
    write_dataset(tmp_path / "d2.txt", generate_synthetic("lba", 6, (6, 10), seed=4))
    same_data = (tmp_path / "d1.txt").read_bytes() == (tmp_path / "d2.txt").read_bytes()
    write_dataset(tmp_path / "d3.txt", read_dataset(tmp_path / "d1.txt"))
    data_rt = (tmp_path / "d1.txt").read_bytes() == (tmp_path / "d3.txt").read_bytes()

    ex = prepare_examples(read_dataset(tmp_path / "d1.txt"), cfg)
    reports = []
    for name in ("a", "b"):
        st = train(cfg, ex)
        save_checkpoint(tmp_path / f"{name}.bhfz", st)
        reports.append(evaluate(load_for_eval(tmp_path / f"{name}.bhfz")[0], ex).to_text())
    same_ckpt = (tmp_path / "a.bhfz").read_bytes() == (tmp_path / "b.bhfz").read_bytes()
    same_report = reports[0] == reports[1]

    save_checkpoint(tmp_path / "c.bhfz", load_checkpoint(tmp_path / "a.bhfz"))
    ckpt_rt = (tmp_path / "a.bhfz").read_bytes() == (tmp_path / "c.bhfz").read_bytes()
    st.model.load_state_dict(st.best_params)
    before = evaluate(st.model, ex).to_text()
    eval_rt = before == reports[1]
    loss_rt = mean_loss(st.model, ex) == mean_loss(load_for_eval(tmp_path / "b.bhfz")[0], ex)

    ok = same_data and data_rt and same_ckpt and same_report and ckpt_rt and eval_rt and loss_rt
    verdict("determinism_round_trip", ok, f"dataset_repro={same_data} dataset_rt={data_rt} ckpt_repro={same_ckpt} "
            f"report_repro={same_report} ckpt_rt={ckpt_rt} eval_rt={eval_rt and loss_rt}")
    assert ok
