import numpy as np
import pytest

from bihfusion import tensorcore as tc
from bihfusion.plm import EmbeddingAdapter, PlmConfig, ProteinLM, SequenceTooLong, load_precomputed
from bihfusion.protein import write_embeddings
from bihfusion.tensorcore import FormatError


def make(num_layers=2, seed=0, **kw):
    cfg = PlmConfig(d_model=8, num_layers=num_layers, num_heads=2, ffn_dim=16, max_len=32, **kw)
    return ProteinLM(cfg, tc.make_rng(seed, "plm"))


class TestEncode:
    def test_length_one_shapes(self):
        st = make().encode([3])
        assert len(st.layers) == 3
        assert all(h.shape == (1, 8) for h in st.layers)

    def test_zero_blocks_identity(self):
        m = make()
        for blk in m.blocks:
            for _, p in blk.named_parameters():
                p.data[...] = 0.0
        st = m.encode([1, 5, 9, 2])
        assert np.array_equal(st.final.data, st.layers[0].data)

    def test_point_mutation_spreads(self):
        m = make(num_layers=1)
        a = m.encode([1, 2, 3, 4, 5]).final.data
        b = m.encode([1, 2, 7, 4, 5]).final.data
        assert np.all(np.abs(a - b).max(axis=1) > 1e-9)

    def test_too_long(self):
        with pytest.raises(SequenceTooLong):
            make().encode([0] * 33)
        assert make().encode([0] * 32).final.shape == (32, 8)

    def test_bad_token(self):
        with pytest.raises(ValueError):
            make().encode([22])

    def test_heads_must_divide(self):
        with pytest.raises(ValueError):
            PlmConfig(d_model=10, num_heads=4)

    def test_position_sensitive(self):
        m = make()
        tokens = [1, 2, 3, 4, 5, 6]
        perm = [5, 4, 3, 2, 1, 0]
        a = m.encode(tokens).final.data
        b = m.encode([tokens[k] for k in perm]).final.data
        assert not np.allclose(a[perm], b)

    def test_deterministic_eval(self):
        a = make(seed=4).encode([1, 2, 3], rng=np.random.default_rng(0)).final.data
        b = make(seed=4).encode([1, 2, 3], rng=np.random.default_rng(99)).final.data
        assert np.array_equal(a, b)

    def test_dropout_only_in_training(self):
        m = make(dropout_p=0.5)
        a = m.encode([1, 2, 3], training=True, rng=np.random.default_rng(0)).final.data
        b = m.encode([1, 2, 3], training=True, rng=np.random.default_rng(1)).final.data
        c = m.encode([1, 2, 3]).final.data
        assert not np.array_equal(a, b)
        assert np.array_equal(c, make(dropout_p=0.5).encode([1, 2, 3]).final.data)


class TestPrecomputed:
    def test_shape_and_round_trip(self, tmp_path):
        emb = np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32)
        write_embeddings(tmp_path / "e.bhem", emb)
        st = load_precomputed(tmp_path / "e.bhem")
        assert len(st.layers) == 2 and st.final.shape == (3, 4)
        assert np.array_equal(st.final.data.astype(np.float32), emb)
        assert not st.final.requires_grad

    def test_truncated(self, tmp_path):
        write_embeddings(tmp_path / "e.bhem", np.ones((3, 4)))
        p = tmp_path / "e.bhem"
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(FormatError):
            load_precomputed(p)

    def test_adapter(self, tmp_path):
        write_embeddings(tmp_path / "e.bhem", np.ones((3, 4)))
        st = load_precomputed(tmp_path / "e.bhem")
        same = EmbeddingAdapter(4, 4, np.random.default_rng(0))
        assert same(st) is st and not same.parameters()
        wide = EmbeddingAdapter(4, 8, np.random.default_rng(0))
        out = wide(st)
        assert out.final.shape == (3, 8)
        tc.backward(tc.total(out.final))
        assert st.final.grad is None
        assert np.abs(wide.proj.weight.grad).sum() > 0
