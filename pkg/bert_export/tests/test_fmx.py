import numpy as np
import pytest

from bert_export.fmx import FmxError, read_fmx, write_fmx, write_lbl


def _meta(**kw):
    meta = {
        "extractor": "bert_spa",
        "train_corpus": "esp_fake",
        "eval_corpus": "esp_fake",
        "attribute": "text",
        "repetition": 0,
        "fold": 0,
    }
    meta.update(kw)
    return meta


class TestWriter:
    def test_round_trip_through_own_reader(self, tmp_path):
        path = tmp_path / "m.fmx1"
        values = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
        write_fmx(path, values, _meta())
        out, meta = read_fmx(path)
        assert np.array_equal(out, values)
        assert meta["extractor"] == "bert_spa"

    def test_round_trip_through_pipeline_reader(self, tmp_path):
        # the consuming package must accept our bytes verbatim
        polynews_matrix = pytest.importorskip("polynews.extractors.matrix")
        path = tmp_path / "m.fmx1"
        values = np.random.default_rng(1).normal(size=(12, 16)).astype(np.float32)
        write_fmx(path, values, _meta(tuned_on_fold=1, doc_ids_sha256="x"))
        fm = polynews_matrix.load_embeddings(path, expected_meta={"extractor": "bert_spa", "fold": 0})
        assert np.array_equal(fm.values, values)
        assert fm.meta["tuned_on_fold"] == 1

    def test_non_finite_refused(self, tmp_path):
        with pytest.raises(FmxError, match="non-finite"):
            write_fmx(tmp_path / "m.fmx1", np.array([[np.inf]], dtype=np.float32), _meta())

    def test_missing_meta_refused(self, tmp_path):
        with pytest.raises(FmxError, match="missing"):
            write_fmx(tmp_path / "m.fmx1", np.zeros((1, 1)), {"extractor": "bert_spa"})

    def test_labels_file(self, tmp_path):
        path = tmp_path / "m.lbl1"
        write_lbl(path, [0, 1, 1], [1, 1, 0])
        raw = path.read_bytes()
        assert raw[:4] == b"LBL1"
        assert list(raw[8:]) == [0, 1, 1, 1, 1, 0]
