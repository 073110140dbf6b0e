import numpy as np
import pytest

from polynews.corpus import (
    ENG,
    ESP_FAKE,
    ESP_FAKE_CSV,
    KAGGLE,
    KAGGLE_CSV,
    MIXED,
    SPA,
    Corpus,
    Document,
    FoldPlan,
    ingest,
    make_fold_plan,
    mix,
    normalize,
)
from polynews.errors import CsvParseError, ValidationError

from helpers import synthetic_documents, write_esp_csv, write_kaggle_csv


class TestIngest:
    def test_esp_label_mapping_and_counts(self, tmp_path):
        path = tmp_path / "esp.csv"
        docs = write_esp_csv(path, n_docs=10)
        corpus = ingest(path, ESP_FAKE_CSV)
        assert corpus.name == ESP_FAKE
        assert len(corpus) == 10
        assert [d.label for d in corpus.documents] == [d.label for d in docs]
        assert all(d.language == SPA for d in corpus.documents)
        assert corpus.ingest_report.n_positive == 5

    def test_kaggle_label_mapping(self, tmp_path):
        path = tmp_path / "kaggle.csv"
        write_kaggle_csv(path, n_docs=8)
        corpus = ingest(path, KAGGLE_CSV)
        assert corpus.name == KAGGLE
        assert all(d.language == ENG for d in corpus.documents)
        assert sum(d.label for d in corpus.documents) == 4

    def test_ids_are_prefixed_row_indices(self, tmp_path):
        path = tmp_path / "esp.csv"
        write_esp_csv(path, n_docs=4)
        corpus = ingest(path, ESP_FAKE_CSV)
        assert corpus.documents[0].id == "esp_fake:0"
        assert corpus.documents[3].id == "esp_fake:3"

    def test_missing_text_rows_dropped_and_counted(self, tmp_path):
        path = tmp_path / "esp.csv"
        path.write_text(
            "Id,Category,Topic,Source,Headline,Text,Link\n"
            "0,Fake,t,s,h,cuerpo uno,l\n"
            "1,True,t,s,h,,l\n"
            "2,True,t,s,h,cuerpo dos,l\n",
            encoding="utf-8",
        )
        corpus = ingest(path, ESP_FAKE_CSV)
        assert len(corpus) == 2
        assert corpus.ingest_report.dropped_missing_text == 1
        # dropped rows still consume their row index
        assert [d.id for d in corpus.documents] == ["esp_fake:0", "esp_fake:2"]

    def test_header_only_is_empty_corpus_error(self, tmp_path):
        path = tmp_path / "esp.csv"
        path.write_text("Id,Category,Topic,Source,Headline,Text,Link\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="empty corpus"):
            ingest(path, ESP_FAKE_CSV)

    def test_unknown_label_token(self, tmp_path):
        path = tmp_path / "esp.csv"
        path.write_text(
            "Id,Category,Topic,Source,Headline,Text,Link\n0,Maybe,t,s,h,texto,l\n",
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="unknown label token 'Maybe' at data row 0"):
            ingest(path, ESP_FAKE_CSV)

    def test_missing_columns_is_parse_error(self, tmp_path):
        path = tmp_path / "esp.csv"
        path.write_text("A,B\n1,2\n", encoding="utf-8")
        with pytest.raises(CsvParseError, match="missing required column"):
            ingest(path, ESP_FAKE_CSV)

    def test_ingest_deterministic(self, tmp_path):
        path = tmp_path / "esp.csv"
        write_esp_csv(path, n_docs=12)
        a = ingest(path, ESP_FAKE_CSV)
        b = ingest(path, ESP_FAKE_CSV)
        assert a.documents == b.documents


class TestMix:
    def test_sizes_and_order(self, tmp_path):
        esp = ingest(write_csv(tmp_path, "e.csv", write_esp_csv, 6), ESP_FAKE_CSV)
        kag = ingest(write_csv(tmp_path, "k.csv", write_kaggle_csv, 8), KAGGLE_CSV)
        mixed = mix(esp, kag)
        assert mixed.name == MIXED
        assert len(mixed) == 14
        assert mixed.documents[:6] == esp.documents
        assert mixed.documents[6:] == kag.documents

    def test_mix_with_empty_is_copy(self):
        docs = synthetic_documents(SPA, 4, 0, prefix="esp_fake")
        a = Corpus(ESP_FAKE, docs)
        b = Corpus(KAGGLE, [])
        mixed = mix(a, b)
        assert mixed.documents == a.documents

    def test_duplicate_ids_rejected(self):
        docs = synthetic_documents(SPA, 4, 0, prefix="esp_fake")
        a = Corpus(ESP_FAKE, docs)
        with pytest.raises(ValidationError, match="duplicate"):
            mix(a, a)


def write_csv(tmp_path, name, writer, n):
    path = tmp_path / name
    writer(path, n_docs=n)
    return path


class TestNormalize:
    def test_lowercases(self):
        doc = Document("x", ENG, "Fake NEWS", "THE Body", 0)
        out = normalize(doc)
        assert out.title == "fake news"
        assert out.text == "the body"

    def test_unicode_lowercase(self):
        doc = Document("x", SPA, "ÑOÑO", "ÁRBOL", 1)
        out = normalize(doc)
        assert out.title == "ñoño"
        assert out.text == "árbol"

    def test_idempotent(self):
        doc = Document("x", ENG, "already lower", "text", 0)
        assert normalize(normalize(doc)) == normalize(doc)


class TestFoldPlan:
    def _corpus(self, n=40, language=SPA):
        return Corpus(ESP_FAKE, synthetic_documents(language, n, seed=3, prefix="esp_fake"))

    def test_folds_partition_and_stratify(self):
        corpus = self._corpus(40)
        plan = make_fold_plan(corpus, seed=5)
        assert len(plan.repetitions) == 5
        all_ids = {d.id for d in corpus.documents}
        by_id = {d.id: d for d in corpus.documents}
        for f0, f1 in plan.repetitions:
            assert set(f0) | set(f1) == all_ids
            assert set(f0) & set(f1) == set()
            for label in (0, 1):
                c0 = sum(1 for i in f0 if by_id[i].label == label)
                c1 = sum(1 for i in f1 if by_id[i].label == label)
                assert abs(c0 - c1) <= 1

    def test_mixed_four_strata_balance(self):
        esp = Corpus(ESP_FAKE, synthetic_documents(SPA, 21, 1, prefix="esp_fake"))
        kag = Corpus(KAGGLE, synthetic_documents(ENG, 33, 2, prefix="kaggle"))
        mixed = mix(esp, kag)
        plan = make_fold_plan(mixed, seed=9)
        by_id = {d.id: d for d in mixed.documents}
        for f0, f1 in plan.repetitions:
            for lang in (ENG, SPA):
                for label in (0, 1):
                    c0 = sum(1 for i in f0 if by_id[i].language == lang and by_id[i].label == label)
                    c1 = sum(1 for i in f1 if by_id[i].language == lang and by_id[i].label == label)
                    assert abs(c0 - c1) <= 1

    def test_deterministic(self):
        corpus = self._corpus(30)
        assert make_fold_plan(corpus, 7).as_dict() == make_fold_plan(corpus, 7).as_dict()

    def test_different_seeds_differ(self):
        corpus = self._corpus(30)
        assert make_fold_plan(corpus, 1).as_dict() != make_fold_plan(corpus, 2).as_dict()

    def test_mixed_plan_aligns_with_source_plans(self):
        # same seed: the mixed plan must send each document to the same fold
        # as its source-corpus plan, so cross-corpus pools stay leak-free
        esp = Corpus(ESP_FAKE, synthetic_documents(SPA, 20, 1, prefix="esp_fake"))
        kag = Corpus(KAGGLE, synthetic_documents(ENG, 28, 2, prefix="kaggle"))
        mixed = mix(esp, kag)
        p_esp = make_fold_plan(esp, 13)
        p_kag = make_fold_plan(kag, 13)
        p_mix = make_fold_plan(mixed, 13)
        for rep in range(5):
            mixed_f0 = set(p_mix.repetitions[rep][0])
            assert set(p_esp.repetitions[rep][0]) | set(p_kag.repetitions[rep][0]) == mixed_f0

    def test_small_stratum_rejected(self):
        docs = synthetic_documents(SPA, 3, 0, prefix="esp_fake")  # one stratum has 1 doc
        corpus = Corpus(ESP_FAKE, docs)
        with pytest.raises(ValidationError, match="stratum with < 2 documents"):
            make_fold_plan(corpus, 0)

    def test_json_round_trip(self, tmp_path):
        corpus = self._corpus(16)
        plan = make_fold_plan(corpus, 4)
        path = tmp_path / "plan.json"
        plan.save(path)
        loaded = FoldPlan.load(path)
        assert loaded.as_dict() == plan.as_dict()

    def test_fold_positions_maps_back(self):
        corpus = self._corpus(16)
        plan = make_fold_plan(corpus, 4)
        positions = plan.fold_positions(corpus)
        p0, p1 = positions[0]
        assert sorted(np.concatenate([p0, p1]).tolist()) == list(range(16))
