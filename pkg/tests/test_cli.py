import json
import logging

import pytest

from vbdiar.cli import main

SMALL_CORPUS = ["--conversations", "3", "--dim", "3", "--min-segments", "6", "--max-segments", "10", "--seed", "5"]


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    assert main(["synth", "--out", str(out), *SMALL_CORPUS, "--train-speakers", "20", "--cuts-per-speaker", "3"]) == 0
    return out


# ========================
# synth
# ========================


def test_synth_is_deterministic(tmp_path, corpus):
    again = tmp_path / "again"
    assert main(["synth", "--out", str(again), *SMALL_CORPUS, "--train-speakers", "20", "--cuts-per-speaker", "3"]) == 0
    assert read_tree(corpus) == read_tree(again)


def test_synth_layout(corpus):
    meta = json.loads((corpus / "meta.json").read_text())
    assert meta["recordings"] == ["conv0000", "conv0001", "conv0002"]
    assert meta["spec"]["dominance"] == 0.5
    assert (corpus / "model.json").is_file()
    assert (corpus / "train.jsonl").is_file()
    assert sorted(p.name for p in (corpus / "reference").iterdir()) == [
        "conv0000.rttm",
        "conv0001.rttm",
        "conv0002.rttm",
    ]


def test_synth_records_dominance(tmp_path):
    out = tmp_path / "c"
    assert main(["synth", "--out", str(out), *SMALL_CORPUS, "--dominance", "0.8"]) == 0
    assert json.loads((out / "meta.json").read_text())["spec"]["dominance"] == 0.8


def test_synth_rejects_bad_dominance(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "c"), "--dominance", "1.5"]) == 1
    err = capsys.readouterr().err
    assert "error: usage: --dominance" in err


def test_synth_rejects_segment_range(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "c"), "--min-segments", "9", "--max-segments", "3"]) == 1
    assert "--min-segments" in capsys.readouterr().err


def test_synth_refuses_non_empty_directory(corpus, capsys):
    assert main(["synth", "--out", str(corpus), *SMALL_CORPUS]) == 1
    assert "--force" in capsys.readouterr().err
    assert main(["synth", "--out", str(corpus), *SMALL_CORPUS, "--force"]) == 0
    assert not (corpus / "train.jsonl").exists()


def test_synth_checks_training_flags_before_writing(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["synth", "--out", str(out), *SMALL_CORPUS, "--train-speakers", "1"]) == 1
    assert "--train-speakers" in capsys.readouterr().err
    assert not out.exists()
    assert main(["synth", "--out", str(out), *SMALL_CORPUS, "--train-speakers", "5", "--cuts-per-speaker", "0"]) == 1
    assert "--cuts-per-speaker" in capsys.readouterr().err
    assert not out.exists()
    assert main(["synth", "--out", str(out), *SMALL_CORPUS, "--train-speakers", "5"]) == 0


def test_unknown_command(capsys):
    assert main(["frobnicate"]) == 1
    assert capsys.readouterr().err.startswith("error: usage:")


# ========================
# train-plda
# ========================


def test_train_plda(tmp_path, corpus):
    model = tmp_path / "plda.json"
    assert main(["train-plda", "--train", str(corpus / "train.jsonl"), "--out", str(model), "--iterations", "3"]) == 0
    doc = json.loads(model.read_text())
    assert len(doc["mu"]) == 3


def test_train_plda_rejects_zero_iterations(tmp_path, corpus, capsys):
    code = main(["train-plda", "--train", str(corpus / "train.jsonl"), "--out", str(tmp_path / "m.json"), "--iterations", "0"])
    assert code == 1
    assert "--iterations" in capsys.readouterr().err


def test_train_plda_missing_file(tmp_path, capsys):
    assert main(["train-plda", "--train", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "m.json")]) == 2
    assert capsys.readouterr().err.startswith("error: data:")


def test_pipeline_training_and_diarization(tmp_path, corpus):
    model, pipeline = tmp_path / "plda.json", tmp_path / "pipeline.json"
    args = ["train-plda", "--train", str(corpus / "train.jsonl"), "--out", str(model)]
    assert main([*args, "--iterations", "2", "--pipeline", str(pipeline), "--lda-dim", "2"]) == 0
    assert len(json.loads(pipeline.read_text())["lda"]) == 2

    out = tmp_path / "hyp"
    diarize = ["diarize", "--corpus", str(corpus), "--out", str(out), "--model", str(model), "--pipeline", str(pipeline)]
    assert main(diarize) == 0
    assert (out / "conv0002.rttm").is_file()

    # Модель обучена после LDA, а вложения корпуса имеют исходную размерность
    assert main(diarize[:-2]) == 2


def test_pipeline_default_lda_dim_is_capped_by_speakers(tmp_path):
    corpus = tmp_path / "c"
    assert main(["synth", "--out", str(corpus), *SMALL_CORPUS, "--train-speakers", "3", "--cuts-per-speaker", "5"]) == 0
    pipeline = tmp_path / "pipeline.json"
    args = ["train-plda", "--train", str(corpus / "train.jsonl"), "--out", str(tmp_path / "m.json")]
    assert main([*args, "--iterations", "2", "--pipeline", str(pipeline)]) == 0
    # min(150, D = 3, дикторов − 1 = 2)
    assert len(json.loads(pipeline.read_text())["lda"]) == 2


# ========================
# diarize
# ========================


def test_diarize_is_deterministic_across_workers(tmp_path, corpus):
    one, many = tmp_path / "one", tmp_path / "many"
    base = ["diarize", "--corpus", str(corpus), "--method", "vb-da", "--seed", "3"]
    assert main([*base, "--out", str(one), "--workers", "1"]) == 0
    assert main([*base, "--out", str(many), "--workers", "3"]) == 0
    assert read_tree(one) == read_tree(many)
    assert (one / "traces" / "conv0000.jsonl").is_file()
    first = json.loads((one / "traces" / "conv0000.jsonl").read_text().splitlines()[0])
    assert first["beta"] == pytest.approx(0.2)


def test_diarize_rttm_format(tmp_path, corpus):
    out = tmp_path / "hyp"
    assert main(["diarize", "--corpus", str(corpus), "--out", str(out), "--init", "llr"]) == 0
    for line in (out / "conv0001.rttm").read_text().splitlines():
        fields = line.split(" ")
        assert fields[0] == "SPEAKER"
        assert fields[1] == "conv0001"
        assert len(fields[3].split(".")[1]) == 3
        assert len(fields[4].split(".")[1]) == 3


def test_diarize_overlapping_segments_is_data_error(tmp_path, corpus, capsys):
    path = corpus / "embeddings" / "conv0000.jsonl"
    records = [json.loads(line) for line in path.read_text().splitlines()]
    records[1]["start"] = records[0]["end"] - 0.5
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    assert main(["diarize", "--corpus", str(corpus), "--out", str(tmp_path / "hyp")]) == 2
    assert capsys.readouterr().err.startswith("error: data:")


def test_kmeans_ignores_init_with_warning(tmp_path, corpus, caplog):
    with caplog.at_level(logging.WARNING):
        code = main(["diarize", "--corpus", str(corpus), "--out", str(tmp_path / "hyp"), "--method", "kmeans-pca", "--init", "cos"])
    assert code == 0
    assert "kmeans-pca" in caplog.text
    assert not (tmp_path / "hyp" / "traces").exists()


def test_heuristic_init_requires_two_speakers(tmp_path, corpus, capsys):
    code = main(["diarize", "--corpus", str(corpus), "--out", str(tmp_path / "hyp"), "--init", "cos", "--speakers", "3"])
    assert code == 1
    assert "--init" in capsys.readouterr().err


# ========================
# score и benchmark
# ========================


def test_score_reference_against_itself(corpus, capsys):
    reference = str(corpus / "reference")
    assert main(["score", "--ref", reference, "--hyp", reference]) == 0
    out = capsys.readouterr().out
    assert "mean DER (%) 0.00" in out
    assert "σ (%)        0.00" in out

    assert main(["score", "--ref", reference, "--hyp", reference, "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["aggregate"]["mean_der"] == 0.0
    assert payload["aggregate"]["std_der"] == 0.0
    assert len(payload["recordings"]) == 3


def test_score_missing_hypothesis(tmp_path, corpus, capsys):
    (tmp_path / "hyp").mkdir()
    assert main(["score", "--ref", str(corpus / "reference"), "--hyp", str(tmp_path / "hyp")]) == 2
    assert "conv0000" in capsys.readouterr().err


def test_score_diarized_corpus(tmp_path, corpus, capsys):
    out = tmp_path / "hyp"
    assert main(["diarize", "--corpus", str(corpus), "--out", str(out)]) == 0
    assert main(["score", "--ref", str(corpus / "reference"), "--hyp", str(out), "--json", "--collar", "0"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 <= payload["aggregate"]["mean_der"] <= 1.0
    assert all(r["miss_time"] == 0.0 and r["false_alarm_time"] == 0.0 for r in payload["recordings"])


def test_benchmark(corpus, capsys):
    assert main(["benchmark", "--corpus", str(corpus), "--json", "--attempts", "2", "--restarts", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert list(payload["systems"]) == ["KM-PCA", "VB-PLDA", "VB-COS", "VB-LLR", "DA-VB"]
    for aggregate in payload["systems"].values():
        assert aggregate["num_recordings"] == 3
        assert aggregate["std_der"] >= 0.0


def test_benchmark_json_keeps_requested_order(corpus, capsys):
    argv = ["benchmark", "--corpus", str(corpus), "--json", "--systems", "DA-VB,KM-PCA,VB-PLDA"]
    assert main(argv) == 0
    payload = json.loads(capsys.readouterr().out)
    assert list(payload["systems"]) == ["DA-VB", "KM-PCA", "VB-PLDA"]


def test_benchmark_table_and_unknown_system(corpus, capsys):
    assert main(["benchmark", "--corpus", str(corpus), "--systems", "KM-PCA"]) == 0
    assert "KM-PCA" in capsys.readouterr().out
    assert main(["benchmark", "--corpus", str(corpus), "--systems", "KM-PCA,XYZ"]) == 1
