import json

import pytest

from seglens.cli import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, main
from seglens.pipeline import STAGES


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in root.rglob("*") if p.is_file()}


def _edit(path, fn):
    doc = json.loads(path.read_text())
    fn(doc)
    path.write_text(json.dumps(doc))


def test_validate_writes_nothing(mini_config, capsys):
    code, out, _ = _run(capsys, "validate", "--config", str(mini_config))
    assert code == EXIT_OK
    assert json.loads(out) == {"status": "ok", "messages": 300, "embedding_vocab": 153}
    assert not (mini_config.parent / "out").exists()


def test_missing_embeddings_names_path(mini_config, capsys, tmp_path):
    missing = str(tmp_path / "nope.txt")
    _edit(mini_config, lambda d: d["paths"].update(embeddings=missing))
    for sub in ("validate", "report"):
        code, _, err = _run(capsys, sub, "--config", str(mini_config))
        assert code == EXIT_INVALID
        line = json.loads(err.strip().splitlines()[-1])
        assert line["path"] == missing and missing in line["message"]
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("bad", ["unknown.key=1", "aggregation.k=0", "aggregation.rank_by=median"])
def test_bad_override_is_validation_failure(mini_config, capsys, bad):
    code, _, err = _run(capsys, "validate", "--config", str(mini_config), "--set", bad)
    assert code == EXIT_INVALID
    assert json.loads(err.strip().splitlines()[-1])["kind"] == "ConfigError"


def test_malformed_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    code, _, err = _run(capsys, "validate", "--config", str(p))
    assert code == EXIT_INVALID and '"status": "error"' in err


def test_report_end_to_end_and_cached_rerun(mini_config, capsys):
    out_dir = mini_config.parent / "out"
    code, out, _ = _run(capsys, "report", "--config", str(mini_config))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["recomputed"] == list(STAGES)
    first = _files(out_dir / "report")
    assert (out_dir / "report" / "index.html").is_file()

    code, out, _ = _run(capsys, "report", "--config", str(mini_config))
    assert code == EXIT_OK and json.loads(out)["recomputed"] == ["report"]
    assert _files(out_dir / "report") == first


def test_only_dirty_stages_rerun(mini_config, capsys):
    assert _run(capsys, "report", "--config", str(mini_config))[0] == EXIT_OK
    code, out, _ = _run(capsys, "report", "--config", str(mini_config), "--set", "aggregation.k=50")
    assert code == EXIT_OK
    rerun = json.loads(out)["recomputed"]
    assert "aggregate" in rerun
    assert not {"train-ref", "attribute", "segment"} & set(rerun)


def test_individual_stage(mini_config, capsys):
    code, out, _ = _run(capsys, "segment", "--config", str(mini_config))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["recomputed"] == ["segment"]
    assert (mini_config.parent / "out" / "stages" / "segment" / "key").is_file()
    assert not (mini_config.parent / "out" / "report").exists()


def test_threads_do_not_change_output(mini_config, tmp_path, capsys):
    assert _run(capsys, "report", "--config", str(mini_config))[0] == EXIT_OK
    one = _files(tmp_path / "out" / "report")
    _edit(mini_config, lambda d: d["paths"].update(out_dir=str(tmp_path / "out2")))
    assert _run(capsys, "report", "--config", str(mini_config), "--threads", "2")[0] == EXIT_OK
    assert _files(tmp_path / "out2" / "report") == one


def test_misaligned_attributions_is_runtime_failure(mini_config, mini_dir, tmp_path, capsys):
    first = json.loads((mini_dir / "corpus.jsonl").read_text().splitlines()[0])
    attr = tmp_path / "attr.jsonl"
    attr.write_text(json.dumps({"id": first["id"], "tokens": ["zzz"], "scores": [1.0], "prob": 0.5}) + "\n")
    _edit(mini_config, lambda d: d["paths"].update(attributions=str(attr)))
    code, _, err = _run(capsys, "report", "--config", str(mini_config))
    assert code == EXIT_RUNTIME
    line = json.loads(err.strip().splitlines()[-1])
    assert line["kind"] == "AlignmentError" and str(attr) in line["path"]
