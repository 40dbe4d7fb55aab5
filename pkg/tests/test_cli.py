import subprocess
import sys

import numpy as np
import pytest

from spkback import io
from spkback.cli import main
from spkback.core import ScoreSet, TrialList
from spkback.metrics import LabeledScores, summarize
from spkback.plda import PldaFitConfig, fit_plda
from spkback.scoring import Backend, score_trials
from spkback.synthlab import default_truth, make_trials, sample_plda


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    args = ["synth", "--out-dir", str(d), "--dim", "10", "--train-speakers", "80", "--train-sessions", "6",
            "--test-speakers", "20", "--test-sessions", "3", "--seed", "5"]
    assert main(args) == 0
    return d


def test_synth_matches_library(synth_dir):
    truth = default_truth(10, 0.1, 50.0, seed=5)
    train = sample_plda(truth, 80, 6, 5, prefix="tr_")
    test = sample_plda(truth, 20, 3, 6, prefix="te_")
    assert io.read_embeddings(synth_dir / "train.bin").X.tobytes() == train.X.tobytes()
    assert io.read_embeddings(synth_dir / "test.bin").ids == test.ids
    assert io.read_trials(synth_dir / "trials.txt") == make_trials(test, 5)


def test_pipeline_matches_library(synth_dir, tmp_path, capsys):
    d = synth_dir
    model_p, scores_p = tmp_path / "m.plda", tmp_path / "s.txt"
    assert main(["train-plda", "--train", str(d / "train.bin"), "--out", str(model_p), "--em-iters", "10"]) == 0
    assert main(["score", "--backend", "plda", "--model", str(model_p), "--enroll", str(d / "test.bin"),
                 "--test", str(d / "test.bin"), "--trials", str(d / "trials.txt"), "--out", str(scores_p)]) == 0
    capsys.readouterr()
    assert main(["metrics", "--scores", str(scores_p), "--trials", str(d / "trials.txt")]) == 0
    line = capsys.readouterr().out.strip()

    train = io.read_embeddings(d / "train.bin")
    test = io.read_embeddings(d / "test.bin")
    trials = io.read_trials(d / "trials.txt")
    model = fit_plda(train, PldaFitConfig(em_iters=10))
    lib_model = tmp_path / "lib.plda"
    io.save_plda(lib_model, model)
    assert lib_model.read_bytes() == model_p.read_bytes()
    scores = score_trials(Backend.plda(model), test, test, trials)
    lib_scores = tmp_path / "lib.txt"
    io.write_scores(lib_scores, scores)
    assert lib_scores.read_text() == scores_p.read_text()
    res = summarize(LabeledScores.from_scores(io.read_scores(lib_scores), trials))
    assert line == f"eer={res['eer']:.6f}, min_dcf={res['min_dcf']:.6f}, min_cp={res['min_cp']:.6f}"


def test_cos_and_adapt_and_diagnose(synth_dir, tmp_path, capsys):
    d = synth_dir
    m = tmp_path / "m.plda"
    assert main(["train-plda", "--train", str(d / "train.bin"), "--out", str(m)]) == 0
    s = tmp_path / "cos.txt"
    assert main(["score", "--backend", "cos", "--enroll", str(d / "test.bin"), "--test", str(d / "test.bin"),
                 "--trials", str(d / "trials.txt"), "--out", str(s), "--workers", "3"]) == 0
    assert len(io.read_scores(s)) == len(io.read_trials(d / "trials.txt"))
    for method in ("coral", "coral+"):
        out = tmp_path / f"{method}.plda"
        assert main(["adapt", "--method", method, "--model", str(m), "--indomain", str(d / "test.bin"),
                     "--out", str(out)]) == 0
        assert io.load_plda(out).dim == 10
    rep = tmp_path / "rep.csv"
    capsys.readouterr()
    assert main(["diagnose", "--model", str(m), "--test", str(d / "test.bin"), "--train", str(d / "train.bin"),
                 "--out", str(rep)]) == 0
    assert capsys.readouterr().out.startswith("recommendation=")
    assert "# block: variance_profile" in rep.read_text()


def test_metrics_separated(tmp_path, capsys):
    (tmp_path / "t.txt").write_text("a b target\na c nontarget\nd e target\nd f nontarget\n")
    (tmp_path / "s.txt").write_text("a b 0.9\na c 0.2\nd e 0.8\nd f 0.1\n")
    det = tmp_path / "det.csv"
    assert main(["metrics", "--scores", str(tmp_path / "s.txt"), "--trials", str(tmp_path / "t.txt"),
                 "--det", str(det)]) == 0
    assert capsys.readouterr().out.startswith("eer=0.000000")
    assert det.read_text().splitlines()[0] == "threshold,p_miss,p_fa"


def test_exit_codes(tmp_path):
    assert main(["score", "--backend", "plda", "--enroll", "e", "--test", "t", "--trials", "l", "--out", "o"]) == 1
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["metrics", "--scores", "x"]) == 1
    assert main(["train-plda", "--train", str(tmp_path / "missing.bin"), "--out", str(tmp_path / "m")]) == 2
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"JUNK")
    assert main(["train-plda", "--train", str(bad), "--out", str(tmp_path / "m")]) == 2
    (tmp_path / "t.txt").write_text("a b target\n")
    (tmp_path / "s.txt").write_text("a b 1.0\n")
    # no nontarget trials: metrics are undefined
    assert main(["metrics", "--scores", str(tmp_path / "s.txt"), "--trials", str(tmp_path / "t.txt")]) == 2


def test_numeric_failure_exit_code(tmp_path):
    # a model whose reconstructed covariance is non-finite cannot be adapted
    from spkback.plda import PldaModel

    m = tmp_path / "m.plda"
    io.save_plda(m, PldaModel(np.zeros(2), np.array([[1e-300, 0.0], [0.0, 1.0]]), [1.0, 1.0]))
    emb = tmp_path / "e.csv"
    io.write_embeddings(emb, sample_plda(default_truth(2), 5, 2, 0))
    assert main(["adapt", "--method", "coral", "--model", str(m), "--indomain", str(emb), "--out",
                 str(tmp_path / "o.plda")]) == 3


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "spkback", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "train-plda" in r.stdout
