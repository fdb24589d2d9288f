import json

import numpy as np
import pytest

from spmtext.cli import main
from spmtext.io import read_repr_tsv


@pytest.fixture
def paths(fixtures_dir, tmp_path):
    return {
        "emb": str(fixtures_dir / "embeddings.txt"),
        "corpus": str(fixtures_dir / "corpus.tsv"),
        "tmp": tmp_path,
    }


def train(paths, name="model.json", *extra):
    out = paths["tmp"] / name
    code = main(["train", "--embeddings", paths["emb"], "--corpus", paths["corpus"],
                 "--out", str(out), *extra])
    return code, out


class TestTrain:
    def test_missing_embeddings(self, paths, capsys):
        code = main(["train", "--corpus", paths["corpus"], "--out", str(paths["tmp"] / "m")])
        assert code == 2
        assert "usage:" in capsys.readouterr().err

    def test_fixture(self, paths):
        code, out = train(paths)
        assert code == 0 and out.exists()
        rows = (out.parent / (out.name + ".elbo.tsv")).read_text().splitlines()
        assert rows[0] == "iter\telbo\tdelta"
        elbo = np.array([float(r.split("\t")[1]) for r in rows[1:]])
        assert np.all(np.diff(elbo) >= -1e-6 * np.abs(elbo[1:]))
        excluded = (out.parent / (out.name + ".excluded.tsv")).read_text()
        assert excluded.startswith("empty1\t")
        manifest = json.loads((out.parent / (out.name + ".manifest.json")).read_text())
        assert manifest["command"] == "train" and manifest["seed"] == 0
        assert set(manifest["inputs"]) == {paths["emb"], paths["corpus"]}

    def test_byte_identical(self, paths):
        _, a = train(paths, "a.json", "--seed", "3")
        _, b = train(paths, "b.json", "--seed", "3")
        assert a.read_bytes() == b.read_bytes()
        _, c = train(paths, "c.json", "--seed", "4")
        assert a.read_bytes() != c.read_bytes()

    def test_bad_corpus_line(self, paths, capsys):
        bad = paths["tmp"] / "bad.tsv"
        bad.write_text("ok\t1\tbaseball\nbroken\n")
        code = main(["train", "--embeddings", paths["emb"], "--corpus", str(bad),
                     "--out", str(paths["tmp"] / "m.json")])
        assert code == 1
        err = capsys.readouterr().err
        assert "bad.tsv:2" in err
        assert not (paths["tmp"] / "m.json").exists()

    def test_no_partial_output(self, paths, monkeypatch):
        import spmtext.cli as cli

        def boom(*args, **kwargs):
            raise OSError("disk full")

        monkeypatch.setattr(cli, "model_to_json", boom)
        code, out = train(paths)
        assert code == 1
        assert list(paths["tmp"].iterdir()) == []


class TestInfer:
    def test_round_trip_consistency(self, paths):
        tmp = paths["tmp"]
        code, model = train(paths, "m.json",
                            "--repr-out", str(tmp / "train.tsv"))
        assert code == 0
        out = tmp / "inferred.tsv"
        assert main(["infer", "--model", str(model), "--embeddings", paths["emb"],
                     "--corpus", paths["corpus"], "--out", str(out)]) == 0
        ids_a, labels_a, A = read_repr_tsv(tmp / "train.tsv")
        ids_b, labels_b, B = read_repr_tsv(out)
        assert ids_a == ids_b and labels_a == labels_b
        assert np.max(np.abs(A - B)) <= 1e-3
        np.testing.assert_allclose(np.linalg.norm(B, axis=1), 1.0, atol=1e-6)
        assert (tmp / "inferred.tsv.skipped.tsv").read_text().startswith("empty1\t")

    def test_posterior_mode(self, paths):
        _, model = train(paths)
        out = paths["tmp"] / "post.tsv"
        assert main(["infer", "--model", str(model), "--embeddings", paths["emb"],
                     "--corpus", paths["corpus"], "--out", str(out),
                     "--mode", "posterior-expectation"]) == 0
        _, _, X = read_repr_tsv(out)
        assert np.all(np.linalg.norm(X, axis=1) < 1.0)

    def test_fingerprint_mismatch(self, paths, capsys):
        _, model = train(paths)
        other = paths["tmp"] / "other.txt"
        lines = open(paths["emb"]).read().splitlines()
        word, *vals = lines[1].split()
        lines[1] = " ".join([word] + [str(float(v) + 0.5) for v in vals])
        other.write_text("\n".join(lines) + "\n")
        code = main(["infer", "--model", str(model), "--embeddings", str(other),
                     "--corpus", paths["corpus"], "--out", str(paths["tmp"] / "x.tsv")])
        assert code == 1
        err = capsys.readouterr().err
        m = json.loads(model.read_text())
        assert m["embedding_fingerprint"] in err and "fingerprint" in err
        assert not (paths["tmp"] / "x.tsv").exists()


def write_repr(path, X, y):
    path.write_text("".join(f"r{i}\t{lab}\t{' '.join(f'{v:.17g}' for v in row)}\n"
                            for i, (row, lab) in enumerate(zip(X, y))))


class TestEval:
    @pytest.fixture
    def separable(self, tmp_path):
        rng = np.random.default_rng(0)
        y = np.repeat([0, 1], 50)
        X = np.column_stack([np.where(y == 1, 1.0, -1.0) * rng.uniform(0.3, 2, 100),
                             rng.uniform(-1, 1, 100)])
        path = tmp_path / "sep.tsv"
        write_repr(path, X, y)
        return path, X, y

    def test_kfold(self, separable, capsys):
        path, _, _ = separable
        assert main(["eval", "--repr", str(path)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "mean_accuracy\t1.000000"
        assert len(out) == 11

    def test_json(self, separable, capsys):
        path, _, _ = separable
        assert main(["eval", "--repr", str(path), "--folds", "5", "--json"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["mean_accuracy"] == 1.0 and len(result["fold_accuracies"]) == 5

    def test_one_fold_is_usage_error(self, separable):
        path, _, _ = separable
        assert main(["eval", "--repr", str(path), "--folds", "1"]) == 2

    def test_train_test(self, separable, tmp_path, capsys):
        _, X, y = separable
        write_repr(tmp_path / "train.tsv", X[::2], y[::2])
        write_repr(tmp_path / "test.tsv", X[1::2], y[1::2])
        assert main(["eval", "--train", str(tmp_path / "train.tsv"),
                     "--test", str(tmp_path / "test.tsv")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["accuracy\t1.000000"]

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("a\t0\t1 2\nb\t1\t1\n")
        assert main(["eval", "--repr", str(p), "--folds", "2"]) == 1

    def test_manifest(self, separable, tmp_path):
        path, _, _ = separable
        assert main(["eval", "--repr", str(path), "--manifest", str(tmp_path / "run.json")]) == 0
        assert json.loads((tmp_path / "run.json").read_text())["command"] == "eval"


class TestExportBaseline:
    def test_cbow_single_token_docs(self, paths):
        from spmtext.corpus import load_embeddings

        corpus = paths["tmp"] / "one.tsv"
        corpus.write_text("a\t0\tbaseball\nb\t1\torbit\n")
        out = paths["tmp"] / "cbow.tsv"
        assert main(["export-baseline", "--embeddings", paths["emb"], "--corpus", str(corpus),
                     "--out", str(out), "--method", "cbow"]) == 0
        table = load_embeddings(paths["emb"])
        _, _, X = read_repr_tsv(out)
        np.testing.assert_array_equal(X[0], table.vectors[table.vocab["baseball"]])
        np.testing.assert_array_equal(X[1], table.vectors[table.vocab["orbit"]])

    def test_movmf_single_cluster(self, paths):
        out = paths["tmp"] / "movmf.tsv"
        assert main(["export-baseline", "--embeddings", paths["emb"], "--corpus", paths["corpus"],
                     "--out", str(out), "--method", "movmf", "--clusters", "1"]) == 0
        _, _, X = read_repr_tsv(out)
        assert X.shape == (20, 1)
        assert np.all(X == X[0])

    def test_movmf_features(self, paths):
        out = paths["tmp"] / "movmf.tsv"
        assert main(["export-baseline", "--embeddings", paths["emb"], "--corpus", paths["corpus"],
                     "--out", str(out), "--method", "movmf", "--clusters", "2"]) == 0
        _, _, X = read_repr_tsv(out)
        np.testing.assert_allclose(X.sum(axis=1), 1.0, atol=1e-12)

    def test_unknown_method(self, paths):
        assert main(["export-baseline", "--embeddings", paths["emb"], "--corpus", paths["corpus"],
                     "--out", str(paths["tmp"] / "x"), "--method", "lda"]) == 2


class TestReplay:
    def test_replay_reproduces(self, paths):
        _, model = train(paths, "m.json", "--seed", "11")
        first = model.read_bytes()
        elbo = (paths["tmp"] / "m.json.elbo.tsv").read_bytes()
        model.unlink()
        assert main(["replay", str(paths["tmp"] / "m.json.manifest.json")]) == 0
        assert model.read_bytes() == first
        assert (paths["tmp"] / "m.json.elbo.tsv").read_bytes() == elbo

    def test_module_entry_point(self, paths):
        import subprocess
        import sys

        proc = subprocess.run([sys.executable, "-m", "spmtext", "--version"], capture_output=True,
                              text=True)
        assert proc.returncode == 0 and "spmtext" in proc.stdout
