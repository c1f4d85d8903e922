"""CLI subcommands end to end on toy data."""

from __future__ import annotations

import json

import pytest

from bigphon.cli import main
from bigphon.corpus import CorpusManifest, Utterance, ingest, write_manifest

from conftest import TOY_WORDS, make_toy_manifest


def write_raw_manifest(tmp_path, texts, name="raw.tsv"):
    path = tmp_path / name
    rows = [f"u{i:03d}\t{t}" for i, t in enumerate(texts)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def augmented_manifest(tmp_path):
    m = make_toy_manifest(12, seed=10, sizes=(8, 2, 2))
    path = tmp_path / "augmented.tsv"
    write_manifest(m, path)
    return path


def train_args(manifest, vocab, outdir, epochs=2, interval=2):
    return [
        "train",
        "--manifest", str(manifest),
        "--vocab", str(vocab),
        "--outdir", str(outdir),
        "--epochs", str(epochs),
        "--ckpt-interval", str(interval),
        "--d-model", "16", "--heads", "2", "--d-ff", "32",
        "--encoder-layers", "1", "--decoder-layers", "1",
        "--batch-size", "4", "--lr", "0.003", "--seed", "5",
    ]


class TestAugment:
    def test_writes_split_manifest(self, tmp_path, capsys):
        texts = ["als sie von dem", "und dem geist", "das kind", "die sonne", "der wald"]
        raw = write_raw_manifest(tmp_path, texts)
        out = tmp_path / "aug.tsv"
        rc = main(["augment", "--manifest", str(raw), "--out", str(out),
                   "--split", "3,1,1", "--seed", "1"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "ingested=5" in printed and "train=3" in printed
        m = ingest(out)
        assert len(m) == 5
        assert all(u.phonemes is not None for u in m.utterances)
        sizes = m.split_sizes()
        assert (sizes["train"], sizes["valid"], sizes["test"]) == (3, 1, 1)

    def test_unmappable_char_exits_2(self, tmp_path, capsys):
        raw = write_raw_manifest(tmp_path, ["als 3 sie"])
        rc = main(["augment", "--manifest", str(raw), "--out", str(tmp_path / "x.tsv"),
                   "--split", "1,0,0"])
        assert rc == 2
        assert "u000" in capsys.readouterr().err

    def test_size_mismatch_exits_2(self, tmp_path):
        raw = write_raw_manifest(tmp_path, ["als sie"])
        rc = main(["augment", "--manifest", str(raw), "--out", str(tmp_path / "x.tsv"),
                   "--split", "5,1,1"])
        assert rc == 2

    def test_length_filter_applies(self, tmp_path, capsys):
        texts = ["als sie", "und " * 60]  # second exceeds 200 chars
        raw = write_raw_manifest(tmp_path, texts)
        rc = main(["augment", "--manifest", str(raw), "--out", str(tmp_path / "x.tsv"),
                   "--split", "1,0,0"])
        assert rc == 0
        assert "removed=1" in capsys.readouterr().out


class TestVocab:
    def test_single_variant(self, tmp_path, augmented_manifest, capsys):
        out = tmp_path / "base.vocab"
        rc = main(["vocab", "--manifest", str(augmented_manifest),
                   "--variant", "base", "--out", str(out)])
        assert rc == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("#variant=base")
        assert lines[1:5] == ["PAD", "BOS", "EOS", "UNK"]

    def test_all_variants(self, tmp_path, augmented_manifest):
        out = tmp_path / "vocabs"
        rc = main(["vocab", "--manifest", str(augmented_manifest), "--all",
                   "--out", str(out)])
        assert rc == 0
        assert sorted(p.name for p in out.glob("*.vocab")) == sorted(
            f"{v}.vocab" for v in (
                "base", "vowel10", "vowel20", "vowel30", "const10", "const20",
                "const30", "total10", "total20", "total30",
            )
        )

    def test_unknown_variant_rejected_by_parser(self, tmp_path, augmented_manifest):
        with pytest.raises(SystemExit) as exc:
            main(["vocab", "--manifest", str(augmented_manifest),
                  "--variant", "total15", "--out", str(tmp_path / "x")])
        assert exc.value.code == 2


class TestTrainEvaluateErrors:
    @pytest.fixture()
    def trained(self, tmp_path, augmented_manifest):
        vocab_path = tmp_path / "base.vocab"
        assert main(["vocab", "--manifest", str(augmented_manifest),
                     "--variant", "base", "--out", str(vocab_path)]) == 0
        outdir = tmp_path / "run"
        assert main(train_args(augmented_manifest, vocab_path, outdir)) == 0
        return outdir

    def test_train_outputs(self, trained):
        assert (trained / "epoch0002.ckpt").exists()
        trace = (trained / "trace.csv").read_text(encoding="utf-8")
        assert trace.count("\n") >= 3  # headers + 2 epochs
        run = json.loads((trained / "run_config.json").read_text(encoding="utf-8"))
        assert run["seed"] == 5 and run["variant"] == "base"

    def test_trace_row_count_matches_epochs(self, tmp_path, augmented_manifest):
        vocab_path = tmp_path / "b.vocab"
        main(["vocab", "--manifest", str(augmented_manifest), "--variant", "base",
              "--out", str(vocab_path)])
        outdir = tmp_path / "run4"
        assert main(train_args(augmented_manifest, vocab_path, outdir, epochs=4)) == 0
        rows = [
            line
            for line in (outdir / "trace.csv").read_text(encoding="utf-8").splitlines()
            if line and not line.startswith(("#", "epoch,"))
        ]
        assert len(rows) == 4
        assert [r.split(",")[0] for r in rows] == ["1", "2", "3", "4"]

    def test_evaluate_grid_and_reports(self, tmp_path, augmented_manifest, trained):
        out = tmp_path / "eval"
        rc = main(["evaluate", "--ckpt", str(trained / "*.ckpt"),
                   "--manifest", str(augmented_manifest), "--out", str(out)])
        assert rc == 0
        grid = (out / "bleu_grid.csv").read_text(encoding="utf-8").splitlines()
        data = [line for line in grid if line and not line.startswith("#")]
        assert data[0] == "epoch,base"
        assert data[1].startswith("2,")
        report = json.loads((out / "bleu_base_epoch0002.json").read_text(encoding="utf-8"))
        assert report["variant"] == "base" and report["epoch"] == 2

    def test_evaluate_grid_pivots_variants_and_epochs(self, tmp_path, augmented_manifest):
        """Two variants x two checkpoint epochs -> a 2x2 grid."""
        ckpts = []
        for variant in ("base", "total10"):
            vpath = tmp_path / f"{variant}.vocab"
            main(["vocab", "--manifest", str(augmented_manifest),
                  "--variant", variant, "--out", str(vpath)])
            outdir = tmp_path / f"run_{variant}"
            assert main(train_args(augmented_manifest, vpath, outdir, epochs=4)) == 0
            ckpts.append(str(outdir / "*.ckpt"))
        out = tmp_path / "grid"
        assert main(["evaluate", "--ckpt", *ckpts,
                     "--manifest", str(augmented_manifest), "--out", str(out)]) == 0
        rows = [
            line
            for line in (out / "bleu_grid.csv").read_text(encoding="utf-8").splitlines()
            if line and not line.startswith("#")
        ]
        assert rows[0] == "epoch,base,total10"
        assert [r.split(",")[0] for r in rows[1:]] == ["2", "4"]
        for row in rows[1:]:
            assert all(cell for cell in row.split(","))

    def test_evaluate_vocab_mismatch(self, tmp_path, augmented_manifest, trained):
        vocab_dir = tmp_path / "wrong"
        vocab_dir.mkdir()
        # a base.vocab whose units differ from the checkpoint's
        main(["vocab", "--manifest", str(augmented_manifest), "--variant", "total10",
              "--out", str(vocab_dir / "t.vocab")])
        (vocab_dir / "base.vocab").write_bytes((vocab_dir / "t.vocab").read_bytes())
        rc = main(["evaluate", "--ckpt", str(trained / "*.ckpt"),
                   "--manifest", str(augmented_manifest), "--out", str(tmp_path / "e2"),
                   "--vocab-dir", str(vocab_dir)])
        assert rc == 2

    def test_missing_checkpoint_glob(self, tmp_path, augmented_manifest):
        rc = main(["evaluate", "--ckpt", str(tmp_path / "nothing*.ckpt"),
                   "--manifest", str(augmented_manifest), "--out", str(tmp_path / "e3")])
        assert rc == 2

    def test_errors_outputs(self, tmp_path, augmented_manifest, trained, capsys):
        out = tmp_path / "errors"
        rc = main(["errors", "--ckpt", str(trained / "epoch0002.ckpt"),
                   "--manifest", str(augmented_manifest), "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "error_report.json").read_text(encoding="utf-8"))
        assert report["totals"]["sentences"] == 2
        articles = json.loads((out / "article_report.json").read_text(encoding="utf-8"))
        assert set(articles["articles"]) == {"der", "des", "dem", "den", "die", "das"}
        csv_lines = [
            line
            for line in (out / "articles.csv").read_text(encoding="utf-8").splitlines()
            if line and not line.startswith("#")
        ]
        assert csv_lines[0] == "model,der,des,dem,den,die,das,avg"
        assert csv_lines[1].startswith("base,")
        assert (out / "sentences.txt").exists()


class TestDeterminism:
    def test_augment_twice_byte_identical(self, tmp_path):
        texts = ["als sie von dem", "und dem geist", "das kind", "die sonne"]
        raw = write_raw_manifest(tmp_path, texts)
        outs = []
        for name in ("a1.tsv", "a2.tsv"):
            out = tmp_path / name
            assert main(["augment", "--manifest", str(raw), "--out", str(out),
                         "--split", "2,1,1", "--seed", "3"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_train_twice_byte_identical(self, tmp_path, augmented_manifest):
        vocab_path = tmp_path / "v.vocab"
        main(["vocab", "--manifest", str(augmented_manifest), "--variant", "base",
              "--out", str(vocab_path)])
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        assert main(train_args(augmented_manifest, vocab_path, d1)) == 0
        assert main(train_args(augmented_manifest, vocab_path, d2)) == 0
        assert (d1 / "epoch0002.ckpt").read_bytes() == (d2 / "epoch0002.ckpt").read_bytes()
        assert (d1 / "trace.csv").read_bytes() == (d2 / "trace.csv").read_bytes()
