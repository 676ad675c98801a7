import numpy as np
import pytest
from PIL import Image

from score_exporter import BackboneLoadError, ExportJob, ManifestError, export_scores
from score_exporter.cli import main
from score_exporter.formats import read_manifest

# The fusion engine is the consumer of the exported files; its reader is the
# conformance oracle for the acceptance check below.
from scorefuse.io import read_score_table

CLASSES = "no,yes"


@pytest.fixture(scope="module")
def smoke_manifest(tmp_path_factory):
    """Ten tiny images plus their manifest."""
    root = tmp_path_factory.mktemp("smoke")
    rng = np.random.default_rng(0)
    lines = ["sample_id,path,label"]
    for i in range(10):
        name = f"img_{i:02d}.png"
        data = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        Image.fromarray(data, mode="RGB").save(root / name)
        lines.append(f"scan{i:02d},{name},{'no' if i % 2 == 0 else 'yes'}")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def run_export(manifest, out, backbone="efficientnet", extra=()):
    return main([
        "--manifest", str(manifest),
        "--backbone", backbone,
        "--classes", CLASSES,
        "--out", str(out),
        "--weights", "none",
        "--batch-size", "4",
        *extra,
    ])


class TestConformance:
    def test_smoke_export_accepted_by_engine_reader(self, smoke_manifest, tmp_path):
        out = tmp_path / "scores.csv"
        assert run_export(smoke_manifest, out) == 0
        table = read_score_table(out)
        assert len(table) == 10
        # row order equals manifest order
        manifest_rows = read_manifest(smoke_manifest, ("no", "yes"))
        assert table.sample_ids == tuple(r.sample_id for r in manifest_rows)
        # column order equals the requested label-space order
        assert table.label_space.classes == ("no", "yes")
        assert [r.true_label for r in table.rows] == [r.label for r in manifest_rows]
        # probabilities are near-normalized before the reader's repair step
        header, first = out.read_text(encoding="utf-8").splitlines()[:2]
        assert header == "sample_id,true_label,no,yes"
        raw = [float(tok) for tok in first.split(",")[2:]]
        assert abs(sum(raw) - 1.0) < 1e-6

    def test_eval_mode_determinism(self, smoke_manifest, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_export(smoke_manifest, out_a) == 0
        assert run_export(smoke_manifest, out_b) == 0
        probs_a = read_score_table(out_a).prob_matrix()
        probs_b = read_score_table(out_b).prob_matrix()
        np.testing.assert_allclose(probs_a, probs_b, atol=1e-6)

    def test_different_seeds_differ(self, smoke_manifest, tmp_path):
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_export(smoke_manifest, out_a, extra=("--seed", "0")) == 0
        assert run_export(smoke_manifest, out_b, extra=("--seed", "1")) == 0
        a = read_score_table(out_a).prob_matrix()
        b = read_score_table(out_b).prob_matrix()
        assert not np.allclose(a, b, atol=1e-6)


class TestErrors:
    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        rc = run_export(tmp_path / "nope.csv", tmp_path / "out.csv")
        assert rc == 2
        assert "E_DATA" in capsys.readouterr().err

    def test_label_outside_classes_exits_2(self, tmp_path, capsys):
        manifest = tmp_path / "m.csv"
        manifest.write_text("sample_id,path,label\na,a.png,cyst\n", encoding="utf-8")
        rc = run_export(manifest, tmp_path / "out.csv")
        assert rc == 2
        assert "E_DATA" in capsys.readouterr().err

    def test_backbone_load_failure_exits_4(self, smoke_manifest, tmp_path, capsys, monkeypatch):
        import score_exporter.export as export_mod

        def boom(name, n_classes, weights, seed):
            raise BackboneLoadError("checkpoint unavailable")

        monkeypatch.setattr(export_mod, "build_backbone", boom)
        rc = main([
            "--manifest", str(smoke_manifest), "--backbone", "densenet",
            "--classes", CLASSES, "--out", str(tmp_path / "o.csv"),
        ])
        assert rc == 4
        assert "E_BACKBONE" in capsys.readouterr().err

    def test_output_must_differ_from_manifest(self, smoke_manifest):
        with pytest.raises(ManifestError):
            ExportJob(
                manifest=str(smoke_manifest),
                backbone="densenet",
                classes=("no", "yes"),
                out=str(smoke_manifest),
            )

    def test_unknown_backbone_rejected(self, smoke_manifest, tmp_path):
        with pytest.raises(BackboneLoadError):
            ExportJob(
                manifest=str(smoke_manifest),
                backbone="alexnet",
                classes=("no", "yes"),
                out=str(tmp_path / "o.csv"),
            )


class TestBackboneRegistry:
    @pytest.mark.parametrize("name", ["densenet", "resnet", "efficientnet", "vgg16", "vit"])
    def test_every_backbone_builds_and_scores(self, name, smoke_manifest, tmp_path):
        out = tmp_path / f"{name}.csv"
        assert run_export(smoke_manifest, out, backbone=name) == 0
        table = read_score_table(out)
        assert len(table) == 10
        sums = table.prob_matrix().sum(axis=1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-9)

    def test_four_class_export(self, tmp_path):
        rng = np.random.default_rng(1)
        lines = ["sample_id,path,label"]
        classes = ("no_tumor", "glioma", "meningioma", "pituitary")
        for i in range(4):
            name = f"t{i}.png"
            Image.fromarray(
                rng.integers(0, 256, size=(28, 28), dtype=np.uint8), mode="L"
            ).save(tmp_path / name)
            lines.append(f"t{i},{name},{classes[i]}")
        manifest = tmp_path / "m.csv"
        manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "four.csv"
        rc = main([
            "--manifest", str(manifest), "--backbone", "efficientnet",
            "--classes", ",".join(classes), "--out", str(out), "--weights", "none",
        ])
        assert rc == 0
        table = read_score_table(out)
        assert table.label_space.classes == classes
