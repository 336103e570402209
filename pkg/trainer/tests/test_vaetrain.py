"""Unit tests for the trainer: codec, model, data loading, training, parity."""

from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from vaetrain import cli, data, model, parity, qdvw, train
from vaetrain.errors import ValidationError


def _make_corpus(directory, count, seed):
    """Mostly-white 64x64 PNGs with a few dark strokes."""
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        img = np.full((64, 64), 255, dtype=np.uint8)
        for _ in range(6):
            r, c = rng.integers(0, 64, 2)
            img[r, max(c - 9, 0) : c] = rng.integers(0, 120)
        Image.fromarray(img, mode="L").save(directory / f"img_{i:03d}.png")


# ----------------------------------------------------------------- codec


def test_qdvw_round_trip(tmp_path):
    tensors = {
        "conv1.weight": np.arange(24, dtype=np.float32).reshape(2, 3, 2, 2),
        "fc.bias": np.array([-1.5, 0.25], dtype=np.float32),
        "fc.weight": np.eye(2, dtype=np.float32),
    }
    path = tmp_path / "w.qdvw"
    qdvw.save_tensors(path, tensors)
    loaded = qdvw.load_tensors(path)
    assert sorted(loaded) == sorted(tensors)
    for name in tensors:
        assert loaded[name].dtype == np.float32
        assert np.array_equal(loaded[name], tensors[name])


def test_qdvw_bytes_independent_of_insertion_order(tmp_path):
    a = {"b": np.ones(3, dtype=np.float32), "a": np.zeros(2, dtype=np.float32)}
    b = {"a": np.zeros(2, dtype=np.float32), "b": np.ones(3, dtype=np.float32)}
    qdvw.save_tensors(tmp_path / "a.qdvw", a)
    qdvw.save_tensors(tmp_path / "b.qdvw", b)
    assert (tmp_path / "a.qdvw").read_bytes() == (tmp_path / "b.qdvw").read_bytes()


def test_qdvw_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.qdvw"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValidationError):
        qdvw.load_tensors(path)


def test_qdvw_rejects_truncation(tmp_path):
    path = tmp_path / "w.qdvw"
    qdvw.save_tensors(path, {"a": np.ones(5, dtype=np.float32)})
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(ValidationError):
        qdvw.load_tensors(path)


# ----------------------------------------------------------------- model


def test_vae_forward_shapes():
    torch.manual_seed(0)
    net = model.ConvVAE()
    x = torch.rand(2, 1, 64, 64)
    with torch.no_grad():
        recon, mean, logvar = net(x)
    assert recon.shape == (2, 1, 64, 64)
    assert mean.shape == (2, 512)
    assert logvar.shape == (2, 512)
    assert float(recon.min()) >= 0.0 and float(recon.max()) <= 1.0


def test_encoder_shapes_table():
    exported = model.export_encoder_tensors(model.ConvVAE())
    assert sorted(exported) == sorted(model.ENCODER_SHAPES)
    for name, arr in exported.items():
        assert arr.shape == model.ENCODER_SHAPES[name]
        assert arr.dtype == np.float32


def test_import_round_trip_and_errors():
    net = model.ConvVAE()
    tensors = model.export_encoder_tensors(net)
    encoder = model.import_encoder_tensors(tensors)
    for name, arr in encoder.state_dict().items():
        assert np.array_equal(arr.numpy(), tensors[name])

    missing = dict(tensors)
    del missing["conv2.bias"]
    with pytest.raises(ValidationError, match="conv2.bias"):
        model.import_encoder_tensors(missing)

    bad = dict(tensors)
    bad["fc_mean.weight"] = np.zeros((4, 4), dtype=np.float32)
    with pytest.raises(ValidationError, match="fc_mean.weight"):
        model.import_encoder_tensors(bad)


def test_vae_loss_terms():
    x = torch.full((3, 1, 64, 64), 0.5)
    recon = torch.full((3, 1, 64, 64), 0.5)
    zero = torch.zeros(3, 512)
    total, bce, kl = model.vae_loss(recon, x, zero, zero, beta=1.0)
    # mean 0, logvar 0 is exactly the prior: KL term vanishes
    assert abs(float(kl)) < 1e-6
    assert abs(float(total) - float(bce)) < 1e-6

    mean = torch.ones(3, 512)
    t1, b1, k1 = model.vae_loss(recon, x, mean, zero, beta=1.0)
    t2, b2, k2 = model.vae_loss(recon, x, mean, zero, beta=2.0)
    assert float(k1) > 0.0
    assert float(b1) == float(b2)
    assert abs((float(t2) - float(b2)) - 2.0 * (float(t1) - float(b1))) < 1e-4


# ----------------------------------------------------------------- data


def test_list_corpus_missing_dir(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        data.list_corpus(tmp_path / "nowhere")


def test_list_corpus_empty(tmp_path):
    (tmp_path / "c").mkdir()
    with pytest.raises(ValidationError, match="empty"):
        data.list_corpus(tmp_path / "c")


def test_list_corpus_sorted(tmp_path):
    d = tmp_path / "c"
    d.mkdir()
    blank = Image.fromarray(np.zeros((64, 64), dtype=np.uint8), mode="L")
    for name in ["zz.png", "aa.png", "mm.png"]:
        blank.save(d / name)
    names = [Path(p).name for p in data.list_corpus(d)]
    assert names == ["aa.png", "mm.png", "zz.png"]


def test_load_image_wrong_size(tmp_path):
    path = tmp_path / "wide.png"
    Image.fromarray(np.zeros((64, 65), dtype=np.uint8), mode="L").save(path)
    with pytest.raises(ValidationError, match="expected 64x64"):
        data.load_image(path)


def test_load_corpus_shape(tmp_path):
    _make_corpus(tmp_path / "c", 5, seed=1)
    corpus = data.load_corpus(tmp_path / "c")
    assert corpus.shape == (5, 64, 64)
    assert corpus.dtype == np.uint8


# ----------------------------------------------------------------- training


def test_trainspec_invariants(tmp_path):
    with pytest.raises(ValidationError, match="latent dim"):
        train.TrainSpec(corpus_dir=str(tmp_path), latent_dim=256)
    with pytest.raises(ValidationError, match="epochs"):
        train.TrainSpec(corpus_dir=str(tmp_path), epochs=0)
    with pytest.raises(ValidationError, match="batch size"):
        train.TrainSpec(corpus_dir=str(tmp_path), batch_size=0)
    with pytest.raises(ValidationError, match="learning rate"):
        train.TrainSpec(corpus_dir=str(tmp_path), learning_rate=0.0)
    with pytest.raises(ValidationError, match="beta"):
        train.TrainSpec(corpus_dir=str(tmp_path), beta=-0.5)


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("short")
    _make_corpus(root / "corpus", 24, seed=2)
    spec = train.TrainSpec(
        corpus_dir=str(root / "corpus"), epochs=2, batch_size=8, seed=6
    )
    net, curve = train.train(spec)
    return root, spec, net, curve


def test_train_curve_shape(short_run):
    _, spec, _, curve = short_run
    assert [s.epoch for s in curve] == [1, 2]
    for s in curve:
        assert s.total == pytest.approx(s.recon + s.kl, rel=1e-6)


def test_train_deterministic(short_run, tmp_path):
    root, spec, net, curve = short_run
    train.save_weights(tmp_path / "a.qdvw", net)
    net2, curve2 = train.train(spec)
    train.save_weights(tmp_path / "b.qdvw", net2)
    assert (tmp_path / "a.qdvw").read_bytes() == (tmp_path / "b.qdvw").read_bytes()
    assert train.curve_to_csv(curve) == train.curve_to_csv(curve2)


def test_exported_names_and_shapes(short_run, tmp_path):
    _, _, net, _ = short_run
    path = tmp_path / "w.qdvw"
    train.save_weights(path, net)
    loaded = qdvw.load_tensors(path)
    assert sorted(loaded) == sorted(model.ENCODER_SHAPES)
    for name, arr in loaded.items():
        assert arr.shape == model.ENCODER_SHAPES[name]


def test_curve_csv_format(short_run):
    _, _, _, curve = short_run
    lines = train.curve_to_csv(curve).splitlines()
    assert lines[0] == "epoch,total,recon,kl"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[1]) == pytest.approx(curve[0].total)


# ----------------------------------------------------------------- parity


@pytest.fixture(scope="module")
def pack(short_run, tmp_path_factory):
    root, _, net, _ = short_run
    out = tmp_path_factory.mktemp("pack")
    _make_corpus(root / "pcorpus", 40, seed=3)
    train.save_weights(root / "w.qdvw", net)
    csv_path = parity.export_parity(root / "w.qdvw", root / "pcorpus", out / "pack")
    return root, out / "pack", csv_path


def test_pack_contents(pack):
    _, pack_dir, csv_path = pack
    pngs = sorted(p.name for p in pack_dir.glob("*.png"))
    assert len(pngs) == parity.PACK_SIZE
    assert pngs[0] == "sample_000.png"
    names, vectors = parity.load_parity_csv(csv_path)
    assert names == pngs
    assert vectors.shape == (parity.PACK_SIZE, 512)


def test_pack_images_are_exact_copies(pack):
    root, pack_dir, _ = pack
    sources = data.list_corpus(root / "pcorpus")[: parity.PACK_SIZE]
    for index, src in enumerate(sources):
        copied = pack_dir / f"sample_{index:03d}.png"
        assert copied.read_bytes() == Path(src).read_bytes()


def test_pack_reexport_identical(pack, tmp_path):
    root, pack_dir, csv_path = pack
    again = parity.export_parity(root / "w.qdvw", root / "pcorpus", tmp_path / "p2")
    assert again.read_bytes() == csv_path.read_bytes()


def test_pack_needs_enough_images(pack, tmp_path):
    root, _, _ = pack
    _make_corpus(tmp_path / "tiny", 8, seed=4)
    with pytest.raises(ValidationError, match="32"):
        parity.export_parity(root / "w.qdvw", tmp_path / "tiny", tmp_path / "out")


def test_csv_matches_trainer_recompute(pack):
    root, pack_dir, csv_path = pack
    encoder = model.import_encoder_tensors(qdvw.load_tensors(root / "w.qdvw"))
    names, vectors = parity.load_parity_csv(csv_path)
    img = data.load_image(pack_dir / names[0]).astype(np.float32) / 255.0
    with torch.no_grad():
        mean, _ = encoder(torch.from_numpy(img).reshape(1, 1, 64, 64))
    assert np.allclose(mean[0].numpy(), vectors[0], rtol=0, atol=1e-6)


def test_load_parity_csv_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="not a parity CSV"):
        parity.load_parity_csv(bad)


# ----------------------------------------------------------------- cli


def test_cli_train_and_pack(tmp_path, capsys):
    _make_corpus(tmp_path / "corpus", 36, seed=5)
    code = cli.main(
        [
            "train",
            "--corpus", str(tmp_path / "corpus"),
            "--out", str(tmp_path / "run"),
            "--epochs", "1",
            "--batch-size", "12",
            "--seed", "9",
        ]
    )
    assert code == 0
    assert (tmp_path / "run" / "encoder.qdvw").exists()
    curve = (tmp_path / "run" / "curve.csv").read_text(encoding="utf-8")
    assert curve.startswith("epoch,total,recon,kl\n")
    assert "trained 1 epochs" in capsys.readouterr().out

    code = cli.main(
        [
            "export-parity",
            "--weights", str(tmp_path / "run" / "encoder.qdvw"),
            "--corpus", str(tmp_path / "corpus"),
            "--out", str(tmp_path / "pack"),
        ]
    )
    assert code == 0
    assert len(list((tmp_path / "pack").glob("*.png"))) == 32


def test_cli_validation_exit_code(tmp_path, capsys):
    code = cli.main(
        ["train", "--corpus", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]
    )
    assert code == 4
    err = capsys.readouterr().err
    assert err.startswith("vaetrain-error code=4 kind=validation:")


def test_cli_io_exit_code(tmp_path, capsys):
    _make_corpus(tmp_path / "corpus", 32, seed=7)
    code = cli.main(
        [
            "export-parity",
            "--weights", str(tmp_path / "nothing.qdvw"),
            "--corpus", str(tmp_path / "corpus"),
            "--out", str(tmp_path / "pack"),
        ]
    )
    assert code == 3
    assert capsys.readouterr().err.startswith("vaetrain-error code=3 kind=io:")
