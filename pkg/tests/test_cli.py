import json
import os

import numpy as np
import pytest

from spnkit import core
from spnkit.cli import EXIT_IO, EXIT_OK, EXIT_REJECT, EXIT_USAGE, dispatch


def run(*argv):
    return dispatch(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small simulated fleet plus enrollment/registration artifacts."""
    root = tmp_path_factory.mktemp("cli")
    fleet = str(root / "fleet")
    code = run(
        "simulate", "--out", fleet, "--cameras", "3", "--photos", "6",
        "--dims", "128x128", "--seed", "42",
    )
    assert code == EXIT_OK
    manifest = os.path.join(fleet, "manifest.tsv")

    fp_path = str(root / "cam00.spf")
    assert run(
        "extract", "--manifest", manifest, "--camera", "cam00",
        "--out", fp_path, "--part", "odd",
    ) == EXIT_OK

    enroll_dir = str(root / "enroll")
    assert run(
        "fe-enroll", "--fingerprint", fp_path, "--out", enroll_dir,
        "--n", "4096", "--seed", "7",
    ) == EXIT_OK

    zkp_dir = str(root / "zkpreg")
    assert run(
        "zkp-register", "--manifest", manifest, "--camera", "cam00",
        "--out", zkp_dir,
    ) == EXIT_OK

    # 128x128 photos have 64-row odd halves; shrink the consistency patch
    cfg_path = str(root / "zkp.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write("# desk-scale consistency settings\npatch=64\n")
    return {
        "config": cfg_path,
        "root": root,
        "fleet": fleet,
        "manifest": manifest,
        "fp": fp_path,
        "enroll": enroll_dir,
        "zkp": zkp_dir,
    }


def _fresh_photo(workspace, seed=31337, camera_seed=420000, structured=False):
    # cameras in the fleet are seeded as seed*10_000 + index; consistency
    # checking needs edge content, so zkp flows photograph structured scenes
    from spnkit import simulate
    from spnkit.core import write_image

    cam = simulate.new_camera(seed=camera_seed, dims=(128, 128), label="cam00")
    if structured:
        scene = simulate.SceneSource(
            kind="texture", lo=30, hi=230, smoothness=2.0, seed=4242 + seed
        )
    else:
        scene = simulate.default_fleet_scene(2, seed=4242)
    img = simulate.capture(cam, scene, seed=seed)
    path = str(workspace["root"] / f"fresh_{seed}_{camera_seed}.spi")
    write_image(path, img)
    return path


class TestSimulate:
    def test_manifest_and_images_decode(self, workspace):
        manifest = core.read_manifest(workspace["manifest"])
        assert len(manifest.entries) == 18
        manifest.validate_files(workspace["fleet"])

    def test_deterministic_artifacts(self, workspace, tmp_path):
        out2 = str(tmp_path / "fleet2")
        assert run(
            "simulate", "--out", out2, "--cameras", "3", "--photos", "6",
            "--dims", "128x128", "--seed", "42",
        ) == EXIT_OK
        for name in sorted(os.listdir(workspace["fleet"])):
            with open(os.path.join(workspace["fleet"], name), "rb") as fa:
                with open(os.path.join(out2, name), "rb") as fb:
                    assert fa.read() == fb.read(), name


class TestSplit:
    def test_split_round_trip(self, workspace, tmp_path):
        manifest = core.read_manifest(workspace["manifest"])
        src = os.path.join(workspace["fleet"], manifest.entries[0].path)
        odd_p = str(tmp_path / "odd.spi")
        even_p = str(tmp_path / "even.spi")
        assert run("split", "--input", src, "--out-odd", odd_p, "--out-even", even_p) == EXIT_OK
        odd = core.read_image(odd_p)
        even = core.read_image(even_p)
        assert odd.part is core.Part.ODD and even.part is core.Part.EVEN
        from spnkit.pipeline import interleave

        full = interleave(odd, even)
        assert np.array_equal(full.pixels, core.read_image(src).pixels)


class TestFuzzyCommands:
    def test_sign_verify_honest(self, workspace, capsys):
        photo = _fresh_photo(workspace)
        sig = str(workspace["root"] / "sig.bin")
        even_out = str(workspace["root"] / "even.spi")
        assert run(
            "fe-sign", "--photo", photo,
            "--sketch", os.path.join(workspace["enroll"], "sketch.sps"),
            "--side-info", os.path.join(workspace["enroll"], "side_info.spc"),
            "--out", sig, "--even-out", even_out,
        ) == EXIT_OK
        code = run(
            "fe-verify", "--even", even_out, "--signature", sig,
            "--public-key", os.path.join(workspace["enroll"], "public_key.bin"),
            "--json",
        )
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert code == EXIT_OK and out["accepted"] is True

    def test_verify_rejects_tamper(self, workspace):
        photo = _fresh_photo(workspace, seed=999)
        sig = str(workspace["root"] / "sig2.bin")
        even_out = str(workspace["root"] / "even2.spi")
        assert run(
            "fe-sign", "--photo", photo,
            "--sketch", os.path.join(workspace["enroll"], "sketch.sps"),
            "--side-info", os.path.join(workspace["enroll"], "side_info.spc"),
            "--out", sig, "--even-out", even_out,
        ) == EXIT_OK
        data = bytearray(open(even_out, "rb").read())
        data[-1] ^= 1
        tampered = str(workspace["root"] / "tampered.spi")
        open(tampered, "wb").write(bytes(data))
        assert run(
            "fe-verify", "--even", tampered, "--signature", sig,
            "--public-key", os.path.join(workspace["enroll"], "public_key.bin"),
        ) == EXIT_REJECT


class TestZkpCommands:
    def test_prove_verify_honest(self, workspace):
        photo = _fresh_photo(workspace, seed=555, structured=True)
        script = str(workspace["root"] / "ps.json")
        even_out = str(workspace["root"] / "even_zkp.spi")
        assert run(
            "zkp-prove", "--photo", photo, "--config", workspace["config"],
            "--registered", os.path.join(workspace["zkp"], "registered.spb"),
            "--digest", os.path.join(workspace["zkp"], "digest.hex"),
            "--out", script, "--even-out", even_out,
        ) == EXIT_OK
        assert run(
            "zkp-verify", "--script", script, "--even", even_out,
            "--digest", os.path.join(workspace["zkp"], "digest.hex"),
        ) == EXIT_OK

    def test_verify_rejects_wrong_even(self, workspace):
        photo = _fresh_photo(workspace, seed=556, structured=True)
        script = str(workspace["root"] / "ps2.json")
        even_out = str(workspace["root"] / "even_zkp2.spi")
        assert run(
            "zkp-prove", "--photo", photo, "--config", workspace["config"],
            "--registered", os.path.join(workspace["zkp"], "registered.spb"),
            "--digest", os.path.join(workspace["zkp"], "digest.hex"),
            "--out", script, "--even-out", even_out,
        ) == EXIT_OK
        other_full = _fresh_photo(workspace, seed=777, structured=True)
        odd_p = str(workspace["root"] / "o.spi")
        even_p = str(workspace["root"] / "e.spi")
        assert run("split", "--input", other_full, "--out-odd", odd_p, "--out-even", even_p) == EXIT_OK
        assert run(
            "zkp-verify", "--script", script, "--even", even_p,
            "--digest", os.path.join(workspace["zkp"], "digest.hex"),
        ) == EXIT_REJECT

    def test_prove_refuses_other_camera(self, workspace):
        photo = _fresh_photo(workspace, seed=600, camera_seed=999999, structured=True)
        script = str(workspace["root"] / "ps3.json")
        assert run(
            "zkp-prove", "--photo", photo, "--config", workspace["config"],
            "--registered", os.path.join(workspace["zkp"], "registered.spb"),
            "--digest", os.path.join(workspace["zkp"], "digest.hex"),
            "--out", script,
        ) == EXIT_REJECT


class TestErrorPaths:
    def test_unknown_command_usage_error(self):
        assert run("frobnicate") == EXIT_USAGE

    def test_missing_file_io_error(self):
        assert run(
            "fe-verify", "--even", "/nonexistent", "--signature", "/nope",
            "--public-key", "/nada",
        ) == EXIT_IO

    def test_malformed_input_io_error(self, workspace, tmp_path):
        bad = str(tmp_path / "bad.spi")
        open(bad, "wb").write(b"not an image")
        assert run(
            "split", "--input", bad, "--out-odd", str(tmp_path / "a"),
            "--out-even", str(tmp_path / "b"),
        ) == EXIT_IO

    def test_bench_and_calibrate_smoke(self, workspace, tmp_path):
        fleet = str(tmp_path / "burstfleet")
        assert run(
            "simulate", "--out", fleet, "--cameras", "3", "--photos", "6",
            "--dims", "128x128", "--seed", "5", "--burst", "3",
            "--scene-kind", "halves",
        ) == EXIT_OK
        out = str(tmp_path / "bench")
        assert run(
            "bench", "--manifest", os.path.join(fleet, "manifest.tsv"),
            "--out", out,
        ) == EXIT_OK
        assert os.path.exists(os.path.join(out, "ablation.csv"))
        assert os.path.exists(os.path.join(out, "hist_baseline.csv"))
        cal = str(tmp_path / "cal")
        assert run("calibrate", "--out", cal, "--photos", "8", "--seed", "3") == EXIT_OK
        assert os.path.exists(os.path.join(cal, "eer_surface.csv"))
