"""Command-line entry point.

Exit codes: 0 success/accept, 1 verification reject, 2 usage error,
3 I/O or format error. Every command is deterministic given --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import compress as compress_mod
from . import core, denoise, evaluate, fuzzy, pipeline, simulate, zkp

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_IO = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def _load_config(path: str | None) -> dict:
    """Parse a key=value config file (blank lines and # comments ignored)."""
    if not path:
        return {}
    cfg = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                cfg[key.strip()] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from None
    return cfg


def _cfg_float(cfg: dict, key: str, default: float) -> float:
    try:
        return float(cfg.get(key, default))
    except ValueError:
        raise CliError(f"config {key} must be a number", EXIT_USAGE) from None


def _cfg_int(cfg: dict, key: str, default: int) -> int:
    try:
        return int(cfg.get(key, default))
    except ValueError:
        raise CliError(f"config {key} must be an integer", EXIT_USAGE) from None


def _denoiser(name: str) -> object:
    if name == "wavelet":
        return denoise.WaveletDenoiser()
    if name == "identity":
        return denoise.IdentityDenoiser()
    raise CliError(f"unknown denoiser {name!r}", EXIT_USAGE)


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _corpus(args) -> list:
    manifest = core.read_manifest(args.manifest)
    return evaluate.load_manifest_images(manifest, os.path.dirname(args.manifest) or ".")


# ---------------------------------------------------------------------------
# Subcommand implementations. Each returns the exit code.
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    dims = tuple(int(x) for x in args.dims.split("x"))
    if len(dims) != 2 or dims[0] <= 0 or dims[1] <= 0:
        raise CliError("dims must look like 256x256", EXIT_USAGE)
    manifest, _ = simulate.generate_fleet(
        out_dir=args.out,
        n_cameras=args.cameras,
        photos_per_camera=args.photos,
        dims=dims,
        sigma_k=_cfg_float(cfg, "sigma_k", 0.02),
        sigma_read=_cfg_float(cfg, "sigma_read", 2.0),
        seed=args.seed,
        burst=args.burst,
        scene_kind=args.scene_kind,
        checkerboard_gain=_cfg_float(cfg, "checkerboard_gain", 0.0),
    )
    _emit(
        args,
        {"photos": len(manifest.entries), "cameras": len(manifest.cameras)},
        f"wrote {len(manifest.entries)} photos from {len(manifest.cameras)} cameras "
        f"to {args.out}",
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    images = [img for img in _corpus(args) if img.camera == args.camera]
    if not images:
        raise CliError(f"no photos for camera {args.camera!r}")
    if args.max_photos:
        images = images[: args.max_photos]
    part = None if args.part == "full" else args.part
    fp = evaluate.registered_fingerprint(
        images, _denoiser(args.denoiser), part=part, post=not args.no_post
    )
    core.write_fingerprint(args.out, fp)
    _emit(
        args,
        {"camera": args.camera, "n_images": fp.n_images, "out": args.out},
        f"extracted {fp.n_images}-photo fingerprint for {args.camera} -> {args.out}",
    )
    return EXIT_OK


def cmd_split(args) -> int:
    img = core.read_image(args.input)
    odd, even = pipeline.split_odd_even(img)
    core.write_image(args.out_odd, odd)
    core.write_image(args.out_even, even)
    _emit(
        args,
        {"odd": args.out_odd, "even": args.out_even},
        f"split {args.input} -> odd {args.out_odd}, even {args.out_even}",
    )
    return EXIT_OK


def cmd_fe_enroll(args) -> int:
    cfg = _load_config(args.config)
    fp = core.read_fingerprint(args.fingerprint)
    cf = compress_mod.compress(
        fp,
        n=_cfg_int(cfg, "n", args.n),
        seed=args.seed,
        q=_cfg_int(cfg, "q", -1) if "q" in cfg else None,
    )
    from .polar import PolarCodeParams

    params = PolarCodeParams(
        n=cf.n,
        k=fuzzy.SECURITY_BITS,
        p_design=_cfg_float(cfg, "p_design", fuzzy.DEFAULT_P_DESIGN),
    )
    result = fuzzy.enroll(cf, params, rng=np.random.default_rng(args.seed))
    os.makedirs(args.out, exist_ok=True)
    _write_bytes(os.path.join(args.out, "public_key.bin"), result.public_key)
    _write_bytes(os.path.join(args.out, "sketch.sps"), result.sketch.encode())
    _write_bytes(os.path.join(args.out, "side_info.spc"), result.side_info.encode())
    _emit(
        args,
        {"out": args.out, "n": cf.n},
        f"enrolled: public key, sketch and side info written to {args.out}",
    )
    return EXIT_OK


def cmd_fe_sign(args) -> int:
    photo = core.read_image(args.photo)
    odd, even = pipeline.split_odd_even(photo)
    sketch = fuzzy.SecureSketch.decode(_read_bytes(args.sketch))
    side = compress_mod.restore_side_info(_read_bytes(args.side_info))
    even_bytes = core.encode_image(even)
    sig = fuzzy.reproduce_and_sign(
        odd, even_bytes, sketch, side, _denoiser(args.denoiser)
    )
    _write_bytes(args.out, sig.encode())
    if args.even_out:
        _write_bytes(args.even_out, even_bytes)
    _emit(
        args,
        {"signature": args.out, "even": args.even_out or ""},
        f"signed even part of {args.photo} -> {args.out}",
    )
    return EXIT_OK


def cmd_fe_verify(args) -> int:
    sig = fuzzy.PhotoSignature.decode(_read_bytes(args.signature))
    accepted, reason = fuzzy.verify_signature(
        _read_bytes(args.even), sig, _read_bytes(args.public_key)
    )
    _emit(
        args,
        {"accepted": accepted, "reason": reason},
        ("ACCEPT" if accepted else f"REJECT: {reason}"),
    )
    return EXIT_OK if accepted else EXIT_REJECT


def cmd_zkp_register(args) -> int:
    images = [img for img in _corpus(args) if img.camera == args.camera]
    if not images:
        raise CliError(f"no photos for camera {args.camera!r}")
    if args.max_photos:
        images = images[: args.max_photos]
    fp = evaluate.registered_fingerprint(
        images, _denoiser(args.denoiser), part="odd", post=False
    )
    registered = compress_mod.binarize(fp)
    h = zkp.register_digest(registered)
    os.makedirs(args.out, exist_ok=True)
    _write_bytes(os.path.join(args.out, "registered.spb"), core.encode_binary_fp(registered))
    with open(os.path.join(args.out, "digest.hex"), "w", encoding="utf-8") as fh:
        fh.write(h.hex() + "\n")
    _emit(
        args,
        {"digest": h.hex(), "out": args.out},
        f"registered fingerprint digest {h.hex()} -> {args.out}",
    )
    return EXIT_OK


def cmd_zkp_prove(args) -> int:
    photo = core.read_image(args.photo)
    odd, even = pipeline.split_odd_even(photo)
    registered = core.decode_binary_fp(_read_bytes(args.registered))
    with open(args.digest, "r", encoding="utf-8") as fh:
        h = bytes.fromhex(fh.read().strip())
    denoiser = _denoiser(args.denoiser)
    witness = zkp.Witness(
        odd=odd, even=even, denoised=denoiser(odd), registered=registered
    )
    cfg = _consistency_config(_load_config(args.config))
    try:
        script = zkp.prove(witness, even, h, cfg)
    except zkp.StatementError as exc:
        _emit(
            args,
            {"proved": False, "clause": exc.clause, "reason": exc.reason},
            f"statement false at clause ({exc.clause}): {exc.reason}",
        )
        return EXIT_REJECT
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(script.to_json() + "\n")
    if args.even_out:
        _write_bytes(args.even_out, core.encode_image(even))
    _emit(
        args,
        {"proved": True, "script": args.out},
        f"proof script written to {args.out}",
    )
    return EXIT_OK


def cmd_zkp_verify(args) -> int:
    with open(args.script, "r", encoding="utf-8") as fh:
        script = zkp.ProofScript.from_json(fh.read())
    even = core.read_image(args.even)
    with open(args.digest, "r", encoding="utf-8") as fh:
        h = bytes.fromhex(fh.read().strip())
    accepted, reason = zkp.verify(script, even, h)
    _emit(
        args,
        {"accepted": accepted, "reason": reason},
        ("ACCEPT" if accepted else f"REJECT: {reason}"),
    )
    return EXIT_OK if accepted else EXIT_REJECT


def _consistency_config(cfg: dict) -> zkp.ConsistencyConfig:
    return zkp.ConsistencyConfig(
        patch=_cfg_int(cfg, "patch", 128),
        c1_thld=_cfg_float(cfg, "c1_thld", zkp.DEFAULT_C1_THLD),
        c2_thld=_cfg_float(cfg, "c2_thld", zkp.DEFAULT_C2_THLD),
        count_thld=_cfg_int(cfg, "count_thld", 0) or None,
        pool_k=_cfg_int(cfg, "k_pool", 8),
        tau_zkp=_cfg_float(cfg, "tau_zkp", zkp.DEFAULT_TAU_ZKP),
    )


def cmd_bench(args) -> int:
    images = _corpus(args)
    arms = tuple(args.arms.split(",")) if args.arms else evaluate.ABLATION_ARMS
    report = evaluate.run_ablation(images, arms=arms)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "ablation.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    for arm in arms:
        with open(os.path.join(args.out, f"hist_{arm}.csv"), "w", encoding="utf-8") as fh:
            fh.write(report.histogram_text(arm))
    summary = {r.arm: {"auc": r.auc, "eer": r.eer} for r in report.rows}
    _emit(
        args,
        summary,
        "\n".join(f"{r.arm:10s} auc={r.auc:.4f} eer={r.eer:.4f}" for r in report.rows),
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    rng = np.random.default_rng(args.seed)
    cam = simulate.new_camera(seed=args.seed, dims=(256, 256))
    pos_pairs, neg_pairs = [], []
    odds, dens = [], []
    for i in range(args.photos):
        scene = simulate.SceneSource(
            kind="texture", lo=30, hi=230, smoothness=2.0, seed=args.seed * 10_000 + i
        )
        img = simulate.capture(cam, scene, seed=args.seed * 100_000 + i)
        odd, _ = pipeline.split_odd_even(img)
        odds.append(odd.astype_float())
        dens.append(denoise.wavelet_denoise(odd))
    n = len(odds)
    for i in range(n):
        for r0, c0 in ((0, 0), (0, 128)):
            op = odds[i][r0 : r0 + 128, c0 : c0 + 128]
            dp = dens[i][r0 : r0 + 128, c0 : c0 + 128]
            pos_pairs.append((op, dp))
            for _ in range(args.neg_ratio):
                j = int((i + 1 + rng.integers(0, n - 1)) % n)
                neg_pairs.append((op, dens[j][r0 : r0 + 128, c0 : c0 + 128]))
    t1, t2, surface, (axis1, axis2) = zkp.calibrate_thresholds(pos_pairs, neg_pairs)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "eer_surface.csv"), "w", encoding="utf-8") as fh:
        fh.write("c1_thld,c2_thld,balanced_error\n")
        for i, a in enumerate(axis1):
            for j, b in enumerate(axis2):
                fh.write(f"{a:.4f},{b:.4f},{surface[i, j]:.6f}\n")
    with open(os.path.join(args.out, "thresholds.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"c1_thld={t1}\nc2_thld={t2}\n")
    plateau = float((surface <= max(2 * surface.min(), 1e-9)).mean())
    _emit(
        args,
        {
            "c1_thld": t1,
            "c2_thld": t2,
            "min_error": float(surface.min()),
            "plateau_fraction": plateau,
            "n_pos": len(pos_pairs),
            "n_neg": len(neg_pairs),
        },
        f"calibrated c1_thld={t1} c2_thld={t2} "
        f"min_err={surface.min():.4f} plateau={plateau:.2f}",
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring.
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spnkit",
        description="Sensor-pattern-noise camera fingerprinting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="root RNG seed")
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("simulate", help="generate a synthetic camera fleet")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--cameras", type=int, default=8)
    p.add_argument("--photos", type=int, default=20)
    p.add_argument("--dims", default="256x256")
    p.add_argument("--burst", type=int, default=1)
    p.add_argument("--scene-kind", default="default", choices=["default", "halves", "sharp", "textured"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="extract a registration fingerprint")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--part", default="full", choices=["full", "odd", "even"])
    p.add_argument("--denoiser", default="wavelet", choices=["wavelet", "identity"])
    p.add_argument("--no-post", action="store_true", help="skip ZM/WF postprocessing")
    p.add_argument("--max-photos", type=int, default=0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("split", help="split a photo into odd/even rows")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out-odd", required=True)
    p.add_argument("--out-even", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fe-enroll", help="fuzzy extractor enrollment")
    common(p)
    p.add_argument("--fingerprint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=4096)
    p.set_defaults(func=cmd_fe_enroll)

    p = sub.add_parser("fe-sign", help="reproduce the key and sign a photo")
    common(p)
    p.add_argument("--photo", required=True)
    p.add_argument("--sketch", required=True)
    p.add_argument("--side-info", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--even-out", default=None)
    p.add_argument("--denoiser", default="wavelet", choices=["wavelet", "identity"])
    p.set_defaults(func=cmd_fe_sign)

    p = sub.add_parser("fe-verify", help="verify a photo signature")
    common(p)
    p.add_argument("--even", required=True)
    p.add_argument("--signature", required=True)
    p.add_argument("--public-key", required=True)
    p.set_defaults(func=cmd_fe_verify)

    p = sub.add_parser("zkp-register", help="register a fingerprint digest")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--denoiser", default="wavelet", choices=["wavelet", "identity"])
    p.add_argument("--max-photos", type=int, default=0)
    p.set_defaults(func=cmd_zkp_register)

    p = sub.add_parser("zkp-prove", help="prove the photo/fingerprint statement")
    common(p)
    p.add_argument("--photo", required=True)
    p.add_argument("--registered", required=True)
    p.add_argument("--digest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--even-out", default=None)
    p.add_argument("--denoiser", default="wavelet", choices=["wavelet", "identity"])
    p.set_defaults(func=cmd_zkp_prove)

    p = sub.add_parser("zkp-verify", help="verify a proof script")
    common(p)
    p.add_argument("--script", required=True)
    p.add_argument("--even", required=True)
    p.add_argument("--digest", required=True)
    p.set_defaults(func=cmd_zkp_verify)

    p = sub.add_parser("bench", help="optimization-module ablation")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arms", default="")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="consistency-threshold grid search")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--photos", type=int, default=60)
    p.add_argument("--neg-ratio", type=int, default=3)
    p.set_defaults(func=cmd_calibrate)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (core.FormatError, core.ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(dispatch())
