"""Command-line interface: train, fit-prior, sample, eval, exports, gradcheck.

All stages communicate through the binary checkpoint format, CSV outputs are
UTF-8 with a header row and 17-significant-digit floats, and every subcommand
that takes a seed is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import (
    SIGNAL_LENGTH,
    make_time_grid,
    read_cifar_batch,
    signals_to_matrix,
    write_png,
)
from .dictionary import softplus, synthesize_basis
from .exceptions import (
    CheckpointError,
    CifarFormatError,
    MissingPriorError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    TrainingDivergedError,
)
from .prior import fit_gaussian, generate
from .stft import StftConfig, batch_magnitudes, stft_magnitude
from .training import TrainConfig, encode_ridge_batch, gradient_check, train

PSNR_CAP_DB = 99.0  # sentinel for exact reconstructions instead of +inf

_CONFIG_DEFAULTS = {
    "data": None,
    "out": None,
    "epochs": 20,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "lambda_stft": 0.1,
    "n_atoms": 256,
    "hidden_width": 64,
    "seed": 0,
    "frame_length": 256,
    "hop_length": 128,
    "window": "hann",
    "mixing_init": "zeros",
    "max_records": None,
}


def _fmt(value) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(value), ".17g")


def _write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # python 3.10
        import tomli as tomllib
    with open(path, "rb") as handle:
        values = tomllib.load(handle)
    unknown = sorted(set(values) - set(_CONFIG_DEFAULTS))
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    return values


def _effective_config(args) -> dict:
    """defaults < config file < explicit flags."""
    merged = dict(_CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(_load_toml(args.config))
    for key in _CONFIG_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _train_config(merged: dict) -> TrainConfig:
    return TrainConfig(
        epochs=int(merged["epochs"]),
        batch_size=int(merged["batch_size"]),
        learning_rate=float(merged["learning_rate"]),
        lambda_stft=float(merged["lambda_stft"]),
        seed=int(merged["seed"]),
        n_atoms=int(merged["n_atoms"]),
        hidden_width=int(merged["hidden_width"]),
        stft=StftConfig(
            frame_length=int(merged["frame_length"]),
            hop_length=int(merged["hop_length"]),
            window=str(merged["window"]),
        ),
        mixing_init=str(merged["mixing_init"]),
    )


def _read_matrix(data_path, max_records):
    signals = read_cifar_batch(data_path, max_records=max_records)
    return signals_to_matrix(signals), np.asarray([s.label for s in signals])


def _history_rows(history):
    return [
        [str(h.epoch), _fmt(h.loss_time), _fmt(h.loss_freq), _fmt(h.total)]
        for h in history
    ]


def cmd_train(args) -> int:
    merged = _effective_config(args)
    if not merged["data"] or not merged["out"]:
        raise ValueError("train requires --data and --out")
    cfg = _train_config(merged)
    x, _ = _read_matrix(merged["data"], merged["max_records"])
    result = train(x, cfg)
    for h in result.history:
        print(
            f"epoch {h.epoch}: loss_time={h.loss_time:.6g} "
            f"loss_freq={h.loss_freq:.6g} total={h.total:.6g}"
        )
    ckpt = Checkpoint(
        dictionary=result.dictionary,
        mixing=result.mixing,
        config=cfg,
        signal_length=result.signal_length,
    )
    save_checkpoint(merged["out"], ckpt)
    history_path = args.history or f"{merged['out']}.history.csv"
    _write_csv(
        history_path,
        ["epoch", "loss_time", "loss_freq", "total"],
        _history_rows(result.history),
    )
    print(f"wrote checkpoint {merged['out']} and history {history_path}")
    return 0


def cmd_fit_prior(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ckpt.prior = fit_gaussian(
        ckpt.mixing, shrinkage=args.shrinkage, diagonal=args.diagonal
    )
    save_checkpoint(args.checkpoint, ckpt)
    print(
        f"fitted prior over {ckpt.mixing.shape[0]} coefficient vectors "
        f"(K={ckpt.n_atoms}); checkpoint updated"
    )
    return 0


def cmd_sample(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.prior is None:
        raise MissingPriorError(
            f"{args.checkpoint} has no fitted prior; run `specdict fit-prior` first"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = make_time_grid(ckpt.signal_length)
    signals = generate(ckpt.prior, ckpt.dictionary, grid, args.seed, args.count)
    out_of_range = float(np.mean(np.abs(signals) > 1.0)) if args.count else 0.0
    for i in range(args.count):
        write_png(signals[i], out_dir / f"sample_{i:04d}.png")
    print(
        f"wrote {args.count} samples to {out_dir} "
        f"(out-of-range fraction before clamping: {out_of_range:.6f})"
    )
    return 0


def _psnr_db(mse_per_pixel: float) -> float:
    """PSNR over the [-1, 1] data range (range^2 = 4), capped at 99 dB."""
    if mse_per_pixel <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(4.0 / mse_per_pixel))


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    x, labels = _read_matrix(args.data, args.max_records)
    if x.shape[1] != ckpt.signal_length:
        raise ValueError(
            f"data signal length {x.shape[1]} does not match "
            f"checkpoint T={ckpt.signal_length}"
        )
    grid = make_time_grid(ckpt.signal_length)
    basis = synthesize_basis(ckpt.dictionary, grid)
    n_train = ckpt.mixing.shape[0]

    rows = []
    mses = []
    stft_l1s = []
    stored = np.zeros(x.shape[0], dtype=bool)
    weights = encode_ridge_batch(x, basis, args.ridge_penalty)
    if not args.ridge:
        limit = min(n_train, x.shape[0])
        weights[:limit] = ckpt.mixing[:limit]
        stored[:limit] = True
    recon = weights @ basis.T
    target_mag = batch_magnitudes(x, ckpt.config.stft)
    recon_mag = batch_magnitudes(recon, ckpt.config.stft)
    for i in range(x.shape[0]):
        mse = float(np.mean((x[i] - recon[i]) ** 2))
        l1 = float(np.abs(target_mag[i] - recon_mag[i]).sum())
        mses.append(mse)
        stft_l1s.append(l1)
        rows.append(
            [
                str(i),
                str(int(labels[i])),
                "stored" if stored[i] else "ridge",
                _fmt(mse),
                _fmt(_psnr_db(mse)),
                _fmt(l1),
            ]
        )
    mean_mse = float(np.mean(mses))
    mean_l1 = float(np.mean(stft_l1s))
    mean_psnr = float(np.mean([_psnr_db(m) for m in mses]))
    rows.append(["mean", "", "", _fmt(mean_mse), _fmt(mean_psnr), _fmt(mean_l1)])
    _write_csv(
        args.out, ["index", "label", "encoder", "mse", "psnr_db", "stft_l1"], rows
    )
    print(
        f"evaluated {x.shape[0]} images: mean_mse={mean_mse:.6g} "
        f"mean_psnr={mean_psnr:.3f} dB mean_stft_l1={mean_l1:.6g}"
    )
    return 0


def cmd_reconstruct(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    x, _ = _read_matrix(args.data, args.max_records)
    grid = make_time_grid(ckpt.signal_length)
    basis = synthesize_basis(ckpt.dictionary, grid)
    indices = _parse_indices(args.index, x.shape[0])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in indices:
        if i < ckpt.mixing.shape[0] and not args.ridge:
            w = ckpt.mixing[i]
        else:
            w = encode_ridge_batch(x[i : i + 1], basis, args.ridge_penalty)[0]
        write_png(basis @ w, out_dir / f"recon_{i:04d}.png")
    print(f"wrote {len(indices)} reconstructions to {out_dir}")
    return 0


def cmd_encode(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    x, labels = _read_matrix(args.data, args.max_records)
    grid = make_time_grid(ckpt.signal_length)
    basis = synthesize_basis(ckpt.dictionary, grid)
    weights = encode_ridge_batch(x, basis, args.ridge_penalty)
    header = ["index", "label"] + [f"w_{k}" for k in range(weights.shape[1])]
    rows = [
        [str(i), str(int(labels[i]))] + [_fmt(v) for v in weights[i]]
        for i in range(weights.shape[0])
    ]
    _write_csv(args.out, header, rows)
    print(f"encoded {weights.shape[0]} signals to {args.out}")
    return 0


def _parse_indices(spec: str, count: int) -> list[int]:
    if spec == "all":
        return list(range(count))
    idx = int(spec)
    if not 0 <= idx < count:
        raise ValueError(f"index {idx} out of range [0, {count})")
    return [idx]


def _heatmap_bytes(weights: np.ndarray, rows: int = 32) -> np.ndarray:
    lo, hi = float(weights.min()), float(weights.max())
    if hi > lo:
        scaled = np.round(255.0 * (weights - lo) / (hi - lo)).astype(np.uint8)
    else:
        scaled = np.zeros(weights.shape[0], dtype=np.uint8)
    return np.tile(scaled[None, :], (rows, 1))


def cmd_export_heatmap(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    indices = _parse_indices(args.index, ckpt.mixing.shape[0])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in indices:
        w = ckpt.mixing[i]
        Image.fromarray(_heatmap_bytes(w), mode="L").save(
            out_dir / f"heatmap_{i:04d}.png"
        )
        _write_csv(
            out_dir / f"heatmap_{i:04d}.csv",
            ["k", "weight"],
            [[str(k), _fmt(w[k])] for k in range(w.shape[0])],
        )
    print(f"wrote {len(indices)} heatmaps to {out_dir}")
    return 0


def cmd_export_atoms(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    grid = make_time_grid(ckpt.signal_length)
    basis = synthesize_basis(ckpt.dictionary, grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    d = ckpt.dictionary
    summary = []
    two_pi = 2.0 * math.pi
    for i in range(d.n_atoms):
        _write_csv(
            out_dir / f"atom_{i:04d}.csv",
            ["t", "value"],
            [[_fmt(grid[j]), _fmt(basis[j, i])] for j in range(grid.shape[0])],
        )
        if ckpt.signal_length == SIGNAL_LENGTH:
            write_png(basis[:, i], out_dir / f"atom_{i:04d}.png")
        summary.append(
            [
                str(i),
                _fmt(softplus(d.base_frequency[i])),
                _fmt(softplus(d.base_amplitude[i])),
                _fmt(d.base_phase[i] % two_pi),
            ]
        )
    _write_csv(
        out_dir / "atoms_summary.csv",
        ["atom", "frequency", "amplitude", "phase"],
        summary,
    )
    print(f"wrote {d.n_atoms} atoms to {out_dir}")
    return 0


def cmd_export_spectrogram(args) -> int:
    x, _ = _read_matrix(args.data, args.max_records)
    indices = _parse_indices(args.index, x.shape[0])
    cfg = StftConfig(
        frame_length=args.frame_length, hop_length=args.hop_length, window=args.window
    )
    mag = stft_magnitude(x[indices[0]], cfg)
    header = ["bin"] + [f"frame_{m}" for m in range(mag.shape[1])]
    rows = [
        [str(b)] + [_fmt(v) for v in mag[b]] for b in range(mag.shape[0])
    ]
    _write_csv(args.out, header, rows)
    print(f"wrote {mag.shape[0]}x{mag.shape[1]} spectrogram to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = TrainConfig(
        lambda_stft=args.lambda_stft,
        n_atoms=args.n_atoms,
        hidden_width=args.hidden_width,
        stft=StftConfig(frame_length=args.frame_length, hop_length=args.hop_length),
    )
    report = gradient_check(
        cfg,
        signal_length=args.signal_length,
        n_images=args.images,
        tolerance=args.tolerance,
        seed=args.seed if args.seed is not None else 0,
    )
    print(report)
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return 1
    print("gradient check passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specdict",
        description="Spectral dictionary learning generative model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a CIFAR-10 binary batch")
    p_train.add_argument("--config", help="TOML config file")
    p_train.add_argument("--data", help="CIFAR-10 binary batch file")
    p_train.add_argument("--out", help="output checkpoint path")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", dest="batch_size", type=int)
    p_train.add_argument("--lr", dest="learning_rate", type=float)
    p_train.add_argument("--lambda-stft", dest="lambda_stft", type=float)
    p_train.add_argument("--k", dest="n_atoms", type=int)
    p_train.add_argument("--hidden-width", dest="hidden_width", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--frame-length", dest="frame_length", type=int)
    p_train.add_argument("--hop-length", dest="hop_length", type=int)
    p_train.add_argument("--window", choices=["hann", "rectangular"])
    p_train.add_argument("--mixing-init", dest="mixing_init", choices=["zeros", "ridge"])
    p_train.add_argument("--max-records", dest="max_records", type=int)
    p_train.add_argument("--history", help="loss-history CSV path (default <out>.history.csv)")
    p_train.set_defaults(func=cmd_train)

    p_prior = sub.add_parser("fit-prior", help="fit the Gaussian prior into a checkpoint")
    p_prior.add_argument("--checkpoint", required=True)
    p_prior.add_argument("--shrinkage", type=float, default=1e-3)
    p_prior.add_argument("--diagonal", action="store_true", help="diagonal covariance")
    p_prior.set_defaults(func=cmd_fit_prior)

    p_sample = sub.add_parser("sample", help="sample new images from a fitted prior")
    p_sample.add_argument("--checkpoint", required=True)
    p_sample.add_argument("--count", type=int, default=16)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", required=True, help="output directory")
    p_sample.set_defaults(func=cmd_sample)

    p_eval = sub.add_parser("eval", help="per-image reconstruction metrics CSV")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True, help="metrics CSV path")
    p_eval.add_argument("--max-records", dest="max_records", type=int)
    p_eval.add_argument("--ridge", action="store_true", help="ridge-encode every image")
    p_eval.add_argument("--ridge-penalty", dest="ridge_penalty", type=float, default=1e-6)
    p_eval.set_defaults(func=cmd_eval)

    p_recon = sub.add_parser("reconstruct", help="write reconstruction PNGs")
    p_recon.add_argument("--checkpoint", required=True)
    p_recon.add_argument("--data", required=True)
    p_recon.add_argument("--index", default="all", help="record index or 'all'")
    p_recon.add_argument("--out", required=True, help="output directory")
    p_recon.add_argument("--max-records", dest="max_records", type=int)
    p_recon.add_argument("--ridge", action="store_true")
    p_recon.add_argument("--ridge-penalty", dest="ridge_penalty", type=float, default=1e-6)
    p_recon.set_defaults(func=cmd_reconstruct)

    p_encode = sub.add_parser("encode", help="ridge-encode signals to coefficients CSV")
    p_encode.add_argument("--checkpoint", required=True)
    p_encode.add_argument("--data", required=True)
    p_encode.add_argument("--out", required=True)
    p_encode.add_argument("--max-records", dest="max_records", type=int)
    p_encode.add_argument("--ridge-penalty", dest="ridge_penalty", type=float, default=1e-6)
    p_encode.set_defaults(func=cmd_encode)

    p_hm = sub.add_parser("export-heatmap", help="mixing-coefficient heatmaps")
    p_hm.add_argument("--checkpoint", required=True)
    p_hm.add_argument("--index", default="all", help="image index or 'all'")
    p_hm.add_argument("--out", required=True, help="output directory")
    p_hm.set_defaults(func=cmd_export_heatmap)

    p_atoms = sub.add_parser("export-atoms", help="per-atom CSV, PNG, and summary")
    p_atoms.add_argument("--checkpoint", required=True)
    p_atoms.add_argument("--out", required=True, help="output directory")
    p_atoms.set_defaults(func=cmd_export_atoms)

    p_spec = sub.add_parser("export-spectrogram", help="magnitude spectrogram CSV")
    p_spec.add_argument("--data", required=True)
    p_spec.add_argument("--index", default="0")
    p_spec.add_argument("--out", required=True)
    p_spec.add_argument("--frame-length", dest="frame_length", type=int, default=256)
    p_spec.add_argument("--hop-length", dest="hop_length", type=int, default=128)
    p_spec.add_argument("--window", choices=["hann", "rectangular"], default="hann")
    p_spec.add_argument("--max-records", dest="max_records", type=int)
    p_spec.set_defaults(func=cmd_export_spectrogram)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--k", dest="n_atoms", type=int, default=4)
    p_gc.add_argument("--hidden-width", dest="hidden_width", type=int, default=3)
    p_gc.add_argument("--images", type=int, default=2)
    p_gc.add_argument("--signal-length", dest="signal_length", type=int, default=64)
    p_gc.add_argument("--lambda-stft", dest="lambda_stft", type=float, default=0.5)
    p_gc.add_argument("--frame-length", dest="frame_length", type=int, default=16)
    p_gc.add_argument("--hop-length", dest="hop_length", type=int, default=8)
    p_gc.add_argument("--tolerance", type=float, default=1e-4)
    p_gc.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ValueError,
        OSError,
        CifarFormatError,
        CheckpointError,
        MissingPriorError,
        NotPositiveDefiniteError,
        SingularMatrixError,
        TrainingDivergedError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
