"""``asd synth|train|score|eval --config FILE [--key value ...]``.

Exit codes: 0 success, 1 contract violation or diverged training,
2 I/O failure. Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import RunConfig, load_run_config
from .data import generate_synthetic, load_split, read_labels, save_split
from .errors import ContractError, DataIOError, TrainingError

log = logging.getLogger("asd")


def _atomic_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _manifest(name, samples) -> str:
    fracs = [float(np.mean(s.labels != 0)) for s in samples]
    pixels = int(sum(int(np.sum(s.labels != 0)) for s in samples))
    lo = min(fracs) if fracs else 0.0
    hi = max(fracs) if fracs else 0.0
    return (
        f"{name}.images = {len(samples)}\n"
        f"{name}.anomaly_pixels = {pixels}\n"
        f"{name}.anomaly_fraction_min = {lo:.6f}\n"
        f"{name}.anomaly_fraction_max = {hi:.6f}\n"
    )


def cmd_synth(cfg: RunConfig) -> Path:
    root = cfg.path("synth_dir")
    train, test = generate_synthetic(cfg.synthetic_spec())
    save_split(root / "train", train)
    save_split(root / "test", test)
    text = _manifest("train", train) + _manifest("test", test)
    _atomic_text(root / "manifest.txt", text)
    sys.stdout.write(text)
    return root


def cmd_train(cfg: RunConfig) -> Path:
    from .training import format_history_line, train

    data = load_split(cfg.path("train_dir"))
    out = cfg.path("checkpoint")
    log_path = out.with_suffix(".log")
    lines = []

    def on_epoch(entry):
        lines.append(format_history_line(entry))

    result = train(data, cfg.train_config(), normal_class=cfg.normal_class, on_epoch=on_epoch)
    result.save(out)
    _atomic_text(log_path, "\n".join(lines) + "\n")
    sys.stdout.write(f"checkpoint = {out}\nlog = {log_path}\n")
    return out


def _image_names(root: Path) -> tuple[Path, list[str]]:
    img_dir = root / "images" if (root / "images").is_dir() else root
    if not img_dir.is_dir():
        raise DataIOError(f"image directory not found: {root}")
    names = sorted(p.stem for p in img_dir.glob("*.png"))
    if not names:
        raise DataIOError(f"no PNG images in {img_dir}")
    return img_dir, names


def cmd_score(cfg: RunConfig) -> Path:
    from .data import read_image
    from .scoring import score_image, write_map

    model = ckpt_io.load(cfg.path("checkpoint"))
    img_dir, names = _image_names(cfg.path("test_dir"))
    out = cfg.path("maps_dir")
    for name in names:
        amap = score_image(read_image(img_dir / f"{name}.png"), model)
        write_map(out, name, amap)
    sys.stdout.write(f"maps = {out}\ncount = {len(names)}\n")
    return out


def cmd_eval(cfg: RunConfig) -> Path:
    from .evaluation import evaluate
    from .scoring import read_sidecar

    maps_dir = cfg.path("maps_dir")
    lab_dir = cfg.path("test_dir") / "labels"
    maps = {p.stem for p in maps_dir.glob("*.asdm")}
    labels = {p.stem for p in lab_dir.glob("*.png")}
    if not maps:
        raise DataIOError(f"no anomaly maps in {maps_dir}")
    if maps != labels:
        raise DataIOError(f"maps and labels do not pair up: {sorted(maps ^ labels)[:5]}")
    degrees, truth = [], []
    for name in sorted(maps):
        deg = read_sidecar(maps_dir / f"{name}.asdm")
        lab = read_labels(lab_dir / f"{name}.png")
        if deg.shape != lab.shape:
            raise ContractError(f"{name}: map {deg.shape} vs labels {lab.shape}")
        degrees.append(deg)
        truth.append((lab != cfg.normal_class).astype(np.int64))
    report = evaluate(degrees, truth)
    out = cfg.path("report")
    # Echo the config the maps were trained with, when that model is at hand.
    ck_path = cfg.path("checkpoint")
    echo = ckpt_io.load(ck_path).config.echo() if ck_path.is_file() else cfg.train_config().echo()
    _atomic_text(out, report.to_text(echo))
    sys.stdout.write(f"auc = {report.auc:.6f}\nmiou = {report.miou:.6f}\nreport = {out}\n")
    return out


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "score": cmd_score, "eval": cmd_eval}


def _overrides(extra: list[str]) -> dict:
    out, k = {}, 0
    while k < len(extra):
        arg = extra[k]
        if not arg.startswith("--"):
            raise ContractError(f"unexpected argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            k += 1
        else:
            if k + 1 >= len(extra):
                raise ContractError(f"missing value for --{key}")
            val = extra[k + 1]
            k += 2
        out[key.replace("-", "_")] = val
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="asd", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_run_config(args.config, _overrides(extra))
        if cfg.threads > 0:
            import torch

            torch.set_num_threads(cfg.threads)
        COMMANDS[args.command](cfg)
    except (ContractError, TrainingError) as exc:
        print(f"asd {args.command}: {exc}", file=sys.stderr)
        return 1
    except (DataIOError, OSError) as exc:
        print(f"asd {args.command}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print(f"asd {args.command}: interrupted", file=sys.stderr)
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
