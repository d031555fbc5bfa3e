"""Command-line entry point.

Subcommands: generate, extract, train-classic, train-lstm, topomap, psd.
Exit status is 0 on success, 2 for invalid input or configuration and 1 for
unexpected failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classic import cross_validate, knn_classifier, scaler_apply, svm_classifier
from .core import ELECTRODES, LstmConfig, PipelineConfig, load_config
from .errors import EEGError, ValidationError
from .features import FeatureMatrix, meta_vectors, region_stats
from .ingest import SyntheticSpec, generate_synthetic, read_ratings, read_tensor, write_ratings, write_tensor
from .labeling import LabelSet, make_labels
from .spectral import welch_psd
from .topomap import topomap

log = logging.getLogger("eegemotion")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, config: PipelineConfig, outputs: list[Path], **extra) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": config.rng_seed,
        "config_digest": config.digest(),
        "outputs": {p.name: sha256_file(p) for p in outputs},
        **extra,
    }
    (out / f"manifest_{command}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def cmd_generate(args, config: PipelineConfig, out: Path) -> dict:
    spec = SyntheticSpec(noise_sigma=args.noise, valence_gain=args.gain, arousal_gain=args.gain,
                         rng_seed=config.rng_seed)
    tensor, ratings = generate_synthetic(spec, args.n_trials, args.n_channels, args.n_samples,
                                         config.sample_rate_hz, args.subject)
    tensor_path = out / f"subject{args.subject:02d}.eegt"
    ratings_path = out / "ratings.csv"
    write_tensor(tensor, tensor_path)
    write_ratings(ratings, ratings_path)
    return write_manifest(out, "generate", config, [tensor_path, ratings_path],
                          shape=list(tensor.data.shape), sample_rate_hz=tensor.sample_rate_hz)


def cmd_extract(args, config: PipelineConfig, out: Path) -> dict:
    tensor = read_tensor(args.tensor)
    ratings = read_ratings(args.ratings)
    if len(ratings) != tensor.n_trials:
        raise ValidationError(f"{len(ratings)} ratings for {tensor.n_trials} trials")
    features = meta_vectors(tensor, config) if args.mode == "meta" else region_stats(tensor, config)
    labels = make_labels(ratings)
    feat_path = out / f"features_{args.mode}.csv"
    label_path = out / "labels.csv"
    features.to_csv(feat_path)
    labels.to_csv(label_path)
    return write_manifest(out, "extract", config, [feat_path, label_path],
                          mode=args.mode, rows=features.shape[0], columns=features.shape[1])


def _row_targets(features: FeatureMatrix, labels: LabelSet, target: str) -> np.ndarray:
    per_trial = labels.target(target)
    trials = features.trials
    if trials.max() >= len(per_trial):
        raise ValidationError(f"features reference trial {trials.max()} but only {len(per_trial)} labels")
    return per_trial[trials]


def cmd_train_classic(args, config: PipelineConfig, out: Path) -> dict:
    features = FeatureMatrix.from_csv(args.features)
    labels = LabelSet.from_csv(args.labels)
    y = _row_targets(features, labels, args.target)
    if args.algo == "knn":
        clf = knn_classifier(config.knn_k)
    else:
        clf = svm_classifier(config.svm_c, config.svm_epochs, config.rng_seed)
    report = cross_validate(features.values, y, clf, config.cv_folds, config.rng_seed)
    path = out / f"metrics_{args.algo}_{args.target}.json"
    report.to_json(path)
    return write_manifest(out, "train-classic", config, [path], algo=args.algo, target=args.target,
                          accuracy=report.accuracy)


def cmd_train_lstm(args, config: PipelineConfig, out: Path) -> dict:
    from .neural import predict, train

    features = FeatureMatrix.from_csv(args.features)
    labels = LabelSet.from_csv(args.labels)
    lstm = config.lstm
    if args.full_size:
        lstm = LstmConfig.full_size(seq_len=lstm.seq_len, batch_size=lstm.batch_size, split=lstm.split)
    if args.epochs is not None:
        lstm = dataclasses.replace(lstm, epochs=args.epochs)
    result = train(features, labels, lstm, config.rng_seed, out, args.resume)
    result.report.write(out)

    seqs = result.sequences
    flat = seqs.X.reshape(-1, seqs.X.shape[2])
    pred = predict(result.model, scaler_apply(result.scaler, flat).reshape(seqs.X.shape))
    split = np.full(len(pred), "val", dtype=object)
    split[result.train_idx] = "train"
    pred_path = out / "predictions.csv"
    with open(pred_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sequence", "subject", "trial", "start_window", "split",
                    "valence_positive", "arousal_positive", "pred_valence", "pred_arousal"])
        for i in range(len(pred)):
            w.writerow([i, *seqs.trial[i].tolist(), int(seqs.start_window[i]), split[i],
                        int(seqs.Y[i, 0]), int(seqs.Y[i, 1]), repr(float(pred[i, 0])), repr(float(pred[i, 1]))])
    outputs = [out / "train_report.jsonl", out / "train_summary.json", pred_path]
    outputs += [out / name for name in result.report.checkpoints]
    final = result.report.epochs[-1] if result.report.epochs else {}
    return write_manifest(out, "train-lstm", config, outputs, final=final)


def cmd_topomap(args, config: PipelineConfig, out: Path) -> dict:
    tensor = read_tensor(args.tensor)
    tm = topomap(tensor, args.trial, args.t_start, args.t_end, args.band, segment_len=config.welch_segment_len)
    stem = f"topomap_trial{args.trial}_{tm.band.lower()}"
    csv_path, svg_path = out / f"{stem}.csv", out / f"{stem}.svg"
    tm.to_csv(csv_path)
    tm.to_svg(svg_path)
    return write_manifest(out, "topomap", config, [csv_path, svg_path], sample_span=list(tm.sample_span))


def _channel_indices(spec: str | None, n_channels: int) -> list[int]:
    if not spec:
        return list(range(n_channels))
    out = []
    for token in spec.split(","):
        token = token.strip()
        idx = int(token) if token.isdigit() else (ELECTRODES.index(token) if token in ELECTRODES else -1)
        if not 0 <= idx < n_channels:
            raise ValidationError(f"unknown channel {token!r}")
        out.append(idx)
    return out


def cmd_psd(args, config: PipelineConfig, out: Path) -> dict:
    tensor = read_tensor(args.tensor)
    if not 0 <= args.trial < tensor.n_trials:
        raise ValidationError(f"trial {args.trial} not in [0, {tensor.n_trials})")
    chans = _channel_indices(args.channels, tensor.n_channels)
    psd = welch_psd(tensor.data[args.trial, chans], tensor.sample_rate_hz,
                    config.welch_segment_len, config.welch_overlap)
    fmax = psd.fs / 2 if args.fmax is None else args.fmax
    keep = (psd.freqs_hz >= args.fmin) & (psd.freqs_hz <= fmax)
    names = [tensor.channel_layout.names[c] for c in chans]
    path = out / f"psd_trial{args.trial}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq", *names])
        for k in np.flatnonzero(keep):
            w.writerow([repr(float(psd.freqs_hz[k])), *(repr(float(v)) for v in psd.power[:, k])])
    return write_manifest(out, "psd", config, [path])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--seed", type=int, help="overrides rng_seed")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eegemotion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic subject")
    p.add_argument("--n-trials", type=int, default=40)
    p.add_argument("--n-channels", type=int, default=32)
    p.add_argument("--n-samples", type=int, default=8064)
    p.add_argument("--subject", type=int, default=1)
    p.add_argument("--noise", type=float, default=2.0, help="noise sigma (µV)")
    p.add_argument("--gain", type=float, default=2.5, help="amplitude gain of planted label bands")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("extract", parents=[common], help="feature and label CSVs")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--ratings", type=Path, required=True)
    p.add_argument("--mode", choices=("meta", "regions"), default="meta")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-classic", parents=[common], help="cross-validated KNN / linear SVM")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--target", choices=("valence", "arousal", "quadrant"), default="valence")
    p.add_argument("--algo", choices=("svm", "knn"), default="knn")
    p.set_defaults(func=cmd_train_classic)

    p = sub.add_parser("train-lstm", parents=[common], help="train the stacked LSTM")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--resume", type=Path, help="checkpoint to continue from")
    p.add_argument("--full-size", action="store_true", help="hidden sizes 512/256/128/64/10")
    p.set_defaults(func=cmd_train_lstm)

    p = sub.add_parser("topomap", parents=[common], help="band-power scalp map (CSV + SVG)")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--t-start", type=float, default=0.153)
    p.add_argument("--t-end", type=float, default=0.273)
    p.add_argument("--band", default="Alpha", help="Theta, Alpha, Beta or Gamma")
    p.set_defaults(func=cmd_topomap)

    p = sub.add_parser("psd", parents=[common], help="Welch PSD per channel as CSV")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--channels", help="comma-separated names or indices (default: all)")
    p.add_argument("--fmin", type=float, default=0.0)
    p.add_argument("--fmax", type=float)
    p.set_defaults(func=cmd_psd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"rng_seed": args.seed} if args.seed is not None else {}
        config = load_config(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        args.func(args, config, args.out)
    except (EEGError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal error")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
