#!/usr/bin/env python3
"""
Generate Test Data - synthetic keyword corpus for smoke tests

Keyword clips carry a short rising tone burst over faint noise; negative
clips are noise with an occasional low hum. The output directory gets
WAV files, a noise pool, a delta room response, CPST posteriors for the
keyword clips, JSONL manifests and a small engine config.

Usage:
    python scripts/generate_test_data.py --out data/toy
    python scripts/generate_test_data.py --out data/toy --examples 64 --seed 3
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict

import numpy as np
import orjson

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.models.alignment import CharPosteriorMatrix
from app.models.audio import AudioClip
from app.models.training import ManifestRecord
from app.repositories.manifest_repository import ManifestRepository
from app.repositories.posterior_repository import save_posteriors
from app.repositories.wav_repository import write_wav

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
CLIP_S = 1.5
BURST_S = 0.4
KEYWORD = "hey"

# Tiny network so a few hundred steps run in seconds
TOY_CONFIG = {
    "model": {
        "n_conv_filters": 4,
        "kernel_time": 20,
        "kernel_freq": 5,
        "stride_time": 8,
        "stride_freq": 2,
        "n_rec_layers": 1,
        "rec_hidden": 8,
        "cell_kind": "GRU",
        "fc_units": 16,
    },
    "train": {"batch_size": 8, "lr_initial": 0.005, "lr_final": 0.001, "max_epochs": 2},
    "augment": {"snr_db_range": [5.0, 15.0], "jitter_max_ms": 50.0},
    "stream": {"hop_s": 0.25, "refractory_s": 1.0},
}


def tone_burst(rng: np.random.Generator, n: int) -> np.ndarray:
    """Rising tone with a Hann envelope"""
    t = np.arange(n) / SAMPLE_RATE
    f0 = rng.uniform(900.0, 1100.0)
    phase = 2 * np.pi * (f0 * t + 1500.0 * t ** 2)
    return 0.5 * np.sin(phase) * np.hanning(n)


def keyword_clip(rng: np.random.Generator, duration_s: float = CLIP_S):
    """Clip with one burst; returns (samples, (begin_s, end_s))"""
    n = int(duration_s * SAMPLE_RATE)
    burst = int(BURST_S * SAMPLE_RATE)
    start = int(rng.integers(int(0.2 * SAMPLE_RATE), n - burst - int(0.2 * SAMPLE_RATE)))
    samples = rng.normal(0.0, 0.01, n)
    samples[start:start + burst] += tone_burst(rng, burst)
    return samples, (start / SAMPLE_RATE, (start + burst) / SAMPLE_RATE)


def background_clip(rng: np.random.Generator, duration_s: float = CLIP_S) -> np.ndarray:
    n = int(duration_s * SAMPLE_RATE)
    samples = rng.normal(0.0, 0.05, n)
    if rng.random() < 0.5:
        t = np.arange(n) / SAMPLE_RATE
        samples += 0.1 * np.sin(2 * np.pi * rng.uniform(80.0, 200.0) * t)
    return samples


def keyword_posteriors(span, duration_s: float, frame_rate: float = 100.0) -> CharPosteriorMatrix:
    """Character occupancy bumps spread over the keyword span"""
    n_frames = int(duration_s * frame_rate)
    frames = np.arange(n_frames)
    begin, end = span[0] * frame_rate, span[1] * frame_rate
    width = (end - begin) / len(KEYWORD)
    rows = []
    for k in range(len(KEYWORD)):
        center = begin + (k + 0.5) * width
        rows.append(np.exp(-0.5 * ((frames - center) / (0.35 * width)) ** 2) + 1e-3)
    return CharPosteriorMatrix(KEYWORD, np.vstack(rows), frame_rate)


def generate_dataset(out_dir: str, n_examples: int = 32, seed: int = 0, eval_s: float = 20.0) -> Dict[str, str]:
    """
    Write the synthetic corpus under ``out_dir``

    Args:
        out_dir: Target directory (created)
        n_examples: Training examples, half keyword and half background
        seed: Generator seed
        eval_s: Length of the long evaluation recording

    Returns:
        Paths of the written manifests and config
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    audio_dir = out / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for i in range(n_examples):
        split = "dev" if i % 8 == 7 else "train"
        if i % 2 == 0:
            samples, span = keyword_clip(rng)
            name = f"kw_{i:03d}.wav"
            write_wav(str(audio_dir / name), AudioClip(samples, SAMPLE_RATE))
            save_posteriors(str(audio_dir / f"kw_{i:03d}.cpst"), keyword_posteriors(span, CLIP_S))
            records.append(ManifestRecord(path=f"audio/{name}", label="positive", split=split,
                                          span_s=(round(span[0], 4), round(span[1], 4))))
        else:
            name = f"bg_{i:03d}.wav"
            write_wav(str(audio_dir / name), AudioClip(background_clip(rng), SAMPLE_RATE))
            records.append(ManifestRecord(path=f"audio/{name}", label="negative", split=split))

    for j in range(3):
        name = f"noise_{j}.wav"
        write_wav(str(audio_dir / name), AudioClip(rng.normal(0.0, 0.2, 3 * SAMPLE_RATE), SAMPLE_RATE))
        records.append(ManifestRecord(path=f"audio/{name}", kind="noise"))

    delta = np.zeros(64)
    delta[0] = 0.9
    write_wav(str(audio_dir / "rir_delta.wav"), AudioClip(delta, SAMPLE_RATE))
    records.append(ManifestRecord(path="audio/rir_delta.wav", kind="rir", extra={'descriptor': 'delta'}))

    train_manifest = str(out / "train.jsonl")
    ManifestRepository(train_manifest).save(records)

    # Long recording with keywords every few seconds
    n = int(eval_s * SAMPLE_RATE)
    long_samples = rng.normal(0.0, 0.02, n)
    spans = []
    burst = int(BURST_S * SAMPLE_RATE)
    for start_s in np.arange(2.0, eval_s - 2.0, 5.0):
        start = int(start_s * SAMPLE_RATE)
        long_samples[start:start + burst] += tone_burst(rng, burst)
        spans.append((float(start_s), round(float(start_s) + BURST_S, 4)))
    write_wav(str(audio_dir / "eval_long.wav"), AudioClip(long_samples, SAMPLE_RATE))

    negative_long = str(audio_dir / "eval_background.wav")
    write_wav(negative_long, AudioClip(background_clip(rng, eval_s / 2), SAMPLE_RATE))

    eval_manifest = str(out / "eval.jsonl")
    ManifestRepository(eval_manifest).save([
        ManifestRecord(path="audio/eval_long.wav", split="test", spans_s=spans),
        ManifestRecord(path="audio/eval_background.wav", split="test", spans_s=[]),
    ])

    mine_manifest = str(out / "mine.jsonl")
    ManifestRepository(mine_manifest).save([
        ManifestRecord(path="audio/eval_background.wav", label="negative"),
    ])

    config_path = str(out / "config.json")
    with open(config_path, 'wb') as handle:
        handle.write(orjson.dumps(TOY_CONFIG, option=orjson.OPT_INDENT_2))

    logger.info(f"Wrote {n_examples} examples and {len(spans)} evaluation keywords to {out}")
    return {
        'train_manifest': train_manifest,
        'eval_manifest': eval_manifest,
        'mine_manifest': mine_manifest,
        'config': config_path,
        'audio_dir': str(audio_dir),
    }


def main():
    parser = argparse.ArgumentParser(description='Generate a synthetic keyword corpus')
    parser.add_argument('--out', type=str, default=os.path.join('data', 'toy'), help='Output directory')
    parser.add_argument('--examples', type=int, default=32, help='Number of training examples')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--eval-seconds', type=float, default=20.0)
    args = parser.parse_args()

    paths = generate_dataset(args.out, args.examples, args.seed, args.eval_seconds)
    for key, value in paths.items():
        print(f"{key}: {value}")


if __name__ == '__main__':
    main()
