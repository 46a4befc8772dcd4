#!/usr/bin/env python3
"""
Streaming benchmark - per-window latency and real-time factor

Usage:
    python scripts/benchmark_complete.py
    python scripts/benchmark_complete.py --seconds 120 --cell LSTM
"""
import argparse
import os
import sys
import time

import numpy as np
from colorama import Fore, Style, init

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.audio import AudioClip, FeatureConfig
from app.models.evaluation import StreamConfig
from app.models.network import Checkpoint, ModelConfig
from app.services.frontend_service import featurize
from app.services.network_service import KeywordScorer, init_weights
from app.services.profiler_service import flops_estimate, param_count
from app.services.streaming_service import stream_scores
from app.utils.profiling import get_profiler

init()


def colored_print(text, color=Fore.WHITE):
    print(f"{color}{text}{Style.RESET_ALL}")


def print_latency(title: str, stats: dict):
    colored_print(f"\n{title}", Fore.GREEN)
    for key in ("mean_ms", "median_ms", "p95_ms", "max_ms"):
        print(f"   {key[:-3].capitalize()}: {stats.get(key, float('nan')):.2f}ms")


def build_scorer(cell_kind: str, seed: int) -> KeywordScorer:
    feature_cfg = FeatureConfig()
    stream_cfg = StreamConfig()
    frames = feature_cfg.frames_for(stream_cfg.window_samples(feature_cfg.sample_rate))
    cfg = ModelConfig(cell_kind=cell_kind).with_input(feature_cfg.n_mels, frames)
    weights = init_weights(cfg, np.random.default_rng(seed))
    return KeywordScorer(Checkpoint(cfg, weights, feature_cfg))


def benchmark_windows(scorer: KeywordScorer, repeats: int, seed: int, operation: str = "single_window"):
    """Time single-window featurize + score calls into the global profiler"""
    rng = np.random.default_rng(seed)
    fc = scorer.feature_cfg
    n = StreamConfig().window_samples(fc.sample_rate)
    profiler = get_profiler()
    for _ in range(repeats):
        clip = AudioClip(rng.normal(0, 0.1, n), fc.sample_rate)
        with profiler.timed(operation):
            scorer.score(featurize(clip, fc))


def benchmark_stream(scorer: KeywordScorer, seconds: float, seed: int) -> float:
    """Real-time factor of scoring a noise recording"""
    rng = np.random.default_rng(seed)
    fc = scorer.feature_cfg
    clip = AudioClip(rng.normal(0, 0.1, int(seconds * fc.sample_rate)), fc.sample_rate)
    start = time.perf_counter()
    track = stream_scores(clip, scorer, StreamConfig())
    elapsed = time.perf_counter() - start
    colored_print(f"   Windows scored: {len(track)}", Fore.WHITE)
    return elapsed / seconds


def main():
    parser = argparse.ArgumentParser(description="Benchmark streaming keyword scoring")
    parser.add_argument('--cell', default='GRU', choices=['GRU', 'LSTM'])
    parser.add_argument('--seconds', type=float, default=60.0, help='Stream length')
    parser.add_argument('--repeats', type=int, default=50, help='Single-window calls')
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()

    scorer = build_scorer(args.cell, args.seed)
    cfg = scorer.config
    macs, flops = flops_estimate(cfg)

    colored_print(f"\n{'=' * 60}", Fore.CYAN)
    colored_print(f"Benchmarking {args.cell} model", Fore.CYAN)
    colored_print(f"   Parameters: {param_count(cfg):,}", Fore.CYAN)
    colored_print(f"   MACs per window: {macs:,} ({flops:,} FLOPs)", Fore.CYAN)
    colored_print(f"{'=' * 60}", Fore.CYAN)

    colored_print("Warming up...", Fore.YELLOW)
    benchmark_windows(scorer, 3, args.seed, operation="warmup")

    benchmark_windows(scorer, args.repeats, args.seed)
    print_latency("Single window latency:", get_profiler().get_stats("single_window"))

    colored_print(f"\nStreaming {args.seconds:.0f}s of audio...", Fore.YELLOW)
    rtf = benchmark_stream(scorer, args.seconds, args.seed)
    color = Fore.GREEN if rtf < 1.0 else Fore.RED
    colored_print(f"   Real-time factor: {rtf:.3f}", color)
    print_latency("Streaming latency per window:", get_profiler().get_stats("stream_window"))

    stats = get_profiler().generate_report()["system"]
    print(f"\n   CPU: {stats.get('cpu_percent')}%  RSS: {stats.get('process_rss_mb')} MB")
    return 0


if __name__ == '__main__':
    sys.exit(main())
