"""Runtime scaling of tube extraction and of the whole pipeline.

Part 1 times the longest-path sweep on chains of 10^3..10^5 detections and
fits time = a * n + b.  Part 2 runs the full pipeline on the translating
scene at increasing frame counts.

    python scripts/runtime_scaling.py [--skip-pipeline]
"""

import argparse
import time
import timeit

import numpy as np

from tubeseg.config import PipelineConfig
from tubeseg.core import BoundingBox, Detection
from tubeseg.pipeline import VideoInputs, run_pipeline
from tubeseg.synth import synthesize_scene, translating_object_scene
from tubeseg.tubes import LinkGraph, longest_path


def chain(n: int) -> LinkGraph:
    dets = [Detection(t, BoundingBox(0, 0, 4, 4), 0.5, "car") for t in range(n)]
    succ = [[(t + 1, 0.75)] if t + 1 < n else [] for t in range(n)]
    return LinkGraph(dets, [0.5] * n, succ)


def longest_path_scaling() -> None:
    sizes = np.unique(np.logspace(3, 5, 9).astype(int))
    times = []
    print(f"{'nodes':>8} {'seconds':>10}")
    for n in sizes:
        g = chain(int(n))
        # timeit pauses the garbage collector while timing
        t = min(timeit.repeat(lambda: longest_path(g), number=1, repeat=5))
        times.append(t)
        print(f"{n:>8} {t:>10.4f}")
    a, b = np.polyfit(sizes, times, 1)
    pred = a * sizes + b
    r2 = 1 - np.sum((times - pred) ** 2) / np.sum((times - np.mean(times)) ** 2)
    print(f"fit: {a * 1e6:.3f} us/node, R^2 = {r2:.4f}\n")


def pipeline_scaling(frame_counts=(4, 8, 16)) -> None:
    cfg = PipelineConfig(single_thread=True)
    prev = None
    print(f"{'frames':>8} {'seconds':>10} {'ratio':>7}")
    for n in frame_counts:
        inputs = VideoInputs.from_scene(synthesize_scene(translating_object_scene(frames=n)))
        best = float("inf")
        for _ in range(2):
            t0 = time.perf_counter()
            run_pipeline(inputs, cfg)
            best = min(best, time.perf_counter() - t0)
        ratio = f"{best / prev:.2f}" if prev else "-"
        print(f"{n:>8} {best:>10.2f} {ratio:>7}")
        prev = best


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--skip-pipeline", action="store_true")
    args = p.parse_args()
    longest_path_scaling()
    if not args.skip_pipeline:
        pipeline_scaling()


if __name__ == "__main__":
    main()
