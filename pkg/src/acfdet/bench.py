"""Detection throughput and cascade-behavior benchmarking, including the
compiled-vs-python kernel backend comparison."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backend import available_backends, get_backend
from .detector import MultiViewModel, scan_level, scan_to_detections
from .pyramid import PyramidConfig, build_pyramid


@dataclass
class BenchRow:
    backend: str
    threads: int
    elapsed: float
    images: int
    windows: int
    trees_evaluated: int
    rejected_windows: int
    trees_on_rejected: int
    stage_histogram: np.ndarray  # rejected-window counts per stage decile

    @property
    def images_per_sec(self) -> float:
        return self.images / self.elapsed if self.elapsed > 0 else float("inf")

    @property
    def windows_per_sec(self) -> float:
        return self.windows / self.elapsed if self.elapsed > 0 else float("inf")

    @property
    def mean_trees_per_window(self) -> float:
        return self.trees_evaluated / self.windows if self.windows else 0.0

    @property
    def mean_trees_per_rejected(self) -> float:
        return self.trees_on_rejected / self.rejected_windows if self.rejected_windows else 0.0


def bench_images(
    model: MultiViewModel,
    images: list[np.ndarray],
    pyramid_config: PyramidConfig | None = None,
    threads: tuple[int, ...] = (1,),
    backends: tuple[str, ...] | None = None,
    stride: int = 1,
    early_exit: bool = True,
) -> list[BenchRow]:
    """Scan every image with every view's cascade, per backend and thread
    count.  All counts are deterministic; only timings vary."""
    pyramid_config = pyramid_config or PyramidConfig(min_window=model.window_size)
    backends = backends or available_backends()
    views = model.resolved_views()
    rows = []
    for backend_name in backends:
        kern = get_backend(backend_name)

        def run_one(image):
            pyr = build_pyramid(image, model.channel_config, pyramid_config, model.window_size)
            windows = trees = rejected = trees_rej = 0
            hist = np.zeros(10, dtype=np.int64)
            n_det = 0
            for view in views:
                T = view.num_trees
                for level in pyr:
                    scan = scan_level(level, view, stride, early_exit, kern)
                    windows += scan.scores.size
                    trees += int(scan.trees_evaluated.sum())
                    rej = scan.passed == 0
                    rejected += int(rej.sum())
                    trees_rej += int(scan.trees_evaluated[rej].sum())
                    if rej.any():
                        decile = np.minimum((scan.trees_evaluated[rej] - 1) * 10 // T, 9)
                        hist += np.bincount(decile, minlength=10)
                    n_det += len(scan_to_detections(scan, view))
            return windows, trees, rejected, trees_rej, hist, n_det

        for n_threads in threads:
            t0 = time.perf_counter()
            if n_threads == 1:
                results = [run_one(img) for img in images]
            else:
                with ThreadPoolExecutor(max_workers=n_threads) as pool:
                    results = list(pool.map(run_one, images))
            elapsed = time.perf_counter() - t0
            rows.append(
                BenchRow(
                    backend=backend_name,
                    threads=n_threads,
                    elapsed=elapsed,
                    images=len(images),
                    windows=sum(r[0] for r in results),
                    trees_evaluated=sum(r[1] for r in results),
                    rejected_windows=sum(r[2] for r in results),
                    trees_on_rejected=sum(r[3] for r in results),
                    stage_histogram=np.sum([r[4] for r in results], axis=0),
                )
            )
    return rows


def format_report(rows: list[BenchRow], num_trees: int) -> str:
    lines = [
        "backend   threads  images/s  windows/s     trees/window  trees/rejected",
    ]
    for r in rows:
        lines.append(
            f"{r.backend:<9} {r.threads:>7} {r.images_per_sec:>9.2f} {r.windows_per_sec:>10.0f}"
            f" {r.mean_trees_per_window:>13.2f} {r.mean_trees_per_rejected:>15.2f}"
        )
    r = rows[0]
    lines.append("")
    lines.append(f"windows scanned:   {r.windows}")
    lines.append(f"rejected windows:  {r.rejected_windows}")
    lines.append(f"cascade depth:     {num_trees} weak classifiers")
    lines.append("rejection-stage histogram (decile of cascade depth -> rejected windows):")
    for i, count in enumerate(r.stage_histogram):
        lines.append(f"  {i * 10:>3}-{i * 10 + 10}%: {count}")
    return "\n".join(lines)
