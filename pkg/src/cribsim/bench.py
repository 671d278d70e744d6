"""Benchmark the hot kernels and the end-to-end step loop, comparing the
compiled backend with the pure-python fallback.

Run as `cribsim bench` or `python -m cribsim.bench`.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .kernels import _core_py

try:
    from .kernels import _core_c
except ImportError:
    _core_c = None


def _demo_scene_arrays(n_entities: int = 24, rng_seed: int = 1):
    rng = np.random.default_rng(rng_seed)
    kinds = rng.integers(0, 3, n_entities).astype(np.int32)
    params = np.zeros((n_entities, 4))
    params[:, 0] = rng.uniform(0.05, 0.25, n_entities)
    params[:, 1] = rng.uniform(0.05, 0.25, n_entities)
    params[:, 2] = rng.uniform(0.05, 0.25, n_entities)
    pos = rng.uniform(-1.5, 1.5, (n_entities, 3))
    pos[:, 2] += 2.0
    rot = np.tile(np.eye(3), (n_entities, 1, 1))
    return kinds, params, np.ascontiguousarray(pos), np.ascontiguousarray(rot)


def bench_raycast(backend, n_rays: int = 4096, repeats: int = 50) -> float:
    kinds, params, pos, rot = _demo_scene_arrays()
    rng = np.random.default_rng(7)
    dirs = rng.normal(size=(n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    dirs[:, 2] = np.abs(dirs[:, 2])
    origins = np.zeros((n_rays, 3))
    hit_idx = np.empty(n_rays, dtype=np.int32)
    hit_dist = np.empty(n_rays)
    hit_normal = np.empty((n_rays, 3))
    t0 = time.perf_counter()
    for _ in range(repeats):
        backend.raycast_batch(np.ascontiguousarray(origins),
                              np.ascontiguousarray(dirs), 100.0, kinds, params,
                              pos, rot, hit_idx, hit_dist, hit_normal)
    dt = (time.perf_counter() - t0) / repeats
    return n_rays / dt


def bench_step_loop(steps: int = 500, render: bool = True) -> float:
    from .curriculum import Stage
    from .env import Environment
    from .scenario import Lexicon
    from .sceneconfig import SceneConfig
    from .stimuli import vexp_entities

    cfg = SceneConfig(seed=3, render=render, entities=vexp_entities())
    cfg.gestation_offset_s = cfg.schedule.stage_span(Stage.CRAWLING)[0]
    env = Environment(cfg, scripts={}, lexicon=Lexicon({}))
    action = np.zeros(53)
    env.step(action)  # warm up
    t0 = time.perf_counter()
    for _ in range(steps):
        env.step(action)
    return steps / (time.perf_counter() - t0)


def run_benchmarks(steps: int = 500) -> dict:
    results = {}
    print(f"active kernel backend: {kernels.BACKEND}")
    print()
    print("raycast_batch (4096 rays x 24 entities):")
    rps_py = bench_raycast(_core_py, repeats=10)
    results["raycast_python_rays_per_s"] = rps_py
    print(f"  python   {rps_py / 1e6:8.2f} M rays/s")
    if _core_c is not None:
        rps_c = bench_raycast(_core_c)
        results["raycast_compiled_rays_per_s"] = rps_c
        print(f"  compiled {rps_c / 1e6:8.2f} M rays/s  "
              f"({rps_c / rps_py:.1f}x python)")
    else:
        print("  compiled backend not built")
    print()
    print(f"end-to-end step loop ({steps} steps, active backend):")
    sps_r = bench_step_loop(steps, render=True)
    sps_n = bench_step_loop(steps, render=False)
    results["steps_per_s_render"] = sps_r
    results["steps_per_s_novision"] = sps_n
    print(f"  full rendering   {sps_r:8.1f} steps/s")
    print(f"  vision disabled  {sps_n:8.1f} steps/s")
    return results


if __name__ == "__main__":
    run_benchmarks()
