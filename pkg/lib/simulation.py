"""Simulation protocols for the learners.

Each trial draws a random binary tree and Dirichlet stage parameters, samples a
training set and a small hold-out set, learns a tree from the training set and
records the metrics. Trials run on a worker pool; rows come back in trial order.

Usage:
    frame = run_trials(p=6, merge_prob=0.4, n=10_000, trials=10, seed=0)
    write_metrics(frame, Path("metrics.csv"))
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import config
from .estimation import mle, random_parameters
from .file_lock import write_text
from .learning import (
    bhc_cs,
    bhc_s,
    predictive_accuracy,
    random_cstree,
    random_staged_tree,
    sample,
    sample_rows,
    shd,
)

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["trial", "n", "stages_true", "shd", "accuracy", "runtime_ms", "learner", "merge_prob"]

LEARNERS = {"bhc-cs": bhc_cs, "bhc-s": bhc_s}


def _trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def _run_one(trial: int, seq, p: int, merge_prob: float, n: int, valid: int,
             model: str, learners: tuple[str, ...]) -> list[dict]:
    rng = np.random.default_rng(seq)
    true_tree = random_cstree(p, merge_prob, rng) if model == "cstree" else random_staged_tree(p, merge_prob, rng)
    params = random_parameters(true_tree, rng)
    train = sample(true_tree, params, n, rng)
    holdout = sample_rows(true_tree, params, valid, rng)
    rows = []
    for name in learners:
        start = time.perf_counter()
        learned = LEARNERS[name](train, true_tree.order)
        runtime_ms = (time.perf_counter() - start) * 1000
        fitted, _ = mle(learned, train, on_undefined="uniform")
        rows.append({
            "trial": trial,
            "n": n,
            "stages_true": true_tree.total_stages(),
            "shd": shd(true_tree, learned),
            "accuracy": predictive_accuracy(learned, fitted, holdout),
            "runtime_ms": round(runtime_ms, 3),
            "learner": name,
            "merge_prob": merge_prob,
        })
    log.info(f"Trial {trial}: p={p} q={merge_prob} n={n} stages={true_tree.total_stages()} "
             + " ".join(f"{r['learner']}:shd={r['shd']}" for r in rows))
    return rows


def run_trials(p: int, merge_prob: float, n: int | None = None, trials: int = 10, seed: int | None = None,
               valid_samples: int | None = None, model: str = "cstree",
               learners: tuple[str, ...] = ("bhc-cs",)) -> pd.DataFrame:
    """One metrics row per (trial, learner)."""
    if model not in ("cstree", "staged"):
        raise ValueError("model must be 'cstree' or 'staged'")
    unknown = set(learners) - set(LEARNERS)
    if unknown:
        raise ValueError(f"unknown learners: {sorted(unknown)}")
    n = n or config.CSTREE_TRAIN_SAMPLES
    valid = valid_samples or config.CSTREE_VALID_SAMPLES
    seed = config.CSTREE_SEED if seed is None else seed
    seqs = _trial_seeds(seed, trials)
    with ThreadPoolExecutor(max_workers=config.CSTREE_THREADS, thread_name_prefix="trial") as pool:
        batches = list(pool.map(
            lambda t: _run_one(t, seqs[t], p, merge_prob, n, valid, model, tuple(learners)), range(trials)))
    frame = pd.DataFrame([row for batch in batches for row in batch], columns=METRIC_COLUMNS)
    return frame.sort_values(["trial", "learner"], kind="stable").reset_index(drop=True)


def compare_learners(p: int, merge_prob: float, n: int | None = None, trials: int = 5,
                     seed: int | None = None, valid_samples: int | None = None) -> pd.DataFrame:
    """BHC-CS against BHC-S on random general staged trees."""
    return run_trials(p, merge_prob, n, trials, seed, valid_samples, model="staged", learners=("bhc-cs", "bhc-s"))


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean SHD, accuracy and runtime per (learner, merge_prob, n)."""
    return (frame.groupby(["learner", "merge_prob", "n"], sort=True)[["stages_true", "shd", "accuracy", "runtime_ms"]]
            .mean().reset_index())


def write_metrics(frame: pd.DataFrame, path: Path):
    write_text(Path(path), frame.to_csv(index=False))
