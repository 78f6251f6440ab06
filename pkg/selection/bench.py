"""
Measurements behind the bench command: the approximate/exact gain ratio along a
greedy run, the objective curves of both gain modes, and gain-scoring time as
the source set grows.
"""
import time
from typing import Sequence

import numpy as np
import pandas as pd

from core.containers import ProblemSpec, SolverConfig
from core.logger import get_logger
from objective.marginal_gain import CapacityVector, SortedRows
from selection.greedy_selector import GainMode, select_uniprot

logger = get_logger("bench")


def gain_trace_table(spec: ProblemSpec, cfg: SolverConfig, compare_exact: bool = True,
                     warm_start: bool = False) -> pd.DataFrame:
    """
    One row per greedy step: chosen index, approximate and exact gain, their
    ratio, solver and scoring time, and f after the step for the approximate
    run (and for the exact-gain run when compare_exact).
    """
    approx = select_uniprot(spec, cfg, GainMode.APPROX, warm_start=warm_start, trace=True)
    table = pd.DataFrame([step.model_dump() for step in approx.trace])
    table["f_approx"] = approx.step_values
    if compare_exact:
        exact = select_uniprot(spec, cfg, GainMode.EXACT)
        table["f_exact"] = exact.step_values
        table["exact_index"] = exact.indices
        table["exact_gain_time"] = exact.gain_time
    logger.info("gain ratio mean %.4f min %.4f over %d steps",
                table["ratio"].mean(), table["ratio"].min(), len(table))
    return table


def scaling_table(sizes: Sequence[int], n: int, k: int, seed: int = 0, repeats: int = 5) -> pd.DataFrame:
    """Seconds per approximate-gain scoring pass over all rows, for each source size."""
    rng = np.random.default_rng(seed)
    capacity = CapacityVector.of(np.full(n, k / n))
    rows = []
    for m in sizes:
        cache = SortedRows(rng.uniform(1.0, 2.0, size=(m, n)))
        cache.gains(capacity)
        started = time.perf_counter()
        for _ in range(repeats):
            cache.gains(capacity)
        seconds = (time.perf_counter() - started) / repeats
        rows.append({"m": m, "n": n, "k": k, "seconds": seconds, "seconds_per_row": seconds / m})
    table = pd.DataFrame(rows)
    table["relative_to_first"] = table["seconds"] / table["seconds"].iloc[0]
    return table
