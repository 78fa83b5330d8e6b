"""
Parallel Execution
Ordered process-pool map used by every Monte Carlo sampler
"""

import concurrent.futures as cf
import sys
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Any

from tqdm import tqdm

sys.path.append(str(Path(__file__).parent.parent))

from utils.config_loader import get_config


def resolve_workers(max_workers: Optional[int] = None) -> int:
    """Worker count: explicit argument, then DISCLAB_THREADS / sampling.max_workers"""
    if max_workers is not None:
        return max(1, int(max_workers))
    return max(1, int(get_config().get('sampling.max_workers', 1)))


def parallel_map(
    fn: Callable[[Any], Any],
    items: Iterable[Any],
    max_workers: Optional[int] = None,
    desc: Optional[str] = None,
    chunksize: int = 8,
) -> List[Any]:
    """
    Apply fn to every item, preserving input order

    Args:
        fn: Picklable top-level function
        items: Work items (each carries its own seed)
        max_workers: Process count; 1 runs inline
        desc: Progress bar label (no bar when None)

    Returns:
        List of results in input order
    """
    items = list(items)
    workers = resolve_workers(max_workers)
    show = desc is not None and get_config().get('sampling.progress', True)

    if workers == 1 or len(items) <= 1:
        iterator = map(fn, items)
        if show:
            iterator = tqdm(iterator, total=len(items), desc=desc)
        return list(iterator)

    with cf.ProcessPoolExecutor(max_workers=workers) as executor:
        iterator = executor.map(fn, items, chunksize=chunksize)
        if show:
            iterator = tqdm(iterator, total=len(items), desc=desc)
        return list(iterator)
