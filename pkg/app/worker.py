"""
Process-pool runner for independent jobs (--jobs N)
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Sequence

from app.utils.my_logging import setup_logging

logger = logging.getLogger(__name__)

Job = Callable[[Dict[str, Any]], Dict[str, Any]]


def _init_worker(verbose: bool) -> None:
    setup_logging(verbose)


def run_jobs(job: Job, payloads: Sequence[Dict[str, Any]], jobs: int = 1, verbose: bool = False) -> List[Dict[str, Any]]:
    """Run `job` over payloads; results keep submission order for any N"""
    if not payloads:
        return []
    if jobs <= 1 or len(payloads) == 1:
        logger.info(f"Running {len(payloads)} {job.__name__} jobs inline")
        return [job(payload) for payload in payloads]

    workers = min(jobs, len(payloads))
    logger.info(f"🚀 Running {len(payloads)} {job.__name__} jobs on {workers} processes")
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(verbose,)) as pool:
        results = list(pool.map(job, payloads))
    logger.info(f"✅ {job.__name__}: {len(results)} jobs finished")
    return results
