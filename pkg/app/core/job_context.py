# app/core/job_context.py
"""Correlation ids and timing for batch jobs"""
import logging
import time
import uuid
from contextlib import contextmanager
from typing import Iterator, Optional

import structlog

logger = logging.getLogger(__name__)


def new_job_id(prefix: str = "job") -> str:
    return f"{prefix}-{uuid.uuid4().hex[:8]}"


@contextmanager
def job_context(name: str, job_id: Optional[str] = None, **fields) -> Iterator[str]:
    """Bind a job id into every log record emitted inside the block"""
    job_id = job_id or new_job_id(name)
    start_time = time.time()
    with structlog.contextvars.bound_contextvars(job_id=job_id, job=name, **fields):
        logger.info(f"Job started: {name}")
        try:
            yield job_id
        except Exception as exc:
            duration = time.time() - start_time
            logger.warning(f"Job failed: {name} after {duration * 1000:.1f} ms ({type(exc).__name__})")
            raise
        duration = time.time() - start_time
        logger.info(f"Job completed: {name} in {duration * 1000:.1f} ms")
