import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


def child_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """
    Derive an independent seed stream from a parent seed and integer keys.

    Parameters
    ----------
    seed : int
        Parent 64-bit seed.
    *keys : int
        Path below the parent, e.g. (phase, chain_index) or (iteration,).

    Returns
    -------
    np.random.SeedSequence
        Deterministic in (seed, keys); distinct keys give independent streams.
    """
    entropy = [int(seed) & SEED_MASK] + [int(k) & SEED_MASK for k in keys]
    return np.random.SeedSequence(entropy)


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator seeded from child_seed(seed, *keys)."""
    return np.random.default_rng(child_seed(seed, *keys))


def child_int_seed(seed: int, *keys: int) -> int:
    """64-bit integer seed derived from (seed, keys), for records and CSVs."""
    return int(child_seed(seed, *keys).generate_state(1, dtype=np.uint64)[0])


@contextmanager
def atomic_write(path: str | Path, mode: str = "w", **open_kwargs) -> Iterator:
    """
    Write a file through a temp file in the same directory and rename on success.

    A failure inside the block leaves any previous file at ``path`` untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **open_kwargs) as f:
            yield f
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def write_csv(frame: pd.DataFrame, path: str | Path, columns: Sequence[str] | None = None) -> Path:
    """
    Atomically write a DataFrame as CSV (no index, fixed column order).

    Parameters
    ----------
    frame : pd.DataFrame
        Table to write; may be empty.
    path : str or Path
        Destination file.
    columns : sequence of str, optional
        Column order to enforce; missing columns raise KeyError.

    Returns
    -------
    Path
        The written path.
    """
    if columns is not None:
        frame = frame.reindex(columns=list(columns)) if frame.empty else frame[list(columns)]
    with atomic_write(path, "w", newline="", encoding="utf-8") as f:
        frame.to_csv(f, index=False, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return Path(path)


