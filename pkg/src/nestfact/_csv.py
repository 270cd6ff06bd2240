from __future__ import annotations

import csv
from contextlib import contextmanager
from pathlib import Path


@contextmanager
def csv_writer(path, seed: int | None = None):
    """CSV writer with an optional leading ``# seed=N`` comment line."""
    with open(Path(path), "w", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        yield csv.writer(fh, lineterminator="\n")
