"""Locations for user-downloaded resources (corpora, topics, embeddings).

The toolkit ships only tiny synthetic fixtures; real collections are
fetched by the user (see the README recipes) and conventionally live under
the cache directory so scripts can share them.
"""

from __future__ import annotations

import os
from pathlib import Path


def cache_dir() -> Path:
    """Resource cache root: $FERRET_CACHE if set, else ~/.cache/ferret.

    Created on first call so callers can write into it directly.
    """
    root = os.environ.get("FERRET_CACHE")
    path = Path(root) if root else Path.home() / ".cache" / "ferret"
    path.mkdir(parents=True, exist_ok=True)
    return path
