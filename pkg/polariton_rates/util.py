from __future__ import annotations

import os
import shutil
import tempfile
from typing import Iterable, Iterator, List, Mapping, Tuple, TypeVar

_T = TypeVar("_T")


def format_float(value: float) -> str:
    """Format a number with 17 significant digits.

    >>> format_float(0.1)
    '0.10000000000000001'
    """

    return f"{float(value):.17g}"


def chunked(n: int, size: int) -> Iterator[Tuple[int, int]]:
    """Make an iterator over (start, stop) pairs covering range(n).

    >>> list(chunked(5, 2))
    [(0, 2), (2, 4), (4, 5)]
    """

    if size <= 0:
        raise ValueError("chunk size must be positive")
    for start in range(0, n, size):
        yield start, min(start + size, n)


def only(items: Iterable[_T]) -> _T:
    """Return the single element of an iterable."""
    found = list(items)
    if len(found) != 1:
        raise ValueError(f"expected exactly one element, got {len(found)}")
    return found[0]


def write_tree(directory: str, files: Mapping[str, str]) -> List[str]:
    """Write files into directory all at once or not at all.

    Everything is first written to a staging directory next to the target.
    A missing target is created by renaming the staging directory; an
    existing one receives each file by os.replace.
    """

    target = os.path.abspath(directory)
    parent = os.path.dirname(target)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        os.chmod(staging, 0o755)
        for name in sorted(files):
            path = os.path.join(staging, name)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(files[name])
        if os.path.isdir(target):
            for name in sorted(files):
                os.replace(os.path.join(staging, name), os.path.join(target, name))
            os.rmdir(staging)
        else:
            os.rename(staging, target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return [os.path.join(directory, name) for name in sorted(files)]
