import gzip
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import requests

from riq.errors import DatasetFetchError

logger = logging.getLogger(__name__)

FETCH_TIMEOUT = 30
CHUNK_SIZE = 1 << 16


def is_remote(source: str) -> bool:
    return source.startswith(("http://", "https://"))


# ------------------------
# Dataset Sources
# ------------------------
@contextmanager
def _open_remote(url: str, timeout: int) -> Iterator[Iterator[bytes]]:
    try:
        response = requests.get(url, stream=True, timeout=timeout, headers={"accept": "application/n-quads, */*"})
    except requests.RequestException as e:
        raise DatasetFetchError(url, f"network error: {e}")

    if response.status_code != 200:
        response.close()
        raise DatasetFetchError(url, f"HTTP status {response.status_code}", status=response.status_code)

    logger.info("streaming dataset from %s", url)
    try:
        if url.endswith(".gz"):
            response.raw.decode_content = True
            with gzip.GzipFile(fileobj=response.raw) as stream:
                yield iter(stream)
        else:
            yield response.iter_lines(chunk_size=CHUNK_SIZE, delimiter=b"\n")
    except (requests.RequestException, OSError) as e:
        raise DatasetFetchError(url, f"download interrupted: {e}")
    finally:
        response.close()


@contextmanager
def open_dataset(source: str, timeout: int = FETCH_TIMEOUT) -> Iterator[Iterator[bytes]]:
    """Yield an iterator of raw N-Quads lines from a path, URL or ``-`` (stdin).

    Paths and URLs ending in ``.gz`` are decompressed on the fly. Lines are
    split on LF only; Unicode line separators inside literals stay intact.
    """
    if source == "-":
        yield iter(sys.stdin.buffer)
        return

    if is_remote(source):
        with _open_remote(source, timeout) as lines:
            yield lines
        return

    path = Path(source)
    if not path.is_file():
        raise DatasetFetchError(source, "no such file")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as stream:
            yield iter(stream)
    except OSError as e:
        raise DatasetFetchError(source, f"cannot read: {e}")
