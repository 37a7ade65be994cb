import hashlib
import logging
import os
import shelve
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional
from urllib.parse import urldefrag

import requests

from gnorm.errors import InputError

logger = logging.getLogger(__name__)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class PresentationCache:
    """Persistent cache of presentation files fetched from http(s) URLs.

    Entries are keyed by the URL without fragment and store the text with its sha256 digest.
    An entry whose digest no longer matches its text is dropped and fetched again.
    """

    __shelf: shelve.Shelf
    _timeout: float

    def __init__(
        self,
        base: str = str(Path.home().joinpath(".cache", "gnorm")),
        timeout: float = 30,
    ):
        self.timeout = timeout
        if not os.path.isdir(base):
            os.makedirs(base)
        self.__shelf = shelve.open(os.path.join(base, "presentations"), writeback=True)

    def __enter__(self) -> "PresentationCache":
        return self

    def __exit__(self, *args) -> None:
        self.close()

    # --------------------------------------------------------------------#
    #                             Properties                             #
    # --------------------------------------------------------------------#

    @property
    def timeout(self) -> float:
        return self._timeout

    @timeout.setter
    def timeout(self, value: float):
        if value <= 0:
            raise ValueError("Fetch timeout must be positive: {}".format(value))
        self._timeout = value

    # --------------------------------------------------------------------#
    #                           Public methods                           #
    # --------------------------------------------------------------------#

    def close(self):
        self.__shelf.close()

    def entry(self, url: str) -> Optional[Dict[str, Any]]:
        """The stored entry (text, sha256, fetched) of a URL, if any."""
        entry = self.__shelf.get(urldefrag(url).url)
        return None if entry is None else dict(entry)

    def evict(self, url: str) -> bool:
        key = urldefrag(url).url
        if key not in self.__shelf:
            return False
        del self.__shelf[key]
        return True

    def get(self, url: str, force: bool = False) -> str:
        """The presentation text behind a URL, fetched at most once unless forced or corrupted.

        Raises:
            InputError: If the fetch fails or the response body is empty.
        """
        key = urldefrag(url).url
        entry = self.__shelf.get(key)
        if entry is not None and not force:
            if _digest(entry["text"]) == entry["sha256"]:
                return entry["text"]
            logger.warning("Cached presentation of '%s' is corrupted; fetching again", key)
        text = self._fetch(key)
        self.__shelf[key] = {
            "text": text,
            "sha256": _digest(text),
            "fetched": datetime.now(timezone.utc).isoformat(),
        }
        logger.info("Cached presentation '%s'", key)
        return text

    # --------------------------------------------------------------------#
    #                          Private methods                           #
    # --------------------------------------------------------------------#

    def _fetch(self, url: str) -> str:
        try:
            with requests.get(url, timeout=self.timeout) as response:
                response.raise_for_status()
                text = response.text
        except requests.RequestException as error:
            raise InputError("Failed to fetch presentation from '{}': {}".format(url, error))
        if not text.strip():
            raise InputError("Empty presentation at '{}'".format(url))
        return text
