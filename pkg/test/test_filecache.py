import hashlib

import pytest

from gnorm import config, filecache
from gnorm.errors import InputError
from gnorm.presentation import load_presentation

URL = "https://example.org/groups/z2.txt"

TEXT = "generators: x y\nrelators: x*y*x^-1*y^-1\nclass: free-abelian\n"


class FakeResponse:
    def __init__(self, text: str, status: int = 200):
        self.text = text
        self.status = status

    def __enter__(self):
        return self

    def __exit__(self, *args):
        return False

    def raise_for_status(self):
        if self.status != 200:
            raise filecache.requests.HTTPError(str(self.status))


@pytest.fixture
def responses(monkeypatch):
    """Serves TEXT for every URL unless a response is registered; records the requested URLs."""
    served = {}
    calls = []

    def get(url, timeout):
        calls.append(url)
        return served.get(url, FakeResponse(TEXT))

    monkeypatch.setattr(filecache.requests, "get", get)
    return served, calls


@pytest.fixture
def cache(tmp_path):
    with filecache.PresentationCache(str(tmp_path / "cache")) as cache:
        yield cache


def test_fetches_each_url_once(cache, responses):
    _, calls = responses
    assert cache.get(URL) == TEXT
    assert cache.get(URL + "#fragment") == TEXT
    assert calls == [URL]
    cache.get(URL, force=True)
    assert calls == [URL, URL]


def test_stores_digest_with_text(cache, responses):
    cache.get(URL)
    entry = cache.entry(URL)
    assert entry["text"] == TEXT
    assert entry["sha256"] == hashlib.sha256(TEXT.encode("utf-8")).hexdigest()
    assert entry["fetched"]


def test_refetches_corrupted_entries(cache, responses):
    _, calls = responses
    cache.get(URL)
    cache._PresentationCache__shelf[URL]["text"] = "generators: x\n"
    assert cache.get(URL) == TEXT
    assert calls == [URL, URL]


def test_evicts_entries(cache, responses):
    _, calls = responses
    cache.get(URL)
    assert cache.evict(URL)
    assert not cache.evict(URL)
    assert cache.entry(URL) is None
    cache.get(URL)
    assert calls == [URL, URL]


def test_raises_exception_for_failed_fetch(cache, responses):
    served, _ = responses
    served[URL] = FakeResponse("", 404)
    with pytest.raises(InputError) as info:
        cache.get(URL)
    assert URL in str(info.value)
    assert cache.entry(URL) is None


def test_raises_exception_for_empty_presentation(cache, responses):
    served, _ = responses
    served[URL] = FakeResponse("  \n")
    with pytest.raises(InputError):
        cache.get(URL)


def test_raises_exception_for_invalid_timeout(tmp_path):
    with pytest.raises(ValueError):
        filecache.PresentationCache(str(tmp_path / "cache"), timeout=0)


def test_loads_presentation_from_url(cache, responses, monkeypatch):
    monkeypatch.setattr(config, "get_presentation_cache", lambda: cache)
    p = load_presentation(URL)
    assert p.names == ["x", "y"]
    assert len(p.relators) == 1


def test_raises_exception_for_unreadable_file(tmp_path):
    with pytest.raises(InputError):
        load_presentation(tmp_path / "missing.txt")
