import os

from src.utils.cache_utils import DensityCache
from tests.conftest import diag


def test_put_get_and_reload(cache_path):
    cache = DensityCache(cache_path)
    key = DensityCache.make_key(diag(1, 1), diag(1), 3, 2, False)
    assert cache.get(key) is None
    cache.put(key, 10 ** 30)
    assert cache.get(key) == 10 ** 30
    assert (cache.hits, cache.misses) == (1, 1)

    reloaded = DensityCache(cache_path)
    assert len(reloaded) == 1
    assert reloaded.get(key) == 10 ** 30


def test_keys_separate_primitive_counts():
    s, t = diag(1, 1), diag(1)
    assert DensityCache.make_key(s, t, 3, 2, False) != DensityCache.make_key(s, t, 3, 2, True)
    assert DensityCache.make_key(s, t, 3, 2, False) != DensityCache.make_key(s, t, 3, 3, False)


def test_malformed_lines_are_skipped(cache_path):
    cache = DensityCache(cache_path)
    key = DensityCache.make_key(diag(1), diag(1), 5, 1, False)
    cache.put(key, 2)
    with open(cache_path, "a", encoding="utf-8") as f:
        f.write("not json\n\n")
        f.write('{"raw": "3"}\n')
    reloaded = DensityCache(cache_path)
    assert len(reloaded) == 1
    assert reloaded.get(key) == 2


def test_flush_leaves_no_temporary_files(cache_path):
    cache = DensityCache(cache_path)
    for e in range(1, 4):
        cache.put(DensityCache.make_key(diag(1), diag(1), 3, e, False), 2 * 3 ** (e - 1))
    directory = os.path.dirname(cache_path)
    assert os.listdir(directory) == [os.path.basename(cache_path)]
