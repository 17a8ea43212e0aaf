import json
import os
import tempfile
import threading

from src.constants.paths import CACHE_DIR, DENSITY_CACHE_FILE
from src.core.logger import logging
from src.core.types import HalfIntSym


# =========================================================
# ON-DISK DENSITY CACHE (JSON LINES)
# =========================================================
class DensityCache:
    """
    Raw solution counts keyed by (m, n, q, e, primitive, 2S, 2T).

    Readers see the last completed write; every write rewrites the file to a
    temporary sibling and renames it into place.
    """

    def __init__(self, path: str | None = None):
        self.path = path or os.path.join(CACHE_DIR, DENSITY_CACHE_FILE)
        self._lock = threading.Lock()
        self._data: dict[str, int] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    @staticmethod
    def make_key(s: HalfIntSym, t: HalfIntSym, q: int, e: int, primitive: bool) -> str:
        return json.dumps([s.n, t.n, q, e, bool(primitive), list(s.key), list(t.key)], separators=(",", ":"))

    def _load(self):
        if not os.path.exists(self.path):
            return
        with open(self.path, encoding="utf-8") as f:
            for line_no, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    self._data[record["key"]] = int(record["raw"])
                except (ValueError, KeyError) as e:
                    logging.warning(f"Skipping malformed cache line {line_no} in {self.path}: {e}")
        logging.info(f"Loaded {len(self._data)} cached densities from {self.path}")

    def get(self, key: str) -> int | None:
        with self._lock:
            raw = self._data.get(key)
            if raw is None:
                self.misses += 1
            else:
                self.hits += 1
            return raw

    def put(self, key: str, raw: int):
        with self._lock:
            if self._data.get(key) == raw:
                return
            self._data[key] = raw
            self._flush()

    def _flush(self):
        directory = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".densities-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                for key in sorted(self._data):
                    f.write(json.dumps({"key": key, "raw": str(self._data[key])}) + "\n")
            os.replace(tmp_path, self.path)
        except Exception:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise

    def __len__(self):
        return len(self._data)
