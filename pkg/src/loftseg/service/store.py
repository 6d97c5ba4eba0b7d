"""In-memory image store with LRU eviction.

No database by design: the tool is a desk application and statelessness keeps
it portable. The store is guarded by a lock for atomic insert/lookup/evict;
stored images are immutable so segmentation runs outside the lock.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

from ..rasters import GrayImage16


@dataclass
class SessionImage:
    id: str
    original: GrayImage16
    uploaded_at: float
    mask_png: bytes | None = field(default=None)
    last_response: dict | None = field(default=None)


class ImageStore:
    def __init__(self, capacity: int = 32):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._lock = threading.Lock()
        self._items: OrderedDict[str, SessionImage] = OrderedDict()

    def put(self, image: GrayImage16) -> SessionImage:
        entry = SessionImage(id=uuid.uuid4().hex, original=image, uploaded_at=time.time())
        with self._lock:
            self._items[entry.id] = entry
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
        return entry

    def get(self, image_id: str) -> SessionImage | None:
        with self._lock:
            entry = self._items.get(image_id)
            if entry is not None:
                self._items.move_to_end(image_id)
            return entry

    def set_result(self, image_id: str, mask_png: bytes, response: dict) -> None:
        with self._lock:
            entry = self._items.get(image_id)
            if entry is not None:
                entry.mask_png = mask_png
                entry.last_response = response

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
