"""
Scheduler

Built-in scheduling service: runs component worker tasks on daemon threads
and stops them when their component leaves the ACTIVE state.
"""

import logging
import threading
from typing import Callable, Dict, List, Tuple

logger = logging.getLogger('hybrid-indexer.scheduler')


class Scheduler:
    def __init__(self, join_timeout: float = 5.0):
        self.join_timeout = join_timeout
        self._tasks: Dict[str, List[Tuple[threading.Thread, threading.Event]]] = {}
        self._lock = threading.Lock()

    def start(self, owner: str, target: Callable[[threading.Event], None], name: str) -> threading.Event:
        stop = threading.Event()

        def run():
            try:
                target(stop)
            except Exception:
                logger.exception(f"Task {name} of {owner} crashed")

        thread = threading.Thread(target=run, name=name, daemon=True)
        with self._lock:
            self._tasks.setdefault(owner, []).append((thread, stop))
        thread.start()
        return stop

    def stop(self, owner: str) -> int:
        """Signal and join every task of `owner`; returns how many were stopped"""
        with self._lock:
            tasks = self._tasks.pop(owner, [])
        for _, stop in tasks:
            stop.set()
        current = threading.current_thread()
        for thread, _ in tasks:
            if thread is not current:
                thread.join(self.join_timeout)
                if thread.is_alive():
                    logger.warning(f"Task {thread.name} of {owner} did not stop within {self.join_timeout}s")
        return len(tasks)

    def running(self, owner: str) -> int:
        with self._lock:
            return sum(1 for thread, _ in self._tasks.get(owner, []) if thread.is_alive())

    def stop_all(self) -> None:
        with self._lock:
            owners = list(self._tasks)
        for owner in owners:
            self.stop(owner)
