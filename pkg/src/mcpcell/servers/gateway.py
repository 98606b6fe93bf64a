"""Shared gateway behavior: lazy bus connection and simulated-time polling.

A gateway re-checks its capability's property constraints before touching
the bus (and fails fast on violation); once a call reaches the device, bus
rejection reasons pass through to the tool result unchanged.
"""

from __future__ import annotations

import logging
import threading
from typing import Optional

from ..bus import BusClient, BusError

log = logging.getLogger(__name__)

POLL_INTERVAL_MS = 100
POLL_TIMEOUT_MS = 10_000


class GatewayBinding:
    """Connection policy for one gateway server."""

    def __init__(
        self,
        bus_addr: str,
        poll_interval_ms: int = POLL_INTERVAL_MS,
        poll_timeout_ms: int = POLL_TIMEOUT_MS,
    ):
        self.bus_addr = bus_addr
        self.poll_interval_ms = poll_interval_ms
        self.poll_timeout_ms = poll_timeout_ms
        self._client: Optional[BusClient] = None
        self._lock = threading.Lock()

    def client(self) -> BusClient:
        with self._lock:
            if self._client is None:
                self._client = BusClient(self.bus_addr)
                log.info("gateway connected to device bus at %s", self.bus_addr)
            return self._client

    def reset_connection(self) -> None:
        with self._lock:
            if self._client is not None:
                try:
                    self._client.close()
                except BusError:
                    pass
                self._client = None


def poll_state_until(binding: GatewayBinding, client, node: str, done_states) -> Optional[str]:
    """Advance simulated time in poll-interval steps and read `node` until a
    terminal state appears. Returns the state, or None on simulated-time
    timeout."""
    elapsed = 0
    while elapsed < binding.poll_timeout_ms:
        client.call("Clock.Advance", {"ms": binding.poll_interval_ms})
        elapsed += binding.poll_interval_ms
        state = client.read(node)
        if state in done_states:
            return state
    return None
