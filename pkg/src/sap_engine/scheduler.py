"""Bounded-concurrency request dispatch and the analytic attention-cost
model.

The dispatcher is the only component in the engine that owns concurrency:
callers either take an endpoint slot around a single send or submit a
batch and receive order-aligned results.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence


@dataclass(frozen=True)
class Endpoint:
    url: str
    model: str
    max_concurrency: int = 4
    auth_env: str = "SAP_API_KEY"

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


class Dispatcher:
    """Distributes requests least-loaded-first across endpoints while never
    exceeding any endpoint's max_concurrency.

    ``serial=True`` degrades to one request at a time for deterministic
    debugging; results are identical for deterministic endpoints.
    """

    def __init__(self, endpoints: Sequence[Endpoint], serial: bool = False):
        if not endpoints:
            raise ValueError("at least one endpoint is required")
        self.endpoints = list(endpoints)
        self.serial = serial
        self._lock = threading.Condition()
        self._in_flight = {i: 0 for i in range(len(self.endpoints))}
        # Instrumentation for concurrency-bound tests.
        self.peak_in_flight = 0
        self.sends_per_endpoint = [0 for _ in self.endpoints]

    @property
    def capacity(self) -> int:
        if self.serial:
            return 1
        return sum(e.max_concurrency for e in self.endpoints)

    @contextmanager
    def slot(self):
        """Acquire capacity on the least-loaded endpoint, blocking until a
        slot frees up."""
        with self._lock:
            while True:
                candidates = [
                    i
                    for i, ep in enumerate(self.endpoints)
                    if self._in_flight[i] < (1 if self.serial else ep.max_concurrency)
                ]
                if self.serial and sum(self._in_flight.values()) > 0:
                    candidates = []
                if candidates:
                    chosen = min(candidates, key=lambda i: (self._in_flight[i], i))
                    self._in_flight[chosen] += 1
                    self.sends_per_endpoint[chosen] += 1
                    total = sum(self._in_flight.values())
                    self.peak_in_flight = max(self.peak_in_flight, total)
                    break
                self._lock.wait()
        try:
            yield self.endpoints[chosen]
        finally:
            with self._lock:
                self._in_flight[chosen] -= 1
                self._lock.notify_all()

    def dispatch(self, requests: Sequence, send: Callable) -> list:
        """Send every request, returning results aligned to request order.

        ``send(endpoint, request)`` performs one exchange.  Per-request
        failures come back as exception objects in their slot; sibling
        requests are unaffected.
        """
        results: list = [None] * len(requests)

        def one(i: int, req) -> None:
            try:
                with self.slot() as endpoint:
                    results[i] = send(endpoint, req)
            except Exception as exc:  # noqa: BLE001 - errors are data here
                results[i] = exc

        if self.serial or len(requests) <= 1:
            for i, req in enumerate(requests):
                one(i, req)
            return results

        with ThreadPoolExecutor(max_workers=min(self.capacity, len(requests))) as pool:
            futures = [pool.submit(one, i, req) for i, req in enumerate(requests)]
            for future in futures:
                future.result()
        return results

    def map(self, fn: Callable, items: Sequence) -> list:
        """Run ``fn`` over items concurrently (order-aligned results).

        Used for per-principle evaluation; the endpoint caps still apply
        because each send inside ``fn`` takes a slot.
        """
        results: list = [None] * len(items)

        def one(i: int, item) -> None:
            try:
                results[i] = fn(item)
            except Exception as exc:  # noqa: BLE001
                results[i] = exc

        if self.serial or len(items) <= 1:
            for i, item in enumerate(items):
                one(i, item)
            return results

        with ThreadPoolExecutor(max_workers=len(items)) as pool:
            futures = [pool.submit(one, i, item) for i, item in enumerate(items)]
            for future in futures:
                future.result()
        return results


@dataclass
class CostReport:
    total_tokens: Fraction
    route_count: int
    mean_route_length: Fraction
    sap_attention_cost: Fraction
    longcot_attention_cost: Fraction
    ratio: Fraction

    def as_dict(self) -> dict:
        return {
            "total_tokens": str(self.total_tokens),
            "route_count": self.route_count,
            "mean_route_length": str(self.mean_route_length),
            "sap_attention_cost": str(self.sap_attention_cost),
            "longcot_attention_cost": str(self.longcot_attention_cost),
            "ratio": str(self.ratio),
        }


def cost_from_params(population: int, tau: int, mean_route_length: Fraction) -> CostReport:
    """Analytic cost comparison for a fixed token budget split into
    population*tau routes of mean length l: quadratic single-trajectory
    attention versus per-route quadratic attention."""
    lbar = Fraction(mean_route_length)
    routes = population * tau
    total = routes * lbar
    sap = routes * lbar * lbar
    longcot = total * total
    ratio = Fraction(sap, longcot) if longcot else Fraction(1)
    return CostReport(
        total_tokens=total,
        route_count=routes,
        mean_route_length=lbar,
        sap_attention_cost=sap,
        longcot_attention_cost=longcot,
        ratio=ratio,
    )


def cost_report(history: Sequence, config) -> CostReport:
    """Build the cost report from recorded per-route token counts.

    ``history`` is the sequence of generation records; each carries
    per-route token counts (endpoint usage when reported, whitespace
    estimate otherwise).
    """
    if not history:
        raise ValueError("history must be nonempty")
    tokens: list[int] = []
    for record in history:
        tokens.extend(record.route_token_counts())
    if not tokens:
        lbar = Fraction(0)
    else:
        lbar = Fraction(sum(tokens), len(tokens))
    population = config.mu + config.lam
    return cost_from_params(population, config.tau, lbar)
