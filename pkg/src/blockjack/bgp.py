"""Deterministic path-vector routing simulation.

A single :class:`Simulation` owns a set of routers, the links between
them, and one event queue ordered by ``(time, sequence)``.  Route
advertisements are batched: a router that changes its best path queues
the re-advertisement for the next advertisement-interval boundary
instead of flushing per message, so ledger-side work can race the
routing plane the way it would against a real update interval.

Everything is single-threaded per instance; two simulations never share
state.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

from .types import Prefix, RouterId, check_asn

log = logging.getLogger(__name__)

DEFAULT_MARI = 30.0
DEFAULT_LINK_DELAY = 0.1
DEFAULT_LOCAL_PREF = 100

ANNOUNCE = "announce"
WITHDRAW = "withdraw"


class SimulationError(Exception):
    """Raised for contract violations against the simulation API."""


@dataclass
class Route:
    """One entry of a router's BGP table.

    ``as_path`` is ordered head = nearest neighbor, tail = origin AS.
    A locally originated route has ``next_hop`` equal to the owning
    router and ``as_path`` of just the owner's ASN.
    """

    prefix: Prefix
    next_hop: RouterId
    as_path: tuple[int, ...]
    local_pref: int = DEFAULT_LOCAL_PREF
    med: int = 0
    weight: int = 0
    metric: int = 0
    is_valid: bool = True
    is_best: bool = False

    def __post_init__(self):
        if not self.as_path:
            raise ValueError("as_path must not be empty")
        if len(set(self.as_path)) != len(self.as_path):
            raise ValueError(f"as_path contains a loop: {self.as_path}")
        for asn in self.as_path:
            check_asn(asn)

    @property
    def origin(self) -> int:
        """Origin AS: the tail of the AS path."""
        return self.as_path[-1]

    def same_value(self, other: Optional["Route"]) -> bool:
        """Attribute equality ignoring the is_best marker."""
        if other is None:
            return False
        return (self.prefix == other.prefix
                and self.next_hop == other.next_hop
                and self.as_path == other.as_path
                and self.local_pref == other.local_pref
                and self.med == other.med
                and self.weight == other.weight
                and self.metric == other.metric
                and self.is_valid == other.is_valid)


@dataclass(frozen=True)
class UpdateMessage:
    """An announce or withdraw in flight between two peers."""

    kind: str
    sender: RouterId
    prefix: Prefix
    delivery_time: float
    route: Optional[Route] = None

    def __post_init__(self):
        if self.kind not in (ANNOUNCE, WITHDRAW):
            raise ValueError(f"unknown update kind: {self.kind}")
        if self.kind == ANNOUNCE and self.route is None:
            raise ValueError("announce requires a route")


@dataclass(frozen=True)
class FilterRule:
    """Inbound filter: drop announcements from deny_origin arriving via neighbor.

    deny_prefix is recorded for audit; matching is by (neighbor, origin).
    """

    neighbor: RouterId
    deny_origin: int
    deny_prefix: Prefix


@dataclass
class SimClock:
    """Simulated time plus the advertisement batching interval."""

    now: float = 0.0
    mari_interval: float = DEFAULT_MARI

    def next_boundary(self, t: float) -> float:
        """First advertisement boundary at or after t.

        Boundaries sit at positive multiples of the interval, so work
        queued at t=0 flushes at the end of the first interval.
        """
        k = math.ceil(t / self.mari_interval)
        return self.mari_interval * max(1, k)


def preference_key(route: Route):
    """Total order for best-path selection.

    Highest weight, then highest local_pref, then shortest AS path,
    then lowest MED, then lowest next-hop router id; the AS path itself
    makes the order total over distinct route values.
    """
    return (-route.weight, -route.local_pref, len(route.as_path),
            route.med, route.next_hop, route.as_path)


def select_best(candidates: list[Route]) -> Optional[Route]:
    """Pick the unique winner among valid candidates for one prefix.

    Flags exactly the winner as best. Pure in the candidate multiset:
    permutation-invariant and idempotent. Returns None for no candidates.
    """
    if not candidates:
        return None
    winner = min(candidates, key=preference_key)
    for route in candidates:
        route.is_best = route is winner
    return winner


class Router:
    """Per-router state: adjacency, learned routes, filters, pending adverts."""

    def __init__(self, rid: RouterId):
        self.rid = rid
        self.asn = rid.asn
        self.neighbors: dict[RouterId, float] = {}
        # learned + locally originated routes, keyed prefix -> next_hop
        self.rib: dict[Prefix, dict[RouterId, Route]] = {}
        self.best: dict[Prefix, Route] = {}
        self.filters: dict[tuple[RouterId, int], FilterRule] = {}
        self.originated: set[Prefix] = set()
        self.pending: set[Prefix] = set()
        # per-neighbor local_pref override applied on import
        self.local_pref_in: dict[RouterId, int] = {}
        self._scheduled_boundary: Optional[float] = None

    def blocks(self, sender: RouterId, origin: int) -> bool:
        return (sender, origin) in self.filters

    def candidates(self, prefix: Prefix) -> list[Route]:
        return [r for r in self.rib.get(prefix, {}).values() if r.is_valid]

    def reselect(self, prefix: Prefix) -> Optional[tuple[Optional[Route], Optional[Route]]]:
        """Re-run selection for one prefix; returns (old, new) on change."""
        old = self.best.get(prefix)
        new = select_best(self.candidates(prefix))
        if new is None:
            self.best.pop(prefix, None)
            if not self.rib.get(prefix):
                self.rib.pop(prefix, None)
        else:
            self.best[prefix] = new
        if (new is None and old is None) or (new is not None and new.same_value(old)):
            return None
        return (old, new)

    def is_local(self, route: Route) -> bool:
        return route.next_hop == self.rid

    def advertised_path(self, route: Route) -> tuple[int, ...]:
        """AS path carried in an announce of this route to a peer."""
        if self.is_local(route):
            return route.as_path
        return (self.asn,) + route.as_path


class Simulation:
    """A deterministic event-driven network of path-vector routers."""

    def __init__(self, mari: float = DEFAULT_MARI):
        if mari <= 0:
            raise ValueError("advertisement interval must be positive")
        self.clock = SimClock(0.0, mari)
        self.routers: dict[RouterId, Router] = {}
        self._queue: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self.events_processed = 0
        # callbacks (router_id, prefix, old_best, new_best)
        self.on_best_change: list[Callable[[RouterId, Prefix, Optional[Route], Optional[Route]], None]] = []

    # -- construction ---------------------------------------------------

    def add_router(self, rid: RouterId) -> Router:
        if rid in self.routers:
            raise SimulationError(f"duplicate router {rid}")
        router = Router(rid)
        self.routers[rid] = router
        return router

    def add_link(self, a: RouterId, b: RouterId, delay: float = DEFAULT_LINK_DELAY):
        if a == b:
            raise SimulationError("self links are not allowed")
        if delay < 0:
            raise SimulationError("link delay must be >= 0")
        ra, rb = self._router(a), self._router(b)
        ra.neighbors[b] = delay
        rb.neighbors[a] = delay

    def _router(self, rid: RouterId) -> Router:
        try:
            return self.routers[rid]
        except KeyError:
            raise SimulationError(f"unknown router {rid}") from None

    # -- event queue -----------------------------------------------------

    def schedule(self, t: float, action: Callable[[], None]) -> int:
        if t < self.clock.now:
            raise SimulationError(f"cannot schedule at {t} before now={self.clock.now}")
        self._seq += 1
        heapq.heappush(self._queue, (t, self._seq, action))
        return self._seq

    def run_until(self, t: float) -> int:
        """Process every event with time <= t in (time, seq) order."""
        if t < self.clock.now:
            raise SimulationError(f"time regression: {t} < {self.clock.now}")
        processed = 0
        while self._queue and self._queue[0][0] <= t:
            when, _, action = heapq.heappop(self._queue)
            self.clock.now = when
            action()
            processed += 1
        self.clock.now = t
        self.events_processed += processed
        return processed

    # -- public routing operations ----------------------------------------

    def originate_prefix(self, rid: RouterId, prefix: Prefix, t: Optional[float] = None) -> int:
        """Originate a prefix at router rid at time t (default now)."""
        router = self._router(rid)
        t = self.clock.now if t is None else t
        if prefix in router.originated:
            raise SimulationError(f"{rid} already originates {prefix}")
        router.originated.add(prefix)
        return self.schedule(t, lambda: self._apply_originate(router, prefix))

    def withdraw_prefix(self, rid: RouterId, prefix: Prefix, t: Optional[float] = None) -> int:
        router = self._router(rid)
        t = self.clock.now if t is None else t
        if prefix not in router.originated:
            raise SimulationError(f"{rid} does not originate {prefix}")
        router.originated.discard(prefix)
        return self.schedule(t, lambda: self._apply_withdraw(router, prefix))

    def install_inbound_filter(self, rid: RouterId, rule: FilterRule) -> FilterRule:
        """Activate an inbound filter immediately; purge matching routes."""
        router = self._router(rid)
        if rule.neighbor not in router.neighbors:
            raise SimulationError(f"{rule.neighbor} is not adjacent to {rid}")
        router.filters[(rule.neighbor, rule.deny_origin)] = rule
        for prefix in sorted(router.rib):
            table = router.rib[prefix]
            route = table.get(rule.neighbor)
            if route is not None and route.origin == rule.deny_origin:
                del table[rule.neighbor]
                self._after_table_change(router, prefix)
        return rule

    def process_update(self, rid: RouterId, msg: UpdateMessage):
        """Apply one delivered update; returns the table delta or a drop reason."""
        router = self._router(rid)
        assert msg.delivery_time == self.clock.now, "update delivered off-schedule"
        if msg.kind == WITHDRAW:
            table = router.rib.get(msg.prefix, {})
            if msg.sender in table:
                del table[msg.sender]
                return ("withdrawn", self._after_table_change(router, msg.prefix))
            return ("no-op", None)
        route = msg.route
        if router.asn in route.as_path:
            log.debug("%s drops %s: own ASN in path %s", rid, msg.prefix, route.as_path)
            return ("dropped-loop", None)
        if router.blocks(msg.sender, route.origin):
            log.debug("%s drops %s from %s: inbound filter", rid, msg.prefix, msg.sender)
            return ("dropped-filter", None)
        stored = replace(route, is_best=False)
        if msg.sender in router.local_pref_in:
            stored.local_pref = router.local_pref_in[msg.sender]
        router.rib.setdefault(msg.prefix, {})[msg.sender] = stored
        return ("installed", self._after_table_change(router, msg.prefix))

    def snapshot_table(self, rid: RouterId) -> list[dict]:
        """Stable-ordered, read-only copy of a router's table rows."""
        router = self._router(rid)
        rows = []
        for prefix in sorted(router.rib):
            for next_hop in sorted(router.rib[prefix]):
                route = router.rib[prefix][next_hop]
                rows.append({
                    "prefix": route.prefix,
                    "next_hop": route.next_hop,
                    "metric": route.metric,
                    "local_pref": route.local_pref,
                    "weight": route.weight,
                    "as_path": route.as_path,
                    "is_valid": route.is_valid,
                    "is_best": route.is_best,
                })
        return rows

    # -- internals ---------------------------------------------------------

    def _apply_originate(self, router: Router, prefix: Prefix):
        local = Route(prefix=prefix, next_hop=router.rid, as_path=(router.asn,))
        router.rib.setdefault(prefix, {})[router.rid] = local
        self._after_table_change(router, prefix)

    def _apply_withdraw(self, router: Router, prefix: Prefix):
        table = router.rib.get(prefix, {})
        if router.rid in table:
            del table[router.rid]
        self._after_table_change(router, prefix)

    def _after_table_change(self, router: Router, prefix: Prefix):
        change = router.reselect(prefix)
        if change is None:
            return None
        old, new = change
        router.pending.add(prefix)
        self._schedule_flush(router)
        for callback in self.on_best_change:
            callback(router.rid, prefix, old, new)
        return change

    def _schedule_flush(self, router: Router):
        boundary = self.clock.next_boundary(self.clock.now)
        if router._scheduled_boundary is not None and router._scheduled_boundary >= boundary:
            return
        router._scheduled_boundary = boundary
        self.schedule(boundary, lambda: self._flush(router))

    def _flush(self, router: Router):
        router._scheduled_boundary = None
        pending, router.pending = sorted(router.pending), set()
        for prefix in pending:
            best = router.best.get(prefix)
            for neighbor in sorted(router.neighbors):
                delay = router.neighbors[neighbor]
                if best is not None:
                    msg_route = Route(
                        prefix=prefix,
                        next_hop=router.rid,
                        as_path=router.advertised_path(best),
                        med=best.med,
                        metric=best.metric,
                        weight=0,
                    )
                    self._send(router.rid, neighbor, ANNOUNCE, prefix, msg_route, delay)
                else:
                    self._send(router.rid, neighbor, WITHDRAW, prefix, None, delay)

    def _send(self, sender: RouterId, receiver: RouterId, kind: str,
              prefix: Prefix, route: Optional[Route], delay: float):
        deliver_at = self.clock.now + delay
        msg = UpdateMessage(kind=kind, sender=sender, prefix=prefix,
                            delivery_time=deliver_at, route=route)
        self.schedule(deliver_at, lambda: self.process_update(receiver, msg))


# -- external interfaces ----------------------------------------------------


def load_topology(doc: dict, mari: float = DEFAULT_MARI) -> Simulation:
    """Build a simulation from the topology JSON document.

    Expected shape::

        {"routers": [{"id": 0, "asn": 64512}, ...],
         "links": [{"a": 0, "b": 1, "delay_s": 0.1}, ...],
         "peering": [{"router": "64512.0", "neighbor": "64513.1",
                      "local_pref": 200}, ...]}   # optional

    Router ids in "links"/"peering" refer to the integer "id" field;
    the full wire form ``asn.index`` is also accepted.
    """
    sim = Simulation(mari=mari)
    by_label: dict[str, RouterId] = {}
    for entry in doc["routers"]:
        rid = RouterId(check_asn(int(entry["asn"])), int(entry["id"]))
        sim.add_router(rid)
        by_label[str(entry["id"])] = rid
        by_label[str(rid)] = rid

    def resolve(label) -> RouterId:
        key = str(label)
        if key not in by_label:
            raise SimulationError(f"unknown router reference {label!r}")
        return by_label[key]

    for link in doc.get("links", []):
        sim.add_link(resolve(link["a"]), resolve(link["b"]),
                     float(link.get("delay_s", DEFAULT_LINK_DELAY)))
    for override in doc.get("peering", []) or []:
        router = sim._router(resolve(override["router"]))
        router.local_pref_in[resolve(override["neighbor"])] = int(override["local_pref"])
    return sim


def dump_topology(sim: Simulation) -> dict:
    """Topology document for the current simulation (links deduplicated)."""
    routers = [{"id": rid.index, "asn": rid.asn} for rid in sorted(sim.routers)]
    links = []
    seen = set()
    for rid in sorted(sim.routers):
        for neighbor, delay in sorted(sim.routers[rid].neighbors.items()):
            key = tuple(sorted((rid, neighbor)))
            if key in seen:
                continue
            seen.add(key)
            links.append({"a": rid.index, "b": neighbor.index, "delay_s": delay})
    return {"routers": routers, "links": links}


def apply_event_script(sim: Simulation, events: Iterable[dict]):
    """Schedule a JSON event script: a list of {t, op, args} entries.

    Supported ops: originate, withdraw, install_filter.
    """
    for event in events:
        t = float(event["t"])
        op = event["op"]
        args = event.get("args", {})
        rid = RouterId.parse(args["router"])
        if op == "originate":
            sim.originate_prefix(rid, Prefix.parse(args["prefix"]), t)
        elif op == "withdraw":
            sim.withdraw_prefix(rid, Prefix.parse(args["prefix"]), t)
        elif op == "install_filter":
            rule = FilterRule(neighbor=RouterId.parse(args["neighbor"]),
                              deny_origin=check_asn(int(args["deny_origin"])),
                              deny_prefix=Prefix.parse(args["deny_prefix"]))
            sim.schedule(t, lambda r=rid, f=rule: sim.install_inbound_filter(r, f))
        else:
            raise SimulationError(f"unknown script op: {op}")


def snapshot_jsonable(rows: list[dict]) -> list[dict]:
    """Snapshot rows with identifier types rendered as strings/lists."""
    out = []
    for row in rows:
        out.append({
            "prefix": str(row["prefix"]),
            "next_hop": str(row["next_hop"]),
            "metric": row["metric"],
            "local_pref": row["local_pref"],
            "weight": row["weight"],
            "as_path": list(row["as_path"]),
            "is_valid": row["is_valid"],
            "is_best": row["is_best"],
        })
    return out


def snapshot_json(sim: Simulation, rid: RouterId) -> str:
    return json.dumps(snapshot_jsonable(sim.snapshot_table(rid)), sort_keys=True)
