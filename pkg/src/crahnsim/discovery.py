"""Service discovery: periodic advertisements carrying routes, local caches,
flood-on-miss resolution that piggybacks route establishment, and gateway
discovery. Runs on top of the AODV layer; the resolution flood reuses the
RREQ duplicate/improvement discipline so the reply also installs a usable
route toward the provider (no separate route discovery afterwards).
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .routing import AodvNode, Network

DEFAULT_ADVERT_INTERVAL_S = 10.0
DEFAULT_ADVERT_HOPS = 2
DEFAULT_SERVICE_TTL_S = 30.0
DEFAULT_QUERY_DEADLINE_S = 10.0
GATEWAY_SERVICE_ID = "gateway"


class DiscoveryTimeout(RuntimeError):
    pass


@dataclass
class ServiceDescriptor:
    service_id: str
    provider: int
    ontology_tag: str = ""
    advertised_route: list[int] = field(default_factory=list)  # provider outward
    issued_at: float = 0.0
    ttl_s: float = DEFAULT_SERVICE_TTL_S
    provider_seq: int = 1

    def __post_init__(self):
        if self.ttl_s <= 0:
            raise ValueError("service ttl must be positive")
        if self.advertised_route and self.advertised_route[0] != self.provider:
            raise ValueError("advertised route must start at the provider")


@dataclass
class ServiceCacheEntry:
    descriptor: ServiceDescriptor
    learned_at: float

    @property
    def expires_at(self) -> float:
        return self.learned_at + self.descriptor.ttl_s


@dataclass
class ServiceQuery:
    query_id: int
    requester: int
    service_id: Optional[str] = None
    ontology_tag: Optional[str] = None
    issued_at: float = 0.0
    deadline: float = 0.0


@dataclass
class AdvertMsg:
    descriptor: ServiceDescriptor
    hops_left: int


@dataclass
class SreqMsg:
    query_id: int
    requester: int
    requester_seq: int
    service_id: Optional[str]
    ontology_tag: Optional[str]
    hop_count: int
    ttl: int


@dataclass
class SrepMsg:
    query_id: int
    requester: int
    descriptor: ServiceDescriptor
    dist_to_provider: int
    hop_count: int


@dataclass
class DiscoveryResult:
    query: ServiceQuery
    descriptor: Optional[ServiceDescriptor]
    latency_s: float
    cache_hit: bool
    timed_out: bool = False
    messages_sent: int = 0


def matches(descriptor: ServiceDescriptor, service_id: Optional[str],
            ontology_tag: Optional[str]) -> bool:
    if service_id is not None and descriptor.service_id == service_id:
        return True
    return ontology_tag is not None and descriptor.ontology_tag == ontology_tag


class DiscoveryNode(AodvNode):
    def __init__(self, node_id: int, network: Network,
                 advert_interval_s: float = DEFAULT_ADVERT_INTERVAL_S,
                 advert_hops: int = DEFAULT_ADVERT_HOPS,
                 service_ttl_s: float = DEFAULT_SERVICE_TTL_S, **kwargs):
        super().__init__(node_id, network, **kwargs)
        self.advert_interval_s = advert_interval_s
        self.advert_hops = advert_hops
        self.service_ttl_s = service_ttl_s
        self.hosted: dict[str, ServiceDescriptor] = {}
        self.cache: dict[tuple, ServiceCacheEntry] = {}  # (service_id, provider)
        self._advert_seen: set[tuple] = set()
        self._sreq_best: dict[int, int] = {}  # query_id -> best hop count seen
        self._next_qid = 0
        self._open_queries: dict[int, dict] = {}

    # -- hosting and advertisement -------------------------------------------

    def host_service(self, service_id: str, ontology_tag: str = "") -> None:
        self.hosted[service_id] = ServiceDescriptor(
            service_id=service_id, provider=self.id, ontology_tag=ontology_tag,
            advertised_route=[self.id], ttl_s=self.service_ttl_s)

    def start_advertising(self) -> None:
        def tick():
            self.advertise()
            if self.net.k.now + self.advert_interval_s <= self.net.k.end:
                self.net.k.schedule(self.net.k.now + self.advert_interval_s, tick,
                                    target=f"n{self.id}", kind="advert")
        tick()

    def advertise(self) -> None:
        for base in self.hosted.values():
            base.provider_seq += 1
            desc = replace(base, advertised_route=[self.id], issued_at=self.net.k.now)
            self.net.broadcast(self.id, AdvertMsg(descriptor=desc, hops_left=self.advert_hops))

    # -- cache ----------------------------------------------------------------

    def lookup_local(self, service_id: Optional[str] = None,
                     ontology_tag: Optional[str] = None) -> Optional[ServiceCacheEntry]:
        """Unexpired match: exact service-id first, ontology tag as fallback;
        ties broken by fewest route hops. Sends zero network messages."""
        now = self.net.k.now
        live = [e for e in self.cache.values() if e.expires_at > now]
        for predicate in ((lambda e: service_id is not None and e.descriptor.service_id == service_id),
                          (lambda e: ontology_tag is not None and e.descriptor.ontology_tag == ontology_tag)):
            hits = [e for e in live if predicate(e)]
            if hits:
                return min(hits, key=lambda e: (len(e.descriptor.advertised_route),
                                                e.descriptor.provider))
        return None

    # -- discovery ------------------------------------------------------------

    def discover(self, service_id: Optional[str] = None, ontology_tag: Optional[str] = None,
                 deadline_s: float = DEFAULT_QUERY_DEADLINE_S,
                 callback: Optional[Callable[[DiscoveryResult], None]] = None) -> ServiceQuery:
        now = self.net.k.now
        self._next_qid += 1
        qid = self.id * 1_000_000 + self._next_qid
        query = ServiceQuery(query_id=qid, requester=self.id, service_id=service_id,
                             ontology_tag=ontology_tag, issued_at=now,
                             deadline=now + deadline_s)
        if service_id is not None and service_id in self.hosted:
            result = DiscoveryResult(query, self.hosted[service_id], 0.0, cache_hit=True)
            if callback:
                callback(result)
            return query
        hit = self.lookup_local(service_id, ontology_tag)
        if hit is not None:
            result = DiscoveryResult(query, hit.descriptor, 0.0, cache_hit=True)
            if callback:
                callback(result)
            return query
        timeout_id = self.net.k.schedule(query.deadline,
                                         lambda: self._query_timeout(qid),
                                         target=f"n{self.id}", kind="query-timeout")
        self.sequence += 1
        self._open_queries[qid] = {"query": query, "callback": callback,
                                   "timeout": timeout_id}
        self._sreq_best[qid] = 0
        self.net.broadcast(self.id, SreqMsg(
            query_id=qid, requester=self.id, requester_seq=self.sequence,
            service_id=service_id, ontology_tag=ontology_tag, hop_count=1, ttl=self.ttl))
        return query

    def discover_gateway(self, deadline_s: float = DEFAULT_QUERY_DEADLINE_S,
                         callback: Optional[Callable[[DiscoveryResult], None]] = None) -> ServiceQuery:
        return self.discover(service_id=GATEWAY_SERVICE_ID, deadline_s=deadline_s,
                             callback=callback)

    def _query_timeout(self, qid: int) -> None:
        state = self._open_queries.pop(qid, None)
        if state is None:
            return
        result = DiscoveryResult(state["query"], None,
                                 self.net.k.now - state["query"].issued_at,
                                 cache_hit=False, timed_out=True)
        if state["callback"]:
            state["callback"](result)

    # -- message handling ------------------------------------------------------

    def app_receive(self, msg, from_id: int) -> None:
        if isinstance(msg, AdvertMsg):
            self._on_advert(msg, from_id)
        elif isinstance(msg, SreqMsg):
            self._on_sreq(msg, from_id)
        elif isinstance(msg, SrepMsg):
            self._on_srep(msg, from_id)

    def _on_advert(self, msg: AdvertMsg, from_id: int) -> None:
        desc = msg.descriptor
        key = (desc.provider, desc.service_id, desc.issued_at)
        if key in self._advert_seen or desc.provider == self.id:
            return
        self._advert_seen.add(key)
        desc = replace(desc, advertised_route=desc.advertised_route + [self.id])
        self.cache[(desc.service_id, desc.provider)] = ServiceCacheEntry(
            descriptor=desc, learned_at=self.net.k.now)
        # the carried route doubles as a route to the provider
        self._maybe_install(desc.provider, from_id, len(desc.advertised_route) - 1,
                            desc.provider_seq)
        if msg.hops_left > 1:
            self.net.broadcast(self.id, AdvertMsg(descriptor=desc,
                                                  hops_left=msg.hops_left - 1))

    def _local_answer(self, service_id, ontology_tag):
        for desc in self.hosted.values():
            if matches(desc, service_id, ontology_tag):
                return desc, 0
        entry = self.lookup_local(service_id, ontology_tag)
        if entry is not None:
            return entry.descriptor, len(entry.descriptor.advertised_route) - 1
        return None, 0

    def _on_sreq(self, msg: SreqMsg, from_id: int) -> None:
        self._maybe_install(msg.requester, from_id, msg.hop_count, msg.requester_seq)
        best = self._sreq_best.get(msg.query_id)
        if best is not None and msg.hop_count >= best:
            return
        self._sreq_best[msg.query_id] = msg.hop_count
        desc, dist = self._local_answer(msg.service_id, msg.ontology_tag)
        if desc is not None:
            self._send_srep(msg.requester, SrepMsg(
                query_id=msg.query_id, requester=msg.requester, descriptor=desc,
                dist_to_provider=dist, hop_count=0))
            return
        if msg.ttl > 1:
            self.net.broadcast(self.id, replace(
                msg, hop_count=msg.hop_count + 1, ttl=msg.ttl - 1))

    def _send_srep(self, requester: int, msg: SrepMsg) -> None:
        entry = self.routes.get(requester)
        if entry is None or entry.expires_at < self.net.k.now:
            return
        self.net.send(self.id, entry.next_hop, msg)

    def _on_srep(self, msg: SrepMsg, from_id: int) -> None:
        dist = msg.dist_to_provider + 1
        self._maybe_install(msg.descriptor.provider, from_id, dist,
                            msg.descriptor.provider_seq)
        if self.id == msg.requester:
            state = self._open_queries.pop(msg.query_id, None)
            if state is None:
                return  # later reply; first one won
            self.net.k.cancel(state["timeout"])
            query = state["query"]
            result = DiscoveryResult(query, msg.descriptor,
                                     self.net.k.now - query.issued_at, cache_hit=False)
            if state["callback"]:
                state["callback"](result)
            return
        self._send_srep(msg.requester, replace(msg, dist_to_provider=dist,
                                               hop_count=msg.hop_count + 1))
