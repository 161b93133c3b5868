"""Gateway inference from scan data.

Three estimation methods, strongest first:

* trace: with hopcount n the gateway is the hop at position n-1, and a
  single-hop target shares the scanner's own default gateway.
* singleton: when the whole dataset knows exactly one router, every
  gateway-less non-router node is pointed at it.
* usual suspects: the .1 and .254 finals of each targeted /24, counted
  only when the candidate already exists as a router in the dataset.

The network entry point falls out of the trace set: walking all host paths
in parallel, it is the hop right before the first position where the paths
diverge.  Everything here is pure over the dataset; confidences are knobs.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

from .model import (METHOD_PRECEDENCE, Dataset, DeviceClass, GatewayEstimate,
                    GatewayMethod, NodeRecord, SeedEntry, TargetSpec, TracePath,
                    address_sort_key)

CONFIDENCE_TRACE = 0.9
CONFIDENCE_SINGLETON = 0.6
CONFIDENCE_USUAL_SUSPECT = 0.4

USUAL_SUSPECT_FINALS = (1, 254)

#: Widest entry the usual-suspects candidate expansion will walk.  A /8
#: target already spans 65536 /24 blocks; anything wider is not a real
#: target list and contributes no candidates.
USUAL_SUSPECT_MIN_PREFIX = 8


@dataclass
class EstimateSet:
    """Candidates collected during one analysis pass, at most one per
    (node, method)."""

    estimates: dict[tuple[str, GatewayMethod], GatewayEstimate] = field(default_factory=dict)

    def add(self, estimate: GatewayEstimate) -> None:
        self.estimates[(estimate.node_id, estimate.method)] = estimate

    def extend(self, estimates: list[GatewayEstimate]) -> None:
        for e in estimates:
            self.add(e)

    def ordered(self) -> list[GatewayEstimate]:
        # Strongest method first, so a node settles in one transition and
        # the caller's changed-node count stays honest.
        return [self.estimates[k]
                for k in sorted(self.estimates,
                                key=lambda k: (k[0], METHOD_PRECEDENCE.index(k[1])))]


def estimate_gateway_by_trace(node: NodeRecord, scanner_dgw: str | None,
                              iteration: int,
                              confidence: float = CONFIDENCE_TRACE) -> GatewayEstimate | None:
    """Gateway from the node's newest trace.

    Single-hop targets sit in the scanner's own network, so their gateway is
    the scanner's; without a known scanner gateway there is nothing to say.
    For longer paths the estimate is the hop before the target, skipped when
    that position did not resolve to an address.
    """
    trace = node.latest_trace()
    if trace is None or trace.hopcount == 0:
        return None
    if trace.hopcount == 1:
        if scanner_dgw is None:
            return None
        gateway = scanner_dgw
    else:
        gateway = trace.hops[trace.hopcount - 2].address
        if gateway is None:
            return None
    if gateway == node.node_id:
        return None
    return GatewayEstimate(node_id=node.node_id, gateway_address=gateway,
                           method=GatewayMethod.TRACE, confidence=confidence,
                           iteration=iteration)


def compute_network_entry_point(traces: list[TracePath],
                                scanner_dgw: str | None) -> str | None:
    """Entry point of the mapped network from parallel trace walking.

    Only complete traces take part.  Any single-hop path puts the scanner
    inside the mapped network, so its own gateway is the entry point.  When
    all paths agree up to their end (a degenerate set), the last shared
    router position wins; a divergence already at the first hop falls back
    to the scanner's gateway.
    """
    usable = [t for t in traces if t.complete and t.hopcount > 0]
    if not usable:
        return None
    if any(t.hopcount == 1 for t in usable):
        return scanner_dgw
    sequences = [t.addresses() for t in usable]
    shortest = min(len(s) for s in sequences)
    divergence: int | None = None
    for idx in range(shortest):
        first = sequences[0][idx]
        if any(seq[idx] != first for seq in sequences[1:]):
            divergence = idx + 1
            break
    if divergence is None:
        if len({len(s) for s in sequences}) > 1:
            # identical prefixes, different lengths: position shortest+1
            # exists in some paths only, so they diverge right after
            divergence = shortest + 1
        else:
            # fully identical paths; final hop is the target, the hop
            # before it is the last shared router
            return sequences[0][-2] if len(sequences[0]) >= 2 else scanner_dgw
    if divergence == 1:
        return scanner_dgw
    return sequences[0][divergence - 2]


def network_entry_point_for(dataset: Dataset) -> str | None:
    """NEP over the newest complete traces of every non-router node.

    Router interfaces are not part of the host set the walk is defined
    over; a router's near-side interface answers in one hop and would
    otherwise drag the entry point down to the scanner's gateway.
    """
    traces = []
    for node in dataset.nodes.values():
        if node.device_class is DeviceClass.ROUTER:
            continue
        trace = node.latest_trace()
        if trace is not None and trace.complete:
            traces.append(trace)
    if not traces:
        return None
    return compute_network_entry_point(traces, dataset.meta.scanner_gateway)


def estimate_gateway_by_singleton(dataset: Dataset, iteration: int,
                                  confidence: float = CONFIDENCE_SINGLETON
                                  ) -> list[GatewayEstimate]:
    """When exactly one router is known, gateway-less nodes point at it."""
    routers = [n for n in dataset.nodes.values()
               if n.device_class is DeviceClass.ROUTER]
    if len(routers) != 1:
        return []
    router = routers[0]
    estimates = []
    for node in dataset.nodes.values():
        if node is router or node.device_class is DeviceClass.ROUTER:
            continue
        if node.gateway is not None:
            continue
        estimates.append(GatewayEstimate(
            node_id=node.node_id, gateway_address=router.node_id,
            method=GatewayMethod.SINGLETON, confidence=confidence,
            iteration=iteration))
    return estimates


def usual_suspect_candidates(targets: TargetSpec,
                             finals: tuple[int, ...] = USUAL_SUSPECT_FINALS) -> list[str]:
    """Candidate gateway addresses: the configured finals of each /24 the
    targets touch.  Narrow entries map to their containing /24, wide ones
    to every /24 they span; duplicates collapse."""
    candidates: set[str] = set()
    for net in targets.networks():
        if net.prefixlen >= 24:
            blocks = [net.supernet(new_prefix=24) if net.prefixlen > 24 else net]
        elif net.prefixlen < USUAL_SUSPECT_MIN_PREFIX:
            continue
        else:
            blocks = list(net.subnets(new_prefix=24))
        for block in blocks:
            base = int(block.network_address)
            for final in finals:
                candidates.add(str(ipaddress.IPv4Address(base + final)))
    return sorted(candidates, key=address_sort_key)


def estimate_gateway_by_usual_suspects(targets: TargetSpec, dataset: Dataset,
                                       iteration: int,
                                       confidence: float = CONFIDENCE_USUAL_SUSPECT,
                                       finals: tuple[int, ...] = USUAL_SUSPECT_FINALS
                                       ) -> list[GatewayEstimate]:
    """Point gateway-less hosts at router-classified finals of their /24."""
    estimates = []
    for candidate in usual_suspect_candidates(targets, finals):
        node = dataset.nodes.get(candidate)
        if node is None or node.device_class is not DeviceClass.ROUTER:
            continue
        block = ipaddress.IPv4Network((candidate, 24), strict=False)
        for other in dataset.nodes.values():
            if other.device_class is DeviceClass.ROUTER or other.gateway is not None:
                continue
            if other.node_id == candidate:
                continue
            if ipaddress.IPv4Address(other.node_id) in block:
                estimates.append(GatewayEstimate(
                    node_id=other.node_id, gateway_address=candidate,
                    method=GatewayMethod.USUAL_SUSPECT, confidence=confidence,
                    iteration=iteration))
    return estimates


def resolve_gateways(dataset: Dataset, estimate_set: EstimateSet) -> int:
    """Fold candidates into node records by method precedence.

    Idempotent and order-insensitive: candidates are applied in a canonical
    order and manual assignments always survive.  Returns how many nodes
    changed.
    """
    changed = 0
    for estimate in estimate_set.ordered():
        if estimate.node_id not in dataset.nodes:
            continue
        if dataset.apply_gateway_estimate(estimate):
            changed += 1
    return changed


def contribute_seeds(dataset: Dataset, origin_module: str, iteration: int) -> int:
    """Queue every trace hop address the dataset does not know yet.

    Scope filtering is the orchestrator's job, applied when seeds are
    consumed; the analyzer only reports what the traces revealed.
    """
    known = dataset.known_addresses()
    added = 0
    for node in dataset.nodes.values():
        for obs in node.observations:
            if obs.trace is None:
                continue
            for hop in obs.trace.hops:
                if hop.address is None or hop.address in known:
                    continue
                if dataset.add_seed(SeedEntry(address=hop.address,
                                              origin_module=origin_module,
                                              discovered_iteration=iteration)):
                    known.add(hop.address)
                    added += 1
    return added


def run_gateway_analysis(dataset: Dataset, targets: TargetSpec, iteration: int,
                         origin_module: str,
                         trace_confidence: float = CONFIDENCE_TRACE,
                         singleton_confidence: float = CONFIDENCE_SINGLETON,
                         usual_suspect_confidence: float = CONFIDENCE_USUAL_SUSPECT) -> int:
    """Full analyzer pass: all three methods, entry point, seeds.

    This is what the dgw-analyzer module id runs inside a policy chain.
    Returns the number of nodes whose resolved gateway changed.
    """
    estimate_set = EstimateSet()
    scanner_dgw = dataset.meta.scanner_gateway
    for node in dataset.nodes.values():
        estimate = estimate_gateway_by_trace(node, scanner_dgw, iteration,
                                             trace_confidence)
        if estimate is not None:
            estimate_set.add(estimate)
    estimate_set.extend(estimate_gateway_by_singleton(dataset, iteration,
                                                      singleton_confidence))
    estimate_set.extend(estimate_gateway_by_usual_suspects(
        targets, dataset, iteration, usual_suspect_confidence))
    changed = resolve_gateways(dataset, estimate_set)
    dataset.meta.network_entry_point = network_entry_point_for(dataset)
    contribute_seeds(dataset, origin_module, iteration)
    return changed
