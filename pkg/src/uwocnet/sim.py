"""Deterministic Monte-Carlo simulation of the full relay line.

Each round pushes one frame from the originator to the sink through the
node state machines, sampling bit errors on every link from a counter-based
substream keyed by (seed, round, hop).  Any bit flip - framing bits
included - kills the packet for packet-success accounting and terminates
the round's propagation, matching a no-FEC receiver where ground truth is
known.  Rounds are mutually independent, so they may be partitioned across
worker processes; counts aggregate order-independently and results are
bit-identical for every execution plan.
"""

from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import frame as fr
from . import node as nd
from .channel import ChannelParams, LinkSpec, attenuate, ook_ber
from .rng import Substream, derive_seed

_LINK_STREAM_TAG = 0xC4A7_0001
_SCENARIO_TAG = 0x5CEA_0001


@dataclass(frozen=True)
class NodeSpec:
    node_id: int
    auth_key: int
    role: nd.NodeRole


@dataclass(frozen=True)
class Topology:
    """Ordered relay line: first node originates, last node is the sink."""

    nodes: tuple[NodeSpec, ...]
    links: tuple[LinkSpec, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ValueError("a topology needs at least two nodes")
        if len(self.links) != len(self.nodes) - 1:
            raise ValueError("need exactly one link between consecutive nodes")
        roles = [n.role for n in self.nodes]
        if roles[0] is not nd.NodeRole.ORIGINATOR or roles[-1] is not nd.NodeRole.SINK:
            raise ValueError("first node must originate, last node must be the sink")
        if any(r is not nd.NodeRole.RELAY for r in roles[1:-1]):
            raise ValueError("interior nodes must be relays")
        ids = [n.node_id for n in self.nodes]
        keys = [n.auth_key for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be distinct")
        if len(set(keys)) != len(keys):
            raise ValueError("authentication keys must be distinct")

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.node_id for n in self.nodes)

    @property
    def key_chain(self) -> tuple[int, ...]:
        return tuple(n.auth_key for n in self.nodes)

    @property
    def hop_count(self) -> int:
        return len(self.links)

    def with_turbidity(self, turbidity_ntu: float) -> "Topology":
        links = tuple(replace(l, turbidity_ntu=turbidity_ntu) for l in self.links)
        return Topology(self.nodes, links)


def linear_topology(
    node_ids,
    auth_keys=None,
    link_distance_m: float = 4.0,
    turbidity_ntu: float = 0.0,
    extra_loss=None,
) -> Topology:
    """Build the standard line: equal-length hops, roles by position."""
    ids = tuple(node_ids)
    keys = tuple(auth_keys) if auth_keys is not None else fr.DEFAULT_KEY_TABLE[: len(ids)]
    if len(keys) != len(ids):
        raise ValueError("need one auth key per node")
    losses = tuple(extra_loss) if extra_loss is not None else (1.0,) * (len(ids) - 1)
    if len(losses) != len(ids) - 1:
        raise ValueError("need one extra_loss per link")
    nodes = []
    for i, (nid, key) in enumerate(zip(ids, keys)):
        role = (
            nd.NodeRole.ORIGINATOR
            if i == 0
            else nd.NodeRole.SINK
            if i == len(ids) - 1
            else nd.NodeRole.RELAY
        )
        nodes.append(NodeSpec(nid, key, role))
    links = tuple(
        LinkSpec(link_distance_m, turbidity_ntu, loss) for loss in losses
    )
    return Topology(tuple(nodes), links)


@dataclass
class HopStats:
    """Counts and rates for one hop of one scenario."""

    hop_index: int
    link_distance_m: float
    packets_attempted: int
    packets_delivered: int
    per_hop_psr: float  # conditional on intact arrival at the transmitter
    cumulative_psr: float  # fraction of originated packets intact after this hop
    mean_rx_lux: float
    mean_frame_bytes: float


@dataclass(frozen=True)
class MonitorRow:
    round_index: int
    time_s: float
    temperatures_c: tuple[float, ...]


@dataclass
class PsrReport:
    turbidity_ntu: float
    rounds: int
    seed: int
    hops: list[HopStats]
    monitor_rows: tuple[MonitorRow, ...] | None = None

    @property
    def final_cumulative_psr(self) -> float:
        return self.hops[-1].cumulative_psr


def transmit_over_link(
    data: bytes,
    link: LinkSpec,
    params: ChannelParams,
    stream: Substream,
) -> tuple[bytes, bool, float]:
    """Push one frame through one optical link.

    Serialization is 8N1, so 10 * len(data) bits cross the water; each
    flips independently with the link's OOK bit error probability (flip
    count ~ Binomial, positions uniform - the same joint law).  Start/stop
    bit flips corrupt the packet without changing the returned bytes.

    Returns (received bytes, corrupted flag, received lux).
    """
    rx_lux = attenuate(params, link)
    ber = ook_ber(rx_lux, params)
    n_bits = 10 * len(data)
    flips = stream.binomial(n_bits, ber)
    if flips == 0:
        return bytes(data), False, rx_lux
    buf = bytearray(data)
    for pos in stream.distinct_below(n_bits, flips):
        bit = pos % 10
        if 1 <= bit <= 8:  # data bits; 0 is the start bit, 9 the stop bit
            buf[pos // 10] ^= 1 << (bit - 1)  # LSB-first on the wire
    return bytes(buf), True, rx_lux


def scenario_seed(root_seed: int, turbidity_ntu: float) -> int:
    """Per-turbidity child seed, independent of sweep-list position."""
    (bits,) = struct.unpack("<Q", struct.pack("<d", float(turbidity_ntu)))
    return derive_seed(root_seed, _SCENARIO_TAG, bits)


def _fresh_states(
    topology: Topology, profile: nd.SensorProfile
) -> list[nd.NodeState]:
    states = []
    upstream: tuple[int, ...] = ()
    for spec in topology.nodes:
        states.append(
            nd.NodeState(
                spec.node_id,
                spec.role,
                spec.auth_key,
                expected_upstream_keys=upstream,
                profile=profile,
            )
        )
        upstream = upstream + (spec.auth_key,)
    return states


def _simulate_rounds(
    topology: Topology,
    params: ChannelParams,
    seed: int,
    first_round: int,
    last_round: int,
    slot_duration: float,
    profile: nd.SensorProfile,
    collect_monitor: bool,
) -> tuple[list[int], list[int], list[int], list[MonitorRow]]:
    """Simulate rounds [first_round, last_round); returns raw counters."""
    hops = topology.hop_count
    links = topology.links
    attempted = [0] * hops
    delivered = [0] * hops
    frame_bytes_sum = [0] * hops
    monitor: list[MonitorRow] = []
    round_time = hops * slot_duration
    # NodeStates are immutable values: every round starts from the same
    # idle template, so the list is rebuilt by copy, not reconstruction.
    template = _fresh_states(topology, profile)

    for rnd in range(first_round, last_round):
        states = list(template)
        t0 = rnd * round_time
        for h in range(hops):
            start = t0 + h * slot_duration
            end = start + slot_duration
            tx_state, actions = nd.step(states[h], nd.SlotStart("tx", start))
            states[h] = nd.step(tx_state, nd.SlotEnd(end))[0]
            data = next(
                (a.data for a in actions if isinstance(a, nd.TransmitBytes)), None
            )
            if data is None:
                raise RuntimeError(
                    f"node {states[h].node_id} had nothing to transmit in a live round"
                )
            attempted[h] += 1
            frame_bytes_sum[h] += len(data)
            stream = Substream(seed, _LINK_STREAM_TAG, rnd, h)
            rx_data, corrupted, _ = transmit_over_link(data, links[h], params, stream)
            if corrupted:
                break
            delivered[h] += 1
            rx_state, _ = nd.step(states[h + 1], nd.SlotStart("rx", start))
            rx_state, _ = nd.step(rx_state, nd.BytesArrived(rx_data, start))
            rx_state, actions = nd.step(rx_state, nd.SlotEnd(end))
            states[h + 1] = rx_state
            for act in actions:
                if isinstance(act, nd.DropPacket):
                    raise RuntimeError(
                        f"uncorrupted frame dropped at node "
                        f"{rx_state.node_id}: {act.reason.value} {act.detail}"
                    )
                if isinstance(act, nd.DeliverToMonitor) and collect_monitor:
                    temps = tuple(r.temperature_c for r in act.frame.records)
                    monitor.append(MonitorRow(rnd, act.time, temps))
    return attempted, delivered, frame_bytes_sum, monitor


def run_scenario(
    topology: Topology,
    params: ChannelParams,
    rounds: int,
    seed: int,
    *,
    slot_duration: float | None = None,
    bit_rate: float = 9600.0,
    profile: nd.SensorProfile | None = None,
    collect_monitor: bool = False,
    workers: int = 1,
) -> PsrReport:
    """Simulate `rounds` end-to-end relay rounds; deterministic in seed.

    slot_duration defaults to the smallest slot that fits the worst-case
    frame at bit_rate.  workers > 1 partitions rounds over processes; the
    per-(round, hop) substreams make any partition bit-identical to the
    serial run.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    profile = profile if profile is not None else nd.SensorProfile(seed=seed)
    if slot_duration is None:
        slot_duration = nd.min_slot_duration(len(topology.nodes), bit_rate)
    # Validates SlotTooShort and the pipeline structure once; round r's
    # windows are the round-0 windows shifted by r * hop_count * slot.
    nd.schedule(topology.node_ids, slot_duration, 0, bit_rate)

    hops = topology.hop_count
    chunk_args = []
    if workers > 1:
        bounds = [rounds * i // workers for i in range(workers + 1)]
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if lo < hi:
                chunk_args.append((lo, hi))
    else:
        chunk_args.append((0, rounds))

    attempted = [0] * hops
    delivered = [0] * hops
    frame_sum = [0] * hops
    monitor: list[MonitorRow] = []

    def merge(result) -> None:
        a, d, f, m = result
        for h in range(hops):
            attempted[h] += a[h]
            delivered[h] += d[h]
            frame_sum[h] += f[h]
        monitor.extend(m)

    if len(chunk_args) == 1:
        merge(
            _simulate_rounds(
                topology, params, seed, 0, rounds, slot_duration, profile,
                collect_monitor,
            )
        )
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _simulate_rounds,
                    topology, params, seed, lo, hi, slot_duration, profile,
                    collect_monitor,
                )
                for lo, hi in chunk_args
            ]
            for fut in futures:
                merge(fut.result())
    monitor.sort(key=lambda row: row.round_index)

    hop_stats = []
    for h in range(hops):
        lux = attenuate(params, topology.links[h])
        hop_stats.append(
            HopStats(
                hop_index=h,
                link_distance_m=topology.links[h].distance_m,
                packets_attempted=attempted[h],
                packets_delivered=delivered[h],
                per_hop_psr=delivered[h] / attempted[h] if attempted[h] else 0.0,
                cumulative_psr=delivered[h] / rounds,
                mean_rx_lux=lux,
                mean_frame_bytes=frame_sum[h] / attempted[h] if attempted[h] else 0.0,
            )
        )
    turbidities = {l.turbidity_ntu for l in topology.links}
    report_ntu = (
        topology.links[0].turbidity_ntu if len(turbidities) == 1 else float("nan")
    )
    return PsrReport(
        turbidity_ntu=report_ntu,
        rounds=rounds,
        seed=seed,
        hops=hop_stats,
        monitor_rows=tuple(monitor) if collect_monitor else None,
    )


def sweep(
    topology: Topology,
    params: ChannelParams,
    turbidities,
    rounds: int,
    seed: int,
    **kwargs,
) -> list[PsrReport]:
    """One run_scenario per turbidity, each on its own derived substream.

    Output order matches the input turbidity order; each scenario's seed
    depends only on (seed, turbidity value), not on list position.
    """
    turbidities = list(turbidities)
    if not turbidities:
        raise ValueError("need at least one turbidity")
    return [
        run_scenario(
            topology.with_turbidity(t),
            params,
            rounds,
            scenario_seed(seed, t),
            **kwargs,
        )
        for t in turbidities
    ]
