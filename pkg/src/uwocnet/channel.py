"""Optical link budget: turbidity-dependent attenuation, OOK detection, PSR.

The channel maps link geometry and water turbidity to received intensity
with a Beer-Lambert law whose attenuation coefficient grows linearly with
turbidity:

    rx_lux = source_lux * exp(-(c_clear + slope * NTU) * distance) * extra_loss

Detection is on-off keying against a fixed ambient floor: mark level is
ambient + rx_lux, space level is ambient, the decision threshold sits at
the midpoint, and receiver noise is additive Gaussian with RMS noise_sigma.
Both error directions then have probability Q(rx_lux / (2 * noise_sigma)),
so BER is at most 0.5 and the ambient level cancels out of the error rate.

Packets are serialized 8N1 (start bit + 8 data bits + stop bit per byte)
with no error correction, so a packet of B bytes survives with probability
(1 - ber)^(10*B).

calibrate() fits the free channel coefficients to measured packet success
rates with a bounded grid search refined by coordinate descent - fixed
iteration budgets throughout, so fitting is deterministic and repeatable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.special import erfcinv

from .frame import nominal_frame_length

BITS_PER_BYTE_ON_WIRE = 10  # 8N1: start + 8 data + stop


@dataclass(frozen=True)
class ChannelParams:
    """Optical channel coefficients, lux-denominated."""

    source_lux: float  # intensity at the transmitter aperture, > 0
    clear_water_attenuation: float  # 1/m, >= 0
    turbidity_slope: float  # 1/(m*NTU), >= 0
    ambient_lux: float = 100.0  # background light, [0, 10000]
    noise_sigma: float = 1.0  # lux-equivalent RMS receiver noise, > 0

    def __post_init__(self) -> None:
        fields = (
            self.source_lux,
            self.clear_water_attenuation,
            self.turbidity_slope,
            self.ambient_lux,
            self.noise_sigma,
        )
        if not all(math.isfinite(v) for v in fields):
            raise ValueError("channel parameters must be finite")
        if self.source_lux <= 0:
            raise ValueError("source_lux must be > 0")
        if self.clear_water_attenuation < 0:
            raise ValueError("clear_water_attenuation must be >= 0")
        if self.turbidity_slope < 0:
            raise ValueError("turbidity_slope must be >= 0")
        if not 0 <= self.ambient_lux <= 10000:
            raise ValueError("ambient_lux must be in [0, 10000]")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")

    def attenuation_at(self, turbidity_ntu: float) -> float:
        """Total attenuation coefficient c(NTU), 1/m."""
        return self.clear_water_attenuation + self.turbidity_slope * turbidity_ntu


@dataclass(frozen=True)
class LinkSpec:
    """One optical hop: geometry, water state, optional extra loss."""

    distance_m: float
    turbidity_ntu: float = 0.0
    extra_loss: float = 1.0  # multiplicative factor in (0, 1]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.distance_m) and self.distance_m > 0):
            raise ValueError("distance_m must be finite and > 0")
        if not (math.isfinite(self.turbidity_ntu) and self.turbidity_ntu >= 0):
            raise ValueError("turbidity_ntu must be finite and >= 0")
        if not 0 < self.extra_loss <= 1:
            raise ValueError("extra_loss must be in (0, 1]")


def q_function(x: float) -> float:
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """Inverse of q_function on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("q_inverse needs p in (0, 1)")
    return float(math.sqrt(2.0) * erfcinv(2.0 * p))


def attenuate(params: ChannelParams, link: LinkSpec) -> float:
    """Received intensity in lux over one link."""
    c = params.attenuation_at(link.turbidity_ntu)
    return params.source_lux * math.exp(-c * link.distance_m) * link.extra_loss


def ook_ber(received_lux: float, params: ChannelParams) -> float:
    """Bit error probability of midpoint-threshold OOK detection.

    Mark = ambient + received, space = ambient; each level sits
    received/2 away from the threshold, noise is N(0, noise_sigma).
    """
    if received_lux < 0:
        raise ValueError("received_lux must be >= 0")
    return q_function(received_lux / (2.0 * params.noise_sigma))


def link_ber(params: ChannelParams, link: LinkSpec) -> float:
    """BER of one link: ook_ber of the attenuated intensity."""
    return ook_ber(attenuate(params, link), params)


def packet_success(ber: float, frame_bytes: int) -> float:
    """Probability a frame of frame_bytes survives with zero bit errors."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError("ber must be in [0, 1]")
    if frame_bytes < 1:
        raise ValueError("frame_bytes must be >= 1")
    return (1.0 - ber) ** (BITS_PER_BYTE_ON_WIRE * frame_bytes)


def cumulative_path_success(
    params: ChannelParams, links, frame_lengths
) -> list[float]:
    """Closed-form cumulative PSR after each hop.

    frame_lengths[j] is the byte length of the frame transmitted on hop j
    (frames grow by one key and one record per hop).
    """
    links = tuple(links)
    lengths = tuple(frame_lengths)
    if len(lengths) != len(links):
        raise ValueError("need one frame length per link")
    out = []
    acc = 1.0
    for link, nbytes in zip(links, lengths):
        acc *= packet_success(link_ber(params, link), nbytes)
        out.append(acc)
    return out


def hop_frame_lengths(node_ids) -> list[int]:
    """Deterministic frame sizes per hop for a relay line.

    The frame on hop j carries keys and records of nodes 0..j, so its
    skeleton length is nominal_frame_length(node_ids[:j+1]).
    """
    ids = tuple(node_ids)
    return [nominal_frame_length(ids[: j + 1]) for j in range(len(ids))]


@dataclass(frozen=True)
class CalibrationTarget:
    """One measured operating point the fit must reproduce."""

    turbidity_ntu: float
    total_distance_m: float
    hop_count: int
    target_psr: float

    def __post_init__(self) -> None:
        if self.hop_count < 1:
            raise ValueError("hop_count must be >= 1")
        if not 0.0 < self.target_psr < 1.0:
            raise ValueError("target_psr must be in (0, 1)")
        if self.total_distance_m <= 0:
            raise ValueError("total_distance_m must be > 0")


class CalibrationDiverged(Exception):
    def __init__(self, residuals: tuple[float, ...], tolerance: float) -> None:
        worst = max(residuals)
        super().__init__(
            f"calibration residuals {[f'{r:.3g}' for r in residuals]} "
            f"exceed tolerance {tolerance}"
        )
        self.residuals = residuals
        self.tolerance = tolerance


_FREE_FIELDS = ("clear_water_attenuation", "turbidity_slope", "noise_sigma")
_DEFAULT_FIXED = {"source_lux": 1000.0, "ambient_lux": 100.0}
# turbidity_slope and noise_sigma span orders of magnitude, so both are
# searched in log space; a slope of 1e-7 /(m*NTU) is indistinguishable
# from zero at tank scales (70 NTU * 16 m * 1e-7 ~ 1e-4 optical depths).
_BOUNDS = {
    "clear_water_attenuation": (0.0, 2.5),
    "turbidity_slope": (1e-7, 0.2),
    "noise_sigma": (1e-3, 100.0),
}
_LOG_AXES = frozenset({"turbidity_slope", "noise_sigma"})
_GRID_POINTS = 21
_DESCENT_PASSES = 40
_SCAN_POINTS = 257
_TERNARY_ITERS = 60


def model_cumulative_psr(
    params: ChannelParams, target: CalibrationTarget, node_ids=None
) -> float:
    """Model prediction of end-to-end PSR for one calibration target.

    node_ids are the transmitting nodes' ids in hop order (they shape the
    frame sizes); the default 0..hop_count-1 matches the standard line.
    """
    if node_ids is None:
        ids = range(target.hop_count)
    else:
        ids = tuple(node_ids)
        if len(ids) < target.hop_count:
            raise ValueError(
                f"need {target.hop_count} transmitting node ids, got {len(ids)}"
            )
        ids = ids[: target.hop_count]
    d = target.total_distance_m / target.hop_count
    link = LinkSpec(d, target.turbidity_ntu)
    lengths = hop_frame_lengths(ids)
    return cumulative_path_success(params, [link] * target.hop_count, lengths)[-1]


def calibrate(
    targets,
    fixed: dict[str, float] | None = None,
    tolerance: float = 0.005,
    node_ids=None,
) -> ChannelParams:
    """Fit free channel coefficients to measured cumulative PSR targets.

    targets: iterable of CalibrationTarget or (ntu, distance_m, hops, psr)
    tuples.  fixed: field name -> value for parameters held constant;
    anything in {clear_water_attenuation, turbidity_slope, noise_sigma} not
    fixed is fitted.  source_lux and ambient_lux always come from `fixed`
    or their defaults (1000 lux, 100 lux) - the error rate depends only on
    source/noise ratio, so the source level just sets the lux scale.

    Minimizes the sum of squared PSR errors with a bounded grid search
    refined by coordinate descent (ternary line searches, fixed budgets).
    Raises CalibrationDiverged if any per-target residual ends above
    `tolerance`.
    """
    targets = tuple(
        t if isinstance(t, CalibrationTarget) else CalibrationTarget(*t)
        for t in targets
    )
    if not targets:
        raise ValueError("need at least one calibration target")
    fixed = dict(fixed or {})
    unknown = set(fixed) - set(_FREE_FIELDS) - set(_DEFAULT_FIXED)
    if unknown:
        raise ValueError(f"unknown fixed parameter(s): {sorted(unknown)}")
    free = [f for f in _FREE_FIELDS if f not in fixed]
    if "turbidity_slope" in free:
        if len({t.turbidity_ntu for t in targets}) < 2:
            raise ValueError(
                "fitting turbidity_slope needs >= 2 targets with distinct "
                "turbidities (or fix it)"
            )

    base = dict(_DEFAULT_FIXED)
    base.update(fixed)

    def build(values: dict[str, float]) -> ChannelParams:
        merged = dict(base)
        merged.update(values)
        merged.setdefault("clear_water_attenuation", 0.0)
        merged.setdefault("turbidity_slope", 0.0)
        merged.setdefault("noise_sigma", 1.0)
        return ChannelParams(**merged)

    def sse(values: dict[str, float]) -> float:
        params = build(values)
        return sum(
            (model_cumulative_psr(params, t, node_ids) - t.target_psr) ** 2
            for t in targets
        )

    def to_axis(name: str, value: float) -> float:
        return math.log(value) if name in _LOG_AXES else value

    def from_axis(name: str, x: float) -> float:
        return math.exp(x) if name in _LOG_AXES else x

    def axis_range(name: str) -> tuple[float, float]:
        lo, hi = _BOUNDS[name]
        return to_axis(name, lo), to_axis(name, hi)

    def axis_points(name: str, count: int) -> list[float]:
        lo, hi = axis_range(name)
        return [
            from_axis(name, lo + (hi - lo) * i / (count - 1)) for i in range(count)
        ]

    # Stage 1: full grid over the free axes (ties resolve to the first
    # minimum, so the result does not depend on evaluation order).
    best_vals = {name: axis_points(name, _GRID_POINTS)[0] for name in free}
    if free:
        grids = [axis_points(name, _GRID_POINTS) for name in free]
        best_err = math.inf
        idx = [0] * len(free)
        while True:
            cand = {name: grids[k][idx[k]] for k, name in enumerate(free)}
            err = sse(cand)
            if err < best_err:
                best_err = err
                best_vals = cand
            for k in range(len(free) - 1, -1, -1):
                idx[k] += 1
                if idx[k] < len(grids[k]):
                    break
                idx[k] = 0
            else:
                break

    # Stage 2: coordinate descent.  Each line search scans its whole axis
    # (immune to the flat plateaus where every packet survives or dies)
    # and then ternary-refines inside the bracketing scan cell.
    def line_search(name: str, current: dict[str, float]) -> float:
        def eval_at(x: float) -> float:
            return sse({**current, name: from_axis(name, x)})

        lo, hi = axis_range(name)
        step = (hi - lo) / (_SCAN_POINTS - 1)
        best_i = 0
        best_e = math.inf
        for i in range(_SCAN_POINTS):
            e = eval_at(lo + i * step)
            if e < best_e:
                best_e = e
                best_i = i
        a = lo + max(best_i - 1, 0) * step
        b = lo + min(best_i + 1, _SCAN_POINTS - 1) * step
        for _ in range(_TERNARY_ITERS):
            m1 = a + (b - a) / 3.0
            m2 = b - (b - a) / 3.0
            if eval_at(m1) <= eval_at(m2):
                b = m2
            else:
                a = m1
        return from_axis(name, 0.5 * (a + b))

    if free:
        for _ in range(_DESCENT_PASSES):
            for name in free:
                best_vals[name] = line_search(name, best_vals)

    params = build(best_vals)
    residuals = tuple(
        abs(model_cumulative_psr(params, t, node_ids) - t.target_psr)
        for t in targets
    )
    if max(residuals) > tolerance:
        raise CalibrationDiverged(residuals, tolerance)
    return params


def fit_link_loss_overrides(
    params: ChannelParams,
    distances,
    turbidity_ntu: float,
    first_hop_psr: float,
    final_psr: float,
    node_ids=None,
) -> tuple[ChannelParams, tuple[float, ...]]:
    """Fit a hop-heterogeneous profile through two cumulative anchors.

    Returns (adjusted params, per-link extra_loss) such that the closed-form
    cumulative PSR at `turbidity_ntu` passes through first_hop_psr after
    hop 1 and final_psr after the last hop.  Hops 2..H keep extra_loss = 1;
    their common BER is met by rescaling noise_sigma (extra_loss is capped
    at 1, so a first hop *worse* than the rest can only be expressed by
    making the other hops cleaner).  Link 1 then gets extra_loss < 1.
    """
    distances = tuple(distances)
    hops = len(distances)
    if hops < 2:
        raise ValueError("need at least two hops to shape a profile")
    if not 0.0 < final_psr < first_hop_psr < 1.0:
        raise ValueError("need 0 < final_psr < first_hop_psr < 1")
    ids = tuple(node_ids) if node_ids is not None else tuple(range(hops))
    lengths = hop_frame_lengths(ids)

    bits0 = BITS_PER_BYTE_ON_WIRE * lengths[0]
    ber_first = 1.0 - first_hop_psr ** (1.0 / bits0)
    ratio = final_psr / first_hop_psr

    def tail_product(sigma: float) -> float:
        p = replace(params, noise_sigma=sigma)
        acc = 1.0
        for j in range(1, hops):
            ber = link_ber(p, LinkSpec(distances[j], turbidity_ntu))
            acc *= packet_success(ber, lengths[j])
        return acc

    # tail_product is monotone decreasing in sigma; bisect on log sigma.
    lo, hi = math.log(1e-6), math.log(1e4)
    if not tail_product(math.exp(lo)) >= ratio >= tail_product(math.exp(hi)):
        raise ValueError("hop profile targets unreachable for these parameters")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail_product(math.exp(mid)) >= ratio:
            lo = mid
        else:
            hi = mid
    sigma = math.exp(0.5 * (lo + hi))

    adjusted = replace(params, noise_sigma=sigma)
    rx_clean = attenuate(adjusted, LinkSpec(distances[0], turbidity_ntu))
    rx_needed = 2.0 * sigma * q_inverse(ber_first)
    loss0 = rx_needed / rx_clean
    if not 0.0 < loss0 <= 1.0:
        raise ValueError(
            f"first-hop extra_loss {loss0:.4g} falls outside (0, 1]; "
            "first_hop_psr is better than the clean-link model allows"
        )
    return adjusted, (loss0,) + (1.0,) * (hops - 1)
