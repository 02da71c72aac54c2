"""
Optical link budget curves
==========================

Tabulates received intensity, OOK bit error rate, and packet success
probability against distance and turbidity for a fixed channel.  Pipe the
output into a plotting tool of your choice; nothing here draws.
"""

import numpy as np

from uwocnet import ChannelParams, LinkSpec, attenuate, link_ber, packet_success

params = ChannelParams(
    source_lux=1000.0,
    clear_water_attenuation=0.50,
    turbidity_slope=2.1e-4,
    ambient_lux=100.0,
    noise_sigma=18.0,
)
FRAME_BYTES = 12  # a two-hop frame

print("received lux and BER vs distance (clear water)")
print(f"{'d_m':>6} {'rx_lux':>10} {'ber':>12} {'packet_success':>15}")
for d in np.arange(1.0, 17.0, 1.0):
    link = LinkSpec(float(d), turbidity_ntu=0.01)
    rx = attenuate(params, link)
    ber = link_ber(params, link)
    ps = packet_success(ber, FRAME_BYTES)
    print(f"{d:>6.1f} {rx:>10.3f} {ber:>12.3e} {ps:>15.6f}")

print("\npacket success vs turbidity at 4 m")
print(f"{'ntu':>6} {'rx_lux':>10} {'ber':>12} {'packet_success':>15}")
for ntu in (0.01, 10, 20, 30, 40, 50, 60, 70, 85, 100):
    link = LinkSpec(4.0, turbidity_ntu=float(ntu))
    rx = attenuate(params, link)
    ber = link_ber(params, link)
    ps = packet_success(ber, FRAME_BYTES)
    print(f"{ntu:>6.2f} {rx:>10.3f} {ber:>12.3e} {ps:>15.6f}")

print("\nframe length exposure: longer frames die more often at fixed BER")
ber = link_ber(params, LinkSpec(4.0, 70.0))
for nbytes in (8, 12, 16, 20, 38):
    print(f"  {nbytes:>3} bytes -> packet success {packet_success(ber, nbytes):.6f}")
