"""
Relay frame anatomy
===================

Builds the authenticated data frame hop by hop, prints the exact bytes on
the wire, and shows what a receiver does with a tampered key.
"""

from uwocnet import (
    AuthMismatch,
    Frame,
    SensorRecord,
    append_hop,
    decode_frame,
    encode_frame,
)


def dump(label, data):
    print(f"{label:<28} {data.hex(' ')}")


# The originator measures 20.0 degC and sends a one-key frame.  Watch the
# payload: 20.0 degC encodes to 0x3C00 and the 0x00 low byte is escaped to
# the pair 7d 20 so it cannot be confused with the end byte.
frame = Frame(key_chain=(180,), records=(SensorRecord(0, 20.0),))
dump("node 0 transmits", encode_frame(frame))

# Each relay appends its own key and reading; the chain grows in hop order.
frame = append_hop(frame, 170, SensorRecord(1, 20.25))
dump("node 1 transmits", encode_frame(frame))

frame = append_hop(frame, 154, SensorRecord(2, 19.75))
dump("node 2 transmits", encode_frame(frame))

# A receiver knows the key chain it should see and authenticates
# byte-for-byte before touching the payload.
decoded = decode_frame(encode_frame(frame), expected_keys=(180, 170, 154))
print("\ndecoded records:")
for record in decoded.records:
    print(f"  node {record.node_id}: {record.temperature_c:.4f} degC")

# Flip a single key byte in transit and the frame is rejected, with the
# position and both values reported.
tampered = bytearray(encode_frame(frame))
tampered[3] ^= 0x40  # second key byte
try:
    decode_frame(bytes(tampered), expected_keys=(180, 170, 154))
except AuthMismatch as exc:
    print(f"\ntampered frame rejected: {exc}")
