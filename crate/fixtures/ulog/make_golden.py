#!/usr/bin/env python3
"""Regenerates one_float_param.ulg byte-by-byte with struct packing only."""
import struct

MAGIC = bytes([0x55, 0x4C, 0x6F, 0x67, 0x01, 0x12, 0x35])


def header(version, timestamp_us):
    return MAGIC + struct.pack("<BQ", version, timestamp_us)


def param_float(name, value):
    key = f"float {name}".encode("ascii")
    payload = struct.pack("<B", len(key)) + key + struct.pack("<f", value)
    return struct.pack("<HB", len(payload), ord("P")) + payload


if __name__ == "__main__":
    data = header(1, 1000) + param_float("MPC_XY_CRUISE", 5.0)
    with open("one_float_param.ulg", "wb") as f:
        f.write(data)
    print(data.hex(" "))
