"""Writes LGTS frames straight from the byte layout, without the library.

Usage: write_lgts.py OUT_DIR

Each frame is listed in OUT_DIR/expected.json with its header fields and the
binary32 bit pattern of every value.
"""
import json
import pathlib
import random
import struct
import sys


def f32_bits(x):
    return struct.unpack("<I", struct.pack("<f", x))[0]


def write(path, step, values):
    header = b"LGTS" + struct.pack("<HHII", 1, 0, len(values), step)
    path.write_bytes(header + struct.pack("<%df" % len(values), *values))
    return {"vocab_size": len(values), "step": step, "bits": [f32_bits(v) for v in values]}


def main():
    out = pathlib.Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(1234)
    frames = {
        "tiny.lgts": (7, [1.0, -2.5, 0.0, 3.25e-5]),
        "random.lgts": (3, [rng.gauss(0.0, 4.0) for _ in range(5000)]),
        "edge.lgts": (2**32 - 1, [-0.0, 3.4e38, -1.17549435e-38, 1e-45]),
    }
    expected = {name: write(out / name, step, vals) for name, (step, vals) in frames.items()}
    (out / "expected.json").write_text(json.dumps(expected))


if __name__ == "__main__":
    main()
