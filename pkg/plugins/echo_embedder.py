#!/usr/bin/env python3
"""Reference embedder plugin: replies with the mean pixel intensity.

Speaks the length-prefixed stdio protocol (see docs/plugin_protocol.md)
using only the standard library, so it doubles as a template for wrapping
real models. Every response is the image's mean intensity in [0, 1],
repeated to the declared dimension; an all-black image embeds to zeros.
"""
import argparse
import json
import struct
import sys


def read_exact(stream, n):
    data = b""
    while len(data) < n:
        chunk = stream.read(n - len(data))
        if not chunk:
            return None
        data += chunk
    return data


def read_frame(stream):
    prefix = read_exact(stream, 4)
    if prefix is None:
        return None
    (length,) = struct.unpack(">I", prefix)
    return read_exact(stream, length)


def write_frame(stream, payload):
    stream.write(struct.pack(">I", len(payload)) + payload)
    stream.flush()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--name", default="echo")
    parser.add_argument("--mode", default="agnostic", choices=["agnostic", "aware"])
    parser.add_argument("--dim", type=int, default=5)
    args = parser.parse_args()

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    handshake = json.dumps({"name": args.name, "mode": args.mode, "dim": args.dim})
    write_frame(stdout, handshake.encode("utf-8"))

    while True:
        frame = read_frame(stdin)
        if frame is None:
            return
        (header_len,) = struct.unpack(">I", frame[:4])
        header = json.loads(frame[4 : 4 + header_len].decode("utf-8"))
        pixels = frame[4 + header_len :]
        expected = header["width"] * header["height"] * header["channels"]
        if len(pixels) != expected:
            raise SystemExit(f"expected {expected} pixel bytes, got {len(pixels)}")
        mean = (sum(pixels) / len(pixels) / 255.0) if pixels else 0.0
        reply = struct.pack(f"<{args.dim}d", *([mean] * args.dim))
        write_frame(stdout, reply)


if __name__ == "__main__":
    main()
