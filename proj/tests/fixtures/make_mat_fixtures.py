#!/usr/bin/env python3
"""Writes the MAT fixtures used by the reader tests.

Two independent writers: scipy.io.savemat for ordinary files, and a small
struct-based packer for layouts scipy does not emit (big-endian, integer
storage, compressed elements). Run from any directory; output lands next to
this script.
"""

import struct
import zlib
from pathlib import Path

import numpy as np
import scipy.io

OUT = Path(__file__).resolve().parent

MI_INT8, MI_UINT8, MI_INT16, MI_UINT16, MI_INT32, MI_UINT32 = 1, 2, 3, 4, 5, 6
MI_SINGLE, MI_DOUBLE, MI_MATRIX, MI_COMPRESSED = 7, 9, 14, 15
MX_CHAR, MX_DOUBLE, MX_INT32 = 4, 6, 12
COMPLEX = 0x0800


def header(endian):
    text = b"MATLAB 5.0 MAT-file, fixture writer".ljust(116, b" ")
    version = struct.pack(endian + "H", 0x0100)
    return text + b"\0" * 8 + version + (b"IM" if endian == "<" else b"MI")


def pad8(b):
    return b + b"\0" * (-len(b) % 8)


def element(endian, tag, data, small_ok=True):
    if small_ok and 0 < len(data) <= 4:
        return struct.pack(endian + "I", (len(data) << 16) | tag) + data.ljust(4, b"\0")
    return pad8(struct.pack(endian + "II", tag, len(data)) + data)


def matrix(endian, name, dims, real, real_tag, cls=MX_DOUBLE, flags=0, imag=None):
    fmt = {MI_DOUBLE: "d", MI_SINGLE: "f", MI_INT8: "b", MI_UINT8: "B", MI_INT16: "h",
           MI_UINT16: "H", MI_INT32: "i", MI_UINT32: "I"}[real_tag]
    body = element(endian, MI_UINT32, struct.pack(endian + "II", cls | flags, 0), small_ok=False)
    body += element(endian, MI_INT32, struct.pack(endian + "%di" % len(dims), *dims), small_ok=False)
    body += element(endian, MI_INT8, name.encode())
    body += element(endian, real_tag, struct.pack(endian + "%d%s" % (len(real), fmt), *real), small_ok=False)
    if imag is not None:
        body += element(endian, real_tag, struct.pack(endian + "%d%s" % (len(imag), fmt), *imag), small_ok=False)
    return struct.pack(endian + "II", MI_MATRIX, len(body)) + body


def write(name, data):
    (OUT / name).write_bytes(data)


def main():
    # [[1,2],[3,4]] stored column-major.
    golden = [1.0, 3.0, 2.0, 4.0]
    write("golden_le.mat", header("<") + matrix("<", "A", [2, 2], golden, MI_DOUBLE))
    write("golden_be.mat", header(">") + matrix(">", "A", [2, 2], golden, MI_DOUBLE))

    # Doubles stored as int16 (MATLAB's storage narrowing) and an int32 class
    # with negative values that must sign-extend.
    ints = header("<")
    ints += matrix("<", "narrow", [3, 1], [-2, 0, 30000], MI_INT16)
    ints += matrix("<", "wide", [1, 3], [-70000, 5, 2147483647], MI_INT32, cls=MX_INT32)
    write("int_types.mat", ints)

    # A complex matrix and a char array are skipped; the real one survives.
    mixed = header("<")
    mixed += matrix("<", "z", [1, 2], [1.0, 2.0], MI_DOUBLE, flags=COMPLEX, imag=[3.0, 4.0])
    mixed += matrix("<", "txt", [1, 2], [104, 105], MI_UINT16, cls=MX_CHAR)
    mixed += matrix("<", "keep", [1, 1], [2.5], MI_DOUBLE)
    write("mixed.mat", mixed)

    # The golden element, deflated.
    inner = matrix("<", "A", [2, 2], golden, MI_DOUBLE)
    packed = zlib.compress(inner)
    write("compressed.mat", header("<") + struct.pack("<II", MI_COMPRESSED, len(packed)) + packed)

    # CWRU-style file written by scipy.
    t = np.arange(256, dtype=np.float64)
    de = 0.1 * np.sin(2 * np.pi * 29.95 * t / 12000.0) + 0.001 * t
    fe = 0.05 * np.cos(2 * np.pi * 107.4 * t / 12000.0)
    scipy.io.savemat(OUT / "cwru_like.mat",
                     {"X097_DE_time": de.reshape(-1, 1), "X097_FE_time": fe.reshape(-1, 1),
                      "X097RPM": np.array([[1797.0]])},
                     format="5", do_compression=False)
    (OUT / "cwru_like_DE.txt").write_text("".join(repr(float(v)) + "\n" for v in de))

    scipy.io.savemat(OUT / "ambiguous.mat",
                     {"X097_DE_time": de[:8].reshape(-1, 1), "X098_DE_time": de[8:16].reshape(-1, 1)},
                     format="5", do_compression=False)


if __name__ == "__main__":
    main()
