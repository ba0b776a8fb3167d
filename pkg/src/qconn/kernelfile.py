"""Bit-exact binary kernel files.

Layout (little-endian, no padding)::

    magic    5 bytes   b"QCON1"
    version  u16       1
    d        u8        lattice dimension
    n_j      3 x u32   sites per axis, unused axes written as 0
    N        u16       fiber dimension
    hbar     f64       0.0 for kernels that are not q-connection kernels

followed by the table in row-major (x, y, a, b) order, each entry a complex128
stored as real then imaginary float64.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DomainError
from .operators import KernelOperator

MAGIC = b"QCON1"
VERSION = 1
_HEADER = struct.Struct("<5sHB3IHd")


class KernelFormatError(DomainError):
    """Malformed, truncated or incompatible kernel file."""


def encode_kernel(kernel):
    lat = kernel.lattice
    shape = tuple(lat.shape) + (0,) * (3 - lat.d)
    hbar = float(getattr(kernel, "hbar", 0.0))
    header = _HEADER.pack(MAGIC, VERSION, lat.d, *shape, kernel.n, hbar)
    payload = np.ascontiguousarray(kernel.table, dtype="<c16").tobytes()
    return header + payload


def decode_header(data):
    if len(data) < _HEADER.size:
        raise KernelFormatError("file shorter than the header")
    magic, version, d, n1, n2, n3, n, hbar = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise KernelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise KernelFormatError(f"unsupported version {version}")
    if not 1 <= d <= 3:
        raise KernelFormatError(f"bad dimension {d}")
    shape = (n1, n2, n3)[:d]
    if any(v < 1 for v in shape) or n < 1:
        raise KernelFormatError("bad site counts or fiber dimension")
    return {"version": version, "d": d, "shape": shape, "N": n, "hbar": hbar}


def decode_kernel(data, lattice):
    """Rebuild a kernel on ``lattice`` (which must match the header)."""
    header = decode_header(data)
    if tuple(lattice.shape) != header["shape"]:
        raise KernelFormatError(f"file lattice {header['shape']} does not match {lattice.shape}")
    s, n = lattice.n_sites, header["N"]
    expected = s * s * n * n * 16
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise KernelFormatError(f"payload has {len(payload)} bytes, expected {expected}")
    table = np.frombuffer(payload, dtype="<c16").reshape(s, s, n, n).astype(complex)
    hbar = header["hbar"]
    if 0.0 < hbar <= 1.0:
        from .qconnection import QConnectionKernel

        return QConnectionKernel(lattice, table, hbar=hbar)
    return KernelOperator(lattice, table)


def save_kernel(path, kernel):
    with open(path, "wb") as fh:
        fh.write(encode_kernel(kernel))


def load_kernel(path, lattice):
    with open(path, "rb") as fh:
        return decode_kernel(fh.read(), lattice)
