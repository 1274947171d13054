"""TEXE: a toy sectioned executable format and section injection.

Layout (all integers little-endian)::

    0   magic "TEXE"
    4   u16 alignment
    6   u16 section_count
    8   u16 entry_section
    10  zero padding up to 16
    16  section_count * 20-byte headers:
            8-byte name | u32 offset | u32 size | u8 flags | 3 zero bytes
    ..  payload area: each payload zero-padded to a multiple of alignment

Section offsets are measured from the start of the payload area (the byte
after the last section header). Payloads are stored back to back in table
order, so every offset is a multiple of the alignment and adding section
headers never changes the offsets already recorded in the table.
"""

from dataclasses import dataclass, field, replace
import struct

import numpy as np

MAGIC = b"TEXE"
HEADER_SIZE = 16
SECTION_HEADER_SIZE = 20
DEFAULT_ALIGNMENT = 512
FLAG_INJECTED = 0x01

_HEADER = struct.Struct("<4sHHH6x")
_SECTION = struct.Struct("<8sIIB3x")


class TexeError(ValueError):
    """Base class for malformed or inconsistent TEXE data."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class BadMagicError(TexeError):
    pass


class TruncatedError(TexeError):
    pass


class OverlappingSectionsError(TexeError):
    pass


class MisalignedPayloadError(TexeError):
    pass


class LayoutError(TexeError):
    """Structure that parses but violates a format rule (gaps, padding, entry)."""


def align_up(n, alignment):
    return -(-n // alignment) * alignment


@dataclass(frozen=True)
class SectionHeader:
    name: bytes
    offset: int
    size: int
    injected: bool = False

    def padded_size(self, alignment):
        return align_up(self.size, alignment)


@dataclass(frozen=True)
class TexeFile:
    sections: tuple
    payloads: tuple
    entry_section: int = 0
    alignment: int = DEFAULT_ALIGNMENT
    magic: bytes = field(default=MAGIC, repr=False)

    @property
    def payload_base(self):
        """Absolute file offset of the payload area."""
        return HEADER_SIZE + SECTION_HEADER_SIZE * len(self.sections)

    def section_start(self, index):
        return self.payload_base + self.sections[index].offset

    @property
    def file_size(self):
        return self.payload_base + sum(s.padded_size(self.alignment) for s in self.sections)

    def validate(self):
        """Raise :class:`TexeError` if any structural invariant is broken."""
        a = self.alignment
        if self.magic != MAGIC:
            raise BadMagicError(f"bad magic {self.magic!r}", 0)
        if a <= 0 or a & (a - 1) or a > 0xFFFF:
            raise LayoutError(f"alignment {a} is not a power of two <= 32768")
        if not self.sections:
            raise LayoutError("a TEXE file needs at least one section")
        if len(self.sections) > 0xFFFF:
            raise LayoutError("too many sections")
        if len(self.payloads) != len(self.sections):
            raise LayoutError("payload count does not match section count")
        if not 0 <= self.entry_section < len(self.sections):
            raise LayoutError(f"entry section {self.entry_section} out of range")
        expected = 0
        for i, (sec, payload) in enumerate(zip(self.sections, self.payloads)):
            where = HEADER_SIZE + SECTION_HEADER_SIZE * i
            if len(sec.name) != 8:
                raise LayoutError(f"section {i} name must be 8 bytes", where)
            if len(payload) != sec.size:
                raise LayoutError(f"section {i} payload length {len(payload)} != size {sec.size}", where)
            if sec.offset % a:
                raise MisalignedPayloadError(f"section {i} offset {sec.offset} not aligned to {a}", where)
            if sec.offset < expected:
                raise OverlappingSectionsError(f"section {i} overlaps its predecessor", where)
            if sec.offset > expected:
                raise LayoutError(f"gap before section {i}", where)
            expected += sec.padded_size(a)


def parse(data):
    """Parse and validate a serialized TEXE file.

    Raises
    ------
    BadMagicError, TruncatedError, OverlappingSectionsError,
    MisalignedPayloadError, LayoutError
    """
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        if data[:4] != MAGIC[: len(data[:4])]:
            raise BadMagicError(f"bad magic {data[:4]!r}", 0)
        raise TruncatedError(f"header needs {HEADER_SIZE} bytes, got {len(data)}", len(data))
    magic, alignment, count, entry = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}", 0)
    if any(data[10:HEADER_SIZE]):
        raise LayoutError("nonzero header padding", 10)
    if alignment == 0 or alignment & (alignment - 1):
        raise LayoutError(f"alignment {alignment} is not a power of two", 4)
    if count == 0:
        raise LayoutError("a TEXE file needs at least one section", 6)
    if entry >= count:
        raise LayoutError(f"entry section {entry} out of range", 8)
    base = HEADER_SIZE + SECTION_HEADER_SIZE * count
    if len(data) < base:
        raise TruncatedError("section table runs past end of file", len(data))

    sections, payloads = [], []
    expected = 0
    for i in range(count):
        where = HEADER_SIZE + SECTION_HEADER_SIZE * i
        if any(data[where + 17 : where + 20]):
            raise LayoutError(f"nonzero padding in section header {i}", where + 17)
        name, offset, size, flags = _SECTION.unpack_from(data, where)
        if offset % alignment:
            raise MisalignedPayloadError(f"section {i} offset {offset} not aligned to {alignment}", where + 8)
        if offset < expected:
            raise OverlappingSectionsError(f"section {i} overlaps its predecessor", where + 8)
        if offset > expected:
            raise LayoutError(f"gap before section {i}", where + 8)
        padded = align_up(size, alignment)
        start = base + offset
        if start + padded > len(data):
            raise TruncatedError(f"section {i} payload runs past end of file", len(data))
        if any(data[start + size : start + padded]):
            raise LayoutError(f"nonzero alignment padding in section {i}", start + size)
        sections.append(SectionHeader(name, offset, size, bool(flags & FLAG_INJECTED)))
        payloads.append(data[start : start + size])
        expected = offset + padded
    if base + expected != len(data):
        raise LayoutError(f"{len(data) - base - expected} trailing bytes", base + expected)
    return TexeFile(tuple(sections), tuple(payloads), entry, alignment)


def serialize(texe):
    """Canonical byte layout of ``texe``; refuses files that fail validation."""
    texe.validate()
    a = texe.alignment
    out = bytearray(texe.file_size)
    _HEADER.pack_into(out, 0, MAGIC, a, len(texe.sections), texe.entry_section)
    base = texe.payload_base
    for i, (sec, payload) in enumerate(zip(texe.sections, texe.payloads)):
        flags = FLAG_INJECTED if sec.injected else 0
        _SECTION.pack_into(out, HEADER_SIZE + SECTION_HEADER_SIZE * i, sec.name, sec.offset, sec.size, flags)
        start = base + sec.offset
        out[start : start + sec.size] = payload
    return bytes(out)


def build(payloads, names=None, entry_section=0, alignment=DEFAULT_ALIGNMENT, injected=None):
    """Lay out ``payloads`` back to back and return a validated :class:`TexeFile`."""
    payloads = [bytes(p) for p in payloads]
    names = names or [f".s{i}".encode() for i in range(len(payloads))]
    injected = injected or [False] * len(payloads)
    sections, offset = [], 0
    for name, payload, inj in zip(names, payloads, injected):
        sections.append(SectionHeader(name.ljust(8, b"\0")[:8], offset, len(payload), inj))
        offset += align_up(len(payload), alignment)
    texe = TexeFile(tuple(sections), tuple(payloads), entry_section, alignment)
    texe.validate()
    return texe


@dataclass(frozen=True)
class PlacementMap:
    """File offsets of the bytes an attack is allowed to overwrite."""

    offsets: np.ndarray
    sections_injected: int
    per_section: int
    file_size: int

    @property
    def d(self):
        return int(self.offsets.shape[0])

    @property
    def payload_bytes(self):
        return self.d

    def __eq__(self, other):
        if not isinstance(other, PlacementMap):
            return NotImplemented
        return (
            self.sections_injected == other.sections_injected
            and self.per_section == other.per_section
            and self.file_size == other.file_size
            and np.array_equal(self.offsets, other.offsets)
        )

    __hash__ = None


def inject_sections(texe, n_sections, payload, name_prefix=b".zx"):
    """Append ``n_sections`` injected sections that split ``payload`` evenly.

    Returns the new file and the :class:`PlacementMap` of its payload bytes.
    Alignment padding is excluded from the map. Original headers, payloads and
    table offsets are left untouched; only the payload area moves back by the
    size of the new headers.
    """
    payload = bytes(payload)
    if n_sections <= 0:
        raise ValueError("n_sections must be positive")
    if len(payload) == 0 or len(payload) % n_sections:
        raise ValueError(f"payload length {len(payload)} is not divisible into {n_sections} non-empty sections")
    per = len(payload) // n_sections
    a = texe.alignment
    sections = list(texe.sections)
    payloads = list(texe.payloads)
    offset = sum(s.padded_size(a) for s in sections)
    for j in range(n_sections):
        name = (name_prefix + str(j).encode()).ljust(8, b"\0")[:8]
        sections.append(SectionHeader(name, offset, per, True))
        payloads.append(payload[j * per : (j + 1) * per])
        offset += align_up(per, a)
    out = replace(texe, sections=tuple(sections), payloads=tuple(payloads))
    out.validate()

    first = len(texe.sections)
    starts = np.array([out.section_start(first + j) for j in range(n_sections)], dtype=np.int64)
    offsets = (starts[:, None] + np.arange(per, dtype=np.int64)[None, :]).ravel()
    return out, PlacementMap(offsets, n_sections, per, out.file_size)


def injection_growth(texe, placement):
    """Bytes added on disk by the injection that produced ``placement``."""
    return placement.sections_injected * (
        align_up(placement.per_section, texe.alignment) + SECTION_HEADER_SIZE
    )


def _check_placement(base, placement):
    if placement.file_size != base.file_size:
        raise ValueError("placement map does not belong to this file (size mismatch)")
    injected = [i for i, s in enumerate(base.sections) if s.injected]
    if len(injected) < placement.sections_injected:
        raise ValueError("placement map does not belong to this file (missing injected sections)")
    lo = base.section_start(injected[-placement.sections_injected])
    if placement.d and (placement.offsets[0] < lo or placement.offsets[-1] >= base.file_size):
        raise ValueError("placement offsets fall outside injected sections")


class Manipulator:
    """Fast repeated application of one placement map to one base file.

    Holds the base serialization as an array so each call only copies and
    scatters; use :func:`apply_manipulation` for one-off calls.
    """

    def __init__(self, base, placement):
        _check_placement(base, placement)
        self.base = base
        self.placement = placement
        self.baseline = np.frombuffer(serialize(base), dtype=np.uint8)
        self._offsets = placement.offsets
        # injected payloads are contiguous runs; slice assignment beats fancy indexing
        self._contiguous = placement.d > 0 and bool(
            placement.offsets[-1] - placement.offsets[0] + 1 == placement.d
        )

    def apply_array(self, content):
        content = np.asarray(content, dtype=np.uint8)
        if content.shape != (self.placement.d,):
            raise ValueError(f"content length {content.shape[0]} != placement size {self.placement.d}")
        out = self.baseline.copy()
        if self._contiguous:
            start = self._offsets[0]
            out[start : start + self.placement.d] = content
        else:
            out[self._offsets] = content
        return out

    def apply(self, content):
        if isinstance(content, (bytes, bytearray)):
            content = np.frombuffer(bytes(content), dtype=np.uint8)
        return self.apply_array(content).tobytes()


def apply_manipulation(base, placement, content):
    """Serialize ``base`` with the placement bytes replaced by ``content``."""
    return Manipulator(base, placement).apply(content)
