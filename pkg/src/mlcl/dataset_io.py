"""Binary dataset container with per-instance checksums.

Little-endian layout:

    header:   magic "MLCL" | version u16 | grammar u8 | layout u8
              | panel size u16 | instance count u32
    instance: seed u64 | correct index u8 | rule count u8
              | per rule: substructure u8, relation u8, object u8 (0xFF if
                absent), attribute u8, axis u8
              | 16 panels (context then choices): cell count u8, cells u8...,
                type u8, size u8, color u8
              | 16 rasters, raw u8, panel_size^2 each
              | dense bit-string: length u8 + ASCII
              | sparse bit-string: length u8 + ASCII
              | crc32 u32 over everything above (per instance)

Reading validates the magic, the version, the instance checksums, and that
the file ends exactly after the advertised count.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .generator import AppliedRule, PanelSpec, RpmInstance, get_layout
from .rules import (
    Grammar,
    PairAttribute,
    PairRelation,
    Rule,
    TripleAttribute,
    TripleObject,
    TripleRelation,
    encode_dense,
    encode_sparse,
)

MAGIC = b"MLCL"
VERSION = 1

_GRAMMAR_CODES = {Grammar.PAIR: 0, Grammar.TRIPLE: 1}
_LAYOUT_CODES = {"center": 0, "grid2x2": 1, "grid3x3": 2}
_LAYOUT_NAMES = {v: k for k, v in _LAYOUT_CODES.items()}
_NO_OBJECT = 0xFF


class DatasetFormatError(ValueError):
    """File is not a dataset container or its header is malformed."""


class DatasetVersionError(DatasetFormatError):
    """Container version is not supported."""


class DatasetTruncatedError(DatasetFormatError):
    """File ends before the advertised instance count."""


class DatasetChecksumError(DatasetFormatError):
    """An instance record fails its CRC32."""


def _pack_rule(applied: AppliedRule) -> bytes:
    rule = applied.rule
    obj = _NO_OBJECT if rule.obj is None else rule.obj.value
    return struct.pack("<BBBBB", rule.substructure, rule.relation.value, obj,
                       rule.attribute.value, applied.axis)


def _unpack_rule(grammar: Grammar, raw: bytes) -> AppliedRule:
    sub, rel, obj, attr, axis = struct.unpack("<BBBBB", raw)
    if grammar is Grammar.PAIR:
        rule = Rule(Grammar.PAIR, PairRelation(rel), PairAttribute(attr), substructure=sub)
    else:
        rule = Rule(Grammar.TRIPLE, TripleRelation(rel), TripleAttribute(attr),
                    obj=TripleObject(obj))
    return AppliedRule(rule, axis)


def _pack_panel(panel: PanelSpec) -> bytes:
    return struct.pack(f"<B{panel.count}BBBB", panel.count, *panel.positions,
                       panel.shape_type, panel.size, panel.color)


def _pack_instance(instance: RpmInstance) -> bytes:
    parts = [struct.pack("<QBB", instance.seed, instance.correct_index,
                         len(instance.applied_rules))]
    for applied in instance.applied_rules:
        parts.append(_pack_rule(applied))
    for panel in instance.context + instance.choices:
        parts.append(_pack_panel(panel))
    for raster in instance.rasters():
        parts.append(raster.astype(np.uint8).tobytes())
    dense = encode_dense(instance.structure).bitstring.encode("ascii")
    sparse = encode_sparse(instance.structure).bitstring.encode("ascii")
    parts.append(struct.pack("<B", len(dense)) + dense)
    parts.append(struct.pack("<B", len(sparse)) + sparse)
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def write_dataset(instances, path) -> None:
    """Write instances to `path`; all must share one layout and panel size."""
    instances = list(instances)
    if instances:
        layouts = {i.layout for i in instances}
        sizes = {i.panel_size for i in instances}
        if len(layouts) != 1 or len(sizes) != 1:
            raise ValueError("dataset instances must share layout and panel size")
        layout_name = instances[0].layout
        panel_size = instances[0].panel_size
    else:
        layout_name, panel_size = "center", 0
    layout = get_layout(layout_name)
    header = MAGIC + struct.pack(
        "<HBBHI", VERSION, _GRAMMAR_CODES[layout.grammar],
        _LAYOUT_CODES[layout_name], panel_size, len(instances))
    with open(path, "wb") as fh:
        fh.write(header)
        for instance in instances:
            fh.write(_pack_instance(instance))


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DatasetTruncatedError(
                f"file ends at byte {len(self.data)}, needed {self.pos + n}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_dataset(path) -> list:
    """Read a dataset container; raises typed errors on any corruption."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    if cur.take(4) != MAGIC:
        raise DatasetFormatError("bad magic; not a dataset container")
    version, grammar_code, layout_code, panel_size, count = cur.unpack("<HBBHI")
    if version != VERSION:
        raise DatasetVersionError(f"unsupported container version {version}")
    if layout_code not in _LAYOUT_NAMES:
        raise DatasetFormatError(f"unknown layout code {layout_code}")
    layout_name = _LAYOUT_NAMES[layout_code]
    layout = get_layout(layout_name)
    if _GRAMMAR_CODES[layout.grammar] != grammar_code:
        raise DatasetFormatError("grammar byte disagrees with layout byte")

    instances = []
    for _ in range(count):
        start = cur.pos
        seed, correct_index, n_rules = cur.unpack("<QBB")
        applied = tuple(_unpack_rule(layout.grammar, cur.take(5)) for _ in range(n_rules))
        panels = []
        for _ in range(16):
            (n_cells,) = cur.unpack("<B")
            cells = cur.unpack(f"<{n_cells}B")
            shape_type, size_level, color = cur.unpack("<BBB")
            panels.append(PanelSpec(cells, shape_type, size_level, color))
        rasters = []
        for _ in range(16):
            raw = cur.take(panel_size * panel_size)
            rasters.append(np.frombuffer(raw, dtype=np.uint8).reshape(panel_size, panel_size))
        (dense_len,) = cur.unpack("<B")
        cur.take(dense_len)
        (sparse_len,) = cur.unpack("<B")
        cur.take(sparse_len)
        payload = data[start : cur.pos]
        (crc,) = cur.unpack("<I")
        if zlib.crc32(payload) != crc:
            raise DatasetChecksumError(f"checksum mismatch in instance {len(instances)}")
        instances.append(
            RpmInstance(
                layout=layout_name,
                panel_size=panel_size,
                context=tuple(panels[:8]),
                choices=tuple(panels[8:]),
                applied_rules=applied,
                correct_index=correct_index,
                seed=seed,
                context_rasters=tuple(rasters[:8]),
                choice_rasters=tuple(rasters[8:]),
            )
        )
    if cur.pos != len(data):
        raise DatasetFormatError(f"{len(data) - cur.pos} trailing bytes after last instance")
    return instances


def read_header(path) -> dict:
    """Header fields only, without loading instances."""
    with open(path, "rb") as fh:
        head = fh.read(4 + struct.calcsize("<HBBHI"))
    cur = _Cursor(head)
    if cur.take(4) != MAGIC:
        raise DatasetFormatError("bad magic; not a dataset container")
    version, grammar_code, layout_code, panel_size, count = cur.unpack("<HBBHI")
    if version != VERSION:
        raise DatasetVersionError(f"unsupported container version {version}")
    return {
        "version": version,
        "grammar": "pair" if grammar_code == 0 else "triple",
        "layout": _LAYOUT_NAMES.get(layout_code, f"unknown({layout_code})"),
        "panel_size": panel_size,
        "count": count,
    }
