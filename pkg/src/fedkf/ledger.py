"""Private hash-chained ledger of trusted device IDs.

Blocks are hashed with SHA-256 over a fixed byte layout::

    index 0x1F timestamp 0x1F id_1 0x1E id_2 ... 0x1F prev_hash

(decimal ASCII integers, lowercase hex digest). Chains are immutable
values; :func:`append_block` returns a new chain.

On disk a chain is one block per line::

    index|timestamp|id1,id2,...|prev_hash|hash
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple

log = logging.getLogger(__name__)

GENESIS_PREV_HASH = "0" * 64
_UNIT_SEP = b"\x1f"
_RECORD_SEP = b"\x1e"
_FORBIDDEN_ID_CHARS = set("|,\n\r\x1e\x1f")


class LedgerError(Exception):
    pass


class ChainIntegrityError(LedgerError):
    pass


class DuplicateIdError(LedgerError):
    pass


class ChainFormatError(LedgerError):
    pass


def block_hash(index: int, timestamp: int, device_ids: Iterable[str], prev_hash: str) -> str:
    payload = _UNIT_SEP.join(
        [
            str(index).encode("ascii"),
            str(timestamp).encode("ascii"),
            _RECORD_SEP.join(i.encode("utf-8") for i in device_ids),
            prev_hash.lower().encode("ascii"),
        ]
    )
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Block:
    index: int
    timestamp: int
    device_ids: tuple[str, ...]
    prev_hash: str
    hash: str

    @classmethod
    def create(cls, index: int, timestamp: int, device_ids, prev_hash: str) -> "Block":
        ids = tuple(device_ids)
        return cls(index, timestamp, ids, prev_hash, block_hash(index, timestamp, ids, prev_hash))

    def recompute_hash(self) -> str:
        return block_hash(self.index, self.timestamp, self.device_ids, self.prev_hash)

    def to_line(self) -> str:
        return f"{self.index}|{self.timestamp}|{','.join(self.device_ids)}|{self.prev_hash}|{self.hash}"

    @classmethod
    def from_line(cls, line: str, lineno: int = 0) -> "Block":
        parts = line.rstrip("\r\n").split("|")
        if len(parts) != 5:
            raise ChainFormatError(f"line {lineno}: expected 5 '|'-separated fields, got {len(parts)}")
        index, timestamp, ids, prev_hash, digest = parts
        try:
            index_i = int(index)
            timestamp_i = int(timestamp)
        except ValueError as exc:
            raise ChainFormatError(f"line {lineno}: bad integer field ({exc})") from None
        return cls(index_i, timestamp_i, tuple(ids.split(",")) if ids else (), prev_hash, digest)


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, i: int) -> Block:
        return self.blocks[i]

    @property
    def tip_hash(self) -> str:
        return self.blocks[-1].hash

    def device_ids(self) -> list[str]:
        """All IDs in block order."""
        return [i for b in self.blocks for i in b.device_ids]

    def dumps(self) -> str:
        return "".join(b.to_line() + "\n" for b in self.blocks)

    @classmethod
    def loads(cls, text: str) -> "Chain":
        blocks = [
            Block.from_line(line, n)
            for n, line in enumerate(text.splitlines(), start=1)
            if line.strip()
        ]
        if not blocks:
            raise ChainFormatError("chain file holds no blocks")
        return cls(tuple(blocks))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Chain":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def with_block(self, i: int, **changes) -> "Chain":
        """Copy with one block's fields replaced verbatim (hash not recomputed)."""
        blocks = list(self.blocks)
        blocks[i] = replace(blocks[i], **changes)
        return Chain(tuple(blocks))


class VerificationReport(NamedTuple):
    ok: bool
    first_bad_index: int | None = None
    reason: str = ""

    def __str__(self) -> str:
        if self.ok:
            return "chain ok"
        return f"chain invalid at block {self.first_bad_index}: {self.reason}"


def genesis(timestamp: int = 0) -> Chain:
    return Chain((Block.create(0, timestamp, (), GENESIS_PREV_HASH),))


def verify_chain(chain: Chain) -> VerificationReport:
    """Check indices, linkage and stored hashes; report the lowest bad block."""
    if len(chain) == 0:
        return VerificationReport(False, 0, "empty chain")
    for i, block in enumerate(chain.blocks):
        if block.index != i:
            return VerificationReport(False, i, f"index {block.index} != position {i}")
        expected_prev = GENESIS_PREV_HASH if i == 0 else chain.blocks[i - 1].hash
        if block.prev_hash != expected_prev:
            return VerificationReport(False, i, "prev_hash does not link to previous block")
        if block.hash != block.recompute_hash():
            return VerificationReport(False, i, "stored hash does not match contents")
    return VerificationReport(True)


def _check_ids(device_ids) -> tuple[str, ...]:
    ids = tuple(device_ids)
    if not ids:
        raise LedgerError("a block needs at least one device ID")
    for i in ids:
        if not i or _FORBIDDEN_ID_CHARS & set(i):
            raise LedgerError(f"invalid device ID {i!r}")
    if len(set(ids)) != len(ids):
        raise DuplicateIdError("duplicate device ID within the new block")
    return ids


def append_block(chain: Chain, device_ids, timestamp: int | None = None) -> Chain:
    """Return a new chain with one more block authorising ``device_ids``.

    ``timestamp`` defaults to the previous block's timestamp + 1 so that
    simulated chains stay deterministic.
    """
    report = verify_chain(chain)
    if not report.ok:
        raise ChainIntegrityError(str(report))
    ids = _check_ids(device_ids)
    present = set(chain.device_ids())
    dupes = [i for i in ids if i in present]
    if dupes:
        raise DuplicateIdError(f"already authorised: {', '.join(dupes)}")
    tip = chain.blocks[-1]
    ts = tip.timestamp + 1 if timestamp is None else timestamp
    return Chain(chain.blocks + (Block.create(tip.index + 1, ts, ids, tip.hash),))


def is_authorized(chain: Chain, device_id: str) -> bool:
    """Look ``device_id`` up in a verified chain; a tampered chain grants nothing."""
    report = verify_chain(chain)
    if not report.ok:
        log.warning("ledger integrity alert: %s", report)
        return False
    return any(device_id in b.device_ids for b in chain.blocks)


def build_chain(device_ids, block_size: int | None = None, timestamp: int = 0) -> Chain:
    """Genesis plus the given IDs, ``block_size`` per block (all in one by default)."""
    chain = genesis(timestamp)
    ids = list(device_ids)
    size = block_size or max(len(ids), 1)
    for start in range(0, len(ids), size):
        chain = append_block(chain, ids[start : start + size])
    return chain
