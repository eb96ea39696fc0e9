"""Bit splitting, pilot-position index mapping, and block assembly.

Incoming bits are split into symbol bits (carried by data constellation
points) and index bits (carried by *where* the pilots sit inside each
subblock).  Index words address the lowest lexicographic-rank subsets of
pilot positions, except for the (subblock=4, pilots=2) case which keeps a
fixed four-row lookup table.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import Constellation, demap_hard_array, map_bits_array

__all__ = [
    "UnmappedPatternError",
    "BlockGeometry",
    "IndexPattern",
    "DataBlock",
    "index_bits_per_subblock",
    "select_indices",
    "rank_indices",
    "assemble_block",
    "disassemble_block",
    "se_conventional",
    "se_proposed",
    "se_fsc",
]


class UnmappedPatternError(ValueError):
    """A detected pilot position set has no index-bit preimage."""


# Fixed lookup for (subblock_length=4, pilots_per_subblock=2).  Deliberately
# not lexicographic: the fourth word maps to the outer pair {1, 4}.
_TABLE_4_2 = ((1, 2), (2, 3), (3, 4), (1, 4))


def index_bits_per_subblock(subblock_length: int, pilots_per_subblock: int) -> int:
    """Number of bits a subblock's pilot placement can carry."""
    _check_subblock(subblock_length, pilots_per_subblock)
    return math.comb(subblock_length, pilots_per_subblock).bit_length() - 1


def _check_subblock(subblock_length, pilots_per_subblock):
    if not 1 <= pilots_per_subblock < subblock_length:
        raise ValueError(
            f"need 1 <= pilots ({pilots_per_subblock}) < subblock length ({subblock_length})"
        )


def _unrank_lex(rank: int, n: int, k: int) -> tuple:
    """k-subset of {1..n} with lexicographic rank ``rank``."""
    out = []
    r = rank
    c = 1
    for remaining in range(k, 0, -1):
        while True:
            block = math.comb(n - c, remaining - 1)
            if r < block:
                break
            r -= block
            c += 1
        out.append(c)
        c += 1
    return tuple(out)


def _rank_lex(subset: tuple, n: int) -> int:
    rank = 0
    k = len(subset)
    prev = 0
    for j, c in enumerate(subset):
        for skipped in range(prev + 1, c):
            rank += math.comb(n - skipped, k - j - 1)
        prev = c
    return rank


@lru_cache(maxsize=None)
def _index_tables(subblock_length: int, pilots_per_subblock: int):
    """(word -> subset tuple, subset tuple -> word) for all mapped words."""
    bits = index_bits_per_subblock(subblock_length, pilots_per_subblock)
    if (subblock_length, pilots_per_subblock) == (4, 2):
        subsets = _TABLE_4_2
    else:
        subsets = tuple(
            _unrank_lex(r, subblock_length, pilots_per_subblock)
            for r in range(1 << bits)
        )
    return subsets, {s: w for w, s in enumerate(subsets)}


def select_indices(index_bits, subblock_length: int, pilots_per_subblock: int) -> tuple:
    """Map an index-bit word (MSB first) to its sorted pilot position set."""
    bits = index_bits_per_subblock(subblock_length, pilots_per_subblock)
    if len(index_bits) != bits:
        raise ValueError(f"expected {bits} index bits, got {len(index_bits)}")
    word = 0
    for b in index_bits:
        word = (word << 1) | int(b)
    subsets, _ = _index_tables(subblock_length, pilots_per_subblock)
    return subsets[word]


def rank_indices(indices, subblock_length: int, pilots_per_subblock: int) -> tuple:
    """Inverse of :func:`select_indices`.

    Raises :class:`UnmappedPatternError` for a well-formed position set that
    no index word maps to (possible whenever the number of subsets is not a
    power of two), which receivers use to flag undecodable subblocks.
    """
    subset = tuple(int(i) for i in indices)
    if len(subset) != pilots_per_subblock or sorted(set(subset)) != list(subset):
        raise ValueError(f"indices must be {pilots_per_subblock} distinct ascending values")
    if subset[0] < 1 or subset[-1] > subblock_length:
        raise ValueError(f"indices out of range 1..{subblock_length}: {subset}")
    bits = index_bits_per_subblock(subblock_length, pilots_per_subblock)
    _, reverse = _index_tables(subblock_length, pilots_per_subblock)
    word = reverse.get(subset)
    if word is None:
        raise UnmappedPatternError(f"pattern {subset} carries no index word")
    return tuple((word >> s) & 1 for s in range(bits - 1, -1, -1))


@dataclass(frozen=True)
class BlockGeometry:
    """Frame layout: how blocks split into subblocks, pilots, and preambles."""

    block_length: int = 64
    subblocks: int = 8
    pilots_per_subblock: int = 1
    preamble_length: int = 2
    init_preamble_length: int = 2
    blocks_per_frame: int = 100

    def __post_init__(self):
        if self.block_length < 2 or self.subblocks < 1:
            raise ValueError("block_length >= 2 and subblocks >= 1 required")
        if self.block_length % self.subblocks:
            raise ValueError(
                f"subblocks ({self.subblocks}) must divide block_length ({self.block_length})"
            )
        _check_subblock(self.subblock_length, self.pilots_per_subblock)
        if self.preamble_length < 1 or self.init_preamble_length < 1:
            raise ValueError("preamble lengths must be >= 1")
        if self.preamble_length >= self.block_length:
            raise ValueError("preamble_length must be smaller than block_length")
        if self.blocks_per_frame < 1:
            raise ValueError("blocks_per_frame must be >= 1")

    @property
    def subblock_length(self) -> int:
        return self.block_length // self.subblocks

    @property
    def data_per_subblock(self) -> int:
        return self.subblock_length - self.pilots_per_subblock

    @property
    def pilots_per_block(self) -> int:
        return self.subblocks * self.pilots_per_subblock

    @property
    def data_per_block(self) -> int:
        return self.block_length - self.pilots_per_block

    @property
    def frame_length(self) -> int:
        return self.blocks_per_frame * self.block_length

    @property
    def index_bits_per_subblock(self) -> int:
        return index_bits_per_subblock(self.subblock_length, self.pilots_per_subblock)

    @property
    def index_bits_per_block(self) -> int:
        return self.subblocks * self.index_bits_per_subblock

    def symbol_bits_per_block(self, data_order: int) -> int:
        return self.data_per_block * (data_order.bit_length() - 1)


@dataclass(frozen=True)
class IndexPattern:
    """Sorted pilot position sets, one tuple per subblock (positions 1-based)."""

    per_subblock: tuple

    def __post_init__(self):
        for g, subset in enumerate(self.per_subblock):
            if any(subset[i] >= subset[i + 1] for i in range(len(subset) - 1)):
                raise ValueError(f"subblock {g}: positions must be strictly ascending")
            if subset and subset[0] < 1:
                raise ValueError(f"subblock {g}: positions are 1-based")

    @classmethod
    def from_array(cls, positions: np.ndarray) -> "IndexPattern":
        """From a (subblocks, pilots) array of 0-based intra-subblock offsets."""
        return cls(tuple(tuple(int(i) + 1 for i in row) for row in positions))

    def to_array(self) -> np.ndarray:
        """(subblocks, pilots) array of 0-based intra-subblock offsets."""
        return np.asarray(self.per_subblock, dtype=np.int64) - 1

    def absolute_positions(self, geometry: BlockGeometry) -> np.ndarray:
        """Flat 0-based positions of every pilot inside the block."""
        offsets = self.to_array()
        base = np.arange(geometry.subblocks)[:, None] * geometry.subblock_length
        return (offsets + base).reshape(-1)


@dataclass(frozen=True)
class DataBlock:
    """One transmitted block plus the ground truth needed for scoring."""

    symbols: np.ndarray
    pattern: IndexPattern
    index_bits: np.ndarray
    symbol_bits: np.ndarray
    pilot_symbols: np.ndarray


def assemble_block(
    index_bits,
    symbol_bits,
    pilot_symbols,
    geometry: BlockGeometry,
    data_alphabet: Constellation,
) -> DataBlock:
    """Interleave data symbols with pilots at the positions the index bits select."""
    index_bits = np.asarray(index_bits, dtype=np.uint8).reshape(-1)
    symbol_bits = np.asarray(symbol_bits, dtype=np.uint8).reshape(-1)
    pilot_symbols = np.asarray(pilot_symbols, dtype=complex).reshape(-1)

    if index_bits.size != geometry.index_bits_per_block:
        raise ValueError(
            f"expected {geometry.index_bits_per_block} index bits, got {index_bits.size}"
        )
    n_symbol_bits = geometry.data_per_block * data_alphabet.bits_per_symbol
    if symbol_bits.size != n_symbol_bits:
        raise ValueError(f"expected {n_symbol_bits} symbol bits, got {symbol_bits.size}")
    if pilot_symbols.size != geometry.pilots_per_block:
        raise ValueError(
            f"expected {geometry.pilots_per_block} pilot symbols, got {pilot_symbols.size}"
        )

    per_sub = index_bits.reshape(geometry.subblocks, geometry.index_bits_per_subblock)
    pattern = IndexPattern(
        tuple(
            select_indices(row, geometry.subblock_length, geometry.pilots_per_subblock)
            for row in per_sub
        )
    )
    positions = pattern.absolute_positions(geometry)

    symbols = np.empty(geometry.block_length, dtype=complex)
    pilot_mask = np.zeros(geometry.block_length, dtype=bool)
    pilot_mask[positions] = True
    symbols[positions] = pilot_symbols
    symbols[~pilot_mask] = map_bits_array(symbol_bits, data_alphabet)

    return DataBlock(
        symbols=symbols,
        pattern=pattern,
        index_bits=index_bits,
        symbol_bits=symbol_bits,
        pilot_symbols=pilot_symbols,
    )


def disassemble_block(block: DataBlock, geometry: BlockGeometry, data_alphabet: Constellation):
    """Recover (index_bits, symbol_bits) from a block with known pattern."""
    index_bits = np.concatenate(
        [
            rank_indices(subset, geometry.subblock_length, geometry.pilots_per_subblock)
            for subset in block.pattern.per_subblock
        ]
    ).astype(np.uint8)
    positions = block.pattern.absolute_positions(geometry)
    pilot_mask = np.zeros(geometry.block_length, dtype=bool)
    pilot_mask[positions] = True
    symbol_bits = demap_hard_array(block.symbols[~pilot_mask], data_alphabet)
    return index_bits, symbol_bits


def se_conventional(block_length: int, preamble_length: int, order: int) -> float:
    """Bits per channel use with a fixed preamble eating into every block."""
    if not 0 < preamble_length < block_length:
        raise ValueError("need 0 < preamble_length < block_length")
    return (block_length - preamble_length) / block_length * math.log2(order)


def se_proposed(subblock_length: int, pilots_per_subblock: int, data_order: int) -> float:
    """Bits per channel use when pilot positions carry index bits."""
    bits = index_bits_per_subblock(subblock_length, pilots_per_subblock)
    data = (subblock_length - pilots_per_subblock) * math.log2(data_order)
    return (data + bits) / subblock_length


def se_fsc(block_length: int, cp_length: int, pilot_length: int, data_order: int) -> float:
    """Bits per channel use for the cyclic-prefix framed movable-pilot layout."""
    candidates = block_length - 2 * cp_length - pilot_length + 1
    if candidates < 1:
        raise ValueError("pilot sequence plus prefixes do not fit in the block")
    data = (block_length - 2 * cp_length - pilot_length) * math.log2(data_order)
    return (data + (candidates.bit_length() - 1)) / block_length
