"""Rate-1/2 feed-forward convolutional code, hard-decision Viterbi decoding
and a row/column block interleaver."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._accel import njit, pick


@dataclass(frozen=True)
class ConvCode:
    """Feed-forward rate-1/2 code given by two octal generators.

    The most significant generator bit taps the current input bit.
    """

    generators: tuple[int, int] = (0o171, 0o131)
    constraint_length: int = 7

    def __post_init__(self):
        for g in self.generators:
            if g <= 0 or g >= 1 << self.constraint_length:
                raise ValueError(f"generator {oct(g)} does not fit constraint length "
                                 f"{self.constraint_length}")

    @property
    def rate(self) -> float:
        return 0.5

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @cached_property
    def taps(self) -> np.ndarray:
        """(2, K) tap matrix, column 0 = current input."""
        k = self.constraint_length
        shifts = np.arange(k - 1, -1, -1)
        return np.array([(g >> shifts) & 1 for g in self.generators], dtype=np.uint8)

    @cached_property
    def branch_outputs(self) -> np.ndarray:
        """(n_states, 2, 2) coded pair emitted from state s on input bit u."""
        m = self.memory
        out = np.zeros((self.n_states, 2, 2), dtype=np.uint8)
        for s in range(self.n_states):
            for u in range(2):
                reg = (u << m) | s
                for j, g in enumerate(self.generators):
                    out[s, u, j] = bin(reg & g).count("1") & 1
        return out


DEFAULT_CODE = ConvCode()


def conv_encode(bits, code: ConvCode = DEFAULT_CODE) -> np.ndarray:
    """Encode with ``memory`` zero tail bits appended; output has 2 (n + memory) bits.

    Leading axes of ``bits`` are treated as independent blocks.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    lead, n = bits.shape[:-1], bits.shape[-1]
    padded = np.concatenate([bits, np.zeros(lead + (code.memory,), np.uint8)], axis=-1)
    length = n + code.memory
    out = np.zeros(lead + (length, 2), dtype=np.uint8)
    for j in range(2):
        acc = np.zeros(lead + (length,), dtype=np.uint8)
        for delay, tap in enumerate(code.taps[j]):
            if tap:
                acc[..., delay:] ^= padded[..., : length - delay]
        out[..., j] = acc
    return out.reshape(lead + (2 * length,))


@njit
def _viterbi_hard_loops(coded, outputs, memory):
    n_blocks, n_bits = coded.shape
    steps = n_bits // 2
    n_states = outputs.shape[0]
    half = n_states >> 1
    big = 1 << 30
    decided = np.zeros((n_blocks, steps), dtype=np.uint8)
    back = np.zeros((steps, n_states), dtype=np.int64)
    pm = np.empty(n_states, dtype=np.int64)
    new = np.empty(n_states, dtype=np.int64)
    for blk in range(n_blocks):
        pm[:] = big
        pm[0] = 0
        for t in range(steps):
            c0 = coded[blk, 2 * t]
            c1 = coded[blk, 2 * t + 1]
            for ns in range(n_states):
                u = ns // half
                base = (ns % half) * 2
                best = big * 2
                arg = base
                for b in range(2):
                    s = base + b
                    d = (outputs[s, u, 0] ^ c0) + (outputs[s, u, 1] ^ c1)
                    v = pm[s] + d
                    if v < best:
                        best = v
                        arg = s
                new[ns] = best
                back[t, ns] = arg
            for ns in range(n_states):
                pm[ns] = new[ns]
        state = 0
        for t in range(steps - 1, -1, -1):
            decided[blk, t] = state // half
            state = back[t, state]
    return decided


def _viterbi_hard_vectorised(coded, outputs, memory):
    n_blocks, n_bits = coded.shape
    steps = n_bits // 2
    n_states = outputs.shape[0]
    half = n_states >> 1
    ns = np.arange(n_states)
    u = ns // half
    preds = np.stack([(ns % half) * 2, (ns % half) * 2 + 1], axis=1)      # (S, 2)
    emit = outputs[preds, u[:, None]]                                     # (S, 2, 2)
    big = 1 << 30
    pm = np.full((n_blocks, n_states), big, dtype=np.int64)
    pm[:, 0] = 0
    back = np.zeros((steps, n_blocks, n_states), dtype=np.int8)
    for t in range(steps):
        c = coded[:, 2 * t: 2 * t + 2].astype(np.int64)                   # (B, 2)
        dist = (emit[None] ^ c[:, None, None, :]).sum(-1)                 # (B, S, 2)
        cand = pm[:, preds] + dist
        choice = np.argmin(cand, axis=-1)
        pm = np.take_along_axis(cand, choice[..., None], axis=-1)[..., 0]
        back[t] = choice
    decided = np.zeros((n_blocks, steps), dtype=np.uint8)
    state = np.zeros(n_blocks, dtype=np.int64)
    rows = np.arange(n_blocks)
    for t in range(steps - 1, -1, -1):
        decided[:, t] = state // half
        state = preds[state, back[t, rows, state]]
    return decided


_viterbi_hard = pick(_viterbi_hard_loops, _viterbi_hard_vectorised)


def viterbi_decode_hard(coded, code: ConvCode = DEFAULT_CODE) -> np.ndarray:
    """Maximum-likelihood decoding under the Hamming metric for zero-terminated blocks.

    Returns the information bits with the tail removed. Ties between
    survivors go to the lower-numbered predecessor state.
    """
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.shape[-1] % 2:
        raise ValueError("coded stream length must be even")
    lead = coded.shape[:-1]
    flat = np.ascontiguousarray(coded.reshape(-1, coded.shape[-1]))
    if flat.shape[1] // 2 < code.memory:
        raise ValueError("coded block shorter than the encoder tail")
    out = _viterbi_hard(flat, code.branch_outputs.astype(np.int64), code.memory)
    return out[:, : out.shape[1] - code.memory].reshape(lead + (-1,))


def free_distance(code: ConvCode = DEFAULT_CODE, max_len: int = 64) -> int:
    """Minimum weight of a path leaving and re-entering the zero state."""
    import heapq

    m = code.memory
    half = code.n_states >> 1
    outs = code.branch_outputs
    start_w = int(outs[0, 1].sum())
    heap = [(start_w, half, 1)]
    seen: dict[int, int] = {}
    while heap:
        w, s, depth = heapq.heappop(heap)
        if s == 0:
            return w
        if depth > max_len or seen.get(s, 1 << 30) <= w:
            continue
        seen[s] = w
        for u in range(2):
            ns = (u << (m - 1)) | (s >> 1)
            heapq.heappush(heap, (w + int(outs[s, u].sum()), ns, depth + 1))
    raise RuntimeError("no terminating path found")


@dataclass(frozen=True)
class BlockInterleaver:
    """Write row-wise into a rows x cols array, read column-wise.

    Input index i goes to output position (i mod cols) * rows + i // cols.
    Streams are zero-padded to a whole number of blocks.
    """

    rows: int = 512
    cols: int = 512

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @cached_property
    def permutation(self) -> np.ndarray:
        i = np.arange(self.size)
        return (i % self.cols) * self.rows + i // self.cols

    def padded_length(self, n: int) -> int:
        return -(-n // self.size) * self.size

    def interleave(self, bits) -> np.ndarray:
        bits = np.asarray(bits)
        n = bits.shape[-1]
        total = self.padded_length(n)
        padded = np.zeros(bits.shape[:-1] + (total,), dtype=bits.dtype)
        padded[..., :n] = bits
        blocks = padded.reshape(bits.shape[:-1] + (-1, self.size))
        out = np.empty_like(blocks)
        out[..., self.permutation] = blocks
        return out.reshape(padded.shape)

    def deinterleave(self, bits, length: int | None = None) -> np.ndarray:
        bits = np.asarray(bits)
        if bits.shape[-1] % self.size:
            raise ValueError("deinterleaver input must be a whole number of blocks")
        blocks = bits.reshape(bits.shape[:-1] + (-1, self.size))
        out = blocks[..., self.permutation].reshape(bits.shape)
        return out if length is None else out[..., :length]


def interleave(bits, interleaver: BlockInterleaver = BlockInterleaver()) -> np.ndarray:
    return interleaver.interleave(bits)


def deinterleave(bits, length: int | None = None,
                 interleaver: BlockInterleaver = BlockInterleaver()) -> np.ndarray:
    return interleaver.deinterleave(bits, length)
