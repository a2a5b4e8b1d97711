"""Posting-time covert channel: prefix codes over the 24 UTC hour slots.

A codebook maps hour-of-day slots to bitstrings. Encoding walks the secret
bit stream through the code tree and emits one slot per codeword; scheduling
realizes the slots as concrete post times. A receiver who sees only the post
times recovers the slots from the hours and concatenates codewords back into
bits. Payload length travels out of band (schedule metadata), since the
channel itself carries no framing.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import isfinite, log2
from types import MappingProxyType
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DecodeError,
    EncodeError,
    ValidationError,
)

SLOT_COUNT = 24
SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class HourlyDistribution:
    """Probabilities of posting in each UTC hour slot [h, h+1)."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != SLOT_COUNT:
            raise ValidationError(f"need {SLOT_COUNT} probabilities, got {len(probs)}")
        for i, p in enumerate(probs):
            if not isfinite(p) or p < 0:
                raise ValidationError(f"slot {i} probability invalid: {p}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValidationError(f"probabilities sum to {sum(probs)!r}, expected 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls) -> "HourlyDistribution":
        return cls((1.0 / SLOT_COUNT,) * SLOT_COUNT)

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> "HourlyDistribution":
        if len(counts) != SLOT_COUNT:
            raise ValidationError(f"need {SLOT_COUNT} counts, got {len(counts)}")
        total = float(sum(counts))
        if total <= 0:
            raise ValidationError("counts sum to zero")
        return cls(tuple(c / total for c in counts))

    def support(self) -> tuple[int, ...]:
        """Slots with positive probability."""
        return tuple(i for i, p in enumerate(self.probs) if p > 0)

    def entropy_bits(self) -> float:
        """Shannon entropy of the slot distribution, in bits."""
        return -sum(p * log2(p) for p in self.probs if p > 0)


class Codebook:
    """Prefix-free map from hour slot to codeword bits."""

    __slots__ = ("_codes",)

    def __init__(self, codes: Mapping[int, str]):
        clean: dict[int, str] = {}
        for slot, code in codes.items():
            if not isinstance(slot, int) or not 0 <= slot < SLOT_COUNT:
                raise ValidationError(f"slot {slot!r} outside 0..{SLOT_COUNT - 1}")
            if not isinstance(code, str) or not code or set(code) - {"0", "1"}:
                raise ValidationError(f"slot {slot}: codeword must be nonempty bits, got {code!r}")
            clean[slot] = code
        # prefix check: after sorting, any prefix pair is adjacent
        ordered = sorted(clean.values())
        for a, b in zip(ordered, ordered[1:]):
            if b.startswith(a):
                raise ValidationError(f"codeword {a!r} is a prefix of {b!r} (or duplicate)")
        if self._kraft(clean) > 1:
            raise ValidationError("Kraft sum exceeds 1; not a prefix code")
        self._codes: Mapping[int, str] = MappingProxyType(dict(sorted(clean.items())))

    @staticmethod
    def _kraft(codes: Mapping[int, str]) -> Fraction:
        return sum((Fraction(1, 2 ** len(c)) for c in codes.values()), Fraction(0))

    @property
    def codes(self) -> Mapping[int, str]:
        return self._codes

    @property
    def kraft_sum(self) -> Fraction:
        return self._kraft(self._codes)

    @property
    def is_complete(self) -> bool:
        """True when the Kraft sum is exactly 1 (every bit walk terminates)."""
        return self.kraft_sum == 1

    @property
    def max_code_len(self) -> int:
        return max((len(c) for c in self._codes.values()), default=0)

    def __len__(self) -> int:
        return len(self._codes)

    def __contains__(self, slot: int) -> bool:
        return slot in self._codes

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return dict(self._codes) == dict(other._codes)

    def __hash__(self) -> int:
        return hash(tuple(self._codes.items()))

    def __repr__(self) -> str:
        return f"Codebook({len(self._codes)} slots, kraft={self.kraft_sum})"

    def expected_length(self, dist: HourlyDistribution) -> float:
        """Mean codeword length under a slot distribution covering this codebook."""
        total = 0.0
        for slot, p in enumerate(dist.probs):
            if p > 0:
                if slot not in self._codes:
                    raise ValidationError(f"slot {slot} has probability {p} but no codeword")
                total += p * len(self._codes[slot])
        return total

    def induced_distribution(self) -> HourlyDistribution:
        """Slot distribution produced by encoding independent fair bits.

        A symbol with an L-bit codeword is selected with probability 2^-L;
        defined only for complete codebooks.
        """
        if not self.is_complete:
            raise ValidationError("induced distribution requires a complete codebook (Kraft sum 1)")
        probs = [0.0] * SLOT_COUNT
        for slot, code in self._codes.items():
            probs[slot] = 2.0 ** -len(code)
        return HourlyDistribution(tuple(probs))

    def save(self, path) -> None:
        """Write the tab-separated ``slot<TAB>bits`` line format."""
        with open(path, "w", encoding="utf-8") as fh:
            for slot, code in self._codes.items():
                fh.write(f"{slot}\t{code}\n")

    @classmethod
    def load(cls, path) -> "Codebook":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_stream(fh)

    @classmethod
    def from_stream(cls, stream: IO) -> "Codebook":
        codes: dict[int, str] = {}
        for lineno, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"codebook line {lineno}: expected 'slot<TAB>bits', got {raw!r}")
            try:
                slot = int(parts[0])
            except ValueError:
                raise ValidationError(f"codebook line {lineno}: bad slot {parts[0]!r}") from None
            if slot in codes:
                raise ValidationError(f"codebook line {lineno}: duplicate slot {slot}")
            codes[slot] = parts[1]
        return cls(codes)


def reference_codebook() -> Codebook:
    """The bundled 24-slot codebook (8 four-bit and 16 five-bit codewords).

    This is the canonical complete prefix code used by the demos and tests;
    its induced distribution puts double weight on the afternoon/evening
    slots 13-20.
    """
    from importlib import resources

    path = resources.files("behavsteg").joinpath("data/reference_codebook.tsv")
    with path.open("r", encoding="utf-8") as fh:
        return Codebook.from_stream(fh)


def build_codebook(dist: HourlyDistribution) -> Codebook:
    """Huffman code over the slots with positive probability.

    Deterministic: the priority queue orders by (probability, creation index),
    leaves are created in slot order before any merge, and the first node
    popped at each merge takes the 0-branch. Zero-probability slots get no
    codeword, so encoding never schedules a post at an hour the population
    never uses.
    """
    support = dist.support()
    if len(support) < 2:
        raise CapacityError(
            f"need at least 2 slots with positive probability, got {len(support)}"
        )
    counter = itertools.count()
    nodes: dict[int, object] = {}
    heap: list[tuple[float, int]] = []
    for slot in support:
        idx = next(counter)
        nodes[idx] = slot
        heapq.heappush(heap, (dist.probs[slot], idx))
    while len(heap) > 1:
        p0, i0 = heapq.heappop(heap)
        p1, i1 = heapq.heappop(heap)
        idx = next(counter)
        nodes[idx] = (i0, i1)
        heapq.heappush(heap, (p0 + p1, idx))
    codes: dict[int, str] = {}
    stack = [(heap[0][1], "")]
    while stack:
        idx, prefix = stack.pop()
        payload = nodes[idx]
        if isinstance(payload, tuple):
            zero, one = payload
            stack.append((one, prefix + "1"))
            stack.append((zero, prefix + "0"))
        else:
            codes[payload] = prefix
    return Codebook(codes)


# --- encoding / decoding -----------------------------------------------------


def _check_bits(bits: str) -> None:
    if not isinstance(bits, str) or set(bits) - {"0", "1"}:
        raise ValidationError("bit sequence must be a string of '0'/'1'")


def _code_tree(codebook: Codebook) -> dict:
    """Bit trie: internal nodes are dicts keyed by '0'/'1', leaves are slots."""
    root: dict = {}
    for slot, code in codebook.codes.items():
        node = root
        for bit in code[:-1]:
            node = node.setdefault(bit, {})
        node[code[-1]] = slot
    return root


def encode(bits: str, codebook: Codebook) -> tuple[tuple[int, ...], int]:
    """Encode a bit string as a sequence of hour slots.

    Greedy prefix walk: bits are consumed until a codeword completes, emitting
    its slot. If the stream ends mid-codeword the walk is finished with zero
    bits; the count of those is returned as ``pad_bits``. With a complete
    codebook every walk terminates.
    """
    _check_bits(bits)
    root = _code_tree(codebook)
    slots: list[int] = []
    node = root
    for bit in bits:
        child = node.get(bit)
        if child is None:
            raise EncodeError(
                "bit stream reached a gap in an incomplete codebook (Kraft sum < 1)"
            )
        if isinstance(child, dict):
            node = child
        else:
            slots.append(child)
            node = root
    pad_bits = 0
    while node is not root:
        child = node.get("0")
        if child is None:
            raise EncodeError("cannot zero-pad final codeword with this incomplete codebook")
        pad_bits += 1
        if isinstance(child, dict):
            node = child
        else:
            slots.append(child)
            node = root
    return tuple(slots), pad_bits


def decode(slots: Sequence[int], codebook: Codebook, payload_bit_count: int) -> str:
    """Concatenate the slots' codewords and truncate to the payload length."""
    if payload_bit_count < 0:
        raise ValidationError("payload_bit_count must be >= 0")
    parts = []
    for slot in slots:
        code = codebook.codes.get(slot)
        if code is None:
            raise DecodeError(f"slot {slot} has no codeword; channel corrupted?")
        parts.append(code)
    bits = "".join(parts)
    if payload_bit_count > len(bits):
        raise DecodeError(
            f"payload_bit_count {payload_bit_count} exceeds {len(bits)} transmitted bits"
        )
    return bits[:payload_bit_count]


# --- scheduling ---------------------------------------------------------------


def schedule_timestamps(
    slots: Sequence[int], start: float, seed
) -> tuple[int, ...]:
    """Realize slots as strictly increasing UTC post times.

    Each timestamp falls in the earliest calendar occurrence of its hour slot
    strictly after the previous post (or after ``start``), at a seeded uniform
    second within the hour. Consecutive identical slots therefore roll to the
    next day. ``seed`` may be an int or a numpy Generator.
    """
    if start < 0:
        raise ValidationError("start must be >= 0")
    rng = np.random.default_rng(seed)
    out: list[int] = []
    prev = float(start)
    for slot in slots:
        if not isinstance(slot, (int, np.integer)) or not 0 <= slot < SLOT_COUNT:
            raise ValidationError(f"slot {slot!r} outside 0..{SLOT_COUNT - 1}")
        base = (prev // SECONDS_PER_DAY) * SECONDS_PER_DAY + slot * SECONDS_PER_HOUR
        if base <= prev:
            base += SECONDS_PER_DAY
        t = int(base) + int(rng.integers(0, SECONDS_PER_HOUR))
        out.append(t)
        prev = float(t)
    return tuple(out)


def recover_slots(timestamps: Sequence[float]) -> tuple[int, ...]:
    """Receiver side of scheduling: the UTC hour-of-day of each post time."""
    ts = list(timestamps)
    for a, b in zip(ts, ts[1:]):
        if b <= a:
            raise ValidationError(f"timestamps must be strictly increasing ({a} !< {b})")
    for t in ts:
        if t < 0:
            raise ValidationError(f"timestamp must be >= 0, got {t}")
    return tuple(int(t // SECONDS_PER_HOUR) % SLOT_COUNT for t in ts)


@dataclass(frozen=True)
class PostingSchedule:
    """A slot sequence realized as post times, with framing metadata.

    ``payload_bit_count`` is the out-of-band length the receiver needs to
    strip the zero padding; the concatenated codewords of ``slots`` equal the
    payload bits followed by ``pad_bits`` zeros.
    """

    slots: tuple[int, ...]
    timestamps: tuple[int, ...]
    pad_bits: int
    payload_bit_count: int

    def __post_init__(self):
        slots = tuple(int(s) for s in self.slots)
        timestamps = tuple(int(t) for t in self.timestamps)
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "timestamps", timestamps)
        if len(slots) != len(timestamps):
            raise ValidationError("slots and timestamps must have equal length")
        if self.pad_bits < 0:
            raise ValidationError("pad_bits must be >= 0")
        if self.payload_bit_count < 0:
            raise ValidationError("payload_bit_count must be >= 0")
        for a, b in zip(timestamps, timestamps[1:]):
            if b <= a:
                raise ValidationError("timestamps must be strictly increasing")
        for slot, t in zip(slots, timestamps):
            if t < 0:
                raise ValidationError("timestamps must be >= 0")
            if int(t // SECONDS_PER_HOUR) % SLOT_COUNT != slot:
                raise ValidationError(
                    f"timestamp {t} falls in hour {int(t // SECONDS_PER_HOUR) % SLOT_COUNT}, "
                    f"not slot {slot}"
                )

    def to_json(self) -> str:
        return json.dumps(
            {
                "slots": list(self.slots),
                "timestamps": list(self.timestamps),
                "pad_bits": self.pad_bits,
                "payload_bit_count": self.payload_bit_count,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PostingSchedule":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid schedule JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ValidationError("schedule JSON must be an object")
        missing = {"slots", "timestamps", "pad_bits", "payload_bit_count"} - set(obj)
        if missing:
            raise ValidationError(f"schedule JSON missing field(s): {', '.join(sorted(missing))}")
        return cls(
            tuple(obj["slots"]),
            tuple(obj["timestamps"]),
            int(obj["pad_bits"]),
            int(obj["payload_bit_count"]),
        )


def encode_to_schedule(
    bits: str, codebook: Codebook, start: float, seed
) -> PostingSchedule:
    """Encode bits and realize them as a posting schedule in one step."""
    slots, pad_bits = encode(bits, codebook)
    timestamps = schedule_timestamps(slots, start, seed)
    return PostingSchedule(slots, timestamps, pad_bits, len(bits))


def decode_schedule(schedule: PostingSchedule, codebook: Codebook) -> str:
    """Receiver path: recover slots from the post times and decode."""
    slots = recover_slots(schedule.timestamps)
    return decode(slots, codebook, schedule.payload_bit_count)
