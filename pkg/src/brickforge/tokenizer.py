"""Reversible tree serialization of brick assemblies.

A sequence is ``BOS, x0, y0, z0, h0, w0, (f, h, w, m)..., EOP, ..., EOS``:
an absolute root header followed, in BFS order, by each dequeued parent's
child tuples (sorted by f) and an EOP closing the group.  The maximal
trailing run of EOP tokens is stripped before EOS; the detokenizer treats
the end of the sequence as an implicit EOP for every pending parent, so the
two directions stay inverse to each other.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

from .attach import decode_attachment, encode_attachment
from .bricks import Brick, BrickAssembly, CATALOG_SIZES, place
from .errors import (
    BrickforgeError,
    MalformedHeaderError,
    MalformedSequenceError,
    TuplesAfterQueueEmptyError,
)
from .tokens import (
    BOS,
    EOP,
    EOS,
    KIND_COORD,
    KIND_EOP,
    KIND_EOS,
    KIND_F,
    KIND_M,
    KIND_SIZE,
    Token,
    TokenSequence,
    coord,
    f_token,
    m_token,
    size,
)
from .tree import build_spanning_tree


class NonMonotoneFWarning(UserWarning):
    """Child tuples within one group arrived with non-increasing f."""


def tokenize(assembly: BrickAssembly) -> TokenSequence:
    """Serialize a connected, collision-free assembly.

    Deterministic; raises DisconnectedGraphError when the attachment graph
    has more than one component.
    """
    tree = build_spanning_tree(assembly)
    bricks = assembly.bricks
    root = bricks[tree.root]
    body: list[Token] = [coord(root.x), coord(root.y), coord(root.z), size(root.h), size(root.w)]
    for p in tree.bfs_order:
        for c in tree.children[p]:
            code = encode_attachment(bricks[p], bricks[c])
            child = bricks[c]
            body += [f_token(code.f), size(child.h), size(child.w), m_token(code.m)]
        body.append(EOP)
    while body and body[-1].kind == KIND_EOP:
        body.pop()
    return TokenSequence([BOS] + body + [EOS])


def _parse_header(tokens: tuple[Token, ...]) -> Brick:
    if len(tokens) < 7 or tokens[0].kind != "BOS" or tokens[-1].kind != KIND_EOS:
        raise MalformedHeaderError("sequence must be BOS <header> ... EOS with 5 header tokens")
    hdr = tokens[1:6]
    kinds = [t.kind for t in hdr]
    if kinds != [KIND_COORD, KIND_COORD, KIND_COORD, KIND_SIZE, KIND_SIZE]:
        raise MalformedHeaderError(f"root header kinds {kinds}")
    x, y, z, h, w = (t.value for t in hdr)
    return Brick(h, w, x, y, z)


def _detokenize(sequence: TokenSequence):
    """Generator used by both modes: yields the assembly after each accepted
    brick; raises structural errors where strict mode would."""
    tokens = sequence.tokens
    assembly = BrickAssembly((_parse_header(tokens),))
    yield assembly
    body = tokens[6:-1]
    queue: deque[int] = deque()
    current: int | None = 0
    last_f = -1
    idx = 0
    while idx < len(body):
        tok = body[idx]
        if tok.kind == KIND_EOP:
            idx += 1
            if queue:
                current = queue.popleft()
                last_f = -1
            elif idx < len(body):
                raise TuplesAfterQueueEmptyError("tokens remain after the BFS queue drained")
            else:
                current = None
            continue
        if current is None:
            raise TuplesAfterQueueEmptyError("tokens remain after the BFS queue drained")
        group = body[idx:idx + 4]
        if len(group) < 4 or [t.kind for t in group] != [KIND_F, KIND_SIZE, KIND_SIZE, KIND_M]:
            raise MalformedSequenceError(
                f"expected (f,h,w,m) tuple at body position {idx}, got {group}")
        f, h, w, m = (t.value for t in group)
        if (h, w) not in CATALOG_SIZES:
            raise MalformedSequenceError(f"({h},{w}) not a catalog footprint")
        if f <= last_f:
            warnings.warn(NonMonotoneFWarning(f"f={f} after f={last_f} in one group"))
        parent = assembly.bricks[current]
        child = decode_attachment(f, m, parent, (h, w))
        assembly = place(assembly, child)
        queue.append(len(assembly.bricks) - 1)
        last_f = f
        idx += 4
        yield assembly


def detokenize(sequence: TokenSequence, mode: str = "strict") -> BrickAssembly:
    """Reconstruct the assembly encoded by a sequence.

    Strict mode raises on any structural violation; lenient mode returns the
    longest valid prefix assembly (see :func:`detokenize_lenient` for the
    diagnostic).
    """
    if mode == "strict":
        assembly = None
        for assembly in _detokenize(sequence):
            pass
        return assembly
    if mode == "lenient":
        return detokenize_lenient(sequence)[0]
    raise ValueError(f"unknown mode {mode!r}")


def detokenize_lenient(sequence: TokenSequence) -> tuple[BrickAssembly, str | None]:
    """Decode as far as possible; on the first structural violation return
    the prefix assembly together with a diagnostic string."""
    assembly = BrickAssembly()
    gen = _detokenize(sequence)
    while True:
        try:
            assembly = next(gen)
        except StopIteration:
            return assembly, None
        except BrickforgeError as err:
            return assembly, f"{err.code}: {err}"


@dataclass(frozen=True)
class SequenceStats:
    n_bricks: int
    n_eop: int
    length: int


def sequence_stats(sequence: TokenSequence) -> SequenceStats:
    """Report (N, I, T) for a well-formed sequence and check the length law
    T = 4N + I + 3 with T <= 5N + 2."""
    tokens = sequence.tokens
    _parse_header(tokens)
    body = tokens[6:-1]
    n = 1
    i = 0
    idx = 0
    while idx < len(body):
        if body[idx].kind == KIND_EOP:
            i += 1
            idx += 1
            continue
        group = body[idx:idx + 4]
        if len(group) < 4 or [t.kind for t in group] != [KIND_F, KIND_SIZE, KIND_SIZE, KIND_M]:
            raise MalformedSequenceError(f"expected (f,h,w,m) tuple at body position {idx}")
        n += 1
        idx += 4
    t = len(tokens)
    if t != 4 * n + i + 3:
        raise MalformedSequenceError(f"length {t} != 4N+I+3 for N={n}, I={i}")
    if t > 5 * n + 2:
        raise MalformedSequenceError(f"length {t} exceeds 5N+2 for N={n}")
    return SequenceStats(n_bricks=n, n_eop=i, length=t)
