"""Buffered scalar uniforms on top of a numpy Generator.

Sampling one customer outcome needs one or two uniforms; calling
``Generator.random()`` per draw dominates the simulator's profile.  Pulling a
block at a time and handing out python floats keeps the draw sequence
identical to repeated scalar calls while being several times faster.
"""

from __future__ import annotations


class BufferedRandom:
    """Wraps a numpy Generator; ``random()`` yields the same stream as the
    generator's own scalar ``random()`` calls would."""

    __slots__ = ("_generator", "_block", "_buf", "_pos", "_end")

    def __init__(self, generator, block: int = 4096):
        self._generator = generator
        self._block = block
        self._buf = None
        self._pos = 0
        self._end = 0

    def random(self) -> float:
        if self._pos >= self._end:
            self._buf = self._generator.random(self._block)
            self._pos = 0
            self._end = self._block
        value = self._buf.item(self._pos)
        self._pos += 1
        return value
