"""Free-group word algebra.

Letters are signed generator indices: generator ``i`` (0-based) is ``i + 1``
and its inverse is ``-(i + 1)``.  In text, generators are lowercase and
inverses uppercase (``"abCd"``).
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class WordError(ValueError):
    pass


def _order_key(letter: int) -> int:
    # a < A < b < B < ...
    return 2 * letter - 2 if letter > 0 else -2 * letter - 1


class Basis:
    """An ordered list of generator names for a free group of given rank."""

    def __init__(self, rank: Optional[int] = None, names: Optional[Sequence[str]] = None):
        if names is None:
            if rank is None:
                raise WordError("need a rank or a list of names")
            if rank > 26:
                raise WordError("default names only cover rank <= 26")
            names = string.ascii_lowercase[:rank]
        names = tuple(names)
        if rank is not None and rank != len(names):
            raise WordError(f"rank {rank} does not match {len(names)} names")
        if len(names) < 1:
            raise WordError("rank must be positive")
        for n in names:
            if len(n) != 1 or not n.islower():
                raise WordError(f"generator names must be single lowercase letters, got {n!r}")
        if len(set(names)) != len(names):
            raise WordError("generator names must be distinct")
        self.names = names
        self.rank = len(names)
        self._lookup = {}
        for i, n in enumerate(names):
            self._lookup[n] = i + 1
            self._lookup[n.upper()] = -(i + 1)

    def __eq__(self, other):
        return isinstance(other, Basis) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"Basis({''.join(self.names)!r})"

    @property
    def letters(self) -> tuple:
        """All letters, ordered a, A, b, B, ..."""
        out = []
        for i in range(1, self.rank + 1):
            out += [i, -i]
        return tuple(out)

    def letter(self, symbol: str) -> int:
        try:
            return self._lookup[symbol]
        except KeyError:
            raise WordError(f"unknown generator symbol {symbol!r}") from None

    def symbol(self, letter: int) -> str:
        if letter == 0 or abs(letter) > self.rank:
            raise WordError(f"letter {letter} out of range for rank {self.rank}")
        name = self.names[abs(letter) - 1]
        return name if letter > 0 else name.upper()

    def parse_letters(self, text: str) -> tuple:
        """Parse without reducing.  Accepts ``"a b C"`` or compact ``"abC"``."""
        text = text.strip()
        if text in ("", "1", "e"):
            return ()
        tokens = text.split() if any(ch.isspace() for ch in text) else list(text)
        out = []
        for tok in tokens:
            if len(tok) != 1:
                # compact chunks inside a spaced word, e.g. "ab C"
                out.extend(self.letter(ch) for ch in tok)
            else:
                out.append(self.letter(tok))
        return tuple(out)

    def parse(self, text: str) -> "FreeWord":
        return reduce(self.parse_letters(text))

    def parse_cyclic(self, text: str) -> "CyclicWord":
        text = text.strip()
        if text.startswith("[") and text.endswith("]"):
            text = text[1:-1]
        return cyclic_normal_form(self.parse(text))

    def format(self, word: Iterable[int]) -> str:
        return "".join(self.symbol(x) for x in word)

    def generator(self, i: int) -> "FreeWord":
        return FreeWord((i + 1,))


class FreeWord(tuple):
    """A freely reduced word, stored as a tuple of signed letters.

    The constructor trusts its input; use :func:`reduce` for raw sequences.
    """

    __slots__ = ()

    def __repr__(self):
        return f"FreeWord({tuple(self)!r})"

    def __mul__(self, other):
        return reduce(tuple(self) + tuple(other))

    def __getitem__(self, item):
        out = tuple.__getitem__(self, item)
        if isinstance(item, slice):
            return FreeWord(out)
        return out

    def inverse(self) -> "FreeWord":
        return FreeWord(-x for x in reversed(self))


class CyclicWord(tuple):
    """Cyclically reduced word in canonical rotation (orientation preserved)."""

    __slots__ = ()

    def __repr__(self):
        return f"CyclicWord({tuple(self)!r})"

    def inverse(self) -> "CyclicWord":
        return cyclic_normal_form(FreeWord(-x for x in reversed(self)))

    def rotations(self):
        n = len(self)
        for i in range(n):
            yield FreeWord(self[i:] + self[:i])

    def as_word(self) -> FreeWord:
        return FreeWord(self)


def reduce(raw: Iterable[int]) -> FreeWord:
    stack = []
    for x in raw:
        if x == 0:
            raise WordError("0 is not a letter")
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return FreeWord(stack)


def inverse(w: Sequence[int]) -> FreeWord:
    return FreeWord(-x for x in reversed(w))


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def cyclic_reduce(w: Sequence[int]) -> FreeWord:
    """Strip the longest conjugating prefix/suffix pair of a reduced word."""
    t = tuple(w)
    n = len(t)
    i = 0
    while i < n - 1 - i and t[i] == -t[n - 1 - i]:
        i += 1
    return FreeWord(t[i:n - i])


def canonical_rotation(w: Sequence[int]) -> tuple:
    n = len(w)
    if n == 0:
        return ()
    keyed = [_order_key(x) for x in w]
    best = 0
    for i in range(1, n):
        if keyed[i:] + keyed[:i] < keyed[best:] + keyed[:best]:
            best = i
    return tuple(w[best:]) + tuple(w[:best])


def cyclic_normal_form(w: Sequence[int]) -> CyclicWord:
    """Canonical representative of the conjugacy class of ``w``.

    Orientation is kept: ``[ab]`` and ``[BA]`` are different classes.

    >>> cyclic_normal_form(reduce([2, 1, -2]))
    CyclicWord((1,))
    """
    return CyclicWord(canonical_rotation(cyclic_reduce(reduce(w))))


def unoriented_normal_form(w: Sequence[int]) -> CyclicWord:
    a = cyclic_normal_form(w)
    b = a.inverse()
    return min(a, b, key=lambda c: [_order_key(x) for x in c])


def is_root_free(w: Sequence[int]) -> bool:
    """True iff the cyclic word is not a proper power."""
    w = tuple(cyclic_reduce(reduce(w)))
    n = len(w)
    if n == 0:
        raise WordError("the trivial class has no root")
    for d in range(1, n // 2 + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return False
    return True


def _check_letters(word: Sequence[int], rank: int, what: str) -> None:
    for x in word:
        if x == 0 or abs(x) > rank:
            raise WordError(f"{what}: letter {x} outside rank {rank}")


@dataclass(frozen=True)
class Morphism:
    """An endomorphism of F_n given by generator images.

    ``declared_inverse`` is trusted only after :func:`verify_inverse_pair`.
    """

    images: tuple
    declared_inverse: Optional[tuple] = None

    def __post_init__(self):
        imgs = tuple(reduce(w) for w in self.images)
        object.__setattr__(self, "images", imgs)
        for i, w in enumerate(imgs):
            if not w:
                raise WordError(f"image of generator {i + 1} reduces to the identity")
            _check_letters(w, len(imgs), "image")
        if self.declared_inverse is not None:
            inv = tuple(reduce(w) for w in self.declared_inverse)
            if len(inv) != len(imgs):
                raise WordError("declared inverse has the wrong number of images")
            for w in inv:
                _check_letters(w, len(imgs), "inverse image")
            object.__setattr__(self, "declared_inverse", inv)
        object.__setattr__(self, "_plain", tuple(tuple(w) for w in imgs))
        object.__setattr__(self, "_plain_inv", tuple(tuple(-y for y in reversed(w)) for w in imgs))

    @property
    def rank(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, rank: int) -> "Morphism":
        gens = tuple(FreeWord((i + 1,)) for i in range(rank))
        return cls(gens, gens)

    @classmethod
    def from_strings(cls, basis: Basis, images: dict, inverse: Optional[dict] = None) -> "Morphism":
        """Images keyed by generator name; missing generators map to themselves."""
        for key in list(images) + list(inverse or {}):
            if key not in basis.names:
                raise WordError(f"unknown generator symbol {key!r}")
        imgs = tuple(basis.parse(images.get(n, n)) for n in basis.names)
        inv = None
        if inverse is not None:
            inv = tuple(basis.parse(inverse.get(n, n)) for n in basis.names)
        return cls(imgs, inv)

    def inverse(self) -> "Morphism":
        if self.declared_inverse is None:
            raise WordError("no declared inverse")
        return Morphism(self.declared_inverse, self.images)

    def letter_image(self, x: int) -> FreeWord:
        if x > 0:
            return self.images[x - 1]
        return self.images[-x - 1].inverse()

    def __call__(self, w: Sequence[int]) -> FreeWord:
        return apply_morphism(self, w)

    def power(self, k: int) -> "Morphism":
        """``self**k``; negative ``k`` uses the declared inverse."""
        base = self if k >= 0 else self.inverse()
        out = Morphism.identity(self.rank)
        for _ in range(abs(k)):
            out = compose_morphisms(base, out)
        return out


def apply_morphism(m: Morphism, w: Sequence[int]) -> FreeWord:
    imgs, inv = m._plain, m._plain_inv
    stack = []
    for x in tuple(w):
        for y in (imgs[x - 1] if x > 0 else inv[-x - 1]):
            if stack and stack[-1] == -y:
                stack.pop()
            else:
                stack.append(y)
    return FreeWord(stack)


def iterate_morphism(m: Morphism, w: Sequence[int], k: int) -> FreeWord:
    """Apply ``m`` (or its declared inverse for ``k < 0``) ``|k|`` times."""
    base = m if k >= 0 else m.inverse()
    out = reduce(w)
    for _ in range(abs(k)):
        out = apply_morphism(base, out)
    return out


def compose_morphisms(m1: Morphism, m2: Morphism) -> Morphism:
    """``m1 ∘ m2``: apply ``m2`` first."""
    if m1.rank != m2.rank:
        raise WordError("morphisms over different bases")
    images = tuple(apply_morphism(m1, w) for w in m2.images)
    inv = None
    if m1.declared_inverse is not None and m2.declared_inverse is not None:
        inv = tuple(apply_morphism(m2.inverse(), w) for w in m1.declared_inverse)
    return Morphism(images, inv)


def inverse_defects(m: Morphism) -> list:
    """Generators (0-based) on which one of the two compositions is not the identity."""
    if m.declared_inverse is None:
        raise WordError("morphism has no declared inverse")
    inv = Morphism(m.declared_inverse)
    bad = []
    for i in range(m.rank):
        g = (i + 1,)
        if apply_morphism(m, inv.images[i]) != g or apply_morphism(inv, m.images[i]) != g:
            bad.append(i)
    return bad


def verify_inverse_pair(m: Morphism) -> bool:
    return not inverse_defects(m)


def reduced_words(rank: int, max_len: int, min_len: int = 0):
    """Yield all reduced words of length in [min_len, max_len], shortlex order."""
    letters = []
    for i in range(1, rank + 1):
        letters += [i, -i]

    def grow(prefix, n):
        if n == 0:
            yield FreeWord(prefix)
            return
        last = prefix[-1] if prefix else 0
        for x in letters:
            if x != -last:
                yield from grow(prefix + (x,), n - 1)

    for n in range(min_len, max_len + 1):
        yield from grow((), n)


def count_reduced_words(rank: int, length: int) -> int:
    if length == 0:
        return 1
    return 2 * rank * (2 * rank - 1) ** (length - 1)
