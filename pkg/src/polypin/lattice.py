"""Lattice paths, grid profiles and the diffusive rescaling between them.

A path of half-length ``L`` is stored as its ``2L + 1`` integer heights at the
sites ``x = -L, ..., L``. Profiles are real functions sampled on a uniform grid
and interpreted as their piecewise-linear interpolation.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

__all__ = [
    "LatticePath",
    "Profile",
    "Excursion",
    "validate",
    "eta_min",
    "tent",
    "discretize",
    "rescale",
    "excursions",
    "sup_distance",
    "enumerate_paths",
]


@dataclass(frozen=True)
class LatticePath:
    """Heights of a polymer, indexed by ``x + L``."""

    heights: np.ndarray
    walled: bool = True

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.int64)
        if h.ndim != 1 or h.size < 3 or h.size % 2 == 0:
            raise ValueError("a path needs an odd number (>= 3) of heights")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def L(self) -> int:
        return (self.heights.size - 1) // 2

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def __getitem__(self, x: int) -> int:
        """Height at site ``x`` in ``{-L, ..., L}``."""
        if not -self.L <= x <= self.L:
            raise IndexError(f"site {x} outside [-{self.L}, {self.L}]")
        return int(self.heights[x + self.L])

    def __eq__(self, other):
        if not isinstance(other, LatticePath):
            return NotImplemented
        return self.walled == other.walled and np.array_equal(self.heights, other.heights)

    def __hash__(self):
        return hash((self.walled, self.heights.tobytes()))

    def flipped(self, x: int) -> "LatticePath":
        """Return the path with the corner at ``x`` flipped (a no-op if ``x`` is not a corner)."""
        i = x + self.L
        if not 0 < i < self.heights.size - 1:
            raise IndexError(f"site {x} is not interior")
        h = self.heights.copy()
        a, b = h[i - 1], h[i + 1]
        if a == b:
            h[i] = 2 * a - h[i]
        return LatticePath(h, self.walled)

    def reflected(self) -> "LatticePath":
        return LatticePath(self.heights[::-1], self.walled)

    def to_line(self) -> str:
        return " ".join(str(int(v)) for v in self.heights)

    @classmethod
    def from_line(cls, line: str, walled: bool = True) -> "LatticePath":
        return cls(np.array([int(tok) for tok in line.split()]), walled)


@dataclass(frozen=True)
class Excursion:
    left: int
    right: int

    @property
    def length(self) -> int:
        return self.right - self.left


@dataclass(frozen=True)
class Profile:
    """Real values on ``n_cells + 1`` uniform nodes of ``[a, b]``."""

    a: float
    b: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a profile needs at least two nodes")
        if not self.b > self.a:
            raise ValueError("empty domain")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func: Callable, a: float, b: float, n_cells: int) -> "Profile":
        x = np.linspace(a, b, n_cells + 1)
        return cls(a, b, np.broadcast_to(func(x), x.shape))

    @property
    def n_cells(self) -> int:
        return self.values.size - 1

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.values.size)

    def __call__(self, x):
        return np.interp(x, self.x, self.values)

    def integral(self) -> float:
        # exact for the piecewise-linear interpolant
        return float(np.trapezoid(self.values, dx=self.dx))

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.dx

    def is_lipschitz(self, constant: float = 1.0, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.slopes()) <= constant + tol))

    def resample(self, n_cells: int) -> "Profile":
        return Profile(self.a, self.b, self(np.linspace(self.a, self.b, n_cells + 1)))

    def scaled(self, c: float) -> "Profile":
        return Profile(self.a, self.b, c * self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,value\n")
        for xi, vi in zip(self.x, self.values):
            buf.write(f"{float(xi)!r},{float(vi)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Profile":
        rows = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
        if rows and not rows[0][0].isdigit() and rows[0][0] not in "+-.":
            rows = rows[1:]
        data = np.array([[float(tok) for tok in r.split(",")] for r in rows])
        x = data[:, 0]
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-6, atol=1e-12):
            raise ValueError("profile CSV must be on a uniform grid")
        return cls(float(x[0]), float(x[-1]), data[:, 1])


def validate(path: LatticePath) -> Optional[str]:
    """Return ``None`` if ``path`` is admissible, else a description of the first violation."""
    h = path.heights
    L = path.L
    if h[0] != 0 or h[-1] != 0:
        return f"endpoint heights must be 0, got ({h[0]}, {h[-1]})"
    steps = np.diff(h)
    bad = np.flatnonzero(np.abs(steps) != 1)
    if bad.size:
        x = int(bad[0]) - L
        return f"step from site {x} to {x + 1} has size {int(steps[bad[0]])}"
    parity = (h - np.arange(h.size)) % 2
    bad = np.flatnonzero(parity)
    if bad.size:
        return f"parity violated at site {int(bad[0]) - L}"
    if path.walled:
        bad = np.flatnonzero(h < 0)
        if bad.size:
            return f"negative height {int(h[bad[0]])} at site {int(bad[0]) - L}"
    return None


def eta_min(L: int) -> LatticePath:
    """Sawtooth path with a contact at every site ``x`` with ``x + L`` even."""
    if L < 1:
        raise ValueError("L must be positive")
    return LatticePath(np.arange(2 * L + 1) % 2, walled=True)


def tent(L: int) -> LatticePath:
    x = np.arange(-L, L + 1)
    return LatticePath(L - np.abs(x), walled=True)


def discretize(f0: Profile, L: int, walled: bool = True, tol: float = 1e-9) -> LatticePath:
    """Lattice path tracking ``L * f0(x / L)`` by greedy slope choice.

    At each step the path goes up iff its height is below the target at the
    next site; the step is then forced where needed to keep the path above
    the wall or able to return to 0 at ``x = L``. For a 1-Lipschitz ``f0``
    the result is within 2 of the target at every site.
    """
    if L < 1:
        raise ValueError("L must be positive")
    if abs(f0.a + 1) > tol or abs(f0.b - 1) > tol:
        raise ValueError("initial profile must live on [-1, 1]")
    if not f0.is_lipschitz(1.0, tol=1e-6):
        raise ValueError("initial profile is not 1-Lipschitz")
    if abs(f0.values[0]) > 1e-6 or abs(f0.values[-1]) > 1e-6:
        raise ValueError("initial profile must vanish at +-1")
    if walled and f0.values.min() < -1e-9:
        raise ValueError("walled paths need a non-negative profile")

    target = L * f0(np.arange(-L, L + 1) / L)
    h = np.zeros(2 * L + 1, dtype=np.int64)
    for i in range(2 * L):
        remaining = 2 * L - (i + 1)
        step = 1 if h[i] < target[i + 1] else -1
        if h[i] + step > remaining:
            step = -1
        if h[i] + step < -remaining:
            step = 1
        if walled and h[i] + step < 0:
            step = 1
        h[i + 1] = h[i] + step
    return LatticePath(h, walled)


def rescale(path: LatticePath) -> Profile:
    """The profile ``x -> eta(L x) / L`` on ``[-1, 1]``."""
    return Profile(-1.0, 1.0, path.heights / path.L)


def excursions(path: LatticePath) -> list[Excursion]:
    """Maximal strictly positive stretches between consecutive zeros, left to right."""
    zeros = np.flatnonzero(path.heights == 0) - path.L
    out = []
    for a, b in zip(zeros[:-1], zeros[1:]):
        if b - a > 1:
            out.append(Excursion(int(a), int(b)))
    return out


def sup_distance(p: Profile, q: Profile, tol: float = 1e-12) -> float:
    """Sup norm of the difference of two piecewise-linear profiles on the same domain."""
    if abs(p.a - q.a) > tol or abs(p.b - q.b) > tol:
        raise ValueError(f"domains differ: [{p.a}, {p.b}] vs [{q.a}, {q.b}]")
    # the sup of a difference of piecewise-linear functions sits on a node of one of them
    x = np.union1d(p.x, q.x)
    return float(np.max(np.abs(p(x) - q(x))))


def enumerate_paths(L: int, walled: bool = True) -> Iterator[LatticePath]:
    """All paths of half-length ``L``, in lexicographic order of their step sequence (down < up)."""
    n = 2 * L
    h = np.zeros(n + 1, dtype=np.int64)

    def rec(i: int):
        if i == n:
            if h[n] == 0:
                yield LatticePath(h, walled)
            return
        for step in (-1, 1):
            nxt = h[i] + step
            if walled and nxt < 0:
                continue
            if abs(nxt) > n - i - 1:
                continue
            h[i + 1] = nxt
            yield from rec(i + 1)

    yield from rec(0)
