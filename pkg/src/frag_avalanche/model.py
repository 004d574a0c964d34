"""Model constants, the band partition of the unit interval and fractal lattices.

A particle size is never stored as a bare float inside the simulators.  It is
a :class:`FractalCoord`: a root size together with the exponent pair ``(i, j)``
of ``beta**i * (1 - beta)**j * root``, or a marker saying the particle was
clipped to the lower edge of a band.  Support checks compare coordinates, so
they are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    AboveUnit,
    BadRootIndex,
    BelowResolution,
    BoundaryTie,
    RatioOutOfRange,
    ThresholdViolation,
)

TIE_TOLERANCE = 1e-12
TIE_MAX_ORDER = 64


@dataclass(frozen=True)
class ModelParams:
    """Validated model constants.  Build with :func:`make_params`."""

    r: float
    beta: float
    lambda0: float
    thresholds: tuple[float, ...]

    @property
    def depth(self) -> int:
        return len(self.thresholds)

    @property
    def gbeta(self) -> float:
        """``1 - beta``, the ratio of the bigger fragment."""
        return 1.0 - self.beta

    @property
    def floor(self) -> float:
        """Smallest resolved size ``d_depth``."""
        return self.thresholds[-1]

    def lower_edge(self, band: int) -> float:
        """Lower edge ``d_{band+1}`` of band ``band``."""
        return self.thresholds[band]

    def upper_edge(self, band: int) -> float:
        return 1.0 if band == 0 else self.thresholds[band - 1]

    def at_level(self, level: int) -> "ModelParams":
        """The same model truncated to the first ``level`` thresholds."""
        if not 1 <= level <= self.depth:
            raise ValueError(f"level must be in [1, {self.depth}], got {level}")
        return ModelParams(self.r, self.beta, self.lambda0, self.thresholds[:level])


def geometric_thresholds(base: float, depth: int) -> tuple[float, ...]:
    """Thresholds ``base**-k`` for ``k = 1..depth`` (default rule uses base 4)."""
    if base <= 1:
        raise ThresholdViolation(f"geometric base must exceed 1, got {base}")
    if depth < 1:
        raise ThresholdViolation(f"depth must be positive, got {depth}")
    return tuple(float(base) ** -k for k in range(1, depth + 1))


def make_params(r: float, thresholds: Sequence[float] | None = None, depth: int = 2) -> ModelParams:
    """Validate the rupture ratio and thresholds and derive ``beta`` and ``lambda0``.

    Parameters
    ----------
    r : float
        Rupture ratio in ``(0, 1)``.
    thresholds : sequence of float, optional
        Strictly decreasing ``d_1 > d_2 > ...`` in ``(0, 1)``.  Defaults to
        ``4**-k`` for ``k = 1..depth``.
    depth : int
        Only used when ``thresholds`` is omitted.

    Raises
    ------
    RatioOutOfRange, ThresholdViolation, BoundaryTie
    """
    r = float(r)
    if not (0.0 < r < 1.0) or math.isnan(r):
        raise RatioOutOfRange(f"rupture ratio r must lie in (0, 1), got {r}")
    beta = r / (1.0 + r)
    lambda0 = (beta**2 + (1.0 - beta) ** 2) / 4.0

    if thresholds is None:
        thresholds = geometric_thresholds(4.0, depth)
    ds = tuple(float(d) for d in thresholds)
    if not ds:
        raise ThresholdViolation("at least one threshold is required")
    for d in ds:
        if not 0.0 < d < 1.0:
            raise ThresholdViolation(f"threshold {d} outside (0, 1)")
    for a, b in zip(ds, ds[1:]):
        if not b < a:
            raise ThresholdViolation(f"thresholds must strictly decrease ({a} then {b})")
    if not ds[0] < beta:
        raise ThresholdViolation(f"d_1 = {ds[0]} must be below beta = {beta}")
    for k, (a, b) in enumerate(zip(ds, ds[1:]), start=1):
        if not b / a < beta:
            raise ThresholdViolation(f"d_{k + 1}/d_{k} = {b / a} must be below beta = {beta}")
    _check_ties(beta, ds)
    return ModelParams(r=r, beta=beta, lambda0=lambda0, thresholds=ds)


def _check_ties(beta: float, thresholds: tuple[float, ...]) -> None:
    gbeta = 1.0 - beta
    for n in range(TIE_MAX_ORDER + 1):
        for i in range(n + 1):
            p = beta**i * gbeta ** (n - i)
            for d in thresholds:
                if abs(p - d) <= TIE_TOLERANCE * d:
                    raise BoundaryTie(
                        f"lattice point beta^{i}(1-beta)^{n - i} = {p!r} ties threshold {d!r}"
                    )


def band_of(x: float, params: ModelParams) -> int:
    """Index ``k`` of the band ``[d_{k+1}, d_k)`` holding ``x`` (band 0 is ``[d_1, 1]``)."""
    if x > 1.0:
        raise AboveUnit(f"size {x} exceeds 1")
    if not x >= params.floor:
        raise BelowResolution(f"size {x} is below the resolution floor {params.floor}")
    for k, d in enumerate(params.thresholds):
        if x >= d:
            return k
    raise BelowResolution(f"size {x} is below the resolution floor {params.floor}")  # pragma: no cover


def lattice_value(base: float, i: int, j: int, beta: float, gbeta: float) -> float:
    # Evaluation order is shared with the compiled kernels; keep it identical.
    return base * beta**i * gbeta**j


@dataclass(frozen=True, eq=False)
class FractalCoord:
    """Exact coordinate of a particle size.

    ``root`` indexes a tuple of root sizes.  When ``clipped_band`` is set the
    size is the lower edge of that band and ``(i, j)`` only record the
    exponents of the proposal that was clipped; two clipped coordinates of the
    same band are the same state.
    """

    root: int
    i: int = 0
    j: int = 0
    clipped_band: int | None = None

    @property
    def clipped(self) -> bool:
        return self.clipped_band is not None

    @property
    def key(self) -> tuple:
        if self.clipped_band is not None:
            return ("edge", self.clipped_band)
        return (self.root, self.i, self.j)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FractalCoord):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def small_child(self) -> "FractalCoord":
        return FractalCoord(self.root, self.i + 1, self.j)

    def big_child(self) -> "FractalCoord":
        return FractalCoord(self.root, self.i, self.j + 1)

    def __repr__(self) -> str:
        if self.clipped_band is not None:
            return f"FractalCoord(edge of band {self.clipped_band})"
        return f"FractalCoord(root={self.root}, i={self.i}, j={self.j})"


def coord_value(c: FractalCoord, roots: Sequence[float], params: ModelParams) -> float:
    """Size represented by ``c``; clipped coordinates return the band edge exactly."""
    if c.clipped_band is not None:
        if not 0 <= c.clipped_band < params.depth:
            raise BadRootIndex(f"clipped band {c.clipped_band} outside [0, {params.depth})")
        return params.thresholds[c.clipped_band]
    if not 0 <= c.root < len(roots):
        raise BadRootIndex(f"root index {c.root} outside [0, {len(roots)})")
    return lattice_value(roots[c.root], c.i, c.j, params.beta, params.gbeta)


@dataclass(frozen=True)
class FractalSupport:
    """Lattice points of one or more roots, sorted by decreasing value."""

    coords: tuple[FractalCoord, ...]
    values: tuple[float, ...]
    floor: float
    roots: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.coords)

    def __contains__(self, c: object) -> bool:
        return c in set(self.coords)


def fractal_points(root: float, floor: float, params: ModelParams) -> FractalSupport:
    """All lattice points ``beta**i (1-beta)**j * root`` that are ``>= floor``."""
    if not 0.0 < root <= 1.0:
        raise ValueError(f"root must lie in (0, 1], got {root}")
    if not 0.0 < floor <= root:
        raise ValueError(f"floor must lie in (0, root], got {floor}")
    roots = (float(root),)
    pts: list[tuple[float, FractalCoord]] = []
    i = 0
    while lattice_value(root, i, 0, params.beta, params.gbeta) >= floor:
        j = 0
        while True:
            v = lattice_value(root, i, j, params.beta, params.gbeta)
            if v < floor:
                break
            pts.append((v, FractalCoord(0, i, j)))
            j += 1
        i += 1
    pts.sort(key=lambda p: (-p[0], p[1].i, p[1].j))
    return FractalSupport(
        coords=tuple(c for _, c in pts),
        values=tuple(v for v, _ in pts),
        floor=float(floor),
        roots=roots,
    )


@dataclass(frozen=True)
class Configuration:
    """Finite multiset of particle coordinates (a point of the configuration space).

    The empty configuration is the zero measure.
    """

    coords: tuple[FractalCoord, ...] = ()
    roots: tuple[float, ...] = field(default=())

    @property
    def count(self) -> int:
        return len(self.coords)

    def values(self, params: ModelParams) -> list[float]:
        return [coord_value(c, self.roots, params) for c in self.coords]

    @classmethod
    def from_sizes(cls, sizes: Iterable[float]) -> "Configuration":
        """One root per particle, each at exponent pair ``(0, 0)``."""
        roots = tuple(float(s) for s in sizes)
        return cls(tuple(FractalCoord(k) for k in range(len(roots))), roots)
