"""Jump kernels of the avalanche model.

* :func:`levy_atoms` -- the two-atom jump intensity of a particle of size ``x``.
* :func:`step_distribution` -- one step of the band-filtered, uniformized chain.
* :func:`sde_displacement` -- inverse-CDF map driving the Poisson-measure equation.
* :func:`offspring_distribution` / :func:`sample_offspring` -- the branching law.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import BelowResolution, InternalError, OutOfUnit
from .model import FractalCoord, ModelParams, band_of, coord_value, lattice_value

MAX_PROPOSALS = 10**6


class ClipPolicy(enum.Enum):
    """What happens to offspring proposed below the parent's band edge."""

    EDGE = "edge"
    CONDITIONED = "conditioned"

    @classmethod
    def parse(cls, value: "ClipPolicy | str") -> "ClipPolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown clip policy {value!r}; use 'edge' or 'conditioned'") from None


@dataclass(frozen=True)
class WeightedAtoms:
    positions: tuple[float, ...]
    masses: tuple[float, ...]

    @property
    def total(self) -> float:
        return sum(self.masses)

    def __len__(self) -> int:
        return len(self.positions)


def _check_unit(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise OutOfUnit(f"size {x} outside [0, 1]")


def levy_atoms(x: float, params: ModelParams) -> WeightedAtoms:
    """Jump intensity of a size-``x`` particle: mass ``lambda0*beta*x`` at ``beta*x``
    and ``lambda0*(1-beta)*x`` at ``(1-beta)*x``.  Zero measure at ``x = 0``."""
    _check_unit(x)
    if x == 0.0:
        return WeightedAtoms((), ())
    b, g, lam = params.beta, params.gbeta, params.lambda0
    return WeightedAtoms((b * x, g * x), (lam * b * x, lam * g * x))


@dataclass(frozen=True)
class SdeKernelK:
    """Displacement kernel: the jump intensity shifted by ``-x``."""

    displacements: tuple[float, ...]
    masses: tuple[float, ...]
    drift: float

    @property
    def total(self) -> float:
        return sum(self.masses)


def sde_kernel(x: float, params: ModelParams) -> SdeKernelK:
    """Displacements ``(beta-1)x`` and ``-beta x`` with their masses; zero outside [0, 1].

    Built by shifting :func:`levy_atoms` by ``-x`` so both forms share their
    masses bit for bit.  ``drift`` is the first moment of the displacement
    measure.
    """
    if not 0.0 <= x <= 1.0 or x == 0.0:
        return SdeKernelK((), (), 0.0)
    atoms = levy_atoms(x, params)
    displacements = tuple(y - x for y in atoms.positions)
    drift = sum(d * m for d, m in zip(displacements, atoms.masses))
    return SdeKernelK(displacements, atoms.masses, drift)


def drift_closed_form(x: float, params: ModelParams) -> float:
    b = params.beta
    return 2.0 * params.lambda0 * b * (b - 1.0) * x * x


def compensator(x: float, params: ModelParams) -> float:
    """Integral over ``s >= 0`` of the size decrement triggered by a Poisson atom at level ``s``.

    Evaluated piecewise: decrement ``(1-beta)x`` on ``[0, beta*lambda0*x)`` and
    ``beta*x`` on ``[beta*lambda0*x, lambda0*x)``.
    """
    b, lam = params.beta, params.lambda0
    cut1 = b * lam * x
    cut2 = lam * x
    return (1.0 - b) * x * cut1 + b * x * (cut2 - cut1)


def sde_displacement(x: float, s: float, params: ModelParams) -> float | None:
    """Size after a Poisson atom at level ``s`` hits a particle of size ``x``.

    ``None`` means the atom lies above the total jump mass and does nothing.
    """
    lam_b = params.lambda0 * params.beta * x
    if s < lam_b:
        return params.beta * x
    if s < params.lambda0 * x:
        return params.gbeta * x
    return None


@dataclass(frozen=True)
class StepDistribution:
    """One step of the Markovian chain kernel from size ``x``.

    ``small``/``big`` are the jump targets ``beta*x`` and ``(1-beta)*x``;
    a filtered target left the band and carries probability 0.
    """

    x: float
    small: float
    big: float
    p_small: float
    p_big: float
    p_hold: float
    small_in_band: bool
    big_in_band: bool

    def as_dict(self) -> dict[float, float]:
        out: dict[float, float] = {}
        if self.small_in_band:
            out[self.small] = out.get(self.small, 0.0) + self.p_small
        if self.big_in_band:
            out[self.big] = out.get(self.big, 0.0) + self.p_big
        out[self.x] = out.get(self.x, 0.0) + self.p_hold
        return out


def _step(x: float, small: float, big: float, edge: float, params: ModelParams) -> StepDistribution:
    small_in = small >= edge
    big_in = big >= edge
    p_small = params.beta * x if small_in else 0.0
    p_big = params.gbeta * x if big_in else 0.0
    p_hold = 1.0 - (p_small + p_big)
    if p_hold < 0.0:
        p_hold = 0.0
    return StepDistribution(x, small, big, p_small, p_big, p_hold, small_in, big_in)


def step_distribution(x: float, params: ModelParams) -> StepDistribution:
    """Band-filtered step law from a real size ``x`` in ``[d_depth, 1]``."""
    k = band_of(x, params)
    return _step(x, params.beta * x, params.gbeta * x, params.lower_edge(k), params)


def coord_step(c: FractalCoord, roots: Sequence[float], params: ModelParams) -> list[tuple[FractalCoord, float]]:
    """Step law from a coordinate, as ``(target, probability)`` pairs.

    Targets are evaluated as lattice coordinates so the values agree exactly
    with :func:`~frag_avalanche.model.coord_value`.  A clipped coordinate sits
    on its band edge, so both children leave the band and it holds forever.
    """
    x = coord_value(c, roots, params)
    if c.clipped:
        return [(c, 1.0)]
    k = band_of(x, params)
    sc, bc = c.small_child(), c.big_child()
    d = _step(x, coord_value(sc, roots, params), coord_value(bc, roots, params), params.lower_edge(k), params)
    out = []
    if d.small_in_band:
        out.append((sc, d.p_small))
    if d.big_in_band:
        out.append((bc, d.p_big))
    out.append((c, d.p_hold))
    return out


def offspring_mass_a(x: float, params: ModelParams) -> float:
    """Normalizer ``a(x)``: sum of ``y(x-y)`` over all lattice points ``y = beta^i (1-beta)^j x``."""
    b, g = params.beta, params.gbeta
    return x * x * (1.0 / (b * g) - 1.0 / ((1.0 - b * b) * (1.0 - g * g)))


def offspring_mass_bruteforce(x: float, params: ModelParams, order: int = 200) -> float:
    """Truncated double sum over ``i + j <= order``; a test oracle for :func:`offspring_mass_a`."""
    total = 0.0
    for n in range(order, -1, -1):
        for i in range(n + 1):
            y = lattice_value(x, i, n - i, params.beta, params.gbeta)
            total += y * (x - y)
    return total


@dataclass(frozen=True)
class OffspringDistribution:
    """Law of the common position of the two offspring of a particle.

    ``atoms`` are in-band lattice points with their probabilities; ``clip_atom``
    is the band edge (as a clipped coordinate) with the aggregated
    sub-threshold mass, present only under :attr:`ClipPolicy.EDGE`.
    """

    parent: FractalCoord
    atoms: tuple[tuple[FractalCoord, float], ...]
    clip_atom: tuple[FractalCoord, float] | None
    a_x: float
    policy: ClipPolicy

    def items(self) -> list[tuple[FractalCoord, float]]:
        out = list(self.atoms)
        if self.clip_atom is not None:
            out.append(self.clip_atom)
        return out

    @property
    def total(self) -> float:
        return sum(p for _, p in self.items())


def _as_coord(x: "FractalCoord | float", roots: Sequence[float] | None) -> tuple[FractalCoord, tuple[float, ...]]:
    if isinstance(x, FractalCoord):
        if roots is None:
            raise ValueError("roots are required with a FractalCoord parent")
        return x, tuple(roots)
    return FractalCoord(0), (float(x),)


def offspring_distribution(
    x: "FractalCoord | float",
    params: ModelParams,
    policy: "ClipPolicy | str" = ClipPolicy.EDGE,
    roots: Sequence[float] | None = None,
) -> OffspringDistribution:
    """Exact offspring law of a particle at ``x``.

    In-band atoms are the lattice points ``y`` of ``x`` with
    ``d_{k+1} <= y <= x`` (``k`` the parent band), weighted ``y(x-y)/a(x)``.
    Under EDGE the remaining mass sits on the band edge; under CONDITIONED the
    in-band atoms are renormalized.  When no in-band atom carries weight
    (conditioned parent whose children all leave the band) the law is the
    point mass at ``x`` itself.
    """
    policy = ClipPolicy.parse(policy)
    c, roots = _as_coord(x, roots)
    xv = coord_value(c, roots, params)
    if xv < params.floor:
        raise BelowResolution(f"size {xv} is below the resolution floor {params.floor}")
    k = band_of(xv, params)
    edge = params.lower_edge(k)
    a = offspring_mass_a(xv, params)
    b, g = params.beta, params.gbeta

    weighted: list[tuple[FractalCoord, float]] = []
    if c.clipped:
        # only the parent itself is in band; its weight is zero
        weighted.append((c, 0.0))
    else:
        i = 0
        while xv * b**i >= edge:
            j = 0
            while True:
                cc = FractalCoord(c.root, c.i + i, c.j + j)
                yv = coord_value(cc, roots, params)
                if yv < edge:
                    break
                ratio = b**i * g**j
                weighted.append((cc, xv * xv * ratio * (1.0 - ratio)))
                j += 1
            i += 1
    in_band = sum(w for _, w in weighted)

    if policy is ClipPolicy.EDGE:
        atoms = tuple((cc, w / a) for cc, w in weighted)
        clip_p = max(a - in_band, 0.0) / a
        clip = FractalCoord(c.root, c.i, c.j, clipped_band=k)
        clip_atom = (clip, clip_p)
    else:
        clip_atom = None
        if in_band > 0.0:
            atoms = tuple((cc, w / in_band) for cc, w in weighted)
        else:
            atoms = tuple((cc, 1.0 if cc == c else 0.0) for cc, _ in weighted)
    return OffspringDistribution(c, atoms, clip_atom, a, policy)


def sample_offspring(
    x: "FractalCoord | float",
    params: ModelParams,
    policy: "ClipPolicy | str",
    rng,
    roots: Sequence[float] | None = None,
) -> FractalCoord:
    """Draw the offspring position by rejection from geometric proposals.

    ``rng`` is a :class:`numpy.random.Generator` (or anything with ``random()``).
    Proposal exponents ``i ~ Geom(1-beta)``, ``j ~ Geom(beta)`` on ``{0, 1, ...}``
    give weight proportional to ``beta^i (1-beta)^j``; acceptance with
    probability ``1 - beta^i (1-beta)^j`` turns this into ``y(x-y)``.
    The draw sequence matches the simulation kernels exactly.
    """
    policy = ClipPolicy.parse(policy)
    c, roots = _as_coord(x, roots)
    xv = coord_value(c, roots, params)
    k = band_of(xv, params)
    cb = -1 if c.clipped_band is None else c.clipped_band
    root, i, j, ccb = offspring_exponents(
        rng.random, roots, params.thresholds, c.root, c.i, c.j, cb, k,
        params.beta, math.log(params.beta), math.log(params.gbeta), policy is ClipPolicy.EDGE,
    )
    return FractalCoord(root, i, j, None if ccb < 0 else ccb)


def offspring_exponents(random, roots, thresholds, root, pi, pj, pcb, band, beta, log_b, log_g, edge_policy):
    """Tuple-level sampler shared with the Python simulation kernel.

    Parent ``(root, pi, pj, pcb)`` with ``pcb = -1`` for a lattice point;
    returns the child in the same form.  Mirrored line by line in the
    compiled kernel.
    """
    gbeta = 1.0 - beta
    edge = thresholds[band]
    clipped = pcb >= 0
    base = thresholds[pcb] if clipped else roots[root]
    if not edge_policy:
        if clipped or lattice_value(base, pi, pj + 1, beta, gbeta) < edge:
            return root, pi, pj, pcb
    for _ in range(MAX_PROPOSALS):
        i = math.floor(math.log(1.0 - random()) / log_b)
        j = math.floor(math.log(1.0 - random()) / log_g)
        if clipped:
            yv = lattice_value(base, i, j, beta, gbeta)
        else:
            yv = lattice_value(base, pi + i, pj + j, beta, gbeta)
        below = yv < edge
        if below and not edge_policy:
            continue
        ratio = beta**i * gbeta**j
        if random() >= 1.0 - ratio:
            continue
        return root, pi + i, pj + j, (band if below else -1)
    raise InternalError(f"offspring sampler exceeded {MAX_PROPOSALS} proposals")
