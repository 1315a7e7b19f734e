"""Single-mode SU(1,1) gain algebra.

A parametric amplifier acting on one signal/idler mode pair is a Bogoliubov
transformation ``a -> G a + g b^dag`` with ``|G|^2 - |g|^2 = 1``.  This module
composes such transformations (two stages with a phase shift in between, or an
arbitrary cascade of stages) and evaluates the closed-form solution for a
uniform continuous gain medium.  The continuous solution doubles as an oracle
for the broadband integrator.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# below this |argument| the sin(y)/y and sinh(y)/y ratios use their Taylor series
_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class ComplexGain:
    """Bogoliubov pair ``(G, g)`` of one parametric amplifier."""

    G: complex
    g: complex

    def bogoliubov_defect(self) -> float:
        return abs(abs(self.G) ** 2 - abs(self.g) ** 2 - 1.0)

    @classmethod
    def identity(cls) -> "ComplexGain":
        return cls(1.0 + 0j, 0j)


@dataclass(frozen=True)
class StageSpec:
    """One amplifier stage: amplitude gain ``g`` preceded by a phase shift ``theta``."""

    g: complex
    theta: float = 0.0

    def __post_init__(self):
        if not (cmath.isfinite(self.g) and math.isfinite(self.theta)):
            raise ValueError(f"stage parameters must be finite, got g={self.g!r}, theta={self.theta!r}")

    def gain(self) -> ComplexGain:
        return ComplexGain(complex(math.sqrt(1.0 + abs(self.g) ** 2)), complex(self.g))


@dataclass(frozen=True)
class ContinuousGainParams:
    """Uniform medium: gain density ``zeta``, phase-mismatch density ``eta``, length ``x``."""

    zeta: complex
    eta: float
    x: float

    def __post_init__(self):
        if self.x < 0:
            raise ValueError(f"propagation length must be non-negative, got {self.x}")


def compose_two_stage(first: ComplexGain, second: ComplexGain, theta: float) -> ComplexGain:
    """Equivalent single amplifier for ``first`` followed by ``second``.

    Both fields pick up ``exp(i theta / 2)`` between the stages.
    """
    p = cmath.exp(0.5j * theta)
    pc = p.conjugate()
    G_T = first.G * second.G * p + first.g.conjugate() * second.g * pc
    g_T = first.G.conjugate() * second.g * pc + first.g * second.G * p
    return ComplexGain(G_T, g_T)


def cascade(stages: Sequence[StageSpec]) -> ComplexGain:
    """Fold a list of stages left to right starting from the identity.

    ``stages[k].theta`` is the phase accrued between the first ``k`` stages and
    stage ``k``; for ``k = 0`` it is an input phase applied before the first stage.
    """
    if len(stages) == 0:
        raise ValueError("cascade needs at least one stage")
    total = ComplexGain.identity()
    for stage in stages:
        total = compose_two_stage(total, stage.gain(), stage.theta)
    return total


def uniform_stages(params: ContinuousGainParams, n: int) -> list[StageSpec]:
    """Slice a uniform medium into ``n`` equal stages ``(zeta dx, eta dx)``."""
    if n < 1:
        raise ValueError(f"stage count must be >= 1, got {n}")
    dx = params.x / n
    return [StageSpec(complex(params.zeta) * dx, params.eta * dx)] * n


def _sinc(y: float) -> float:
    if abs(y) < _SERIES_CUTOFF:
        y2 = y * y
        # 1 - y^2/3! + y^4/5! - ... (6 terms)
        return 1 - y2 / 6 * (1 - y2 / 20 * (1 - y2 / 42 * (1 - y2 / 72 * (1 - y2 / 110))))
    return math.sin(y) / y


def _sinhc(y: float) -> float:
    if abs(y) < _SERIES_CUTOFF:
        y2 = y * y
        return 1 + y2 / 6 * (1 + y2 / 20 * (1 + y2 / 42 * (1 + y2 / 72 * (1 + y2 / 110))))
    return math.sinh(y) / y


def continuous_gain(params: ContinuousGainParams) -> ComplexGain:
    """Closed-form ``(G, g)`` for constant gain and phase-mismatch densities.

    For ``|zeta| >= eta/2`` the gain grows as ``sinh(zeta0 x)`` with
    ``zeta0 = sqrt(|zeta|^2 - eta^2/4)``; otherwise it oscillates as
    ``sin(eta0 x / 2)`` with ``eta0 = sqrt(eta^2 - 4|zeta|^2)``.  Both branches
    are written in terms of ``sin(y)/y`` so the boundary between them is regular.
    """
    zeta = complex(params.zeta)
    eta, x = float(params.eta), float(params.x)
    disc = abs(zeta) ** 2 - 0.25 * eta * eta
    if disc >= 0:
        y = math.sqrt(disc) * x
        ratio, even = _sinhc(y), math.cosh(y)
    else:
        y = math.sqrt(-disc) * x
        ratio, even = _sinc(y), math.cos(y)
    G = even + 0.5j * eta * x * ratio
    g = zeta * x * ratio
    return ComplexGain(complex(G), complex(g))


def cascade_convergence_error(n: int, params: ContinuousGainParams) -> float:
    """Max deviation of an ``n``-stage cascade from the continuous solution."""
    approx = cascade(uniform_stages(params, n))
    exact = continuous_gain(params)
    return max(abs(approx.G - exact.G), abs(approx.g - exact.g))


def convergence_table(params: ContinuousGainParams, stage_counts: Iterable[int]) -> list[dict]:
    """Cascade error for each stage count plus the ratio to the previous row."""
    rows = []
    prev = None
    for n in stage_counts:
        err = cascade_convergence_error(n, params)
        rows.append({"N": n, "error": err, "ratio": (prev / err) if prev and err else None})
        prev = err
    return rows
