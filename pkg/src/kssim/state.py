from __future__ import annotations

from dataclasses import dataclass

from .grid import Field, Grid


@dataclass(frozen=True)
class State:
    """Density ``u`` and signal ``v`` at time ``t``; ``v`` is the Helmholtz image of ``u``."""

    t: float
    u: Field
    v: Field

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid
