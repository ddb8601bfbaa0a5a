from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

# Ratios mu/p closer than this to a table boundary are classified as the boundary.
RATIO_TOLERANCE = 1e-12


class Scaling(BaseModel):
    """Scaling exponents: coupling eps, relaxation exponent mu, degeneracy exponent p."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eps: float = Field(gt=0, le=1, description="Small parameter eps in (0, 1].")
    mu: float = Field(ge=0, lt=0.5, description="Relaxation exponent mu in [0, 1/2).")
    p: float = Field(default=1.0, gt=0, description="Degeneracy exponent p > 0.")

    @property
    def ratio(self) -> float:
        return self.mu / self.p

    @property
    def nu(self) -> float:
        """Exponent of the B part: mu when mu <= p, 2p - mu otherwise."""
        return self.mu if self.mu <= self.p else 2 * self.p - self.mu

    def with_eps(self, eps: float) -> Scaling:
        return Scaling(eps=eps, mu=self.mu, p=self.p)
