"""Weighted combination of the language-model, DIM and DAC objectives."""

from typing import Dict, Mapping, Optional, Sequence

import attr
import numpy as np

from ..model.decoder import ModelState, forward_batch, pool_prompt, sequence_nll
from ..numerics import Tensor, add, scale
from .club import dim_losses
from .dac import DacHead, dac_losses
from .schema import AttributeSchema, LossWeights


@attr.s(auto_attribs=True, frozen=True)
class LossBreakdown:
    """Unweighted terms plus the weighted total they re-sum to."""

    total: float
    lm: float
    dim: Dict[str, float]
    dac: Dict[str, float]
    weights: LossWeights

    def weighted_terms(self) -> Dict[str, float]:
        """Each term multiplied by its global and per-attribute weight."""
        w = self.weights
        terms = {"lm": w.lambda_lm * self.lm}
        for name, value in self.dim.items():
            terms[f"dim.{name}"] = w.lambda_dim * w.weight(name) * value
        for name, value in self.dac.items():
            terms[f"dac.{name}"] = w.lambda_dac * w.weight(name) * value
        return terms

    def as_dict(self) -> dict:
        """Flat record for logs and reports."""
        return {
            "total": self.total,
            "lm": self.lm,
            "dim": dict(self.dim),
            "dac": dict(self.dac),
            "weighted": self.weighted_terms(),
        }


def _weighted_sum(
    terms: Mapping[str, Tensor], weights: LossWeights, factor: float
) -> Optional[Tensor]:
    result = None
    for name in sorted(terms):
        term = scale(terms[name], factor * weights.weight(name))
        result = term if result is None else add(result, term)
    return result


def combine_losses(
    lm: Optional[Tensor],
    dim: Mapping[str, Tensor],
    dac: Mapping[str, Tensor],
    weights: LossWeights,
):
    """
    lambda_lm L_LM + lambda_dim sum_a w_a L_DIM + lambda_dac sum_a w_a L_DAC.

    Terms that are missing, or whose global weight is zero, are left out of
    the graph. Returns the scalar tensor and its breakdown.
    """
    parts = []
    if lm is not None and weights.lambda_lm > 0:
        parts.append(scale(lm, weights.lambda_lm))
    if dim and weights.lambda_dim > 0:
        parts.append(_weighted_sum(dim, weights, weights.lambda_dim))
    if dac and weights.lambda_dac > 0:
        parts.append(_weighted_sum(dac, weights, weights.lambda_dac))
    total = parts[0] if parts else Tensor(0.0)
    for part in parts[1:]:
        total = add(total, part)
    breakdown = LossBreakdown(
        total=total.item(),
        lm=lm.item() if lm is not None else 0.0,
        dim={name: t.item() for name, t in dim.items()},
        dac={name: t.item() for name, t in dac.items()},
        weights=weights,
    )
    return total, breakdown


def total_loss(
    state: ModelState,
    heads: Mapping[str, DacHead],
    features: np.ndarray,
    references: Sequence[Sequence[int]],
    labels: Mapping[str, np.ndarray],
    schema: AttributeSchema,
    weights: LossWeights,
    multipliers: Optional[Sequence[float]] = None,
):
    """Full objective of one batch from a single forward pass."""
    output = forward_batch(state, features, [list(r)[:-1] for r in references])
    lm, _ = sequence_nll(output, references, multipliers)
    h = pool_prompt(state, output)
    dim = dim_losses(heads, h, labels, schema) if weights.lambda_dim > 0 else {}
    dac = dac_losses(heads, h, labels, schema) if weights.lambda_dac > 0 else {}
    return combine_losses(lm, dim, dac, weights)
