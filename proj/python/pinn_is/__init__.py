"""Physics-informed network training with loss-proportional importance sampling."""

from ._core import (
    __version__,
    build_proposal_exact,
    build_proposal_pwc,
    diffusion_reference,
    elasticity_exact,
    halton,
    proposal_entropy,
    radical_inverse,
    sample_batch,
    train_from_config,
)

__all__ = [
    "__version__",
    "build_proposal_exact",
    "build_proposal_pwc",
    "diffusion_reference",
    "elasticity_exact",
    "halton",
    "proposal_entropy",
    "radical_inverse",
    "sample_batch",
    "train_from_config",
]
