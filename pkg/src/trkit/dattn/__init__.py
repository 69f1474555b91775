from trkit.dattn.core import (
    AlphaWeights,
    Modality,
    OpCounter,
    ProjectionWeights,
    Rotary,
    TokenSequence,
    alpha_weights,
    lse_score,
    reference_attention,
)
from trkit.dattn.decomposed import (
    LayerConfig,
    block_self_attention,
    causal_self_attention,
    debiased_cross_attention,
    decomposed_adaptive,
    decomposed_fixed,
    diagonal_v2v,
    layer_forward,
    monolithic_causal_row,
    text_rows_fixed,
    text_rows_fixed_backward,
)
from trkit.dattn.timeline import TokenTimeline, op_count, time_for_token, tokens_for_time

__all__ = [
    "AlphaWeights",
    "LayerConfig",
    "Modality",
    "OpCounter",
    "ProjectionWeights",
    "Rotary",
    "TokenSequence",
    "TokenTimeline",
    "alpha_weights",
    "block_self_attention",
    "causal_self_attention",
    "debiased_cross_attention",
    "decomposed_adaptive",
    "decomposed_fixed",
    "diagonal_v2v",
    "layer_forward",
    "lse_score",
    "monolithic_causal_row",
    "op_count",
    "reference_attention",
    "text_rows_fixed",
    "text_rows_fixed_backward",
    "time_for_token",
    "tokens_for_time",
]
