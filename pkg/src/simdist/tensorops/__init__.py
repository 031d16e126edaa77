from .gradcheck import finite_diff_check
from .nn import (
    attention_block,
    causal_mask,
    feed_forward,
    init_attention_block,
    init_embedding,
    init_layer_norm,
    init_linear,
    linear,
    multi_head_attention,
)
from .optim import ScheduleConfig, adam_step, lr_schedule
from .params import COMPONENTS, ParamStore, component_of, load_checkpoint, save_checkpoint
from .tensor import (
    ContractError,
    NumericsError,
    ShapeError,
    Tensor,
    add,
    backward,
    concat,
    embedding_lookup,
    layer_norm,
    masked_softmax,
    matmul,
    mul,
    no_grad,
    silu,
    stack,
    sub,
    tensor,
)

__all__ = [
    "COMPONENTS",
    "ContractError",
    "NumericsError",
    "ParamStore",
    "ScheduleConfig",
    "ShapeError",
    "Tensor",
    "adam_step",
    "add",
    "attention_block",
    "backward",
    "causal_mask",
    "component_of",
    "concat",
    "embedding_lookup",
    "feed_forward",
    "finite_diff_check",
    "init_attention_block",
    "init_embedding",
    "init_layer_norm",
    "init_linear",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "lr_schedule",
    "masked_softmax",
    "matmul",
    "mul",
    "multi_head_attention",
    "no_grad",
    "save_checkpoint",
    "silu",
    "stack",
    "sub",
    "tensor",
]
