from .tensor import Tensor, no_grad, param, set_default_dtype
from .layers import MLP, GinLayer, LayerNorm, Linear, Module, MultiHeadSelfAttention, TransformerLayer, mean_max_pool
from .model import EncoderModel, TeacherModel
from .optim import Adam, AdamW
from .checkpoint import load_checkpoint, params_checksum, save_checkpoint

__all__ = [
    "Adam",
    "AdamW",
    "EncoderModel",
    "GinLayer",
    "LayerNorm",
    "Linear",
    "MLP",
    "Module",
    "MultiHeadSelfAttention",
    "TeacherModel",
    "Tensor",
    "TransformerLayer",
    "load_checkpoint",
    "mean_max_pool",
    "no_grad",
    "param",
    "params_checksum",
    "save_checkpoint",
    "set_default_dtype",
]
