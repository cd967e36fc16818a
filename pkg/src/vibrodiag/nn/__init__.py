from .functional import (
    batchnorm_backward, batchnorm_forward, conv3x3_backward, conv3x3_forward, gap_backward, gap_forward,
    linear_backward, linear_forward, maxpool_backward, maxpool_forward, relu_backward, relu_forward,
    softmax, softmax_cross_entropy,
)
from .model import LayerSpec, ModelSpec, Network, Tensor, build_mlp, build_vgg19_gap, count_parameters
from .optim import OptimState, TrainConfig, lr_at_epoch, sgd_step
from .train import EpochStats, TrainResult, train
