"""Weight initialization for the convolution stacks.

The decoder side of the network chains a dozen convolutions with only
two normalization layers, so the framework default (which damps each
layer's response) collapses the end-to-end input sensitivity to
round-off scale and stalls optimization. Rectifier-facing convolutions
get He-normal weights (unit response gain under ReLU); layers feeding
sigmoids, tanh gates, or the linear output get Xavier-uniform weights.
Biases start at zero.
"""

from torch import nn


def init_relu_conv(conv):
    """He-normal init for a convolution followed by a rectifier."""
    nn.init.kaiming_normal_(conv.weight, nonlinearity="relu")
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)
    return conv


def init_linear_conv(conv):
    """Xavier init for a convolution feeding a squashing or linear stage."""
    nn.init.xavier_uniform_(conv.weight)
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)
    return conv
