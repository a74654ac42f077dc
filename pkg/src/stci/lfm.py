"""Latent factor autoencoder over treatment/covariate history.

The encoder summarizes an [h, 2, N, M] history window (channel 0 the
treatment, channel 1 the covariate) into a spatially downsampled latent
code; the decoder reconstructs the full window from the code. Trained
jointly with the predictor through the reconstruction term of the loss.
"""

import torch
import torch.nn.functional as F
from torch import nn

from .convlstm import ConvLSTM
from .core import ConfigError
from .nn_init import init_linear_conv, init_relu_conv


class LatentEncoder(nn.Module):
    """ConvLSTM over the window, then two strided convolutions.

    32x32 input with c_lat=32 yields an [8, 8] code with 32 channels
    (each 3x3 convolution halves the spatial size).
    """

    def __init__(self, hidden_channels=16, c_lat=32, dropout=0.2):
        super().__init__()
        self.rnn = ConvLSTM(2, hidden_channels)
        self.conv1 = init_relu_conv(nn.Conv2d(hidden_channels, c_lat, 3, stride=2, padding=1))
        self.drop = nn.Dropout(dropout)
        self.conv2 = init_linear_conv(nn.Conv2d(c_lat, c_lat, 3, stride=2, padding=1))
        self.norm = nn.BatchNorm2d(c_lat, eps=1e-5, momentum=0.1)

    def forward(self, window):
        if window.dim() != 5 or window.shape[2] != 2:
            raise ConfigError(
                f"expected history window [B, h, 2, N, M], got {tuple(window.shape)}"
            )
        feat = self.rnn(window)
        feat = F.relu(self.conv1(feat))
        feat = self.drop(feat)
        return self.norm(self.conv2(feat))


class LatentDecoder(nn.Module):
    """Upsample the code to full resolution, then two per-position dense layers.

    The dense layers are 1x1 convolutions (applied at every pixel), with
    the hidden width twice the latent channel count; the linear output
    layer emits h*2 channels reshaped back to the window layout.
    """

    def __init__(self, history_len=4, c_lat=32, scale=4):
        super().__init__()
        self.history_len = history_len
        self.scale = scale
        self.fc1 = init_relu_conv(nn.Conv2d(c_lat, 2 * c_lat, 1))
        self.fc2 = init_linear_conv(nn.Conv2d(2 * c_lat, history_len * 2, 1))

    def forward(self, code):
        feat = F.interpolate(code, scale_factor=self.scale, mode="nearest")
        feat = F.relu(self.fc1(feat))
        flat = self.fc2(feat)
        batch, _, height, width = flat.shape
        return flat.view(batch, self.history_len, 2, height, width)


def reconstruction_loss(window, reconstructed):
    """Mean squared error over every window entry."""
    if window.shape != reconstructed.shape:
        raise ConfigError(
            f"window shapes differ: {tuple(window.shape)} vs {tuple(reconstructed.shape)}"
        )
    return torch.mean((window - reconstructed) ** 2)
