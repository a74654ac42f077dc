"""Convolutional LSTM over gridded sequences.

Gates are computed by a single convolution over the concatenated input
and hidden state. States start at zero; the layer returns the final
hidden state, which is what both the current-data path and the history
encoder consume.
"""

import torch
from torch import nn

from .nn_init import init_linear_conv


class ConvLSTMCell(nn.Module):
    def __init__(self, in_channels, hidden_channels, kernel_size=3):
        super().__init__()
        self.hidden_channels = hidden_channels
        padding = kernel_size // 2
        self.gates = init_linear_conv(
            nn.Conv2d(
                in_channels + hidden_channels,
                4 * hidden_channels,
                kernel_size,
                padding=padding,
            )
        )

    def forward(self, x, state):
        h, c = state
        stacked = torch.cat([x, h], dim=1)
        i, f, o, g = torch.chunk(self.gates(stacked), 4, dim=1)
        i = torch.sigmoid(i)
        f = torch.sigmoid(f)
        o = torch.sigmoid(o)
        g = torch.tanh(g)
        c_next = f * c + i * g
        h_next = o * torch.tanh(c_next)
        return h_next, c_next


class ConvLSTM(nn.Module):
    """Runs a ConvLSTMCell over [B, T, C, H, W] and returns the last hidden state."""

    def __init__(self, in_channels, hidden_channels, kernel_size=3):
        super().__init__()
        self.cell = ConvLSTMCell(in_channels, hidden_channels, kernel_size)

    def forward(self, seq):
        batch, _, _, height, width = seq.shape
        h = seq.new_zeros(batch, self.cell.hidden_channels, height, width)
        c = torch.zeros_like(h)
        for t in range(seq.shape[1]):
            h, c = self.cell(seq[:, t], (h, c))
        return h
