"""Attention-gated U-Net predicting the outcome map at a future lag.

Two downsampling levels with optional spatial attention, a bottleneck,
and two upsampling levels whose skip connections feed an optional
attention gate. The gate weights the upsampled decoder features by
coefficients computed against the skip connection; each up level
concatenates the upsampled map with its gated version (or with the raw
skip when gating is disabled) before three channel-halving convolutions.
"""

import torch
import torch.nn.functional as F
from torch import nn

from .core import ConfigError
from .nn_init import init_linear_conv, init_relu_conv


class SpatialAttention(nn.Module):
    """Per-pixel weights from channelwise max and mean pooling.

    The two pooled maps are stacked and reduced to one logit per pixel
    by a 1x1 convolution; the sigmoid weight multiplies every channel.
    """

    def __init__(self):
        super().__init__()
        self.reduce = init_linear_conv(nn.Conv2d(2, 1, 1))

    def forward(self, feat):
        pooled = torch.cat(
            [feat.max(dim=1, keepdim=True).values, feat.mean(dim=1, keepdim=True)],
            dim=1,
        )
        weights = torch.sigmoid(self.reduce(pooled))
        return feat * weights


class AttentionGate(nn.Module):
    """Additive attention between the upsampled map x and the skip g.

    Both inputs are projected to the skip's channel count by 3x3
    convolutions; their sum passes through a rectifier, a 1x1
    convolution, and a sigmoid to per-pixel coefficients in [0, 1],
    resized to x if needed. The output is the gated x.
    """

    def __init__(self, x_channels, g_channels):
        super().__init__()
        inter = g_channels
        self.project_x = init_relu_conv(nn.Conv2d(x_channels, inter, 3, padding=1))
        self.project_g = init_relu_conv(nn.Conv2d(g_channels, inter, 3, padding=1))
        self.score = init_linear_conv(nn.Conv2d(inter, 1, 1))

    def coefficients(self, x, g):
        if x.shape[0] != g.shape[0]:
            raise ConfigError("x and g batch sizes differ")
        joint = F.relu(self.project_x(x) + self.project_g(g))
        alpha = torch.sigmoid(self.score(joint))
        if alpha.shape[-2:] != x.shape[-2:]:
            alpha = F.interpolate(alpha, size=x.shape[-2:], mode="nearest")
        return alpha

    def forward(self, x, g):
        return x * self.coefficients(x, g)


class DownBlock(nn.Module):
    def __init__(self, in_channels, out_channels, use_sa):
        super().__init__()
        self.conv1 = init_relu_conv(nn.Conv2d(in_channels, out_channels, 3, padding=1))
        self.conv2 = init_relu_conv(nn.Conv2d(out_channels, out_channels, 3, padding=1))
        self.attn = SpatialAttention() if use_sa else None
        self.norm = nn.BatchNorm2d(out_channels, eps=1e-5, momentum=0.1)
        self.pool = nn.MaxPool2d(2)

    def forward(self, feat):
        feat = F.relu(self.conv1(feat))
        feat = F.relu(self.conv2(feat))
        if self.attn is not None:
            feat = self.attn(feat)
        skip = self.norm(feat)
        return self.pool(skip), skip


class UpBlock(nn.Module):
    def __init__(self, in_channels, skip_channels, use_ag):
        super().__init__()
        self.gate = AttentionGate(in_channels, skip_channels) if use_ag else None
        merged = in_channels * 2 if use_ag else in_channels + skip_channels
        c1, c2 = merged // 2, merged // 4
        self.conv1 = init_relu_conv(nn.Conv2d(merged, c1, 3, padding=1))
        self.conv2 = init_relu_conv(nn.Conv2d(c1, c2, 3, padding=1))
        self.conv3 = init_relu_conv(nn.Conv2d(c2, max(c2 // 2, 1), 3, padding=1))
        self.out_channels = max(c2 // 2, 1)

    def forward(self, feat, skip):
        feat = F.interpolate(feat, scale_factor=2, mode="nearest")
        if self.gate is not None:
            merged = torch.cat([feat, self.gate(feat, skip)], dim=1)
        else:
            merged = torch.cat([feat, skip], dim=1)
        merged = F.relu(self.conv1(merged))
        merged = F.relu(self.conv2(merged))
        return F.relu(self.conv3(merged))


class AttnUNet(nn.Module):
    """Two-level U-Net with optional spatial attention and gating."""

    def __init__(self, in_channels, base_channels=16, use_sa=True, use_ag=True):
        super().__init__()
        b = base_channels
        self.down1 = DownBlock(in_channels, b, use_sa)
        self.down2 = DownBlock(b, 2 * b, use_sa)
        self.bottleneck1 = init_relu_conv(nn.Conv2d(2 * b, 4 * b, 3, padding=1))
        self.bottleneck2 = init_relu_conv(nn.Conv2d(4 * b, 4 * b, 3, padding=1))
        self.up1 = UpBlock(4 * b, 2 * b, use_ag)
        self.up2 = UpBlock(self.up1.out_channels, b, use_ag)
        self.head = init_linear_conv(nn.Conv2d(self.up2.out_channels, 1, 1))

    def forward(self, feat):
        if feat.shape[-1] % 4 or feat.shape[-2] % 4:
            raise ConfigError(
                f"spatial size {tuple(feat.shape[-2:])} must be divisible by 4"
            )
        feat, skip1 = self.down1(feat)
        feat, skip2 = self.down2(feat)
        feat = F.relu(self.bottleneck1(feat))
        feat = F.relu(self.bottleneck2(feat))
        feat = self.up1(feat, skip2)
        feat = self.up2(feat, skip1)
        return self.head(feat).squeeze(1)
