"""ConvLSTM cell against closed-form gate arithmetic."""

import math

import torch

from stci.convlstm import ConvLSTM, ConvLSTMCell


def bias_only_cell(bi, bf, bo, bg):
    cell = ConvLSTMCell(1, 1, kernel_size=3)
    with torch.no_grad():
        cell.gates.weight.zero_()
        cell.gates.bias.copy_(torch.tensor([bi, bf, bo, bg]))
    return cell


def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def test_zero_parameters_give_zero_hidden_state():
    torch.manual_seed(0)
    rnn = ConvLSTM(2, 4)
    with torch.no_grad():
        for p in rnn.parameters():
            p.zero_()
    out = rnn(torch.randn(3, 5, 2, 8, 8))
    assert torch.equal(out, torch.zeros(3, 4, 8, 8))


def test_single_step_matches_hand_computation():
    bi, bf, bo, bg = 0.3, -0.2, 0.5, 0.7
    cell = bias_only_cell(bi, bf, bo, bg)
    x = torch.randn(1, 1, 1, 1)
    h0 = torch.zeros(1, 1, 1, 1)
    c0 = torch.zeros(1, 1, 1, 1)
    h1, c1 = cell(x, (h0, c0))
    c_want = sigmoid(bi) * math.tanh(bg)
    h_want = sigmoid(bo) * math.tanh(c_want)
    assert abs(c1.item() - c_want) < 1e-6
    assert abs(h1.item() - h_want) < 1e-6


def test_two_steps_accumulate_cell_state():
    bi, bf, bo, bg = 0.3, -0.2, 0.5, 0.7
    rnn = ConvLSTM(1, 1)
    with torch.no_grad():
        rnn.cell.gates.weight.zero_()
        rnn.cell.gates.bias.copy_(torch.tensor([bi, bf, bo, bg]))
    seq = torch.randn(1, 2, 1, 1, 1)
    h2 = rnn(seq)
    c1 = sigmoid(bi) * math.tanh(bg)
    c2 = sigmoid(bf) * c1 + sigmoid(bi) * math.tanh(bg)
    h_want = sigmoid(bo) * math.tanh(c2)
    assert abs(h2.item() - h_want) < 1e-6


def test_returns_last_hidden_state_shape():
    torch.manual_seed(0)
    rnn = ConvLSTM(2, 16)
    out = rnn(torch.randn(4, 7, 2, 12, 12))
    assert out.shape == (4, 16, 12, 12)


def test_sequence_length_matters():
    torch.manual_seed(0)
    rnn = ConvLSTM(1, 2)
    seq = torch.randn(1, 3, 1, 6, 6)
    full = rnn(seq)
    prefix = rnn(seq[:, :2])
    assert not torch.equal(full, prefix)


def test_gate_convolution_width():
    cell = ConvLSTMCell(3, 8)
    assert cell.gates.out_channels == 32
    assert cell.gates.in_channels == 11
