import numpy as np
import pytest

from rtlloc.tensor import Tensor


def numeric_grad(fn, tensors, index, coords, eps=1e-6):
    """Central finite differences of fn() w.r.t. selected coordinates."""
    t = tensors[index]
    grads = {}
    for coord in coords:
        orig = t.data[coord]
        t.data[coord] = orig + eps
        hi = fn().item()
        t.data[coord] = orig - eps
        lo = fn().item()
        t.data[coord] = orig
        grads[coord] = (hi - lo) / (2 * eps)
    return grads


def check_grads(fn, tensors, rtol=1e-6, max_coords=20,
                rng=None, eps=1e-6):
    """Compare analytic grads against central differences.

    Relative error uses a unit floor in the denominator so near-zero
    gradients are compared absolutely at the same tolerance.
    """
    rng = rng or np.random.default_rng(0)
    for t in tensors:
        t.zero_grad()
    loss = fn()
    loss.backward()
    worst = 0.0
    for i, t in enumerate(tensors):
        flat_idx = np.arange(t.data.size)
        if t.data.size > max_coords:
            flat_idx = rng.choice(t.data.size, max_coords, replace=False)
        coords = [np.unravel_index(j, t.data.shape) for j in flat_idx]
        numeric = numeric_grad(fn, tensors, i, coords, eps)
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        for coord, num in numeric.items():
            ana = analytic[coord]
            err = abs(ana - num) / max(1.0, abs(num))
            worst = max(worst, err)
    assert worst <= rtol, f"worst relative gradient error {worst:.3e}"
    return worst


def rand_tensor(rng, shape, scale=1.0):
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TWO_BLOCK_SOURCE = """\
module two_blocks (
  input logic clk,
  input logic rst_n,
  input logic [7:0] a,
  input logic [7:0] b,
  output logic [7:0] q
);
  logic [7:0] nxt;
  assign nxt = a + b;
  always_ff @(posedge clk or negedge rst_n) begin
    if (!rst_n) q <= '0;
    else q <= nxt;
  end
endmodule
"""


@pytest.fixture
def two_block_source():
    return TWO_BLOCK_SOURCE
