"""The dense reverse-mode engine underneath everything.

Values are float64 numpy arrays on a Node tape; backward() walks the graph
once in reverse topological order. The op set is exactly what the model
needs: elementwise arithmetic, matmul, reductions, shape ops, softmax,
gelu, layer norm, 1-D (transposed) convolution, and banded local attention.
fd_check compares any composite against central differences.
"""

import numpy as np

import nerula.autodiff as ad
from nerula.rng import RngStream


def main():
    rng = RngStream(0)

    # d/dx sum((x @ w + b)^2) by hand vs the tape
    x = ad.Node(rng.normal((3, 4)))
    w = ad.Node(rng.split("w").normal((4, 2)))
    b = ad.Node(np.zeros(2))
    y = ad.add(ad.matmul(x, w), b)
    loss = ad.sum_(ad.mul(y, y))
    ad.backward(loss)
    manual = 2.0 * (x.value @ w.value + b.value) @ w.value.T
    print(f"matmul chain: max |tape - manual| = "
          f"{np.abs(x.grad - manual).max():.2e}")

    # the same check automated for a gnarlier composite
    def f(q, k, v):
        h = ad.local_attention(q, k, v, window=5)
        return ad.mean(ad.gelu(h))

    res = ad.fd_check(f, [rng.split("q").normal((2, 9, 4)),
                          rng.split("k").normal((2, 9, 4)),
                          rng.split("v").normal((2, 9, 4))])
    print(f"local attention + gelu vs central differences: "
          f"max rel err {res.max_rel_err:.2e}")

    # convolution adjoint pair: conv1d backward is conv_transpose1d forward
    sig = ad.Node(rng.split("s").normal((1, 3, 16)))
    ker = ad.Node(rng.split("f").normal((5, 3, 3)))
    out = ad.conv1d(sig, ker, stride=2, padding=1)
    print(f"conv1d [1,3,16] -> {out.value.shape} at stride 2")

    # a 3-step gradient descent on a quadratic, via the adam helper
    p = {"theta": ad.Node(np.array([4.0, -2.0]))}
    state = ad.AdamState.init(p)
    for step in range(3):
        lossq = ad.sum_(ad.mul(p["theta"], p["theta"]))
        ad.backward(lossq)
        ad.adam_step(p, state, lr=0.5)
        ad.zero_grads(p)
        print(f"  adam step {step}: theta = {p['theta'].value.round(4)}")


if __name__ == "__main__":
    main()
