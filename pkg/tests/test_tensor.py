import numpy as np
import pytest

from mstracker import tensor as T
from mstracker.counting import OpCounter
from mstracker.errors import NumericError, ShapeError
from mstracker.gradcheck import grad_check
from mstracker.tensor import Tensor
from mstracker.verify import primitive_checks


@pytest.mark.parametrize("seed", range(2))
def test_primitive_gradients(seed):
    rng = np.random.default_rng(seed)
    for name, fn, x in primitive_checks(rng):
        err = grad_check(fn, Tensor(np.asarray(x, dtype=np.float64)))
        assert err < 1e-4, f"{name}: {err:.3e}"


def test_matmul_value_and_shape():
    a = Tensor([[1.0, 2.0]])
    b = Tensor([[3.0], [4.0]])
    out = T.matmul(a, b)
    assert out.data.shape == (1, 1)
    assert out.data[0, 0] == 11.0


def test_broadcast_add_backward():
    a = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones(4), requires_grad=True)
    (a + b).sum().backward()
    assert np.array_equal(a.grad, np.ones((3, 4)))
    assert np.array_equal(b.grad, 3.0 * np.ones(4))


def test_nonfinite_input_rejected():
    with pytest.raises(NumericError):
        Tensor([np.inf, 1.0])


def test_nonfinite_intermediate_rejected():
    x = Tensor([1e308])
    with pytest.raises(NumericError):
        x * 10.0


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_mac_count():
    counter = OpCounter()
    with counter.active():
        T.matmul(Tensor(np.ones((320, 192))), Tensor(np.ones((192, 192))))
    assert counter.macs() == 320 * 192 * 192


def test_conv2d_mac_count():
    counter = OpCounter()
    x = Tensor(np.ones((4, 8, 8)))
    w = Tensor(np.ones((6, 4, 3, 3)) * 0.01)
    with counter.active():
        T.conv2d(x, w, padding=1)
    assert counter.macs() == 6 * 8 * 8 * 4 * 3 * 3


def test_softmax_rows_sum_to_one():
    out = T.softmax(Tensor(np.random.default_rng(0).normal(size=(5, 7))))
    assert np.allclose(out.data.sum(axis=-1), 1.0)


def test_layer_norm_statistics():
    out = T.layer_norm(Tensor(np.random.default_rng(1).normal(size=(4, 16))))
    assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-12)
    assert np.allclose(out.data.std(axis=-1), 1.0, atol=1e-3)


def test_split_concat_roundtrip():
    x = Tensor(np.arange(24.0).reshape(4, 6))
    parts = T.split(x, [2, 2, 2], axis=1)
    back = T.concat(list(parts), axis=1)
    assert np.array_equal(back.data, x.data)


def test_second_backward_requires_fresh_tape():
    x = Tensor([2.0], requires_grad=True)
    y = (x * x).sum()
    y.backward()
    g1 = x.grad.copy()
    x.zero_grad()
    (x * x).sum().backward()
    assert np.array_equal(g1, x.grad)
