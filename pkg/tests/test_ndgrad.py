import numpy as np
import pytest

from corrloss import ndgrad as nd

from gradcheck import OPS, TOL, op_instance


def test_cosine_examples():
    assert nd.cosine_similarity(nd.tensor([1.0, 0.0]), nd.tensor([1.0, 0.0])).item() == 1.0
    assert nd.cosine_similarity(nd.tensor([1.0, 0.0]), nd.tensor([0.0, 1.0])).item() == 0.0


def test_variance_is_population():
    assert nd.variance(nd.tensor([1.0, 2.0, 3.0, 4.0])).item() == 1.25


def test_square_backward():
    x = nd.param(3.0)
    nd.square(x).backward()
    assert x.grad == 6.0


def test_mean_backward_uniform():
    x = nd.param(np.arange(4.0))
    nd.mean(x).backward()
    np.testing.assert_array_equal(x.grad, [0.25] * 4)


def test_detach_blocks_gradient():
    x = nd.param([1.0, -2.0, 3.0])
    d = nd.detach(x)
    assert not d.requires_grad
    assert d.parents == ()
    assert d.value.tobytes() == x.value.tobytes()
    out = nd.sum(nd.square(d)) + nd.sum(nd.scalar_mul(x, 0.0))
    out.backward()
    np.testing.assert_array_equal(x.grad, 0.0)


def test_non_scalar_root_rejected():
    with pytest.raises(nd.ShapeError):
        nd.backward(nd.param([1.0, 2.0]))


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(nd.ShapeError, match=r"\(2,\).*\(3,\)"):
        nd.add(nd.tensor([1.0, 2.0]), nd.tensor([1.0, 2.0, 3.0]))
    with pytest.raises(nd.ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        nd.matmul(nd.tensor(np.ones((2, 3))), nd.tensor(np.ones((2, 2))))


def test_nonfinite_construction_rejected():
    with pytest.raises(ValueError):
        nd.tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        nd.tensor([np.inf])


def test_rank3_rejected():
    with pytest.raises(nd.ShapeError):
        nd.tensor(np.zeros((2, 2, 2)))


def test_zero_norm_cosine():
    z, v = nd.tensor([0.0, 0.0]), nd.tensor([1.0, 0.0])
    with pytest.raises(ValueError):
        nd.cosine_similarity(z, v, eps=0.0)
    assert nd.cosine_similarity(z, v).item() == 0.0


def test_guarded_division_and_std_stay_finite():
    x = nd.param([2.0, 2.0, 2.0])
    s = nd.std(x)
    q = nd.div(nd.param(1.0), nd.param(0.0))
    assert s.item() == 0.0 and np.isfinite(q.item())
    (nd.square(s) + nd.l2_norm(x - 2.0)).backward()
    np.testing.assert_array_equal(x.grad, 0.0)


def test_diamond_accumulates_both_paths():
    x = nd.param(1.5)
    y = x * x
    out = y * x + y  # x^3 + x^2
    out.backward()
    assert x.grad == pytest.approx(3 * 1.5**2 + 2 * 1.5, rel=1e-15)


def test_repeated_backward_accumulates_and_zero_grad_resets():
    x = nd.param([0.5, -1.0, 2.0])
    out = nd.sum(nd.tanh(x) * x)
    out.backward()
    first = x.grad.copy()
    out.backward()
    np.testing.assert_array_equal(x.grad, 2 * first)
    x.zero_grad()
    out.backward()
    np.testing.assert_array_equal(x.grad, first)


def test_constants_never_accumulate():
    c = nd.tensor([1.0, 2.0])
    x = nd.param([3.0, 4.0])
    nd.dot(c, x).backward()
    np.testing.assert_array_equal(c.grad, 0.0)
    np.testing.assert_array_equal(x.grad, [1.0, 2.0])


def test_values_are_read_only():
    x = nd.tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        x.value[0] = 5.0


def test_numpy_left_operand_defers_to_node():
    x = nd.param([1.0, 2.0])
    out = np.array([3.0, 5.0]) - x
    assert isinstance(out, nd.Node)
    nd.sum(out).backward()
    np.testing.assert_array_equal(x.grad, [-1.0, -1.0])


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients_match_finite_differences(name):
    worst = max(op_instance(name, seed) for seed in range(100))
    assert worst < TOL
