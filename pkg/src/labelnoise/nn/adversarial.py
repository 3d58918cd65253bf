import numpy as np

from .model import Model


def input_gradient(model: Model, x, labels, loss_fn) -> np.ndarray:
    """Gradient of the loss with respect to the input batch (inference mode)."""
    probs, cache = model.forward(x)
    result = loss_fn(probs, labels)
    # losses average over the batch; undo it so each row gets its own gradient
    _, dx = model.backward(cache, result.grad_logits * len(probs), return_input_grad=True)
    return dx


def fgsm_example(model: Model, x, y_true, loss_fn, eps: float) -> np.ndarray:
    """Fast-gradient-sign perturbation ``x + eps * sign(grad_x loss)``, clamped to [0, 1].

    ``x`` may be a single input (shape ``model.input_shape``) with an integer
    label, or a batch with a label vector.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    single = x.shape == model.input_shape
    batch = x[None] if single else x
    labels = np.atleast_1d(np.asarray(y_true))
    grad = input_gradient(model, batch, labels, loss_fn)
    adv = np.clip(batch + eps * np.sign(grad), 0.0, 1.0)
    # x + eps can round to a value more than eps away from x; pull it back one ulp
    step = adv - batch
    adv = np.where(step > eps, np.nextafter(adv, -np.inf), adv)
    adv = np.where(step < -eps, np.nextafter(adv, np.inf), adv)
    return adv[0] if single else adv
