"""Minimal first-order update rules for numpy parameters."""

import numpy as np


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def direction(self, grad):
        return self.lr * np.asarray(grad, dtype=np.float64)


class Adam:
    """Adaptive-moment update with bias-corrected first and second moments.

    ``direction(grad)`` returns the step to *add* for ascent on ``grad``; callers
    negate the gradient for descent.
    """

    def __init__(self, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def direction(self, grad):
        g = np.asarray(grad, dtype=np.float64)
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name, lr, betas=(0.9, 0.999)):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr, betas)
    raise ValueError(f"unknown optimizer {name!r}")
