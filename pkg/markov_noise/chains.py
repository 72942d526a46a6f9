"""
Управляемые цепи шума: ядро P(x, y): стохастическая по строкам
матрица k x k, зависящая от текущей итерации.

Все *_batch методы принимают X (n, s), Y (n, r) и возвращают стопку
(n, k, k); производные ядра: (n, s, k, k) и (n, r, k, k).
"""

from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.special import softmax

from utils.errors import ParamOutOfRangeError
from utils.seeding import make_rng

ROW_TOL = 1e-12


def check_stochastic(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ParamOutOfRangeError(
            name="kernel", value=P.shape, allowed="square matrix"
        )
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_TOL):
        raise ParamOutOfRangeError(
            name="kernel", value="rows", allowed="probability vectors"
        )
    return P


class ControlledChain(ABC):
    name = "chain"
    # ядро меняется с (x, y)
    depends_on_iterate = False
    differentiable = True

    def __init__(self, n_states: int):
        self.n_states = int(n_states)

    @abstractmethod
    def kernel_batch(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        ...

    def kernel(self, x, y) -> np.ndarray:
        X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        Y = np.asarray(y if y is not None else [], dtype=float).reshape(1, -1)
        return self.kernel_batch(X, Y)[0]

    def kernel_derivatives_batch(
        self, X: np.ndarray, Y: np.ndarray
    ) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """None: аналитической производной нет (будет конечная разность)."""
        if not self.depends_on_iterate:
            k, n = self.n_states, X.shape[0]
            return (
                np.zeros((n, X.shape[1], k, k)),
                np.zeros((n, Y.shape[1], k, k)),
            )
        return None

    def rows_batch(
        self, X: np.ndarray, Y: np.ndarray, states: np.ndarray
    ) -> np.ndarray:
        P = self.kernel_batch(X, Y)
        return P[np.arange(P.shape[0]), states]

    def params(self) -> dict:
        return {}


class FixedChain(ControlledChain):
    """Ядро, не зависящее от итерации."""

    name = "fixed"

    def __init__(self, matrix: Sequence[Sequence[float]], name: str = "fixed"):
        P = check_stochastic(matrix)
        super().__init__(P.shape[0])
        self.matrix = P
        self.name = name

    def kernel_batch(self, X, Y):
        return np.broadcast_to(
            self.matrix, (X.shape[0],) + self.matrix.shape
        )

    def rows_batch(self, X, Y, states):
        return self.matrix[states]

    def params(self) -> dict:
        return {"matrix": self.matrix.tolist()}


def flip(p: float) -> FixedChain:
    if not 0.0 < p <= 1.0:
        raise ParamOutOfRangeError(name="p", value=p, allowed="(0, 1]")
    return FixedChain([[1.0 - p, p], [p, 1.0 - p]], name="flip")


def two_rate(alpha: float, beta: float) -> FixedChain:
    """0 -> 1 с вероятностью alpha, 1 -> 0 с вероятностью beta."""
    for key, val in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < val <= 1.0:
            raise ParamOutOfRangeError(name=key, value=val, allowed="(0, 1]")
    return FixedChain(
        [[1.0 - alpha, alpha], [beta, 1.0 - beta]], name="two_rate"
    )


def iid(weights: Sequence[float]) -> FixedChain:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return FixedChain(np.tile(w, (w.size, 1)), name="iid")


def random_chain(k: int, seed: int) -> FixedChain:
    # строки Дирихле(1): все элементы > 0, цепь неприводима и апериодична
    rows = make_rng(seed).dirichlet(np.ones(k), size=k)
    rows = rows / rows.sum(axis=1, keepdims=True)
    return FixedChain(rows, name="random")


def _sticky(rho: float, target: np.ndarray) -> np.ndarray:
    """P = rho*I + (1 - rho) * 1 target^T для стопки target (n, k)."""
    n, k = target.shape
    P = (1.0 - rho) * np.broadcast_to(target[:, None, :], (n, k, k))
    return P + rho * np.eye(k)


class TiltedFlip(ControlledChain):
    """
    Два состояния z in {-1, +1}; стационарный закон
    pi(+1 | x) = (1 + tanh(x_0/length))/2 при липкости stickiness.
    """

    name = "tilted_flip"
    depends_on_iterate = True

    def __init__(self, length: float = 1.0, stickiness: float = 0.5):
        if length <= 0:
            raise ParamOutOfRangeError(
                name="length", value=length, allowed="> 0"
            )
        if not 0.0 <= stickiness < 1.0:
            raise ParamOutOfRangeError(
                name="stickiness", value=stickiness, allowed="[0, 1)"
            )
        super().__init__(2)
        self.length = float(length)
        self.rho = float(stickiness)

    def params(self) -> dict:
        return {"length": self.length, "stickiness": self.rho}

    def target(self, X: np.ndarray) -> np.ndarray:
        p_up = 0.5 * (1.0 + np.tanh(X[:, 0] / self.length))
        return np.stack([1.0 - p_up, p_up], axis=1)

    def kernel_batch(self, X, Y):
        return _sticky(self.rho, self.target(X))

    def rows_batch(self, X, Y, states):
        t = self.target(X)
        return (1.0 - self.rho) * t + self.rho * np.eye(2)[states]

    def kernel_derivatives_batch(self, X, Y):
        n, s = X.shape
        sech2 = 1.0 / np.cosh(X[:, 0] / self.length) ** 2
        dp = 0.5 * sech2 / self.length
        d_target = np.stack([-dp, dp], axis=1)
        dPx = np.zeros((n, s, 2, 2))
        dPx[:, 0] = (1.0 - self.rho) * d_target[:, None, :]
        return dPx, np.zeros((n, Y.shape[1], 2, 2))


class SoftmaxChain(ControlledChain):
    """
    Целевой закон softmax(bias + Wx x + Wy y), ядро
    P = stickiness*I + (1 - stickiness) * 1 target^T.
    """

    name = "softmax"
    depends_on_iterate = True

    def __init__(
        self,
        bias: Sequence[float],
        wx: Sequence[Sequence[float]],
        wy: Optional[Sequence[Sequence[float]]] = None,
        stickiness: float = 0.5,
    ):
        self.bias = np.asarray(bias, dtype=float)
        k = self.bias.size
        self.wx = np.asarray(wx, dtype=float).reshape(k, -1)
        self.wy = (
            np.asarray(wy, dtype=float).reshape(k, -1)
            if wy is not None
            else np.zeros((k, 0))
        )
        if not 0.0 <= stickiness < 1.0:
            raise ParamOutOfRangeError(
                name="stickiness", value=stickiness, allowed="[0, 1)"
            )
        super().__init__(k)
        self.rho = float(stickiness)

    def params(self) -> dict:
        return {
            "bias": self.bias.tolist(),
            "wx": self.wx.tolist(),
            "wy": self.wy.tolist(),
            "stickiness": self.rho,
        }

    def target(self, X, Y) -> np.ndarray:
        logits = self.bias + X @ self.wx.T + Y @ self.wy.T
        return softmax(logits, axis=1)

    def kernel_batch(self, X, Y):
        return _sticky(self.rho, self.target(X, Y))

    def kernel_derivatives_batch(self, X, Y):
        t = self.target(X, Y)

        def d(W):
            # d softmax_i / d theta_j = t_i (W_ij - sum_l t_l W_lj)
            mean = t @ W
            dt = t[:, None, :] * (W.T[None, :, :] - mean[:, :, None])
            return (1.0 - self.rho) * np.broadcast_to(
                dt[:, :, None, :],
                dt.shape[:2] + (self.n_states, self.n_states),
            )

        return d(self.wx), d(self.wy)
