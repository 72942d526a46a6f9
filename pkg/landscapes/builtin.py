import math
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import BPoly, PPoly
from scipy.optimize import brentq

from utils.errors import ParamOutOfRangeError
from .base import Landscape, Minimum, SlowMinimum

# |u| выше этого порога у x^3 - x - u остаётся один вещественный корень
FOLD_U = 2.0 / (3.0 * math.sqrt(3.0))

_NO_NOISE = (0.0,)
_SIGNS = (-1.0, 1.0)


def _col(v: np.ndarray) -> np.ndarray:
    return v[:, None]


class QuadraticTracking(Landscape):
    """
    f(x, u, z) = (x - c*z - u)^2, z in {-1, +1}.

    Одна ветвь: lambda(y) = c*zbar + epsilon*y, где zbar: среднее z
    под стационарным законом шума (0 для симметричной цепи).
    Приведённая функция phi(lambda(y), y) = c^2*(1 - zbar^2) постоянна
    по y, поэтому slow_minima пуст.
    """

    name = "quadratic_tracking"

    def __init__(
        self, epsilon: float = 0.1, c: float = 1.0, noise_mean: float = 0.0
    ):
        super().__init__(
            dim_x=1,
            dim_y=1,
            epsilon=epsilon,
            noise_values=_SIGNS,
            box=((-3.0, -3.0), (3.0, 3.0)),
            curvature_bound=2.0 * (1.0 + epsilon**2),
        )
        self.c = float(c)
        self.noise_mean = float(noise_mean)

    def params(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "c": self.c,
            "noise_mean": self.noise_mean,
        }

    def _r(self, x, u, z):
        return x[:, 0] - self.c * z - u[:, 0]

    def _f(self, x, u, z):
        return self._r(x, u, z) ** 2

    def _g1(self, x, u, z):
        return _col(2.0 * self._r(x, u, z))

    def _g2(self, x, u, z):
        return _col(-2.0 * self._r(x, u, z))

    @property
    def has_branches(self) -> bool:
        return True

    def branches_batch(self, y):
        lam = self.c * self.noise_mean + self.epsilon * y[:, 0]
        return lam[:, None, None]


class SymmetricDoubleWell(Landscape):
    """
    V(x) = depth*((x/width)^2 - 1)^2: минимумы в -width и +width с
    V'' = 8*depth/width^2, барьер высоты depth в нуле.
    """

    name = "symmetric_double_well"

    def __init__(
        self, depth: float = 1.0, epsilon: float = 0.1, width: float = 1.0
    ):
        if depth <= 0 or width <= 0:
            raise ParamOutOfRangeError(
                name="depth/width", value=(depth, width), allowed="> 0"
            )
        super().__init__(
            dim_x=1,
            dim_y=0,
            epsilon=epsilon,
            noise_values=_NO_NOISE,
            box=((-2.0 * width,), (2.0 * width,)),
            curvature_bound=44.0 * depth / width**2,
        )
        self.depth = float(depth)
        self.width = float(width)

    def params(self) -> dict[str, Any]:
        return {
            "depth": self.depth,
            "epsilon": self.epsilon,
            "width": self.width,
        }

    def _f(self, x, u, z):
        return self.depth * ((x[:, 0] / self.width) ** 2 - 1.0) ** 2

    def _g1(self, x, u, z):
        v, w2 = x[:, 0], self.width**2
        return _col(4.0 * self.depth * v * (v**2 - w2) / w2**2)

    def _g2(self, x, u, z):
        return np.zeros((x.shape[0], 0))

    @property
    def has_branches(self) -> bool:
        return True

    def branches_batch(self, y):
        n = y.shape[0]
        return np.broadcast_to(
            np.array([[-self.width], [self.width]]), (n, 2, 1)
        ).copy()

    @property
    def minima(self) -> tuple[Minimum, ...]:
        h = np.array([8.0 * self.depth / self.width**2])
        return (
            Minimum(np.array([-self.width]), h),
            Minimum(np.array([self.width]), h.copy()),
        )

    @property
    def barrier_height(self) -> float:
        return self.depth


class CurvatureAsymmetricWell(Landscape):
    """
    Две точные параболы c1/2*(x - m1)^2 и c2/2*(x - m2)^2 глубины 0,
    пересекающиеся на высоте `barrier` в x = 0. Излом в нуле заменён
    квинтическим эрмитовым колпаком на [-w, w] с совпадением значения,
    первой и второй производных на обоих концах (класс C^2).
    Глубины минимумов равны точно, различается только кривизна.
    """

    name = "curvature_asymmetric_well"

    def __init__(
        self,
        c1: float = 2.0,
        c2: float = 8.0,
        barrier: float = 0.25,
        cap_fraction: float = 0.25,
        epsilon: float = 0.1,
    ):
        for key, val in (("c1", c1), ("c2", c2), ("barrier", barrier)):
            if val <= 0:
                raise ParamOutOfRangeError(name=key, value=val, allowed="> 0")
        if not 0.0 < cap_fraction < 1.0:
            raise ParamOutOfRangeError(
                name="cap_fraction", value=cap_fraction, allowed="(0, 1)"
            )
        self.c1, self.c2 = float(c1), float(c2)
        self.barrier = float(barrier)
        self.cap_fraction = float(cap_fraction)
        self.m1 = -math.sqrt(2.0 * barrier / c1)
        self.m2 = math.sqrt(2.0 * barrier / c2)
        w = cap_fraction * min(-self.m1, self.m2)
        self.lo, self.hi = -w, w

        cap = BPoly.from_derivatives(
            [self.lo, self.hi],
            [
                [self._p1(self.lo), self.c1 * (self.lo - self.m1), self.c1],
                [self._p2(self.hi), self.c2 * (self.hi - self.m2), self.c2],
            ],
        )
        # в степенях (x - lo), старшие первыми
        coef = PPoly.from_bernstein_basis(cap).c[:, 0]
        self._cap = Polynomial(coef[::-1])
        self._dcap = self._cap.deriv()
        self._d2cap = self._cap.deriv(2)

        grid = np.linspace(0.0, self.hi - self.lo, 201)
        bound = max(self.c1, self.c2, float(np.abs(self._d2cap(grid)).max()))
        super().__init__(
            dim_x=1,
            dim_y=0,
            epsilon=epsilon,
            noise_values=_NO_NOISE,
            box=((self.m1 - 1.0,), (self.m2 + 1.0,)),
            curvature_bound=bound,
        )

    def params(self) -> dict[str, Any]:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "barrier": self.barrier,
            "cap_fraction": self.cap_fraction,
            "epsilon": self.epsilon,
        }

    def _p1(self, v):
        return 0.5 * self.c1 * (v - self.m1) ** 2

    def _p2(self, v):
        return 0.5 * self.c2 * (v - self.m2) ** 2

    def potential(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.where(
            v < self.lo,
            self._p1(v),
            np.where(v > self.hi, self._p2(v), self._cap(v - self.lo)),
        )

    def _f(self, x, u, z):
        return self.potential(x[:, 0])

    def _g1(self, x, u, z):
        v = x[:, 0]
        g = np.where(
            v < self.lo,
            self.c1 * (v - self.m1),
            np.where(
                v > self.hi, self.c2 * (v - self.m2), self._dcap(v - self.lo)
            ),
        )
        return _col(g)

    def _g2(self, x, u, z):
        return np.zeros((x.shape[0], 0))

    @property
    def has_branches(self) -> bool:
        return True

    def branches_batch(self, y):
        n = y.shape[0]
        return np.broadcast_to(
            np.array([[self.m1], [self.m2]]), (n, 2, 1)
        ).copy()

    @property
    def minima(self) -> tuple[Minimum, ...]:
        return (
            Minimum(np.array([self.m1]), np.array([self.c1])),
            Minimum(np.array([self.m2]), np.array([self.c2])),
        )

    @property
    def barrier_point(self) -> float:
        return 0.0

    @property
    def barrier_height(self) -> float:
        grid = np.linspace(0.0, self.hi - self.lo, 401)
        return float(self._cap(grid).max())


def upper_root(u: np.ndarray) -> np.ndarray:
    """
    Наибольший корень x^3 - x - u = 0 (ветвь существует при u > -FOLD_U).
    Три корня: тригонометрическая формула, один: формула Кардано.
    """
    u = np.asarray(u, dtype=float)
    out = np.full(u.shape, np.nan)
    three = np.abs(u) < FOLD_U
    theta = np.arccos(np.clip(1.5 * math.sqrt(3.0) * u[three], -1.0, 1.0))
    out[three] = (2.0 / math.sqrt(3.0)) * np.cos(theta / 3.0)
    one = u >= FOLD_U
    d = np.sqrt(np.maximum(u[one] ** 2 / 4.0 - 1.0 / 27.0, 0.0))
    out[one] = np.cbrt(u[one] / 2.0 + d) + np.cbrt(u[one] / 2.0 - d)
    return out


class MemorizationDrift(Landscape):
    """
    f(x, u, z) = x^4/4 - x^2/2 - x*u + beta*u*z + h(u), z in {-1, +1},
    h(u) = ridge_height*(exp(-(u - c)^2/(2w^2)) + exp(-(u + c)^2/(2w^2))),
    c = ridge_center, w = ridge_width.

    Пара к цепи tilted_flip: pi(+1 | x) = (1 + tanh(x/length))/2.
    Для каждого u быстрые минимумы: крайние корни x^3 - x - u:
    lambda_2(u) = upper_root(u) при u > -FOLD_U и lambda_1(u) =
    -lambda_2(-u) при u < FOLD_U; складки в u = +-FOLD_U.

    Усреднённый медленный градиент на ветви
    -lambda + beta*tanh(lambda/length) + h'(u). При |u| < FOLD_U он не
    обращается в ноль (beta = 8, length = 1), поэтому y дрейфует до
    складки, x перескакивает на другую ветвь и цикл повторяется:
    релаксационные колебания. За складкой, на склоне холма h, у каждой
    ветви есть изолированный минимум приведённой функции (slow_minima):
    u ~ +-0.56 при значениях по умолчанию. Там быстрая ветвь
    единственная, но не argmin усреднённой phi(., y): наклон pi по x
    делает выгоднее противоположный знак x.
    """

    name = "memorization_drift"

    def __init__(
        self,
        epsilon: float,
        beta: float = 8.0,
        length: float = 1.0,
        ridge_center: float = 0.5,
        ridge_height: float = 0.6,
        ridge_width: float = 0.03,
    ):
        if beta <= 0 or length <= 0:
            raise ParamOutOfRangeError(
                name="beta/length", value=(beta, length), allowed="> 0"
            )
        if ridge_center <= FOLD_U or ridge_width <= 0 or ridge_height < 0:
            raise ParamOutOfRangeError(
                name="ridge",
                value=(ridge_center, ridge_height, ridge_width),
                allowed="center > FOLD_U, height >= 0, width > 0",
            )
        x_max = 2.0
        u_max = 0.8
        super().__init__(
            dim_x=1,
            dim_y=1,
            epsilon=epsilon,
            noise_values=_SIGNS,
            box=((-x_max, -u_max / epsilon), (x_max, u_max / epsilon)),
            curvature_bound=3.0 * x_max**2
            + beta / length
            + epsilon**2 * ridge_height / ridge_width**2,
        )
        self.beta = float(beta)
        self.length = float(length)
        self.ridge_center = float(ridge_center)
        self.ridge_height = float(ridge_height)
        self.ridge_width = float(ridge_width)

    def params(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "beta": self.beta,
            "length": self.length,
            "ridge_center": self.ridge_center,
            "ridge_height": self.ridge_height,
            "ridge_width": self.ridge_width,
        }

    def _bumps(self, w: np.ndarray):
        c, s = self.ridge_center, self.ridge_width
        up, down = (w - c) / s, (w + c) / s
        return up, np.exp(-(up**2) / 2.0), down, np.exp(-(down**2) / 2.0)

    def _h(self, w):
        _, e_up, _, e_down = self._bumps(w)
        return self.ridge_height * (e_up + e_down)

    def _dh(self, w):
        up, e_up, down, e_down = self._bumps(w)
        return -self.ridge_height / self.ridge_width * (
            up * e_up + down * e_down
        )

    def _d2h(self, w):
        up, e_up, down, e_down = self._bumps(w)
        return self.ridge_height / self.ridge_width**2 * (
            (up**2 - 1.0) * e_up + (down**2 - 1.0) * e_down
        )

    def _f(self, x, u, z):
        v, w = x[:, 0], u[:, 0]
        return (
            v**4 / 4.0 - v**2 / 2.0 - v * w + self.beta * w * z + self._h(w)
        )

    def _g1(self, x, u, z):
        v = x[:, 0]
        return _col(v**3 - v - u[:, 0])

    def _g2(self, x, u, z):
        return _col(-x[:, 0] + self.beta * z + self._dh(u[:, 0]))

    @property
    def has_branches(self) -> bool:
        return True

    def _branch_at(self, w: np.ndarray, branch: int) -> np.ndarray:
        return -upper_root(-w) if branch == 0 else upper_root(w)

    def branches_batch(self, y):
        u = self.epsilon * y[:, 0]
        return np.stack(
            [self._branch_at(u, 0), self._branch_at(u, 1)], axis=1
        )[:, :, None]

    def _reduced_du(self, w: np.ndarray, branch: int) -> np.ndarray:
        # d/du phi(lambda(u), u) под законом tilted_flip
        lam = self._branch_at(w, branch)
        return -lam + self.beta * np.tanh(lam / self.length) + self._dh(w)

    def _reduced_du_scalar(self, w: float, branch: int) -> float:
        return float(self._reduced_du(np.array([w]), branch)[0])

    def _reduced_d2u(self, w: float, branch: int) -> float:
        lam = float(self._branch_at(np.array([w]), branch)[0])
        sech2 = 1.0 / np.cosh(lam / self.length) ** 2
        dlam = 1.0 / (3.0 * lam**2 - 1.0)
        d2h = float(self._d2h(np.array([w]))[0])
        return (self.beta / self.length * sech2 - 1.0) * dlam + d2h

    @cached_property
    def _slow_minima(self) -> tuple[SlowMinimum, ...]:
        lo, hi = self.box[0][1], self.box[1][1]
        grid = self.epsilon * np.linspace(lo, hi, 4001)
        found = []
        for branch in (0, 1):
            g = self._reduced_du(grid, branch)
            # смена знака с - на +: минимум приведённой функции
            for k in np.flatnonzero((g[:-1] < 0) & (g[1:] > 0)):
                w = brentq(
                    self._reduced_du_scalar,
                    grid[k],
                    grid[k + 1],
                    args=(branch,),
                    xtol=1e-14,
                )
                found.append(
                    SlowMinimum(
                        y=np.array([w / self.epsilon]),
                        branch=branch,
                        x=self._branch_at(np.array([w]), branch),
                        curvature=self.epsilon**2
                        * self._reduced_d2u(w, branch),
                    )
                )
        return tuple(found)

    @property
    def slow_minima(self) -> tuple[SlowMinimum, ...]:
        return self._slow_minima

    @property
    def folds(self) -> tuple[float, ...]:
        # в координатах y
        return (-FOLD_U / self.epsilon, FOLD_U / self.epsilon)


class SeparablePolynomial(Landscape):
    """
    f(x, z) = sum_j p_j(x_j) + noise_shift*z; коэффициенты p_j по
    возрастанию степеней. Только быстрая переменная.
    """

    name = "separable_polynomial"

    def __init__(
        self,
        coefficients: Sequence[Sequence[float]],
        noise_shift: float = 0.0,
        epsilon: float = 0.1,
        half_width: float = 2.0,
    ):
        self.coefficients = [list(map(float, c)) for c in coefficients]
        self._polys = [Polynomial(c) for c in self.coefficients]
        self._d1 = [p.deriv() for p in self._polys]
        grid = np.linspace(-half_width, half_width, 401)
        bound = max(
            [float(np.abs(p.deriv(2)(grid)).max()) for p in self._polys]
            + [1e-12]
        )
        s = len(self._polys)
        super().__init__(
            dim_x=s,
            dim_y=0,
            epsilon=epsilon,
            noise_values=_SIGNS,
            box=((-half_width,) * s, (half_width,) * s),
            curvature_bound=bound,
        )
        self.noise_shift = float(noise_shift)
        self.half_width = float(half_width)

    def params(self) -> dict[str, Any]:
        return {
            "coefficients": self.coefficients,
            "noise_shift": self.noise_shift,
            "epsilon": self.epsilon,
            "half_width": self.half_width,
        }

    def _f(self, x, u, z):
        total = self.noise_shift * np.asarray(z, dtype=float)
        for j, p in enumerate(self._polys):
            total = total + p(x[:, j])
        return total

    def _g1(self, x, u, z):
        return np.stack(
            [d(x[:, j]) for j, d in enumerate(self._d1)], axis=1
        )

    def _g2(self, x, u, z):
        return np.zeros((x.shape[0], 0))
