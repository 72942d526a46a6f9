import logging
from typing import Literal

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from landscapes.base import Landscape
from measures.core import _from_array, draw_indices, inverse_cdf
from measures.schemas import DiscreteMeasure
from utils.errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    NotDifferentiableError,
    NotIrreducibleError,
    ParamOutOfRangeError,
)
from utils.seeding import make_rng
from .chains import ControlledChain

logger = logging.getLogger(__name__)

DENSE_LIMIT = 200
RESIDUAL_TOL = 1e-10
FD_STEP = 1e-5
POWER_MAX_ITERS = 1_000_000

Mode = Literal["frozen", "full"]


def _xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    Y = np.asarray(y if y is not None else [], dtype=float).reshape(1, -1)
    return X, Y


def noise_step(C: ControlledChain, x, y, state: int, rng) -> int:
    """Следующее состояние из строки `state` ядра P(x, y); одно равномерное."""
    if not 0 <= state < C.n_states:
        raise IndexOutOfRangeError(index=state, size=C.n_states)
    X, Y = _xy(x, y)
    row = C.rows_batch(X, Y, np.array([state]))[0]
    u = make_rng(rng).random(1)
    return int(draw_indices(inverse_cdf(row), u)[0])


def step_states(
    C: ControlledChain,
    X: np.ndarray,
    Y: np.ndarray,
    states: np.ndarray,
    u: np.ndarray,
) -> np.ndarray:
    """Пакетный noise_step: u: по одному равномерному на реплику."""
    rows = C.rows_batch(X, Y, states)
    cum = np.cumsum(rows, axis=1)
    nxt = (cum <= u[:, None]).sum(axis=1)
    # нулевой хвост строки не выбирается никогда
    last = rows.shape[1] - 1 - np.argmax(rows[:, ::-1] > 0, axis=1)
    return np.minimum(nxt, last)


def _check_irreducible(P: np.ndarray) -> None:
    n_comp, _ = connected_components(
        csr_matrix(P > 0), directed=True, connection="strong"
    )
    if n_comp != 1:
        raise NotIrreducibleError(reason=f"{n_comp} communicating classes")


def _stationary_matrix(P: np.ndarray) -> np.ndarray:
    k = P.shape[0]
    if k <= DENSE_LIMIT:
        A = P.T - np.eye(k)
        A[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        return np.linalg.solve(A, b)
    # ленивая цепь (P + I)/2 с тем же pi: степенной метод сходится
    # и для периодических ядер
    logger.debug("[noise] power iteration for k=%d", k)
    lazy = 0.5 * (P + np.eye(k))
    pi = np.full(k, 1.0 / k)
    for _ in range(POWER_MAX_ITERS):
        nxt = pi @ lazy
        if np.max(np.abs(nxt - pi)) < 1e-15:
            return nxt
        pi = nxt
    return pi


def stationary_of(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    _check_irreducible(P)
    pi = _stationary_matrix(P)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual >= RESIDUAL_TOL:
        raise NotIrreducibleError(reason=f"residual {residual:.3e}")
    return pi


def stationary_distribution(C: ControlledChain, x, y) -> DiscreteMeasure:
    return _from_array(stationary_of(C.kernel(x, y)))


def stationary_batch(P: np.ndarray) -> np.ndarray:
    """
    pi для стопки ядер (n, k, k) одним пакетным решением. Неприводимость
    не проверяется: горячий путь для ядер, уже проверенных в точке.
    """
    n, k, _ = P.shape
    A = np.transpose(P, (0, 2, 1)) - np.eye(k)
    A[:, -1, :] = 1.0
    b = np.zeros((n, k, 1))
    b[:, -1, 0] = 1.0
    return np.linalg.solve(A, b)[..., 0]


def _check_arity(L: Landscape, C: ControlledChain) -> None:
    if L.n_noise != C.n_states:
        raise DimensionMismatchError(
            what="noise arity", expected=L.n_noise, got=C.n_states
        )


def _all_noise(L: Landscape, X: np.ndarray, Y: np.ndarray):
    """f, grad1, grad2 во всех состояниях шума: (n,k), (n,k,s), (n,k,r)."""
    n, k = X.shape[0], L.n_noise
    Xr = np.repeat(X, k, axis=0)
    Yr = np.repeat(Y, k, axis=0)
    Z = np.tile(np.arange(k), n)
    F = L.eval_batch(Xr, Yr, Z).reshape(n, k)
    G1 = L.grad1_batch(Xr, Yr, Z).reshape(n, k, L.dim_x)
    G2 = L.grad2_batch(Xr, Yr, Z).reshape(n, k, L.dim_y)
    return F, G1, G2


def averaged_loss_batch(
    L: Landscape, C: ControlledChain, X: np.ndarray, Y: np.ndarray
) -> np.ndarray:
    _check_arity(L, C)
    pi = stationary_batch(C.kernel_batch(X, Y))
    n, k = X.shape[0], L.n_noise
    Xr = np.repeat(X, k, axis=0)
    Yr = np.repeat(Y, k, axis=0)
    F = L.eval_batch(Xr, Yr, np.tile(np.arange(k), n)).reshape(n, k)
    return (pi * F).sum(axis=1)


def averaged_loss(L: Landscape, C: ControlledChain, x, y) -> float:
    """phi(x, y) = sum_z pi_{(x,y)}(z) f(x, epsilon*y, z)."""
    _check_arity(L, C)
    pi = stationary_of(C.kernel(x, y))
    X, Y = _xy(x, y)
    F, _, _ = _all_noise(L, X, Y)
    return float(pi @ F[0])


def _dpi_linear(
    P: np.ndarray, pi: np.ndarray, dP: np.ndarray
) -> np.ndarray:
    """
    Производная стационарного закона из (P^T - I) dpi = -dP^T pi,
    sum(dpi) = 0. P (n,k,k), pi (n,k), dP (n,m,k,k) -> (n,m,k).
    """
    n, k, _ = P.shape
    if dP.shape[1] == 0:
        return np.zeros((n, 0, k))
    A = np.transpose(P, (0, 2, 1)) - np.eye(k)
    A[:, -1, :] = 1.0
    rhs = -np.einsum("nmji,nj->nmi", dP, pi)
    rhs[..., -1] = 0.0
    return np.linalg.solve(A[:, None], rhs[..., None])[..., 0]


def _dpi_fd(C: ControlledChain, X, Y, which: int) -> np.ndarray:
    # центральная разность pi по координатам x (which=0) или y (which=1)
    base = (X, Y)[which]
    n, m = base.shape
    out = np.empty((n, m, C.n_states))
    for j in range(m):
        e = np.zeros(m)
        e[j] = FD_STEP
        if which == 0:
            hi = stationary_batch(C.kernel_batch(X + e, Y))
            lo = stationary_batch(C.kernel_batch(X - e, Y))
        else:
            hi = stationary_batch(C.kernel_batch(X, Y + e))
            lo = stationary_batch(C.kernel_batch(X, Y - e))
        out[:, j] = (hi - lo) / (2 * FD_STEP)
    return out


def averaged_grads_batch(
    L: Landscape,
    C: ControlledChain,
    X: np.ndarray,
    Y: np.ndarray,
    mode: Mode = "full",
) -> tuple[np.ndarray, np.ndarray]:
    """
    frozen: (sum pi grad1, sum pi grad2) при замороженном pi.
    full:   градиент phi; вторая компонента в соглашении grad2 (d/du),
            т.е. поправка sum f dpi/dy делится на epsilon.
    """
    if mode not in ("frozen", "full"):
        raise ParamOutOfRangeError(
            name="mode", value=mode, allowed="frozen | full"
        )
    _check_arity(L, C)
    P = C.kernel_batch(X, Y)
    pi = stationary_batch(P)
    F, G1, G2 = _all_noise(L, X, Y)
    g1 = np.einsum("nk,nks->ns", pi, G1)
    g2 = np.einsum("nk,nkr->nr", pi, G2)
    if mode == "frozen" or not C.depends_on_iterate:
        return g1, g2
    if not C.differentiable:
        raise NotDifferentiableError(chain=C.name)

    derivs = C.kernel_derivatives_batch(X, Y)
    if derivs is not None:
        dpi_x = _dpi_linear(P, pi, derivs[0])
        dpi_y = _dpi_linear(P, pi, derivs[1])
    else:
        dpi_x = _dpi_fd(C, X, Y, 0)
        dpi_y = _dpi_fd(C, X, Y, 1)
    g1 = g1 + np.einsum("nsk,nk->ns", dpi_x, F)
    g2 = g2 + np.einsum("nrk,nk->nr", dpi_y, F) / L.epsilon
    return g1, g2


def averaged_grads(
    L: Landscape, C: ControlledChain, x, y, mode: Mode = "full"
) -> tuple[np.ndarray, np.ndarray]:
    X, Y = _xy(x, y)
    g1, g2 = averaged_grads_batch(L, C, X, Y, mode)
    return g1[0], g2[0]
