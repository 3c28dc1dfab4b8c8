"""Exact Riemann solver for the 1-d compressible Euler equations.

Star-region pressure is found by Newton iteration on the standard pressure
function (Toro, "Riemann Solvers and Numerical Methods for Fluid Dynamics",
ch. 4); the self-similar solution is then sampled along rays x/t with full
shock / rarefaction / contact branching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RiemannState:
    """Left/right primitive states (rho, u, p), interface location, gas gamma."""

    rho_l: float
    u_l: float
    p_l: float
    rho_r: float
    u_r: float
    p_r: float
    x0: float = 0.0
    gamma: float = 1.4

    def __post_init__(self):
        if min(self.rho_l, self.rho_r, self.p_l, self.p_r) <= 0.0:
            raise ValueError(f"densities and pressures must be positive: {self}")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")

    def sound_speeds(self) -> tuple[float, float]:
        return (
            float(np.sqrt(self.gamma * self.p_l / self.rho_l)),
            float(np.sqrt(self.gamma * self.p_r / self.rho_r)),
        )


def total_energy(rho, u, p, gamma: float = 1.4):
    """Volumetric total energy E = rho u^2 / 2 + p / (gamma - 1)."""
    rho = np.asarray(rho, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return 0.5 * rho * u * u + p / (gamma - 1.0)


def _pressure_fn(p: float, rho_k: float, p_k: float, a_k: float,
                 gamma: float) -> tuple[float, float]:
    """Toro's f_K(p) and its derivative for one side of the interface."""
    if p > p_k:  # shock branch
        a_coef = 2.0 / ((gamma + 1.0) * rho_k)
        b_coef = (gamma - 1.0) / (gamma + 1.0) * p_k
        root = np.sqrt(a_coef / (p + b_coef))
        f = (p - p_k) * root
        df = root * (1.0 - 0.5 * (p - p_k) / (p + b_coef))
    else:  # rarefaction branch
        ratio = p / p_k
        f = 2.0 * a_k / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
        df = (1.0 / (rho_k * a_k)) * ratio ** (-(gamma + 1.0) / (2.0 * gamma))
    return f, df


def solve_star(state: RiemannState, tol: float = 1e-12,
               max_iter: int = 100) -> tuple[float, float]:
    """Newton iteration for the star-region pressure and velocity."""
    g = state.gamma
    a_l, a_r = state.sound_speeds()
    du = state.u_r - state.u_l
    if 2.0 * (a_l + a_r) / (g - 1.0) <= du:
        raise ValueError("initial states generate vacuum; no solution sampled")
    # two-rarefaction initial guess, positive by construction
    z = (g - 1.0) / (2.0 * g)
    p = (
        (a_l + a_r - 0.5 * (g - 1.0) * du)
        / (a_l / state.p_l ** z + a_r / state.p_r ** z)
    ) ** (1.0 / z)
    p = max(p, tol)
    for _ in range(max_iter):
        f_l, df_l = _pressure_fn(p, state.rho_l, state.p_l, a_l, g)
        f_r, df_r = _pressure_fn(p, state.rho_r, state.p_r, a_r, g)
        step = (f_l + f_r + du) / (df_l + df_r)
        p_new = p - step
        if p_new <= 0.0:
            p_new = tol
        if 2.0 * abs(p_new - p) / (p_new + p) < tol:
            p = p_new
            break
        p = p_new
    else:
        raise RuntimeError(f"star pressure iteration failed to converge for {state}")
    f_l, _ = _pressure_fn(p, state.rho_l, state.p_l, a_l, g)
    f_r, _ = _pressure_fn(p, state.rho_r, state.p_r, a_r, g)
    u = 0.5 * (state.u_l + state.u_r) + 0.5 * (f_r - f_l)
    return float(p), float(u)


def star_region(state: RiemannState) -> dict:
    """Star pressure/velocity, star densities, wave kinds and wave speeds."""
    g = state.gamma
    a_l, a_r = state.sound_speeds()
    p, u = solve_star(state)
    g6 = (g - 1.0) / (g + 1.0)
    out: dict = {"p_star": p, "u_star": u}
    if p > state.p_l:
        out["left_wave"] = "shock"
        out["rho_star_l"] = state.rho_l * ((p / state.p_l + g6) / (g6 * p / state.p_l + 1.0))
        out["left_speed"] = state.u_l - a_l * np.sqrt(
            (g + 1.0) / (2.0 * g) * p / state.p_l + (g - 1.0) / (2.0 * g))
    else:
        out["left_wave"] = "rarefaction"
        out["rho_star_l"] = state.rho_l * (p / state.p_l) ** (1.0 / g)
        a_star = a_l * (p / state.p_l) ** ((g - 1.0) / (2.0 * g))
        out["left_speed"] = (state.u_l - a_l, u - a_star)  # (head, tail)
    if p > state.p_r:
        out["right_wave"] = "shock"
        out["rho_star_r"] = state.rho_r * ((p / state.p_r + g6) / (g6 * p / state.p_r + 1.0))
        out["right_speed"] = state.u_r + a_r * np.sqrt(
            (g + 1.0) / (2.0 * g) * p / state.p_r + (g - 1.0) / (2.0 * g))
    else:
        out["right_wave"] = "rarefaction"
        out["rho_star_r"] = state.rho_r * (p / state.p_r) ** (1.0 / g)
        a_star = a_r * (p / state.p_r) ** ((g - 1.0) / (2.0 * g))
        out["right_speed"] = (state.u_r + a_r, u + a_star)
    return out


def _sample_rays(state: RiemannState, s: np.ndarray, star: dict):
    """Vectorized self-similar sampling at rays s = (x - x0) / t."""
    g = state.gamma
    a_l, a_r = state.sound_speeds()
    p_star, u_star = star["p_star"], star["u_star"]
    rho = np.empty_like(s)
    u = np.empty_like(s)
    p = np.empty_like(s)

    left = s <= u_star
    right = ~left

    if star["left_wave"] == "shock":
        s_l = star["left_speed"]
        pre = left & (s < s_l)
        post = left & ~pre
        rho[pre], u[pre], p[pre] = state.rho_l, state.u_l, state.p_l
        rho[post], u[post], p[post] = star["rho_star_l"], u_star, p_star
    else:
        head, tail = star["left_speed"]
        pre = left & (s < head)
        fan = left & (s >= head) & (s <= tail)
        post = left & (s > tail)
        rho[pre], u[pre], p[pre] = state.rho_l, state.u_l, state.p_l
        rho[post], u[post], p[post] = star["rho_star_l"], u_star, p_star
        bracket = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * a_l) * (state.u_l - s[fan])
        rho[fan] = state.rho_l * bracket ** (2.0 / (g - 1.0))
        u[fan] = 2.0 / (g + 1.0) * (a_l + 0.5 * (g - 1.0) * state.u_l + s[fan])
        p[fan] = state.p_l * bracket ** (2.0 * g / (g - 1.0))

    if star["right_wave"] == "shock":
        s_r = star["right_speed"]
        post = right & (s > s_r)
        pre = right & ~post
        rho[post], u[post], p[post] = state.rho_r, state.u_r, state.p_r
        rho[pre], u[pre], p[pre] = star["rho_star_r"], u_star, p_star
    else:
        head, tail = star["right_speed"]
        post = right & (s > head)
        fan = right & (s >= tail) & (s <= head)
        pre = right & (s < tail)
        rho[post], u[post], p[post] = state.rho_r, state.u_r, state.p_r
        rho[pre], u[pre], p[pre] = star["rho_star_r"], u_star, p_star
        bracket = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * a_r) * (state.u_r - s[fan])
        rho[fan] = state.rho_r * bracket ** (2.0 / (g - 1.0))
        u[fan] = 2.0 / (g + 1.0) * (-a_r + 0.5 * (g - 1.0) * state.u_r + s[fan])
        p[fan] = state.p_r * bracket ** (2.0 * g / (g - 1.0))

    return rho, u, p


def euler_riemann_exact(state: RiemannState, x: np.ndarray, t: float):
    """Exact (rho, u, p) at positions x and time t > 0."""
    if t <= 0.0:
        raise ValueError(f"need t > 0 to sample the self-similar solution, got {t}")
    s = (np.asarray(x, dtype=np.float64) - state.x0) / t
    return _sample_rays(state, s, star_region(state))


def riemann_state_from_z(z: np.ndarray) -> RiemannState:
    """Map a [0,1]^6 latent vector onto a randomized shock-tube problem."""
    zv = np.asarray(z, dtype=np.float64)
    if zv.shape != (6,):
        raise ValueError(f"z must have shape (6,), got {zv.shape}")
    if np.any(zv < 0.0) or np.any(zv > 1.0):
        raise ValueError("z components must lie in [0, 1]")
    g = 2.0 * zv - 1.0
    return RiemannState(
        rho_l=0.75 + 0.45 * g[0],
        rho_r=0.4 + 0.3 * g[1],
        u_l=0.5 + 0.5 * g[2],
        p_l=2.5 + 1.6 * g[3],
        p_r=0.375 + 0.325 * g[4],
        u_r=0.0,
        x0=0.5 * g[5],
    )


def sod_params_sample(rng: np.random.Generator) -> tuple[np.ndarray, RiemannState]:
    """Draw the 6-vector z and its randomized shock-tube state."""
    z = rng.uniform(0.0, 1.0, size=6)
    return z, riemann_state_from_z(z)
