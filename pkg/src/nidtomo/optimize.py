"""Gradient-descent solvers with secant initial steps and safeguarded line search.

The main solver iterates ``f <- f - t * v`` with ``v`` the functional
gradient.  The initial trial step is the secant (Barzilai-Borwein) quotient
``<dv, df> / <dv, dv>``; the accepted step must satisfy the sufficient
decrease condition

    T(f - t v) <= T(f) - mu * t * <v, v>

either alone (``armijo`` mode, geometric backtracking) or together with the
curvature condition ``-<T'(f - t v), v> >= -rho * <v, v>`` (``wolfe`` mode,
bracket and zoom).  The adaptive solver evaluates an iteration-dependent
blended functional and steps down a fixed geometric ladder instead of the
secant step; it additionally audits the per-step descent-control slack that
guarantees monotone decrease of the blended values.

Every accepted iteration is recorded in an :class:`IterationTrace`; traces
are append-only and exportable as CSV.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .functionals import AnidProblem, AnidSchedule, NidConfig, NidProblem, TvConfig, TvProblem
from .grids import Image, inner, norm
from .radon import ProjectionMatrix, Sinogram

logger = logging.getLogger(__name__)

TRACE_HEADER = "n,value,grad_norm,t_n,tau_n,omega,zeta,cond41_slack"


class LineSearchError(RuntimeError):
    """No admissible step found within the backtracking budget."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass
class LineSearchConfig:
    mu: float = 1e-4
    rho: float = 0.9
    backtrack: float = 0.5
    tau0: float = 1.0
    mode: str = "wolfe"
    max_backtracks: int = 60
    use_bb: bool = True

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if not self.mu < self.rho < 1.0:
            raise ValueError("rho must lie in (mu, 1)")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.tau0 <= 0:
            raise ValueError("initial step tau0 must be positive")
        if self.mode not in ("armijo", "wolfe"):
            raise ValueError(f"unknown line-search mode {self.mode!r}")


@dataclass
class StopCriteria:
    max_iters: int = 500
    grad_tol: float = 1e-6  # relative to max(1, ||v_0||)
    value_tol: float = 0.0  # relative stagnation of the functional; 0 disables

    def __post_init__(self):
        if self.max_iters <= 0 and self.grad_tol <= 0 and self.value_tol <= 0:
            raise ValueError("at least one stopping criterion must be active")


@dataclass
class TraceRecord:
    n: int
    value: float
    grad_norm: float
    t: float
    tau: float
    omega: float | None = None
    zeta: float | None = None
    cond41_slack: float | None = None


@dataclass
class IterationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    final_value: float = np.nan
    final_grad_norm: float = np.nan
    stop_reason: str = ""

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def csv_text(self) -> str:
        def fmt(x):
            return "" if x is None else repr(float(x))

        lines = [TRACE_HEADER]
        for r in self.records:
            lines.append(
                ",".join(
                    [
                        str(r.n),
                        fmt(r.value),
                        fmt(r.grad_norm),
                        fmt(r.t),
                        fmt(r.tau),
                        fmt(r.omega),
                        fmt(r.zeta),
                        fmt(r.cond41_slack),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def bb_step(f_n: Image, f_prev: Image, v_n: Image, v_prev: Image, tau0: float = 1.0) -> float:
    """Secant step <dv, df> / <dv, dv>, guarded against degeneracy.

    Falls back to ``tau0`` when the denominator vanishes or the quotient is
    non-positive (possible without the curvature condition), and clamps
    runaway magnitudes.
    """
    dv = Image(v_n.grid, v_n.values - v_prev.values)
    df = Image(f_n.grid, f_n.values - f_prev.values)
    den = inner(dv, dv)
    if not np.isfinite(den) or den < 1e-30:
        return tau0
    tau = inner(dv, df) / den
    if not np.isfinite(tau) or tau <= 0.0:
        return tau0
    return float(np.clip(tau, 1e-8, 1e8))


def _step_image(f: Image, v: Image, t: float) -> Image:
    return Image(f.grid, f.values - t * v.values)


def armijo_search(value_fn, f: Image, v: Image, tau: float, cfg: LineSearchConfig,
                  value_at_f: float | None = None):
    """Largest step backtrack^l * tau meeting the sufficient-decrease bound.

    Returns (t, new image, new value).
    """
    if value_at_f is None:
        value_at_f = value_fn(f)
    vnorm2 = inner(v, v)
    t = tau
    for _ in range(cfg.max_backtracks + 1):
        cand = _step_image(f, v, t)
        val = value_fn(cand)
        if val <= value_at_f - cfg.mu * t * vnorm2:
            return t, cand, val
        t *= cfg.backtrack
    raise LineSearchError(
        f"sufficient decrease not reached within {cfg.max_backtracks} backtracks "
        f"(tau={tau:.3e}, |v|^2={vnorm2:.3e})"
    )


def wolfe_search(value_fn, grad_fn, f: Image, v: Image, tau: float, cfg: LineSearchConfig,
                 value_at_f: float | None = None):
    """Bracketing-and-zoom search for both descent conditions.

    phi(t) = T(f - t v) has phi'(0) = -<v, v> since v is the gradient at f.
    Returns (t, new image, new value, new gradient); the gradient at the
    accepted point is reused by the caller.
    """
    if value_at_f is None:
        value_at_f = value_fn(f)
    vnorm2 = inner(v, v)
    dphi0 = -vnorm2

    def phi(t):
        cand = _step_image(f, v, t)
        return cand, value_fn(cand)

    def dphi(cand):
        grad = grad_fn(cand)
        return grad, -inner(grad, v)

    def sufficient(t, val):
        return val <= value_at_f + cfg.mu * t * dphi0

    def zoom(lo, hi, val_lo):
        for _ in range(cfg.max_backtracks):
            t = 0.5 * (lo + hi)
            cand, val = phi(t)
            if not sufficient(t, val) or val >= val_lo:
                hi = t
                continue
            grad, slope = dphi(cand)
            if slope >= cfg.rho * dphi0:
                return t, cand, val, grad
            if slope * (hi - lo) >= 0.0:
                hi = lo
            lo, val_lo = t, val
        raise LineSearchError(
            f"zoom stalled in [{lo:.3e}, {hi:.3e}] after {cfg.max_backtracks} bisections"
        )

    t_prev, val_prev = 0.0, value_at_f
    t = tau
    for k in range(cfg.max_backtracks):
        cand, val = phi(t)
        if not sufficient(t, val) or (k > 0 and val >= val_prev):
            return zoom(t_prev, t, val_prev)
        grad, slope = dphi(cand)
        if slope >= cfg.rho * dphi0:
            return t, cand, val, grad
        if slope >= 0.0:
            return zoom(t, t_prev, val)
        t_prev, val_prev = t, val
        t *= 2.0
    raise LineSearchError(
        f"curvature condition not bracketed from tau={tau:.3e} "
        f"after {cfg.max_backtracks} expansions"
    )


def _stop_on_gradient(vnorm, v0norm, stop):
    return stop.grad_tol > 0 and vnorm <= stop.grad_tol * max(1.0, v0norm)


def _stop_on_value(prev_value, value, stop):
    if stop.value_tol <= 0 or prev_value is None:
        return False
    return prev_value - value <= stop.value_tol * max(1.0, abs(prev_value))


def minimize(value_fn, grad_fn, f0: Image, ls: LineSearchConfig, stop: StopCriteria):
    """Descent loop shared by the non-adaptive solvers; returns (f, trace)."""
    trace = IterationTrace()
    f = f0
    v = grad_fn(f)
    value = value_fn(f)
    v0norm = norm(v)
    vnorm = v0norm
    f_prev = v_prev = None
    prev_value = None
    n = 0
    while True:
        if vnorm == 0.0 or _stop_on_gradient(vnorm, v0norm, stop):
            trace.stop_reason = "gradient"
            break
        if _stop_on_value(prev_value, value, stop):
            trace.stop_reason = "stagnation"
            break
        if n >= stop.max_iters:
            trace.stop_reason = "max_iters"
            break

        if ls.use_bb and n > 0:
            tau = bb_step(f, f_prev, v, v_prev, ls.tau0)
        else:
            tau = ls.tau0
        try:
            if ls.mode == "wolfe":
                t, f_new, val_new, v_new = wolfe_search(value_fn, grad_fn, f, v, tau, ls, value)
            else:
                t, f_new, val_new = armijo_search(value_fn, f, v, tau, ls, value)
                v_new = None
        except LineSearchError as err:
            err.trace = trace
            raise

        trace.append(TraceRecord(n=n, value=value, grad_norm=vnorm, t=t, tau=tau))
        f_prev, v_prev = f, v
        prev_value = value
        f, value = f_new, val_new
        v = v_new if v_new is not None else grad_fn(f)
        vnorm = norm(v)
        n += 1

    trace.final_value = value
    trace.final_grad_norm = vnorm
    return f, trace


def solve_nid(g: Sinogram, A: ProjectionMatrix, cfg: NidConfig, ls: LineSearchConfig,
              stop: StopCriteria, f0: Image):
    problem = NidProblem(A, g, cfg)
    return minimize(problem.value, problem.gradient, f0, ls, stop)


def solve_tv(g: Sinogram, A: ProjectionMatrix, cfg: TvConfig, ls: LineSearchConfig,
             stop: StopCriteria, f0: Image):
    problem = TvProblem(A, g, cfg)
    return minimize(problem.value, problem.gradient, f0, ls, stop)


def condition41_slack(mu: float, t_n: float, grad_norm: float, omega_n: float,
                      omega_next: float, nid_value_n: float, nid_value_next: float,
                      tv_value_n: float) -> float:
    """Slack of the adaptive descent-control inequality at one step.

    Nonnegative slack means the schedule varied slowly enough at this step
    for the blended functional values to keep decreasing; the functional
    arguments are all evaluated at the *new* iterate.
    """
    drift = (omega_n - omega_next) * (nid_value_n - tv_value_n)
    drift += (1.0 - omega_next) * (nid_value_next - nid_value_n)
    return mu * t_n * grad_norm ** 2 - drift


def solve_anid(g: Sinogram, A: ProjectionMatrix, nid_cfg, tv_cfg: TvConfig,
               schedule: AnidSchedule, ls: LineSearchConfig, stop: StopCriteria,
               f0: Image):
    """Adaptive descent on the blended functional.

    ``nid_cfg`` may be a config or a callable ``n -> config``.  Steps come
    from the fixed geometric ladder (no secant step); the descent-control
    slack is monitored per iteration and negative values are logged as
    warnings, never fatal.
    """
    problem = AnidProblem(A, g, nid_cfg, tv_cfg, schedule)
    trace = IterationTrace()
    f = f0
    n = 0
    v = problem.gradient(f, n)
    value = problem.value(f, n)
    v0norm = norm(v)
    vnorm = v0norm
    prev_value = None
    while True:
        if vnorm == 0.0 or _stop_on_gradient(vnorm, v0norm, stop):
            trace.stop_reason = "gradient"
            break
        if _stop_on_value(prev_value, value, stop):
            trace.stop_reason = "stagnation"
            break
        if n >= stop.max_iters:
            trace.stop_reason = "max_iters"
            break

        try:
            t, f_new, _ = armijo_search(
                lambda img: problem.value(img, n), f, v, ls.tau0, ls, value
            )
        except LineSearchError as err:
            err.trace = trace
            raise

        omega_n, omega_next = schedule.omega(n), schedule.omega(n + 1)
        nid_n = problem.scaled_nid_value(f_new, n)
        nid_next = problem.scaled_nid_value(f_new, n + 1)
        tv_n = problem.tv.value(f_new)
        slack = condition41_slack(
            ls.mu, t, vnorm, omega_n, omega_next, nid_n, nid_next, tv_n
        )
        if slack < 0.0 and n > schedule.warmup:
            logger.warning(
                "descent-control slack negative at iteration %d: %.3e", n, slack
            )
        trace.append(
            TraceRecord(
                n=n, value=value, grad_norm=vnorm, t=t, tau=ls.tau0,
                omega=omega_n, zeta=schedule.zeta(n), cond41_slack=slack,
            )
        )
        prev_value = value
        f = f_new
        n += 1
        # the next iteration minimizes its own blend: re-express the value
        # at index n from the components already evaluated for the audit
        if omega_next == 1.0:
            value = tv_n
        elif omega_next == 0.0 and schedule.zeta(n) == 1.0:
            value = nid_next
        else:
            value = (1.0 - omega_next) * nid_next + omega_next * tv_n
        v = problem.gradient(f, n)
        vnorm = norm(v)

    trace.final_value = value
    trace.final_grad_norm = vnorm
    return f, trace
