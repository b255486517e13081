"""Reachability functionals at the final time and their rescaled asymptotics.

Steering mode n to zero at time T is the scalar constraint

    int_0^T sum_x f(x, T-s) E_n(x, s) ds = mu2_n d_n,

where d_n is the free (uncontrolled) value of the mode at T, and the kernel
factorizes as E_n(x, s) = mu2_n trace_n(x) psi_n(s) with the scalar profile
psi_n = e0 - h_n*e0. Two structural facts carry the whole analysis:

* the rescaled free values mu2_n d_n / xi_n converge to minus the resolvent
  value at T, at rate 1/mu2_n (so the constraint family is uniformly
  nondegenerate exactly when the resolvent does not vanish at T);
* the profiles psi_n are, up to a two-time kernel independent of n, plain
  exponentials, which reduces the constraints to a biorthogonality problem
  against {mu2_n e^{-mu2_n r}}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import convolve, convolve_exp, end_pairing, exp_profile
from .dynamics import ModalTrajectory
from .errors import ConfigError, NumericalError
from .grids import SampledFunction, require_same_grid
from .modes import BoundaryControl, Mode
from .resolvents import ResolventTriple, mode_resolvent_direct

END_VALUE_GUARD = 1e-4  # relative floor on |resolvent(T)| before we refuse


@dataclass(frozen=True)
class InitialData:
    """Modal initial coefficients, either an explicit list or a named rule."""

    rule: str  # "explicit", "inverse_index", or "zero"
    explicit: tuple = ()

    @classmethod
    def from_values(cls, values) -> "InitialData":
        return cls("explicit", tuple(float(v) for v in values))

    @classmethod
    def inverse_index(cls) -> "InitialData":
        return cls("inverse_index")

    @classmethod
    def zero(cls) -> "InitialData":
        return cls("zero")

    def value(self, n: int) -> float:
        if n < 1:
            raise ValueError("mode indices start at 1")
        if self.rule == "explicit":
            if n > len(self.explicit):
                return 0.0
            return self.explicit[n - 1]
        if self.rule == "inverse_index":
            return 1.0 / n
        if self.rule == "zero":
            return 0.0
        raise ValueError(f"unknown initial-data rule {self.rule!r}")

    def values(self, count: int) -> np.ndarray:
        return np.array([self.value(n) for n in range(1, count + 1)])

    def to_config(self) -> dict:
        if self.rule == "explicit":
            return {"rule": "explicit", "values": list(self.explicit)}
        return {"rule": self.rule}


def initial_data_from_config(record, path: str = "initial") -> InitialData:
    if not isinstance(record, dict):
        raise ConfigError(path, f"expected a record, got {type(record).__name__}")
    rule = record.get("rule")
    if rule == "explicit":
        unknown = sorted(set(record) - {"rule", "values"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
        values = record.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{path}.values", "expected a nonempty list of numbers")
        for i, v in enumerate(values):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise ConfigError(f"{path}.values[{i}]", f"expected a finite number, got {v!r}")
        return InitialData.from_values(values)
    if rule in ("inverse_index", "zero"):
        unknown = sorted(set(record) - {"rule"})
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
        return InitialData(rule)
    raise ConfigError(
        f"{path}.rule",
        f"unknown initial-data rule {rule!r}; expected explicit, inverse_index, or zero",
    )


# ---------------------------------------------------------------------------
# Free end values and their rescaled asymptotics
# ---------------------------------------------------------------------------


def check_end_value(rt: ResolventTriple) -> float:
    """Return the resolvent's end value, refusing if it is effectively zero.

    The rescaled constraint targets converge to minus this number; when it
    vanishes the whole construction degenerates at this horizon. The
    resolvent of a nonzero analytic kernel is analytic and not identically
    zero, so its zeros are isolated: nearby horizons work. The error message
    says so instead of pretending the method failed globally.
    """
    end = rt.end_value()
    if rt.kernel.is_zero:
        return end
    scale = max(1.0, rt.resolvent.sup_norm())
    if abs(end) < END_VALUE_GUARD * scale:
        raise NumericalError(
            f"the kernel resolvent vanishes at the horizon T = "
            f"{rt.grid.horizon:g} (value {end:.3e}); the rescaled targets "
            "degenerate there. Zeros of the resolvent are isolated, so pick "
            "a slightly different horizon and rerun."
        )
    return end


def free_end_value(
    mode: Mode, rt: ResolventTriple, h: SampledFunction = None, xi: float = 1.0
) -> float:
    """Value at T of the uncontrolled mode started at xi (the target d_n).

    Evaluated directly from the explicit representation at the final node:
    d = [e^{-mu2 T} - (e0*q)(T) - (h*e0)(T) + (h*(e0*q))(T)] xi.
    """
    if h is None:
        h = mode_resolvent_direct(rt, mode.shifted_rate)
    grid = rt.grid
    mu2 = mode.shifted_rate
    q = convolve_exp(rt.resolvent, mu2)
    e_end = float(np.exp(-mu2 * grid.horizon))
    he0_end = float(convolve_exp(h, mu2).values[-1])
    hq_end = end_pairing(h, q)
    return (e_end - q.values[-1] - he0_end + hq_end) * xi


@dataclass(frozen=True)
class AsymptoticReport:
    """Rescaled free values against the resolvent end-value law."""

    indices: tuple
    ratios: tuple  # mu2_n d_n / xi_n
    residuals: tuple  # ratios + resolvent(T)
    sup_weighted_residual: float  # sup over n of |residual_n| mu2_n
    regime: str  # "memory" or "memoryless"
    end_value: float


def asymptotic_table(modes, rt: ResolventTriple) -> AsymptoticReport:
    """Tabulate mu2_n d_n (per unit initial value) and the law residuals.

    For a zero kernel the ratios decay to zero and the report is flagged
    memoryless; for a genuine kernel the horizon guard applies.
    """
    if rt.kernel.is_zero:
        end = 0.0
        regime = "memoryless"
    else:
        end = check_end_value(rt)
        regime = "memory"
    indices, ratios, residuals = [], [], []
    sup_weighted = 0.0
    for mode in modes:
        if mode.shifted_rate <= 0:
            raise ValueError(
                "asymptotic table needs modes with positive shifted rates"
            )
        d = free_end_value(mode, rt)
        ratio = mode.shifted_rate * d
        resid = ratio + end
        indices.append(mode.index)
        ratios.append(ratio)
        residuals.append(resid)
        sup_weighted = max(sup_weighted, abs(resid) * mode.shifted_rate)
    return AsymptoticReport(
        tuple(indices), tuple(ratios), tuple(residuals), sup_weighted, regime, end
    )


def scope_threshold(modes, rt: ResolventTriple) -> int:
    """Smallest mode index from which the constraint family is nondegenerate.

    Requires a positive shifted rate and a law residual below half the
    resolvent end value, so the rescaled targets stay bounded away from zero
    for every mode in scope. Without memory the law degenerates (the limit
    is zero) and the threshold is simply the first positive rate.
    """
    if rt.kernel.is_zero:
        for mode in modes:
            if mode.shifted_rate > 0:
                return mode.index
        raise NumericalError("no mode with a positive rate in the given range")
    end = check_end_value(rt)
    for mode in modes:
        if mode.shifted_rate <= 0:
            continue
        d = free_end_value(mode, rt)
        resid = mode.shifted_rate * d + end
        if abs(resid) < 0.5 * abs(end):
            return mode.index
    raise NumericalError(
        "no mode in the given range satisfies the nondegeneracy margin; "
        "extend the mode range or adjust the horizon"
    )


# ---------------------------------------------------------------------------
# Moment kernels and pairings
# ---------------------------------------------------------------------------


def moment_profile(mode: Mode, h: SampledFunction) -> SampledFunction:
    """Scalar time profile psi = e0 - h*e0 shared by both endpoint kernels."""
    grid = h.grid
    mu2 = mode.shifted_rate
    e0 = exp_profile(grid, mu2)
    return e0 - convolve_exp(h, mu2)


def moment_kernels(mode: Mode, h: SampledFunction) -> tuple:
    """Per-endpoint kernels (left, right): mu2 * trace(x) * psi(s)."""
    psi = moment_profile(mode, h)
    mu2 = mode.shifted_rate
    return (mu2 * mode.trace_left) * psi, (mu2 * mode.trace_right) * psi


def moment_pairing(mode: Mode, h: SampledFunction, control: BoundaryControl) -> float:
    """int_0^T sum_x f(x, T-s) E_n(x, s) ds for a concrete boundary control.

    The kernel's exponential factor has a boundary layer of width 1/mu2, so
    the pairing is evaluated through the rate-exact product quadrature (the
    profile split e0 - h*e0 turns the integral into two horizon values of
    fitted convolutions) rather than a plain trapezoid sum over the sampled
    kernel, whose error would grow with mu2.
    """
    mu2 = mode.shifted_rate
    total = 0.0
    for trace, f, active in (
        (mode.trace_left, control.left, control.active_left),
        (mode.trace_right, control.right, control.active_right),
    ):
        if not active:
            continue
        direct = convolve_exp(f, mu2).at_end()
        smoothed = convolve_exp(convolve(f, h), mu2).at_end()
        total += mu2 * trace * (direct - smoothed)
    return total


def reachability_from_dynamics(traj: ModalTrajectory) -> float:
    """The same functional read off a zero-initial trajectory at the horizon.

    For xi = 0 the mode value at T is exactly -1/mu2 times the moment
    pairing of the control that produced it; this is the dual evaluation
    path used to cross-check moment_pairing.
    """
    if traj.initial != 0.0:
        raise ValueError("dual evaluation requires a zero initial value")
    return -traj.mode.shifted_rate * traj.at_end()


# ---------------------------------------------------------------------------
# Scalar reduction through the two-time table
# ---------------------------------------------------------------------------


def transform_profile(chi: SampledFunction, table: np.ndarray) -> SampledFunction:
    """chi(r) - int_r^T F(s, r) chi(s) ds by column-wise trapezoid quadrature.

    Composing this with the plain pairing against mu2 e^{-mu2 r} reproduces
    the pairing of the original profile against mu2 psi(r) for every mode
    rate at once; the table F does not depend on the mode.
    """
    grid = chi.grid
    n = grid.size
    if table.shape != (n, n):
        raise ValueError("table shape does not match the grid")
    v = chi.values
    raw = table.T @ v
    corr = 0.5 * (np.diag(table) * v + table[n - 1, :] * v[n - 1])
    out = v - grid.dt * (raw - corr)
    return SampledFunction(grid, out)


def reduce_scalar(profiles, table: np.ndarray) -> list:
    """Apply the scalar reduction to a family of profiles."""
    return [transform_profile(chi, table) for chi in profiles]


# ---------------------------------------------------------------------------
# The assembled problem and the solvability round-trip
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentProblem:
    """Scope modes with their free end values and scalar kernels."""

    horizon: float
    modes: tuple
    targets: tuple  # free end values d_n for the configured initial data
    profiles: tuple  # scalar profiles psi_n on the shared grid

    def __post_init__(self):
        if len(self.modes) != len(self.targets) or len(self.modes) != len(self.profiles):
            raise ValueError("modes, targets, and profiles must align")
        for mode in self.modes:
            if mode.shifted_rate <= 0:
                raise ValueError("every mode in a moment problem needs a positive rate")
        require_same_grid(*self.profiles)

    def rescaled_targets(self) -> np.ndarray:
        return np.array(
            [m.shifted_rate * d for m, d in zip(self.modes, self.targets)]
        )


def build_moment_problem(
    modes, rt: ResolventTriple, initial: InitialData, start: int | None = None
) -> MomentProblem:
    """Assemble targets and kernels for every mode from the scope threshold on.

    Pass ``start`` to pin the scope by hand instead of searching for it.
    """
    if start is None:
        start = scope_threshold(modes, rt)
    scope = [m for m in modes if m.index >= start]
    if not scope:
        raise NumericalError(f"no modes at or beyond index {start}")
    if any(m.shifted_rate <= 0 for m in scope):
        raise NumericalError(
            f"scope start {start} admits a nonpositive shifted rate; "
            "raise the start index past the gain crossover"
        )
    targets = []
    profiles = []
    for mode in scope:
        h = mode_resolvent_direct(rt, mode.shifted_rate)
        targets.append(free_end_value(mode, rt, h, xi=initial.value(mode.index)))
        profiles.append(moment_profile(mode, h))
    return MomentProblem(rt.grid.horizon, tuple(scope), tuple(targets), tuple(profiles))


def unit_target_map(modes, rt: ResolventTriple) -> np.ndarray:
    """Diagonal coefficients c_n per unit initial value: mu2_n d_n(xi=1)."""
    return np.array([m.shifted_rate * free_end_value(m, rt) for m in modes])


def initial_from_targets(targets, modes, rt: ResolventTriple) -> np.ndarray:
    """Invert the diagonal map: recover initial values from rescaled targets.

    The scope threshold guarantees the diagonal stays away from zero, so a
    square-summable target sequence pulls back to a square-summable initial
    sequence; numerically this is a plain elementwise division with a guard.
    """
    diag = unit_target_map(modes, rt)
    end = check_end_value(rt)
    if np.any(np.abs(diag) < 0.25 * abs(end)):
        raise NumericalError(
            "a rescaled unit target fell below the nondegeneracy margin; "
            "restrict to modes at or beyond the scope threshold"
        )
    return np.asarray(targets, dtype=float) / diag


def moment_problem_record(problem: MomentProblem, grid) -> dict:
    """JSON-ready dump of the assembled problem (stable external schema)."""
    return {
        "T": problem.horizon,
        "modes": [
            {
                "n": mode.index,
                "mu2": mode.shifted_rate,
                "d_n": target,
                "trace_factors": [mode.trace_left, mode.trace_right],
            }
            for mode, target in zip(problem.modes, problem.targets)
        ],
        "grid": {"horizon": grid.horizon, "steps": grid.steps},
    }
