"""
Numerical model of stepwise reasoning error.

A belief m_k is pulled toward a target y* by evidence of alignment alpha_k,
integrated with weight gamma_k and perturbed by Gaussian answer noise:

    m_k = m_{k-1} + gamma_k * (alpha_k * (y* - m_{k-1}) + eps_k)
    e_k = (1 - gamma_k * alpha_k) * e_{k-1} + gamma_k * eps_k

The module offers trajectory simulation, Monte Carlo error curves, closed
forms for deterministic alignment, the constant-parameter optimum, shape
classification of error curves and parameter sensitivities.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import math

import numpy as np
import structlog
from scipy import optimize, stats

from .errors import PreconditionError

logger = structlog.get_logger(__name__)

NOISE_SCALES = ("total", "per_component")

AlphaSampler = Callable[[np.random.Generator, float, float, int], np.ndarray]
ALPHA_FAMILIES: Dict[str, AlphaSampler] = {}


def register_alpha_family(name: str):
    def decorator(fn: AlphaSampler) -> AlphaSampler:
        ALPHA_FAMILIES[name] = fn
        return fn
    return decorator


@register_alpha_family("truncnorm")
def _truncnorm_alphas(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    if std == 0:
        return np.full(size, mean)
    a, b = (-1.0 - mean) / std, (1.0 - mean) / std
    return stats.truncnorm.rvs(a, b, loc=mean, scale=std, size=size, random_state=rng)


@register_alpha_family("uniform")
def _uniform_alphas(rng: np.random.Generator, mean: float, std: float, size: int) -> np.ndarray:
    half_width = math.sqrt(3.0) * std
    return rng.uniform(mean - half_width, mean + half_width, size=size)


@dataclass(frozen=True)
class DeterministicAlpha:
    values: Tuple[float, ...]

    def __post_init__(self):
        bad = [a for a in self.values if not -1.0 <= a <= 1.0]
        if bad:
            raise PreconditionError(f"alignment values must lie in [-1,1], got {bad[:3]}")

    @classmethod
    def constant(cls, alpha: float, n: int) -> 'DeterministicAlpha':
        return cls(tuple([float(alpha)] * n))

    @classmethod
    def piecewise(cls, alpha: float, switch_depth: int, n: int) -> 'DeterministicAlpha':
        """alpha for steps 1..switch_depth, zero afterwards."""
        return cls(tuple(float(alpha) if k <= switch_depth else 0.0 for k in range(1, n + 1)))

    def draw(self, rng: np.random.Generator, step: int, size: int) -> Union[float, np.ndarray]:
        return self.values[step - 1]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "deterministic", "values": list(self.values)}


@dataclass(frozen=True)
class StochasticAlpha:
    mean: float
    variance: float
    family: str = "truncnorm"

    def __post_init__(self):
        if not -1.0 <= self.mean <= 1.0:
            raise PreconditionError(f"mean alignment must lie in [-1,1], got {self.mean}")
        if self.variance < 0:
            raise PreconditionError(f"alignment variance must be >= 0, got {self.variance}")
        if self.family not in ALPHA_FAMILIES:
            raise PreconditionError(f"unknown alignment family '{self.family}' (known: {sorted(ALPHA_FAMILIES)})")
        if self.family == "uniform":
            half_width = math.sqrt(3.0 * self.variance)
            if self.mean - half_width < -1.0 or self.mean + half_width > 1.0:
                raise PreconditionError("uniform alignment support leaves [-1,1]")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def draw(self, rng: np.random.Generator, step: int, size: int) -> np.ndarray:
        return np.clip(ALPHA_FAMILIES[self.family](rng, self.mean, self.std, size), -1.0, 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "stochastic", "mean": self.mean, "variance": self.variance, "family": self.family}


AlphaModel = Union[DeterministicAlpha, StochasticAlpha]


@dataclass(eq=False)
class ReasoningParams:
    m0: np.ndarray
    y_star: np.ndarray
    sigma: float
    gamma_schedule: Tuple[float, ...]
    alpha_model: AlphaModel
    n_max: int
    noise_scale: str = "total"

    def __post_init__(self):
        self.m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        self.y_star = np.atleast_1d(np.asarray(self.y_star, dtype=float))
        self.gamma_schedule = tuple(float(g) for g in self.gamma_schedule)
        if self.m0.shape != self.y_star.shape or self.m0.ndim != 1:
            raise PreconditionError("m0 and y_star must be vectors of the same length")
        if not np.isfinite(self.b0):
            raise PreconditionError("initial error must be finite")
        if self.sigma < 0:
            raise PreconditionError(f"sigma must be >= 0, got {self.sigma}")
        if self.n_max < 0:
            raise PreconditionError(f"n_max must be >= 0, got {self.n_max}")
        if len(self.gamma_schedule) < self.n_max:
            raise PreconditionError(f"gamma schedule covers {len(self.gamma_schedule)} of {self.n_max} steps")
        if any(not 0.0 < g < 1.0 for g in self.gamma_schedule):
            raise PreconditionError("every gamma must lie in (0,1)")
        if isinstance(self.alpha_model, DeterministicAlpha) and len(self.alpha_model.values) < self.n_max:
            raise PreconditionError(f"alignment schedule covers {len(self.alpha_model.values)} of {self.n_max} steps")
        if self.noise_scale not in NOISE_SCALES:
            raise PreconditionError(f"noise_scale must be one of {NOISE_SCALES}")

    @property
    def d(self) -> int:
        return int(self.m0.shape[0])

    @property
    def b0(self) -> float:
        return float(np.sum((self.m0 - self.y_star) ** 2))

    @property
    def noise_std(self) -> float:
        """Per-component noise standard deviation."""
        if self.noise_scale == "total":
            return self.sigma / math.sqrt(self.d)
        return self.sigma

    @property
    def effective_sigma2(self) -> float:
        """Expected squared norm of one noise vector."""
        return self.sigma ** 2 if self.noise_scale == "total" else self.d * self.sigma ** 2

    @classmethod
    def constant(
        cls,
        b0: float,
        sigma: float,
        gamma: float,
        alpha: Union[float, AlphaModel],
        n_max: int,
        d: int = 1,
        noise_scale: str = "total",
    ) -> 'ReasoningParams':
        if b0 < 0:
            raise PreconditionError(f"b0 must be >= 0, got {b0}")
        model = alpha if isinstance(alpha, (DeterministicAlpha, StochasticAlpha)) else DeterministicAlpha.constant(alpha, n_max)
        return cls(
            m0=np.full(d, math.sqrt(b0 / d)),
            y_star=np.zeros(d),
            sigma=sigma,
            gamma_schedule=(gamma,) * n_max,
            alpha_model=model,
            n_max=n_max,
            noise_scale=noise_scale,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReasoningParams':
        try:
            n_max = int(data["n_max"])
            d = int(data.get("d", 1))
            gamma = data["gamma"]
            gammas = tuple(gamma) if isinstance(gamma, (list, tuple)) else (float(gamma),) * n_max
            alpha = data["alpha"]
            kind = alpha.get("kind", "deterministic")
            if kind == "deterministic":
                model: AlphaModel = (
                    DeterministicAlpha(tuple(float(a) for a in alpha["values"])) if "values" in alpha
                    else DeterministicAlpha.constant(float(alpha["value"]), n_max)
                )
            elif kind == "piecewise":
                model = DeterministicAlpha.piecewise(float(alpha["value"]), int(alpha["switch_depth"]), n_max)
            elif kind == "stochastic":
                model = StochasticAlpha(float(alpha["mean"]), float(alpha["variance"]), alpha.get("family", "truncnorm"))
            else:
                raise PreconditionError(f"unknown alignment kind '{kind}'")
            if "m0" in data:
                m0, y_star = np.asarray(data["m0"], float), np.asarray(data.get("y_star", np.zeros(d)), float)
            else:
                b0 = float(data["b0"])
                if b0 < 0:
                    raise PreconditionError(f"b0 must be >= 0, got {b0}")
                m0, y_star = np.full(d, math.sqrt(b0 / d)), np.zeros(d)
            return cls(
                m0=m0,
                y_star=y_star,
                sigma=float(data["sigma"]),
                gamma_schedule=gammas,
                alpha_model=model,
                n_max=n_max,
                noise_scale=data.get("noise_scale", "total"),
            )
        except (KeyError, TypeError, AttributeError) as e:
            raise PreconditionError(f"incomplete simulation parameters: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "b0": self.b0,
            "m0": self.m0.tolist(),
            "y_star": self.y_star.tolist(),
            "sigma": self.sigma,
            "gamma": list(self.gamma_schedule[:self.n_max]),
            "alpha": self.alpha_model.to_dict(),
            "n_max": self.n_max,
            "noise_scale": self.noise_scale,
        }


# -- trajectories ----------------------------------------------------------

class Mode(Enum):
    NEED_Q = "need_q"
    NEED_A = "need_a"
    FINISH = "finish"


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    step: int
    belief: np.ndarray
    mode: Mode
    y_star: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.belief - self.y_star


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: str
    step: int
    question: Optional[str] = None
    estimate: Optional[Tuple[float, ...]] = None


@dataclass
class Trajectory:
    events: List[TrajectoryEvent] = field(default_factory=list)
    states: List[TrajectoryState] = field(default_factory=list)

    @property
    def estimate(self) -> np.ndarray:
        return self.states[-1].belief


def ask(state: TrajectoryState) -> TrajectoryState:
    if state.mode is not Mode.NEED_Q:
        raise PreconditionError(f"cannot ask a question in mode {state.mode.value}")
    return TrajectoryState(state.step, state.belief, Mode.NEED_A, state.y_star)


def step_belief(state: TrajectoryState, alpha_k: float, gamma_k: float, noise_k: np.ndarray) -> TrajectoryState:
    """Integrate one answer into the belief."""
    if state.mode is not Mode.NEED_A:
        raise PreconditionError(f"cannot integrate an answer in mode {state.mode.value}")
    evidence = alpha_k * (state.y_star - state.belief) + np.asarray(noise_k, dtype=float)
    return TrajectoryState(state.step + 1, state.belief + gamma_k * evidence, Mode.NEED_Q, state.y_star)


def finish(state: TrajectoryState) -> TrajectoryState:
    if state.mode is not Mode.NEED_Q:
        raise PreconditionError(f"cannot finish in mode {state.mode.value}")
    return TrajectoryState(state.step, state.belief, Mode.FINISH, state.y_star)


def run_trajectory(params: ReasoningParams, rng: np.random.Generator, depth: Optional[int] = None) -> Trajectory:
    """One reasoning episode that stops after depth answers."""
    depth = params.n_max if depth is None else depth
    if not 0 <= depth <= params.n_max:
        raise PreconditionError(f"depth {depth} outside [0,{params.n_max}]")
    state = TrajectoryState(0, params.m0.copy(), Mode.NEED_Q, params.y_star)
    trajectory = Trajectory(states=[state])
    for k in range(1, depth + 1):
        state = ask(state)
        trajectory.events.append(TrajectoryEvent("ask", k, question=f"q{k}"))
        alpha = float(np.asarray(params.alpha_model.draw(rng, k, 1)).reshape(-1)[0])
        noise = rng.standard_normal(params.d) * params.noise_std
        state = step_belief(state, alpha, params.gamma_schedule[k - 1], noise)
        trajectory.events.append(TrajectoryEvent("answer", k))
        trajectory.states.append(state)
    state = finish(state)
    trajectory.states[-1] = state
    trajectory.events.append(TrajectoryEvent("finish", depth, estimate=tuple(state.belief.tolist())))
    return trajectory


def iterate_error(e0: np.ndarray, alphas: Sequence[float], gammas: Sequence[float], noises: np.ndarray) -> np.ndarray:
    """Errors e_0..e_N from the direct recursion; noises has one row per step."""
    errors = [np.asarray(e0, dtype=float)]
    for alpha, gamma, noise in zip(alphas, gammas, noises):
        errors.append((1.0 - gamma * alpha) * errors[-1] + gamma * np.asarray(noise, dtype=float))
    return np.vstack(errors)


# -- error curves ----------------------------------------------------------

class ShapeKind(Enum):
    STRICTLY_DECREASING = "StrictlyDecreasing"
    STRICTLY_INCREASING = "StrictlyIncreasing"
    U_SHAPED = "UShaped"
    FLAT = "Flat"
    OTHER = "Other"


@dataclass(frozen=True)
class CurveShape:
    kind: ShapeKind
    argmin: Optional[int] = None
    sign_changes: int = 0

    def __str__(self) -> str:
        if self.kind is ShapeKind.U_SHAPED:
            return f"UShaped({self.argmin})"
        if self.kind is ShapeKind.OTHER:
            return f"Other({self.sign_changes})"
        return self.kind.value


@dataclass(eq=False)
class ErrorCurve:
    values: np.ndarray
    standard_errors: Optional[np.ndarray] = None
    method: str = "closed_form"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.standard_errors is not None:
            self.standard_errors = np.asarray(self.standard_errors, dtype=float)

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    @property
    def shape(self) -> CurveShape:
        return argmin_scan(self).shape


@dataclass(frozen=True)
class ScanResult:
    argmin: int
    shape: CurveShape
    sign_changes: int


def argmin_scan(curve: ErrorCurve, atol: float = 0.0) -> ScanResult:
    """Empirical minimiser and shape of a curve; differences within atol count as flat."""
    values = curve.values
    if len(values) < 2:
        raise PreconditionError("a curve needs at least two points to scan")
    diffs = np.diff(values)
    signs = np.where(diffs > atol, 1, np.where(diffs < -atol, -1, 0))
    nonzero = signs[signs != 0]
    changes = int(np.count_nonzero(nonzero[1:] != nonzero[:-1])) if len(nonzero) > 1 else 0
    argmin = int(np.argmin(values))

    if not len(nonzero):
        shape = CurveShape(ShapeKind.FLAT, argmin, 0)
    elif np.all(signs == -1):
        shape = CurveShape(ShapeKind.STRICTLY_DECREASING, argmin, 0)
    elif np.all(signs == 1):
        shape = CurveShape(ShapeKind.STRICTLY_INCREASING, argmin, 0)
    elif changes == 1 and nonzero[0] == -1:
        shape = CurveShape(ShapeKind.U_SHAPED, argmin, 1)
    else:
        shape = CurveShape(ShapeKind.OTHER, argmin, changes)
    return ScanResult(argmin=argmin, shape=shape, sign_changes=changes)


def closed_form_error(params: ReasoningParams) -> ErrorCurve:
    """Exact expected squared error for a deterministic alignment schedule.

    Bias products are accumulated in log space; every factor (1 - gamma*alpha)^2
    is positive because gamma < 1 and |alpha| <= 1.
    """
    if not isinstance(params.alpha_model, DeterministicAlpha):
        raise PreconditionError("closed forms exist only for deterministic alignment")
    n = params.n_max
    gammas = np.asarray(params.gamma_schedule[:n])
    alphas = np.asarray(params.alpha_model.values[:n])
    factors = (1.0 - gammas * alphas) ** 2
    bias = params.b0 * np.exp(np.concatenate([[0.0], np.cumsum(np.log(factors))]))
    variance = np.zeros(n + 1)
    for k in range(1, n + 1):
        variance[k] = factors[k - 1] * variance[k - 1] + params.effective_sigma2 * gammas[k - 1] ** 2
    return ErrorCurve(bias + variance, method="closed_form")


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise PreconditionError(f"gamma must lie in (0,1), got {gamma}")


def geometric_error(b0: float, sigma: float, gamma: float, alpha_bar: float, n: Union[int, np.ndarray]):
    """Expected error after n steps with constant gamma and alignment."""
    _check_gamma(gamma)
    rho = 1.0 - gamma * alpha_bar
    n_arr = np.asarray(n, dtype=float)
    noise = sigma ** 2 * gamma ** 2
    if rho == 1.0:
        result = b0 + n_arr * noise
    else:
        decay = rho ** (2.0 * n_arr)
        result = b0 * decay + noise * (1.0 - decay) / (1.0 - rho ** 2)
    return float(result) if np.ndim(result) == 0 else result


def geometric_asymptote(sigma: float, gamma: float, alpha_bar: float) -> float:
    """Limit C of the constant-parameter curve for 0 < rho < 1."""
    _check_gamma(gamma)
    rho = 1.0 - gamma * alpha_bar
    if not 0.0 < rho < 1.0:
        raise PreconditionError(f"the curve converges only for 0 < rho < 1, got rho={rho}")
    return sigma ** 2 * gamma ** 2 / (1.0 - rho ** 2)


def geometric_curve(b0: float, sigma: float, gamma: float, alpha_bar: float, n_max: int) -> ErrorCurve:
    return ErrorCurve(geometric_error(b0, sigma, gamma, alpha_bar, np.arange(n_max + 1)), method="geometric")


class AlignmentRegime(Enum):
    POSITIVE = "positive"
    ZERO = "zero"
    NEGATIVE = "negative"


def regime_error(regime: AlignmentRegime, b0: float, sigma: float, gamma: float, alpha: float, n_max: int) -> ErrorCurve:
    actual = AlignmentRegime.ZERO if alpha == 0 else (AlignmentRegime.POSITIVE if alpha > 0 else AlignmentRegime.NEGATIVE)
    if actual is not regime:
        raise PreconditionError(f"alpha={alpha} belongs to the {actual.value} regime, not {regime.value}")
    return geometric_curve(b0, sigma, gamma, alpha, n_max)


@dataclass(frozen=True)
class NStarResult:
    n_star: int
    t_star: float
    flagged: bool = False


def nstar_formula(b0: float, sigma: float, gamma: float, alpha_bar: float) -> NStarResult:
    """Smallest N >= t* = ln(b0 (1 - rho^2) / (sigma^2 gamma^2)) / (2 |ln rho|).

    A log argument below one gives N* = 0 with flagged=True.
    """
    _check_gamma(gamma)
    if not 0.0 < alpha_bar <= 1.0:
        raise PreconditionError(f"the optimum formula needs alpha_bar in (0,1], got {alpha_bar}")
    if sigma <= 0:
        raise PreconditionError("the optimum formula needs sigma > 0")
    rho = 1.0 - gamma * alpha_bar
    argument = b0 * (1.0 - rho ** 2) / (sigma ** 2 * gamma ** 2)
    if argument <= 0.0:
        return NStarResult(0, 0.0, flagged=True)
    if argument < 1.0:
        return NStarResult(0, math.log(argument) / (2.0 * abs(math.log(rho))), flagged=True)
    t_star = math.log(argument) / (2.0 * abs(math.log(rho)))
    return NStarResult(max(0, math.ceil(t_star)), t_star)


def u_shape_witness(
    alpha_bar: float = 0.8,
    switch_depth: int = 5,
    gamma: float = 0.5,
    sigma: float = 0.1,
    b0: float = 1.0,
    n_max: int = 10,
    d: int = 1,
) -> ReasoningParams:
    """Alignment alpha_bar up to switch_depth and zero after, so error falls then climbs."""
    return ReasoningParams.constant(
        b0, sigma, gamma, DeterministicAlpha.piecewise(alpha_bar, switch_depth, n_max), n_max, d=d
    )


# -- Monte Carlo -----------------------------------------------------------

def _simulate_block(args) -> Tuple[int, np.ndarray, np.ndarray]:
    """Trial count, mean and summed squared deviation (M2) of the squared error per depth over one block.

    Module level so ProcessPoolExecutor can pickle it.
    """
    params, seed_sequence, trials = args
    rng = np.random.Generator(np.random.Philox(seed_sequence))
    beliefs = np.tile(params.m0, (trials, 1))
    sq = np.empty((params.n_max + 1, trials))
    sq[0] = np.sum((beliefs - params.y_star) ** 2, axis=1)
    for k in range(1, params.n_max + 1):
        alpha = params.alpha_model.draw(rng, k, trials)
        alpha = np.asarray(alpha, dtype=float).reshape(-1, 1) if np.ndim(alpha) else alpha
        noise = rng.standard_normal((trials, params.d)) * params.noise_std
        beliefs = beliefs + params.gamma_schedule[k - 1] * (alpha * (params.y_star - beliefs) + noise)
        sq[k] = np.sum((beliefs - params.y_star) ** 2, axis=1)
    mean = sq.mean(axis=1)
    return trials, mean, np.sum((sq - mean[:, None]) ** 2, axis=1)


def combine_moments(blocks: Sequence[Tuple[int, np.ndarray, np.ndarray]]) -> Tuple[int, np.ndarray, np.ndarray]:
    """Merge per-block (count, mean, M2) with Chan's parallel update, in block order."""
    count, mean, m2 = blocks[0]
    mean, m2 = np.array(mean, dtype=float), np.array(m2, dtype=float)
    for size, block_mean, block_m2 in blocks[1:]:
        total = count + size
        delta = block_mean - mean
        mean = mean + delta * (size / total)
        m2 = m2 + block_m2 + delta ** 2 * (count * size / total)
        count = total
    return count, mean, m2


def mc_error_curve(
    params: ReasoningParams,
    trials: int,
    seed: int = 0,
    block_size: int = 10_000,
    workers: int = 1,
) -> ErrorCurve:
    """Monte Carlo mean and standard error of the squared error at every depth.

    Trials are split into fixed-size blocks seeded from one SeedSequence and
    their moments merged in block order, so results do not depend on the
    worker count.
    """
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")
    if block_size < 1:
        raise PreconditionError(f"block_size must be >= 1, got {block_size}")
    sizes = [block_size] * (trials // block_size)
    if trials % block_size:
        sizes.append(trials % block_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(params, seq, size) for seq, size in zip(seeds, sizes)]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            blocks = list(executor.map(_simulate_block, jobs))
    else:
        blocks = [_simulate_block(job) for job in jobs]

    count, means, m2 = combine_moments(blocks)
    variance = m2 / (count - 1) if count > 1 else np.zeros_like(m2)
    errors = np.sqrt(variance / count)
    logger.debug("mc_curve_computed", trials=trials, blocks=len(blocks), workers=workers)
    return ErrorCurve(means, errors, method="monte_carlo")


# -- sensitivity -----------------------------------------------------------

class SensitivityTarget(Enum):
    ALPHA = "alpha"
    GAMMA = "gamma"


@dataclass
class SensitivityReport:
    target: SensitivityTarget
    n: int
    h: float
    derivative: float
    analytic: Optional[float] = None
    grid: Optional[np.ndarray] = None
    grid_derivatives: Optional[np.ndarray] = None
    sign_changes: Optional[int] = None
    bracket: Optional[Tuple[float, float]] = None
    root: Optional[float] = None


def error_rho_derivative(b0: float, sigma: float, gamma: float, rho: float, n: int) -> float:
    """Partial derivative of the constant-parameter error with respect to rho."""
    if rho == 1.0 or n == 0:
        return 2.0 * n * b0 if n else 0.0
    decay = rho ** (2 * n)
    sum_term = (1.0 - decay) / (1.0 - rho ** 2)
    sum_prime = (-2.0 * n * rho ** (2 * n - 1) * (1.0 - rho ** 2) + 2.0 * rho * (1.0 - decay)) / (1.0 - rho ** 2) ** 2
    return 2.0 * n * b0 * rho ** (2 * n - 1) + sigma ** 2 * gamma ** 2 * sum_prime


def _analytic(target: SensitivityTarget, b0: float, sigma: float, gamma: float, alpha: float, n: int) -> Optional[float]:
    rho = 1.0 - gamma * alpha
    if rho == 1.0:
        return None
    d_rho = error_rho_derivative(b0, sigma, gamma, rho, n)
    if target is SensitivityTarget.ALPHA:
        return d_rho * -gamma
    sum_term = (1.0 - rho ** (2 * n)) / (1.0 - rho ** 2)
    return d_rho * -alpha + 2.0 * sigma ** 2 * gamma * sum_term


def _central(fn: Callable[[float], float], x: float, h: float) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def sensitivity(
    b0: float,
    sigma: float,
    gamma: float,
    alpha_bar: float,
    n: int,
    target: SensitivityTarget,
    h: float = 1e-4,
    grid: Optional[Sequence[float]] = None,
) -> SensitivityReport:
    """Central-difference derivative of the constant-parameter error.

    For the gamma target the derivative is also scanned over a grid in (0,1);
    a single sign change is refined to a root with brentq.
    """
    if h <= 0:
        raise PreconditionError("step h must be positive")
    if target is SensitivityTarget.ALPHA:
        if not -1.0 <= alpha_bar - h or not alpha_bar + h <= 1.0:
            raise PreconditionError("central difference leaves the alignment range [-1,1]")
        derivative = _central(lambda a: geometric_error(b0, sigma, gamma, a, n), alpha_bar, h)
        return SensitivityReport(target, n, h, derivative, _analytic(target, b0, sigma, gamma, alpha_bar, n))

    if not 0.0 < gamma - h or not gamma + h < 1.0:
        raise PreconditionError("central difference leaves the gamma range (0,1)")

    def d_gamma(g: float) -> float:
        step = min(h, g / 2.0, (1.0 - g) / 2.0)
        return _central(lambda x: geometric_error(b0, sigma, x, alpha_bar, n), g, step)

    points = np.linspace(0.0, 1.0, 101)[1:-1] if grid is None else np.asarray(grid, dtype=float)
    if np.any(points <= 0.0) or np.any(points >= 1.0):
        raise PreconditionError("gamma grid must lie inside (0,1)")
    values = np.array([d_gamma(g) for g in points])
    signs = np.sign(values)
    nonzero = np.flatnonzero(signs)
    crossings = [
        (int(i), int(j)) for i, j in zip(nonzero[:-1], nonzero[1:]) if signs[i] != signs[j]
    ]
    report = SensitivityReport(
        target, n, h, d_gamma(gamma), _analytic(target, b0, sigma, gamma, alpha_bar, n),
        grid=points, grid_derivatives=values, sign_changes=len(crossings),
    )
    if len(crossings) == 1:
        lo, hi = points[crossings[0][0]], points[crossings[0][1]]
        report.bracket = (float(lo), float(hi))
        report.root = float(optimize.brentq(d_gamma, lo, hi))
    return report
