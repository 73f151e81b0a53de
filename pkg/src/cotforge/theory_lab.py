"""Finite toy problems with exact gradients for the distribution-matching
claims behind failure-driven post-training.

Everything here is small enough to evaluate exactly: joint tables over a
finite context/output grid, a softmax model with analytic NLL gradients, an
importance-weighted risk identity, the failure-biased mixture construction,
and the exponential-tilting closed form for KL-regularized reward
maximization. The sweep gates each random instance on the measured
preconditions (similarity factor at least the proposal's failure mass,
equal-norm rescaling, step below the inverse smoothness bound) before
scoring the alignment and one-step-risk inequalities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousLabel, NoFailures, SupportMismatch, ZeroProbability

#: Global smoothness bound for softmax NLL risk in logit space. Each context
#: block's Hessian is P(x) * (diag(pi) - pi pi^T), whose top eigenvalue is at
#: most 1/2, so 2.0 is safe with a wide margin at any parameter point.
SAFE_SMOOTHNESS_BOUND = 2.0


# ---------------------------------------------------------------------------
# Toy problems
# ---------------------------------------------------------------------------

@dataclass
class ToyProblem:
    """Finite joint tables plus a per-context softmax model.

    ``p_star`` and ``p0`` are (num_contexts, num_outputs) tables summing to
    one; ``theta`` holds the model logits of the same shape.
    """

    p_star: np.ndarray
    p0: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        self.p_star = np.asarray(self.p_star, dtype=np.float64)
        self.p0 = np.asarray(self.p0, dtype=np.float64)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if not (self.p_star.shape == self.p0.shape == self.theta.shape):
            raise ValueError("tables and logits must share one shape")
        for name, table in (("p_star", self.p_star), ("p0", self.p0)):
            if table.min() < 0:
                raise ValueError(f"{name} has negative entries")
            if abs(table.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must sum to 1")

    @property
    def num_contexts(self) -> int:
        return self.theta.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.theta.shape[1]

    def log_policy(self) -> np.ndarray:
        z = self.theta - self.theta.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def policy(self) -> np.ndarray:
        return np.exp(self.log_policy())


def nll_loss(problem: ToyProblem, x: int, y: int) -> float:
    logp = problem.log_policy()[x, y]
    if not np.isfinite(logp):
        raise ZeroProbability(x, y)
    return float(-logp)


def risk(problem: ToyProblem, dist: np.ndarray) -> float:
    """Expected NLL of the model under an arbitrary joint table."""
    dist = np.asarray(dist, dtype=np.float64)
    logp = problem.log_policy()
    with np.errstate(invalid="ignore"):
        terms = np.where(dist > 0, dist * (-logp), 0.0)
    if not np.all(np.isfinite(terms[dist > 0])):
        bad = np.argwhere((dist > 0) & ~np.isfinite(-logp))
        raise ZeroProbability(int(bad[0][0]), int(bad[0][1]))
    return float(terms.sum())


def iw_risk(problem: ToyProblem) -> float:
    """Importance-weighted identity: risk under the target computed as a
    proposal expectation of (density ratio x loss).

    Raises SupportMismatch on any region with target mass but zero proposal
    mass, where the density ratio is undefined.
    """
    bad = np.argwhere((problem.p_star > 0) & (problem.p0 == 0))
    if len(bad):
        raise SupportMismatch([(int(x), int(y)) for x, y in bad])
    logp = problem.log_policy()
    mask = problem.p0 > 0
    ratio = np.zeros_like(problem.p0)
    ratio[mask] = problem.p_star[mask] / problem.p0[mask]
    terms = problem.p0[mask] * ratio[mask] * (-logp[mask])
    return float(terms.sum())


def grad_risk(problem: ToyProblem, dist: np.ndarray) -> np.ndarray:
    """Exact gradient of the expected NLL with respect to the logits:
    d/d theta[x, y'] = dist_x * pi(y'|x) - dist(x, y')."""
    dist = np.asarray(dist, dtype=np.float64)
    pi = problem.policy()
    return dist.sum(axis=1, keepdims=True) * pi - dist


# ---------------------------------------------------------------------------
# Failure region and the failure-driven mixture
# ---------------------------------------------------------------------------

def target_labels(problem: ToyProblem) -> np.ndarray:
    """argmax label per context under the target conditional; -1 where the
    target has no mass. Ties are rejected."""
    labels = np.full(problem.num_contexts, -1, dtype=np.int64)
    for x in range(problem.num_contexts):
        row = problem.p_star[x]
        if row.sum() <= 0:
            continue
        top = row.max()
        winners = np.flatnonzero(row == top)
        if len(winners) > 1:
            raise AmbiguousLabel(x)
        labels[x] = winners[0]
    return labels


def failure_region(problem: ToyProblem) -> tuple[set[int], np.ndarray, float]:
    """Contexts where the model argmax disagrees with the target label,
    plus the proposal mass sitting on them."""
    labels = target_labels(problem)
    pi = problem.policy()
    model_argmax = pi.argmax(axis=1)
    failures = {
        x
        for x in range(problem.num_contexts)
        if labels[x] >= 0 and model_argmax[x] != labels[x]
    }
    p0_marginal = problem.p0.sum(axis=1)
    eps_hat = float(sum(p0_marginal[x] for x in failures))
    return failures, labels, eps_hat


@dataclass(frozen=True)
class P1Construction:
    p1: np.ndarray
    p_syn: np.ndarray
    failures: frozenset[int]
    alpha_hat: float
    eps_hat: float


def build_toy_p1(
    problem: ToyProblem,
    synth_label_accuracy: float = 1.0,
    lam: float = 0.5,
    neighbor_weight: float = 0.0,
) -> P1Construction:
    """Instantiate the failure-driven mixture on the toy spaces.

    The evaluation distribution is the target's context marginal restricted
    to failures; retrieval maps each failing context to itself (with an
    optional leak to adjacent contexts); synthesis lands on the target label
    with probability ``synth_label_accuracy`` and spreads the remainder
    uniformly over wrong labels. The measured similarity factor compares the
    synthetic gradient with the failure-fixing direction.
    """
    failures, labels, eps_hat = failure_region(problem)
    if not failures:
        raise NoFailures()

    nx, ny = problem.p_star.shape
    star_marginal = problem.p_star.sum(axis=1)
    q = np.zeros(nx)
    for x in failures:
        q[x] = star_marginal[x]
    if q.sum() <= 0:
        raise NoFailures()
    q /= q.sum()

    kernel = np.zeros((nx, nx))
    for x in failures:
        kernel[x, x] = 1.0 - neighbor_weight
        if neighbor_weight > 0:
            neighbors = [n for n in (x - 1, x + 1) if 0 <= n < nx]
            for n in neighbors:
                kernel[x, n] += neighbor_weight / len(neighbors)

    synth = np.zeros((nx, ny))
    for x in range(nx):
        if labels[x] < 0:
            synth[x] = 1.0 / ny
            continue
        if ny > 1:
            synth[x] = (1.0 - synth_label_accuracy) / (ny - 1)
        synth[x, labels[x]] = synth_label_accuracy

    p_syn = np.zeros((nx, ny))
    for x in failures:
        for target in range(nx):
            if kernel[x, target] > 0:
                p_syn[target] += q[x] * kernel[x, target] * synth[target]
    p_syn /= p_syn.sum()

    p1 = lam * problem.p0 + (1.0 - lam) * p_syn

    # Failure-fixing direction: target-weighted gradient on true labels in F.
    fix_dist = np.zeros((nx, ny))
    for x in failures:
        fix_dist[x, labels[x]] = star_marginal[x]
    fix_dist /= fix_dist.sum()
    v_star = grad_risk(problem, fix_dist)
    v_syn = grad_risk(problem, p_syn)
    denom = float((v_star * v_star).sum())
    alpha_hat = float((v_syn * v_star).sum()) / denom if denom > 0 else 0.0

    return P1Construction(
        p1=p1,
        p_syn=p_syn,
        failures=frozenset(failures),
        alpha_hat=alpha_hat,
        eps_hat=eps_hat,
    )


# ---------------------------------------------------------------------------
# Alignment and one-step risk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignmentReport:
    inner_p1: float
    inner_p0: float
    risk_before: float
    risk_after_p1: float
    risk_after_p0: float
    eta: float
    smoothness_bound: float
    grad_norm: float  # shared norm of both update directions
    descent_bound_p1: float
    descent_bound_p0: float
    alpha_hat: float = math.nan
    eps_hat: float = math.nan


def smoothness_estimate(problem: ToyProblem, dist: np.ndarray) -> float:
    """Exact top Hessian eigenvalue of the risk under ``dist`` at theta.

    Block-diagonal per context: weight_x * (diag(pi_x) - pi_x pi_x^T).
    A local estimate only; the sweep uses the global safe bound.
    """
    pi = problem.policy()
    weights = np.asarray(dist, dtype=np.float64).sum(axis=1)
    top = 0.0
    for x in range(problem.num_contexts):
        if weights[x] <= 0:
            continue
        block = np.diag(pi[x]) - np.outer(pi[x], pi[x])
        top = max(top, weights[x] * float(np.linalg.eigvalsh(block)[-1]))
    return top


def check_alignment(
    problem: ToyProblem,
    p1: np.ndarray,
    eta: float | None = None,
    smoothness_bound: float = SAFE_SMOOTHNESS_BOUND,
    alpha_hat: float = math.nan,
    eps_hat: float = math.nan,
) -> AlignmentReport:
    """Compare the mixture gradient against the proposal gradient.

    The mixture gradient is rescaled to the proposal gradient's norm (the
    equal-norm hypothesis), both inner products with the target gradient are
    reported, and both one-step target risks are evaluated at the same step
    size together with their explicit descent-lemma bounds.
    """
    g_star = grad_risk(problem, problem.p_star)
    g0 = grad_risk(problem, problem.p0)
    g1 = grad_risk(problem, np.asarray(p1, dtype=np.float64))

    norm0 = float(np.linalg.norm(g0))
    norm1 = float(np.linalg.norm(g1))
    g1_scaled = g1 * (norm0 / norm1) if norm1 > 0 else np.zeros_like(g1)

    if eta is None:
        eta = 0.1 / smoothness_bound

    inner_p1 = float((g_star * g1_scaled).sum())
    inner_p0 = float((g_star * g0).sum())
    risk_before = risk(problem, problem.p_star)

    after_p1 = ToyProblem(problem.p_star, problem.p0, problem.theta - eta * g1_scaled)
    after_p0 = ToyProblem(problem.p_star, problem.p0, problem.theta - eta * g0)
    risk_after_p1 = risk(after_p1, problem.p_star)
    risk_after_p0 = risk(after_p0, problem.p_star)

    quad = 0.5 * smoothness_bound * eta**2 * norm0**2
    return AlignmentReport(
        inner_p1=inner_p1,
        inner_p0=inner_p0,
        risk_before=risk_before,
        risk_after_p1=risk_after_p1,
        risk_after_p0=risk_after_p0,
        eta=eta,
        smoothness_bound=smoothness_bound,
        grad_norm=norm0,
        descent_bound_p1=risk_before - eta * inner_p1 + quad,
        descent_bound_p0=risk_before - eta * inner_p0 + quad,
        alpha_hat=alpha_hat,
        eps_hat=eps_hat,
    )


# ---------------------------------------------------------------------------
# Exponential tilting
# ---------------------------------------------------------------------------

def tilted_policy(pi0: np.ndarray, advantage: np.ndarray, beta: float) -> np.ndarray:
    """Closed-form optimum of reward maximization with KL anchoring:
    proportional to pi0 * exp(beta * advantage)."""
    pi0 = np.asarray(pi0, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logits = np.where(pi0 > 0, np.log(pi0) + beta * advantage, -np.inf)
    logits = logits - logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


def _kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Rows of KL(p || q); +inf where p puts mass outside q's support."""
    p = np.atleast_2d(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    out = terms.sum(axis=1)
    out[np.any((p > 0) & (q == 0), axis=1)] = np.inf
    return out


def _simplex_grid(dim: int, step: float) -> np.ndarray:
    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    if dim == 2:
        return np.column_stack([ticks, 1.0 - ticks])
    if dim == 3:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        a, b = a.ravel(), b.ravel()
        c = 1.0 - a - b
        keep = c >= -1e-12
        return np.column_stack([a[keep], b[keep], np.clip(c[keep], 0.0, 1.0)])
    if dim == 4:
        pts = []
        for a in ticks:
            for b in ticks:
                if a + b > 1 + 1e-12:
                    continue
                for c in ticks:
                    d = 1.0 - a - b - c
                    if d >= -1e-12:
                        pts.append((a, b, c, max(d, 0.0)))
        return np.array(pts)
    raise ValueError("grid search supports 2 to 4 outcomes")


@dataclass(frozen=True)
class TiltedOptimalityReport:
    closed_form: np.ndarray
    objective_closed: float
    grid_best: np.ndarray
    objective_grid: float
    tv_objective_argmax: float
    tv_kl_argmin: float


def verify_tilted_optimality(
    pi0: np.ndarray,
    advantage: np.ndarray,
    beta: float,
    grid_step: float = 1e-3,
) -> TiltedOptimalityReport:
    """Brute-force the simplex to confirm the tilting closed form.

    Checks both faces of the equivalence: the closed form maximizes
    E[advantage] - KL/beta over the grid (to grid tolerance), and the grid
    point minimizing KL(pi || closed form) coincides with the closed form.
    """
    pi0 = np.asarray(pi0, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    closed = tilted_policy(pi0, advantage, beta)
    grid = _simplex_grid(len(pi0), grid_step)

    def objective(p: np.ndarray) -> np.ndarray:
        reward = p @ advantage
        kl = _kl(p, pi0)
        if beta == 0.0:
            return -kl
        return reward - kl / beta

    obj_grid = objective(grid)
    best_idx = int(np.argmax(obj_grid))
    grid_best = grid[best_idx]
    tv_objective = 0.5 * float(np.abs(grid_best - closed).sum())

    kl_to_closed = _kl(grid, closed)
    kl_idx = int(np.argmin(kl_to_closed))
    tv_kl = 0.5 * float(np.abs(grid[kl_idx] - closed).sum())

    return TiltedOptimalityReport(
        closed_form=closed,
        objective_closed=float(objective(closed[None, :])[0]),
        grid_best=grid_best,
        objective_grid=float(obj_grid[best_idx]),
        tv_objective_argmax=tv_objective,
        tv_kl_argmin=tv_kl,
    )


# ---------------------------------------------------------------------------
# Scenario generators: canonical distribution-mismatch failure modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    make: "object"  # (seed) -> ToyProblem
    predicate: "object"  # (ToyProblem) -> bool


def _random_conditionals(rng: np.random.Generator, nx: int, ny: int, peak: float) -> np.ndarray:
    cond = np.full((nx, ny), (1.0 - peak) / (ny - 1))
    labels = rng.integers(0, ny, size=nx)
    cond[np.arange(nx), labels] = peak
    return cond


def _joint(marginal: np.ndarray, cond: np.ndarray) -> np.ndarray:
    joint = marginal[:, None] * cond
    return joint / joint.sum()


def make_covariate_shift(seed: int, nx: int = 8, ny: int = 4, ratio: float = 12.0) -> ToyProblem:
    rng = np.random.default_rng(seed)
    cond = _random_conditionals(rng, nx, ny, peak=0.85)
    m0 = rng.dirichlet(np.ones(nx) * 5)
    m_star = m0.copy()
    hot = int(rng.integers(0, nx))
    m0[hot] = m_star[hot] / ratio / 1.2  # leave headroom over the target ratio
    m0 /= m0.sum()
    m_star /= m_star.sum()
    theta = rng.normal(0, 1, size=(nx, ny))
    return ToyProblem(_joint(m_star, cond), _joint(m0, cond), theta)


def covariate_shift_present(problem: ToyProblem, ratio: float = 10.0) -> bool:
    m_star = problem.p_star.sum(axis=1)
    m0 = problem.p0.sum(axis=1)
    with np.errstate(divide="ignore"):
        ratios = np.where(m0 > 0, m_star / np.maximum(m0, 1e-300), np.inf)
    return bool(np.max(ratios) >= ratio)


def make_support_mismatch(seed: int, nx: int = 8, ny: int = 4) -> ToyProblem:
    rng = np.random.default_rng(seed)
    cond = _random_conditionals(rng, nx, ny, peak=0.85)
    m_star = rng.dirichlet(np.ones(nx) * 5)
    m0 = m_star.copy()
    dead = int(rng.integers(0, nx))
    m0[dead] = 0.0
    m0 /= m0.sum()
    theta = rng.normal(0, 1, size=(nx, ny))
    return ToyProblem(_joint(m_star, cond), _joint(m0, cond), theta)


def support_mismatch_present(problem: ToyProblem) -> bool:
    return bool(np.any((problem.p_star > 0) & (problem.p0 == 0)))


def make_underweighted_high_loss(seed: int, nx: int = 8, ny: int = 4) -> ToyProblem:
    rng = np.random.default_rng(seed)
    cond = _random_conditionals(rng, nx, ny, peak=0.9)
    labels = cond.argmax(axis=1)
    hard = int(rng.integers(0, nx))
    m_star = np.full(nx, 0.6 / (nx - 1))
    m_star[hard] = 0.4
    m0 = np.full(nx, 0.98 / (nx - 1))
    m0[hard] = 0.02
    # Model solves every context except the rare-but-important one.
    theta = np.zeros((nx, ny))
    for x in range(nx):
        theta[x, labels[x]] = 4.0
    theta[hard] = 0.0
    theta[hard, (labels[hard] + 1) % ny] = 4.0
    return ToyProblem(_joint(m_star, cond), _joint(m0, cond), theta)


def underweighted_high_loss_present(problem: ToyProblem, loss_floor: float = math.log(2.0)) -> bool:
    labels = target_labels(problem)
    m_star = problem.p_star.sum(axis=1)
    m0 = problem.p0.sum(axis=1)
    for x in range(problem.num_contexts):
        if labels[x] < 0:
            continue
        if (
            nll_loss_safe(problem, x, int(labels[x])) >= loss_floor
            and m0[x] <= 0.05
            and m_star[x] >= 0.2
        ):
            return True
    return False


def nll_loss_safe(problem: ToyProblem, x: int, y: int) -> float:
    logp = problem.log_policy()[x, y]
    return float(-logp) if np.isfinite(logp) else math.inf


def make_conditional_shift(seed: int, nx: int = 8, ny: int = 4) -> ToyProblem:
    rng = np.random.default_rng(seed)
    cond_star = _random_conditionals(rng, nx, ny, peak=0.9)
    cond0 = cond_star.copy()
    flipped = int(rng.integers(0, nx))
    cond0[flipped] = np.roll(cond_star[flipped], 1)  # move the peak off the target label
    marginal = rng.dirichlet(np.ones(nx) * 5)
    theta = rng.normal(0, 1, size=(nx, ny))
    return ToyProblem(_joint(marginal, cond_star), _joint(marginal, cond0), theta)


def conditional_shift_present(problem: ToyProblem, tv_floor: float = 0.5) -> bool:
    m_star = problem.p_star.sum(axis=1)
    m0 = problem.p0.sum(axis=1)
    for x in range(problem.num_contexts):
        if m_star[x] <= 0 or m0[x] <= 0:
            continue
        tv = 0.5 * float(
            np.abs(problem.p_star[x] / m_star[x] - problem.p0[x] / m0[x]).sum()
        )
        if tv >= tv_floor:
            return True
    return False


def scenario_suite() -> list[Scenario]:
    return [
        Scenario(
            "covariate_shift",
            "a context carries at least 10x more target than proposal mass",
            make_covariate_shift,
            covariate_shift_present,
        ),
        Scenario(
            "support_mismatch",
            "the target puts mass on a region the proposal never covers",
            make_support_mismatch,
            support_mismatch_present,
        ),
        Scenario(
            "underweighted_high_loss",
            "a high-loss context is rare in the proposal but heavy in the target",
            make_underweighted_high_loss,
            underweighted_high_loss_present,
        ),
        Scenario(
            "conditional_shift",
            "proposal and target disagree on an output conditional",
            make_conditional_shift,
            conditional_shift_present,
        ),
    ]


# ---------------------------------------------------------------------------
# Theorem sweep
# ---------------------------------------------------------------------------

def sweep_instance(rng: np.random.Generator, nx: int = 8, ny: int = 4) -> ToyProblem:
    """Random instance in the theorem's intended regime: correct but
    underweighted proposal labels.

    Proposal and target share peaked conditionals. The proposal assigns
    almost no mass to a random subset of contexts; training converged the
    model exactly on the well-covered contexts and left it confidently
    wrong on the starved ones. The failure-driven mixture then reweights
    exactly the starved contexts.
    """
    peak = 0.75 + 0.2 * rng.random()
    cond_star = _random_conditionals(rng, nx, ny, peak=peak)
    labels = cond_star.argmax(axis=1)

    starved = rng.random(nx) < (0.2 + 0.3 * rng.random())
    if not starved.any():
        starved[rng.integers(0, nx)] = True

    m_star = rng.dirichlet(np.ones(nx) * 2)
    m0 = rng.dirichlet(np.ones(nx) * 2)
    m0[starved] *= 0.02 + 0.08 * rng.random()
    m0 /= m0.sum()

    # Where coverage is thin the proposal's labels are also degraded.
    cond0 = cond_star.copy()
    corruption = 0.3 + 0.4 * rng.random()
    for x in np.flatnonzero(starved):
        noise = rng.dirichlet(np.ones(ny))
        cond0[x] = (1.0 - corruption) * cond_star[x] + corruption * noise
    cond0 /= cond0.sum(axis=1, keepdims=True)

    # Converged on covered contexts; confidently wrong on starved ones.
    theta = np.log(cond0)
    wrong_peak = 0.4 + 0.3 * rng.random()
    for x in np.flatnonzero(starved):
        wrong = int((labels[x] + 1 + rng.integers(0, ny - 1)) % ny)
        row = np.full(ny, (1.0 - wrong_peak) / (ny - 1))
        row[wrong] = wrong_peak
        theta[x] = np.log(row)
    return ToyProblem(_joint(m_star, cond_star), _joint(m0, cond0), theta)


@dataclass
class SweepResult:
    total: int = 0
    no_failures: int = 0
    gated_out: int = 0
    evaluated: int = 0
    alignment_holds: int = 0
    risk_order_holds: int = 0
    both_hold: int = 0
    descent_bound_violations: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def pass_rate(self) -> float:
        return self.both_hold / self.evaluated if self.evaluated else 1.0

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "violations"}
        d["pass_rate"] = self.pass_rate
        d["violations"] = self.violations[:20]
        return d


def theorem_sweep(
    n_instances: int = 1000,
    seed: int = 0,
    lam: float = 0.5,
    smoothness_bound: float = SAFE_SMOOTHNESS_BOUND,
    risk_slack: float = 1e-10,
) -> SweepResult:
    """Evaluate the alignment and one-step-risk claims over random instances.

    Instances whose measured preconditions fail (no failures, similarity
    factor below the proposal failure mass, vanishing gradients) are gated
    out, mirroring the out-of-hypothesis caveat: irrelevant retrieval or
    hallucinated synthesis voids the guarantee.
    """
    rng = np.random.default_rng(seed)
    result = SweepResult(total=n_instances)
    eta = 0.1 / smoothness_bound
    for i in range(n_instances):
        problem = sweep_instance(rng)
        try:
            built = build_toy_p1(
                problem,
                synth_label_accuracy=0.7 + 0.3 * rng.random(),
                lam=lam,
            )
        except NoFailures:
            result.no_failures += 1
            continue

        g0_norm = float(np.linalg.norm(grad_risk(problem, problem.p0)))
        g1_norm = float(np.linalg.norm(grad_risk(problem, built.p1)))
        gated_in = built.alpha_hat >= built.eps_hat and g0_norm > 1e-12 and g1_norm > 1e-12
        if not gated_in:
            result.gated_out += 1
            continue

        report = check_alignment(
            problem,
            built.p1,
            eta=eta,
            smoothness_bound=smoothness_bound,
            alpha_hat=built.alpha_hat,
            eps_hat=built.eps_hat,
        )
        result.evaluated += 1
        aligned = report.inner_p1 >= report.inner_p0
        ordered = report.risk_after_p1 <= report.risk_after_p0 + risk_slack
        if aligned:
            result.alignment_holds += 1
        if ordered:
            result.risk_order_holds += 1
        if aligned and ordered:
            result.both_hold += 1
        else:
            result.violations.append(
                {
                    "instance": i,
                    "inner_p1": report.inner_p1,
                    "inner_p0": report.inner_p0,
                    "risk_after_p1": report.risk_after_p1,
                    "risk_after_p0": report.risk_after_p0,
                    "alpha_hat": built.alpha_hat,
                    "eps_hat": built.eps_hat,
                }
            )
        bound_ok = (
            report.risk_after_p1 <= report.descent_bound_p1 + 1e-9
            and report.risk_after_p0 <= report.descent_bound_p0 + 1e-9
        )
        if not bound_ok:
            result.descent_bound_violations += 1
    return result


# ---------------------------------------------------------------------------
# Sequence variant: token-level loss sum with prefix-conditioned logits
# ---------------------------------------------------------------------------

@dataclass
class SequenceProblem:
    """Tiny autoregressive model: logits per (context, output prefix).

    Exercises the token-level decomposition of the loss; kept small enough
    (length <= 3, vocab <= 4) for exact enumeration and finite differences.
    """

    num_contexts: int
    vocab: int
    length: int
    logits: dict[tuple[int, tuple[int, ...]], np.ndarray]

    @staticmethod
    def random(rng: np.random.Generator, num_contexts: int = 2, vocab: int = 3, length: int = 2) -> "SequenceProblem":
        logits = {}
        for x in range(num_contexts):
            for t in range(length):
                for prefix in itertools.product(range(vocab), repeat=t):
                    logits[(x, prefix)] = rng.normal(0, 1, size=vocab)
        return SequenceProblem(num_contexts, vocab, length, logits)

    def _log_softmax(self, key) -> np.ndarray:
        z = self.logits[key] - self.logits[key].max()
        return z - np.log(np.exp(z).sum())

    def sequences(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.vocab), repeat=self.length))

    def nll(self, x: int, seq: tuple[int, ...]) -> float:
        total = 0.0
        for t, token in enumerate(seq):
            total -= float(self._log_softmax((x, seq[:t]))[token])
        return total

    def risk(self, dist: dict[tuple[int, tuple[int, ...]], float]) -> float:
        return sum(p * self.nll(x, seq) for (x, seq), p in dist.items() if p > 0)

    def grad_risk(
        self, dist: dict[tuple[int, tuple[int, ...]], float]
    ) -> dict[tuple[int, tuple[int, ...]], np.ndarray]:
        grads = {key: np.zeros(self.vocab) for key in self.logits}
        for (x, seq), p in dist.items():
            if p <= 0:
                continue
            for t, token in enumerate(seq):
                key = (x, seq[:t])
                pi = np.exp(self._log_softmax(key))
                one_hot = np.zeros(self.vocab)
                one_hot[token] = 1.0
                grads[key] += p * (pi - one_hot)
        return grads
