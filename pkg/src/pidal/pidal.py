"""The three Poisson deconvolution solvers built on the splitting driver.

Each solver minimizes a sum of three terms tied together by the driver in
:mod:`pidal.admm`; they differ in where the primal variable lives and in
the regularizer:

``pidal_tv``
    Image-space variable, total-variation penalty (inexact inner prox via
    warm-started dual sweeps), nonnegativity constraint.
``pidal_fa``
    Image-space variable, l1 penalty on undecimated-Haar analysis
    coefficients, nonnegativity constraint.
``pidal_fs``
    Coefficient-space variable (synthesis form): Poisson term on the
    blurred synthesis, l1 on the coefficients, nonnegativity on the
    synthesized image.

All three use one constant penalty weight ``mu`` (default ``60*tau/M``
for peak intensity ``M``), stop when the relative change of the primal
iterate drops to ``tol`` (default 0.005 when ``M == 5``, else 0.001), and
report per-iteration metrics in a :class:`RunReport`.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pidal import imagekit
from pidal.admm import AdmmConfig, SplitState, TermSpec, admm_solve
from pidal.linops import CirculantOperator, ParsevalFrame, solve_fs_normal, solve_ktk_plus_2i
from pidal.prox import (
    ChambolleState,
    neg_log_likelihood,
    poisson_prox,
    project_nonneg,
    soft_threshold,
    tv_denoise,
    tv_value,
)

__all__ = [
    "ConditionReport",
    "PidalConfig",
    "RunReport",
    "RunRow",
    "check_existence_conditions",
    "default_mu",
    "default_tol",
    "objective_fa",
    "objective_fs",
    "objective_tv",
    "pidal_fa",
    "pidal_fs",
    "pidal_tv",
]


def default_mu(tau, max_intensity):
    """Penalty weight rule of thumb: ``60 * tau / M`` for peak ``M``."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if max_intensity <= 0:
        raise ValueError(f"max_intensity must be > 0, got {max_intensity}")
    return 60.0 * tau / max_intensity


def default_tol(max_intensity):
    """Stopping tolerance rule: 0.005 at peak 5, else 0.001."""
    if max_intensity <= 0:
        raise ValueError(f"max_intensity must be > 0, got {max_intensity}")
    return 0.005 if max_intensity == 5 else 0.001


@dataclass(frozen=True)
class PidalConfig:
    """Solver settings shared by the three variants.

    ``mu`` and ``tol`` may be left None and are then derived from
    ``max_intensity`` via :func:`default_mu` / :func:`default_tol`;
    supplying them explicitly makes ``max_intensity`` unnecessary.

    Attributes
    ----------
    tau : float
        Regularization weight, > 0.
    mu : float, optional
        Penalty weight of the splitting, > 0.
    tol : float, optional
        Relative-change stopping tolerance (0 disables early stopping).
    max_iters : int
        Iteration cap.
    inner_tv_iters : int
        Dual sweeps per TV prox call (TV variant only).
    warm_start : bool
        Carry the TV dual field across outer iterations (TV variant only).
    levels : int
        Haar frame depth (frame variants only).
    exclude_approx_band : bool
        Leave the approximation band out of the l1 penalty (frame
        variants only).
    max_intensity : float, optional
        Peak of the underlying intensity, used only to default mu/tol.
    """

    tau: float
    mu: Optional[float] = None
    tol: Optional[float] = None
    max_iters: int = 1000
    inner_tv_iters: int = 5
    warm_start: bool = True
    levels: int = 4
    exclude_approx_band: bool = False
    max_intensity: Optional[float] = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.mu is not None and self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.tol is not None and self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.inner_tv_iters < 1:
            raise ValueError(f"inner_tv_iters must be >= 1, got {self.inner_tv_iters}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")

    def resolved_mu(self):
        if self.mu is not None:
            return self.mu
        if self.max_intensity is None:
            raise ValueError("either mu or max_intensity must be set")
        return default_mu(self.tau, self.max_intensity)

    def resolved_tol(self):
        if self.tol is not None:
            return self.tol
        if self.max_intensity is None:
            raise ValueError("either tol or max_intensity must be set")
        return default_tol(self.max_intensity)


@dataclass(frozen=True)
class RunRow:
    """Per-iteration diagnostics.

    ``objective`` evaluates the variant's model at the nonnegatively
    projected image candidate (raw coefficients for the synthesis-form l1
    term), so the column stays finite along the run; ``isnr``/``mae`` are
    NaN when no ground truth was supplied.
    """

    iteration: int
    objective: float
    isnr: float
    mae: float
    primal_residual: float
    rel_change: float
    elapsed_seconds: float


@dataclass
class RunReport:
    """Outcome of one solver run.

    ``termination`` is ``"tol"`` or ``"max_iters"``.  ``pre_clip_min`` and
    ``infeasibility_norm`` record how far the final raw iterate dipped
    below zero before the output was clipped.
    """

    method: str
    tau: float
    mu: float
    tol: float
    iterations: int
    termination: str
    pre_clip_min: float
    infeasibility_norm: float
    final_objective: float
    final_isnr: float
    final_mae: float
    elapsed_seconds: float
    rows: list = field(default_factory=list)

    CSV_COLUMNS = ("iter", "objective", "isnr", "mae", "primal_residual",
                   "rel_change", "elapsed_seconds")

    def to_csv(self, path):
        """Write the per-iteration rows with the fixed column order."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(
                    f"{row.iteration},{row.objective:.17g},{row.isnr:.17g},"
                    f"{row.mae:.17g},{row.primal_residual:.17g},"
                    f"{row.rel_change:.17g},{row.elapsed_seconds:.6f}\n"
                )


def _l1(coeffs, frame, exclude_approx_band):
    if exclude_approx_band:
        return float(np.sum(np.abs(coeffs[: frame.approx_index])))
    return float(np.sum(np.abs(coeffs)))


def objective_tv(op, y, tau, x):
    """TV model value at ``x`` (includes the nonnegativity indicator)."""
    x = np.asarray(x, dtype=np.float64)
    if (x < 0).any():
        return np.inf
    return neg_log_likelihood(op.apply(x), y) + tau * tv_value(x)


def objective_fa(op, frame, y, tau, x, exclude_approx_band=False):
    """Frame-analysis model value at ``x`` (includes the indicator)."""
    x = np.asarray(x, dtype=np.float64)
    if (x < 0).any():
        return np.inf
    penalty = _l1(frame.analysis(x), frame, exclude_approx_band)
    return neg_log_likelihood(op.apply(x), y) + tau * penalty


def objective_fs(op, frame, y, tau, s, exclude_approx_band=False):
    """Synthesis model value at coefficients ``s`` (includes the indicator)."""
    s = np.asarray(s, dtype=np.float64)
    x = frame.synthesis(s)
    if (x < 0).any():
        return np.inf
    penalty = _l1(s, frame, exclude_approx_band)
    return neg_log_likelihood(op.apply(x), y) + tau * penalty


@dataclass(frozen=True)
class ConditionReport:
    """Solution existence/uniqueness conditions for one problem instance.

    ``uniqueness`` is None when not established either way (synthesis
    variant: the composed operator is generally not injective).
    """

    regularizer: str
    injectivity_margin: float
    k_injective: bool
    kernel_nonnegative: bool
    counts_all_positive: bool
    existence: bool
    uniqueness: Optional[bool]


def check_existence_conditions(op, y, regularizer):
    """Report sufficient conditions for existence/uniqueness of a solution.

    Parameters
    ----------
    op : CirculantOperator
    y : ndarray
        Count image.
    regularizer : str
        ``"tv"``, ``"fa"`` or ``"fs"``.
    """
    if regularizer not in ("tv", "fa", "fs"):
        raise ValueError(f"unknown regularizer {regularizer!r}")
    y = imagekit.require_counts(y)
    margin = op.injectivity_margin()
    diag_scale = float(np.abs(op.dft_diag).max())
    injective = margin > 1e-10 * max(1.0, diag_scale)
    kernel = op.spatial_kernel()
    kernel_nonneg = kernel.min() >= -1e-12 * max(1.0, float(kernel.max())) and kernel.max() > 0
    counts_pos = bool((y > 0).all())
    if regularizer == "tv":
        existence = kernel_nonneg or injective
        uniqueness: Optional[bool] = injective and counts_pos
    elif regularizer == "fa":
        existence = True
        uniqueness = injective and counts_pos
    else:
        existence = True
        uniqueness = None
    return ConditionReport(
        regularizer=regularizer,
        injectivity_margin=margin,
        k_injective=injective,
        kernel_nonnegative=kernel_nonneg,
        counts_all_positive=counts_pos,
        existence=existence,
        uniqueness=uniqueness,
    )


def _require_identity_block(terms):
    """Structural full-column-rank check: some ``H_j`` must be the identity."""
    if not any(t.identity for t in terms):
        raise ValueError("no identity block registered; stacked operator rank not guaranteed")


def _finalize(method, cfg, mu, tol, raw_image, state, trace, metric_rows):
    rows = [
        RunRow(
            iteration=tr.iteration,
            objective=m[0],
            isnr=m[1],
            mae=m[2],
            primal_residual=tr.primal_residual,
            rel_change=tr.rel_change,
            elapsed_seconds=tr.elapsed_seconds,
        )
        for tr, m in zip(trace, metric_rows)
    ]
    stopped_by_tol = bool(trace) and tol > 0 and trace[-1].rel_change <= tol
    estimate = np.maximum(raw_image, 0.0)
    report = RunReport(
        method=method,
        tau=cfg.tau,
        mu=mu,
        tol=tol,
        iterations=state.iterations,
        termination="tol" if stopped_by_tol else "max_iters",
        pre_clip_min=float(raw_image.min()),
        infeasibility_norm=float(np.linalg.norm(np.minimum(raw_image, 0.0).ravel())),
        final_objective=rows[-1].objective if rows else np.nan,
        final_isnr=rows[-1].isnr if rows else np.nan,
        final_mae=rows[-1].mae if rows else np.nan,
        elapsed_seconds=trace[-1].elapsed_seconds if trace else 0.0,
        rows=rows,
    )
    return estimate, report


def _metric_fns(y, truth):
    def compute(candidate):
        if truth is None:
            return (np.nan, np.nan)
        return (imagekit.isnr(y, truth, candidate), imagekit.mae(truth, candidate))

    return compute


def _resolve_init_image(y, init_image):
    """Default the warm-up image to the observation itself."""
    if init_image is None:
        return y
    x0 = imagekit.require_image(init_image, name="init_image")
    if x0.shape != y.shape:
        raise ValueError(f"init_image shape {x0.shape} does not match y {y.shape}")
    return x0


def pidal_tv(y, op, cfg, truth=None, observer=None, init_image=None):
    """Deconvolve counts ``y`` under the total-variation model.

    Parameters
    ----------
    y : ndarray
        Observed photon counts.
    op : CirculantOperator
        Blur operator.
    cfg : PidalConfig
    truth : ndarray, optional
        Ground-truth intensity for per-iteration ISNR/MAE.
    observer : callable, optional
        Forwarded to the driver as ``observer(k, state, internals)``.
    init_image : ndarray, optional
        Image seeding the iteration (defaults to ``y``); any starting
        point converges, so this mainly supports uniqueness probes.

    Returns
    -------
    (estimate, RunReport)
        ``estimate`` is the final iterate clipped at 0.
    """
    y = imagekit.require_counts(y)
    if y.shape != op.shape:
        raise ValueError(f"y shape {y.shape} does not match operator {op.shape}")
    if truth is not None:
        truth = imagekit.require_image(truth, name="truth", nonnegative=True)
    mu = cfg.resolved_mu()
    tol = cfg.resolved_tol()
    beta = cfg.tau / mu
    tv_state = ChambolleState.zeros(y.shape)

    def tv_prox(nu):
        state = tv_state if cfg.warm_start else ChambolleState.zeros(y.shape)
        out, _ = tv_denoise(nu, beta, cfg.inner_tv_iters, state)
        return out

    terms = [
        TermSpec(apply=op.apply, adjoint=op.adjoint,
                 prox=lambda nu: poisson_prox(nu, y, mu), name="poisson"),
        TermSpec(apply=lambda x: x, adjoint=lambda x: x, prox=tv_prox,
                 name="tv", identity=True),
        TermSpec(apply=lambda x: x, adjoint=lambda x: x, prox=project_nonneg,
                 name="nonneg", identity=True),
    ]
    _require_identity_block(terms)
    metrics = _metric_fns(y, truth)
    metric_rows = []

    def obs(k, state, internals):
        candidate = np.maximum(state.z, 0.0)
        metric_rows.append((objective_tv(op, y, cfg.tau, candidate),) + metrics(candidate))
        if observer is not None:
            observer(k, state, internals)

    x0 = _resolve_init_image(y, init_image)
    init = SplitState(z=x0.copy(), u=[x0.copy(), x0.copy(), x0.copy()],
                      d=[np.zeros_like(y) for _ in range(3)])
    state, trace = admm_solve(
        terms, lambda gamma: solve_ktk_plus_2i(op, gamma), init,
        AdmmConfig(mu=mu, max_iters=cfg.max_iters, tol=tol), observer=obs)
    return _finalize("tv", cfg, mu, tol, state.z, state, trace, metric_rows)


def pidal_fa(y, op, cfg, truth=None, observer=None, init_image=None):
    """Deconvolve counts ``y`` with the l1-of-analysis-coefficients model.

    Same interface as :func:`pidal_tv`; the frame depth comes from
    ``cfg.levels``.
    """
    y = imagekit.require_counts(y)
    if y.shape != op.shape:
        raise ValueError(f"y shape {y.shape} does not match operator {op.shape}")
    if truth is not None:
        truth = imagekit.require_image(truth, name="truth", nonnegative=True)
    mu = cfg.resolved_mu()
    tol = cfg.resolved_tol()
    frame = ParsevalFrame(y.shape, cfg.levels)
    thresh = cfg.tau / mu

    def fa_prox(coeffs):
        out = soft_threshold(coeffs, thresh)
        if cfg.exclude_approx_band:
            out[frame.approx_index] = coeffs[frame.approx_index]
        return out

    terms = [
        TermSpec(apply=op.apply, adjoint=op.adjoint,
                 prox=lambda nu: poisson_prox(nu, y, mu), name="poisson"),
        TermSpec(apply=frame.analysis, adjoint=frame.synthesis, prox=fa_prox, name="l1-analysis"),
        TermSpec(apply=lambda x: x, adjoint=lambda x: x, prox=project_nonneg,
                 name="nonneg", identity=True),
    ]
    _require_identity_block(terms)
    metrics = _metric_fns(y, truth)
    metric_rows = []

    def obs(k, state, internals):
        candidate = np.maximum(state.z, 0.0)
        metric_rows.append(
            (objective_fa(op, frame, y, cfg.tau, candidate, cfg.exclude_approx_band),)
            + metrics(candidate))
        if observer is not None:
            observer(k, state, internals)

    x0 = _resolve_init_image(y, init_image)
    init = SplitState(z=x0.copy(), u=[x0.copy(), frame.analysis(x0), x0.copy()],
                      d=[np.zeros_like(y), np.zeros(frame.coeff_shape()), np.zeros_like(y)])
    state, trace = admm_solve(
        terms, lambda gamma: solve_ktk_plus_2i(op, gamma), init,
        AdmmConfig(mu=mu, max_iters=cfg.max_iters, tol=tol), observer=obs)
    return _finalize("fa", cfg, mu, tol, state.z, state, trace, metric_rows)


def pidal_fs(y, op, cfg, truth=None, observer=None, init_image=None):
    """Deconvolve counts ``y`` in synthesis form (variable = coefficients).

    Same interface as :func:`pidal_tv`; returns the synthesized image
    (clipped at 0) and the report.  The raw coefficient iterate is not
    returned; its synthesized image drives all reported metrics.
    """
    y = imagekit.require_counts(y)
    if y.shape != op.shape:
        raise ValueError(f"y shape {y.shape} does not match operator {op.shape}")
    if truth is not None:
        truth = imagekit.require_image(truth, name="truth", nonnegative=True)
    mu = cfg.resolved_mu()
    tol = cfg.resolved_tol()
    frame = ParsevalFrame(y.shape, cfg.levels)
    thresh = cfg.tau / mu

    def fs_prox(coeffs):
        out = soft_threshold(coeffs, thresh)
        if cfg.exclude_approx_band:
            out[frame.approx_index] = coeffs[frame.approx_index]
        return out

    terms = [
        TermSpec(apply=lambda s: op.apply(frame.synthesis(s)),
                 adjoint=lambda x: frame.analysis(op.adjoint(x)),
                 prox=lambda nu: poisson_prox(nu, y, mu), name="poisson-synthesis"),
        TermSpec(apply=lambda s: s, adjoint=lambda s: s, prox=fs_prox,
                 name="l1-coeffs", identity=True),
        TermSpec(apply=frame.synthesis, adjoint=frame.analysis, prox=project_nonneg,
                 name="nonneg-synthesis"),
    ]
    _require_identity_block(terms)
    metrics = _metric_fns(y, truth)
    metric_rows = []

    def obs(k, state, internals):
        candidate = np.maximum(frame.synthesis(state.z), 0.0)
        penalty = _l1(state.z, frame, cfg.exclude_approx_band)
        objective = neg_log_likelihood(op.apply(candidate), y) + cfg.tau * penalty
        metric_rows.append((objective,) + metrics(candidate))
        if observer is not None:
            observer(k, state, internals)

    x0 = _resolve_init_image(y, init_image) if init_image is not None else op.adjoint(y)
    s0 = frame.analysis(x0)
    init = SplitState(z=s0.copy(), u=[y.copy(), s0.copy(), x0.copy()],
                      d=[np.zeros_like(y), np.zeros(frame.coeff_shape()), np.zeros_like(y)])
    state, trace = admm_solve(
        terms, lambda gamma: solve_fs_normal(op, frame, gamma), init,
        AdmmConfig(mu=mu, max_iters=cfg.max_iters, tol=tol), observer=obs)
    raw_image = frame.synthesis(state.z)
    return _finalize("fs", cfg, mu, tol, raw_image, state, trace, metric_rows)
