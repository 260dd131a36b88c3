"""Single-latent measurement model fitted by maximum likelihood.

The model-implied covariance is Sigma(theta) = phi * lambda lambda' +
diag(psi) with the first loading fixed to 1 for identification. The fit
minimizes the ML discrepancy

    F(theta) = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p

over free loadings and log-parameterized variances, using analytic
gradients (verified by finite differences in the test suite) with a Newton
polish so the gradient infinity-norm at the solution is below 1e-6.
Standard errors come from the inverse observed information, the Hessian of
(n-1)/2 * F with respect to the raw parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (
    BoundaryVariance,
    NoConvergence,
    NonpositiveSE,
    NotPositiveDefinite,
    UnconvergedFit,
)
from .prediction_log import PredictionLog, align_logs

VAR_FLOOR = 1e-8
GRAD_TOL = 1e-6
STEP_TOL = 1e-10


@dataclass
class PathModel:
    """Skeleton: ordered indicators; the first anchors the latent scale."""

    latent: str
    indicators: list[str]

    def __post_init__(self):
        if len(self.indicators) < 3:
            raise ValueError("identification requires at least 3 indicators")


@dataclass
class SampleMoments:
    n: int
    S: np.ndarray

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=np.float64)
        p = self.S.shape[0]
        if self.S.shape != (p, p) or not np.allclose(self.S, self.S.T, atol=1e-12):
            raise ValueError("S must be a symmetric square matrix")


@dataclass
class SemFit:
    indicators: list[str]
    loadings: np.ndarray          # lambda, first entry exactly 1
    residual_variances: np.ndarray
    latent_variance: float
    se: dict[str, float]          # per free parameter
    z: dict[str, float]
    p_values: dict[str, float]
    objective: float
    gradient_norm: float
    converged: bool
    iterations: int
    n: int
    boundary_params: list[str]

    def arc_table(self) -> list[dict]:
        """Fig-5-style rows: one arc per indicator with estimate/SE/z/p."""
        rows = []
        for j, ind in enumerate(self.indicators):
            key = f"loading[{ind}]"
            fixed = j == 0
            rows.append({
                "indicator": ind,
                "estimate": float(self.loadings[j]),
                "se": None if fixed else self.se.get(key),
                "z": None if fixed else self.z.get(key),
                "p": None if fixed else self.p_values.get(key),
                "fixed": fixed,
            })
        return rows

    def to_json(self) -> dict:
        return {
            "indicators": list(self.indicators),
            "loadings": [float(v) for v in self.loadings],
            "residual_variances": [float(v) for v in self.residual_variances],
            "latent_variance": float(self.latent_variance),
            "se": self.se, "z": self.z, "p_values": self.p_values,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "n": self.n,
            "boundary_params": list(self.boundary_params),
            "arcs": self.arc_table(),
        }


# ---------------------------------------------------------------------------
# Objective and gradients
# ---------------------------------------------------------------------------
# theta (optimization space) = [lam_2..lam_p, log psi_1..log psi_p, log phi]

def _unpack(theta: np.ndarray, p: int):
    lam = np.concatenate([[1.0], theta[:p - 1]])
    psi = np.exp(theta[p - 1: 2 * p - 1])
    phi = float(np.exp(theta[2 * p - 1]))
    return lam, psi, phi


def _sigma(lam: np.ndarray, psi: np.ndarray, phi: float) -> np.ndarray:
    return phi * np.outer(lam, lam) + np.diag(psi)


def fml(theta: np.ndarray, S: np.ndarray, logdet_S: float) -> float:
    p = S.shape[0]
    lam, psi, phi = _unpack(theta, p)
    sigma = _sigma(lam, psi, phi)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        return np.inf
    sigma_inv = np.linalg.inv(sigma)
    return logdet + float(np.trace(S @ sigma_inv)) - logdet_S - p


def _raw_gradient(S: np.ndarray, lam, psi, phi):
    """dF/d(lam_2..p), dF/d(psi_1..p), dF/d(phi) at raw parameters."""
    sigma = _sigma(lam, psi, phi)
    sigma_inv = np.linalg.inv(sigma)
    G = sigma_inv @ (sigma - S) @ sigma_inv
    dlam = 2.0 * phi * (G @ lam)[1:]
    dpsi = np.diag(G).copy()
    dphi = float(lam @ G @ lam)
    return dlam, dpsi, dphi


def fml_grad(theta: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Gradient in the optimization (log-variance) parameterization."""
    p = S.shape[0]
    lam, psi, phi = _unpack(theta, p)
    dlam, dpsi, dphi = _raw_gradient(S, lam, psi, phi)
    return np.concatenate([dlam, dpsi * psi, [dphi * phi]])


def _numeric_hessian(grad_fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    q = x.size
    H = np.empty((q, q))
    for i in range(q):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        H[:, i] = (grad_fn(xp) - grad_fn(xm)) / (2.0 * h)
    return (H + H.T) / 2.0


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _start(S: np.ndarray) -> np.ndarray:
    p = S.shape[0]
    phi0 = max(S[0, 0] / 2.0, 1e-3)
    lam0 = np.array([S[0, j] / phi0 for j in range(1, p)])
    psi0 = np.maximum(np.diag(S) / 2.0, 1e-3)
    return np.concatenate([lam0, np.log(psi0), [math.log(phi0)]])


def fit_sem(data: np.ndarray, spec: PathModel,
            max_iters: int = 500, on_boundary: str = "flag") -> SemFit:
    """Fit the single-latent model to an n x p score matrix.

    on_boundary: "flag" records variances pinned at the 1e-8 floor in
    SemFit.boundary_params; "raise" turns them into BoundaryVariance.
    """
    data = np.asarray(data, dtype=np.float64)
    p = len(spec.indicators)
    if data.ndim != 2 or data.shape[1] != p:
        raise ValueError(f"data must be n x {p}")
    n = data.shape[0]
    n_free = 2 * p
    if n <= n_free:
        raise ValueError(f"need more than {n_free} observations, got {n}")
    S = np.cov(data, rowvar=False, ddof=1)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("sample covariance is not positive definite") \
            from None
    _, logdet_S = np.linalg.slogdet(S)

    log_floor = math.log(VAR_FLOOR)
    bounds = [(None, None)] * (p - 1) + [(log_floor, None)] * (p + 1)
    res = minimize(lambda t: fml(t, S, logdet_S), _start(S),
                   jac=lambda t: fml_grad(t, S),
                   method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": max_iters, "ftol": 1e-14, "gtol": 1e-10})
    theta = res.x
    iterations = int(res.nit)

    # Newton polish on the smooth interior problem to push the gradient
    # infinity-norm to (near) machine precision.
    last_step = np.inf
    for _ in range(50):
        g = fml_grad(theta, S)
        if np.linalg.norm(g, np.inf) < 1e-11:
            break
        H = _numeric_hessian(lambda t: fml_grad(t, S), theta)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = -g
        f0 = fml(theta, S, logdet_S)
        scale = 1.0
        while scale > 1e-8:
            cand = np.maximum(theta + scale * step, np.array(
                [-np.inf] * (p - 1) + [log_floor] * (p + 1)))
            if fml(cand, S, logdet_S) <= f0 + 1e-15:
                theta = cand
                break
            scale *= 0.5
        iterations += 1
        last_step = float(np.linalg.norm(scale * step, np.inf))
        if last_step < STEP_TOL:
            break

    grad_norm = float(np.linalg.norm(fml_grad(theta, S), np.inf))
    converged = grad_norm < GRAD_TOL or last_step < STEP_TOL
    if not converged:
        raise NoConvergence(
            f"gradient norm {grad_norm:.2e} after {iterations} iterations",
            iterations)

    lam, psi, phi = _unpack(theta, p)
    boundary = []
    for i, v in enumerate(psi):
        if v <= VAR_FLOOR * (1.0 + 1e-6):
            boundary.append(f"psi[{spec.indicators[i]}]")
    if phi <= VAR_FLOOR * (1.0 + 1e-6):
        boundary.append("phi")
    if boundary and on_boundary == "raise":
        raise BoundaryVariance(f"variance(s) at the {VAR_FLOOR} floor: {boundary}")

    # Observed information = Hessian of (n-1)/2 * F at the raw parameters.
    raw = np.concatenate([lam[1:], psi, [phi]])

    def raw_grad(r: np.ndarray) -> np.ndarray:
        lam_r = np.concatenate([[1.0], r[:p - 1]])
        psi_r = r[p - 1: 2 * p - 1]
        phi_r = float(r[2 * p - 1])
        dlam, dpsi, dphi = _raw_gradient(S, lam_r, psi_r, phi_r)
        return np.concatenate([dlam, dpsi, [dphi]])

    info = (n - 1) / 2.0 * _numeric_hessian(raw_grad, raw)
    names = ([f"loading[{ind}]" for ind in spec.indicators[1:]]
             + [f"psi[{ind}]" for ind in spec.indicators]
             + ["phi"])
    se: dict[str, float] = {}
    z: dict[str, float] = {}
    pv: dict[str, float] = {}
    try:
        cov = np.linalg.inv(info)
        diag = np.diag(cov)
    except np.linalg.LinAlgError:
        diag = np.full(len(names), np.nan)
    for name, est, var in zip(names, raw, diag):
        s = math.sqrt(var) if var > 0 else float("nan")
        se[name] = s
        z[name] = est / s if s and not math.isnan(s) else float("nan")
        pv[name] = wald_p(est, s) if s and not math.isnan(s) and s > 0 \
            else float("nan")

    return SemFit(
        indicators=list(spec.indicators),
        loadings=lam,
        residual_variances=psi,
        latent_variance=phi,
        se=se, z=z, p_values=pv,
        objective=float(fml(theta, S, logdet_S)),
        gradient_norm=grad_norm,
        converged=converged,
        iterations=iterations,
        n=n,
        boundary_params=boundary,
    )


def wald_p(estimate: float, se: float) -> float:
    """Two-sided p = 2*(1 - Phi(|estimate/se|)).

    Phi is evaluated through math.erfc (C-library accuracy, far below the
    1e-7 requirement): 2*(1 - Phi(z)) = erfc(z / sqrt(2)).
    """
    if se <= 0 or math.isnan(se):
        raise NonpositiveSE(f"standard error must be positive, got {se}")
    return math.erfc(abs(estimate / se) / math.sqrt(2.0))


def rank_sensors(fit: SemFit) -> list[dict]:
    """Sensors by loading, descending; ties keep indicator order; negative
    loadings rank last, are flagged, and contribute zero fusion weight."""
    if not fit.converged:
        raise UnconvergedFit("cannot rank sensors from an unconverged fit")
    rows = [{"sensor": ind, "loading": float(lam),
             "weight": max(float(lam), 0.0), "negative": bool(lam < 0)}
            for ind, lam in zip(fit.indicators, fit.loadings)]
    rows.sort(key=lambda r: -r["loading"])
    return rows


def weight_map(fit: SemFit) -> dict[str, float]:
    """The sensor -> weight map consumed by the fusion network."""
    return {r["sensor"]: r["weight"] for r in rank_sensors(fit)}


# ---------------------------------------------------------------------------
# Indicator data
# ---------------------------------------------------------------------------

def indicator_matrix(logs: dict[str, PredictionLog],
                     indicators: list[str]) -> np.ndarray:
    """n x p matrix of per-sensor stress-class confidences, aligned by
    sample id; column order follows the indicator list."""
    missing = sorted(set(indicators) - set(logs))
    if missing:
        raise ValueError(f"no log for indicator(s) {missing}")
    sample_ids = align_logs({k: logs[k] for k in indicators})
    cols = []
    for ind in indicators:
        log = logs[ind]
        stress_idx = log.class_index("stress")
        by_id = {e.sample_id: e for e in log.entries}
        cols.append([float(by_id[sid].confidence[stress_idx]) for sid in sample_ids])
    return np.array(cols, dtype=np.float64).T


def generate_factor_data(loadings, residual_vars, latent_var: float,
                         n: int, seed: int = 0) -> np.ndarray:
    """Sample n observations from the single-latent model (test oracle)."""
    rng = np.random.default_rng(seed)
    lam = np.asarray(loadings, dtype=np.float64)
    psi = np.asarray(residual_vars, dtype=np.float64)
    eta = rng.normal(0.0, math.sqrt(latent_var), size=n)
    eps = rng.normal(0.0, 1.0, size=(n, lam.size)) * np.sqrt(psi)
    return np.outer(eta, lam) + eps
