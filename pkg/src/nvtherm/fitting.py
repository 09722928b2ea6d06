"""Nonlinear least-squares fitting of ODMR spectra.

Two model families: a multi-Lorentzian dip model (conventional parallel-field
spectra) and the dressed-state dip model (transverse-field spectra with RF
drive).  The optimizer is a damped least-squares (Levenberg-Marquardt style)
loop with a numerical central-difference Jacobian; strictly positive
parameters are fitted in log space so the internal problem is unconstrained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import find_peaks, peak_widths

from .lineshape import Spectrum, dressed_depletion

MAX_ITERATIONS = 500
COST_RTOL = 1e-10
STEP_ATOL = 1e-12
MAX_DAMPING = 1e12
JACOBIAN_REL_STEP = 1e-6


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or the optimizer breaks down."""


@dataclass(frozen=True)
class MultiLorentzian:
    """Sum-of-Lorentzian-dips model: baseline minus n_peaks Lorentzians.

    Parameter layout: [baseline, center_1, width_1, depth_1, ..., center_n,
    width_n, depth_n].  Widths and depths are strictly positive.
    """

    n_peaks: int

    @property
    def param_names(self) -> tuple[str, ...]:
        names = ["baseline"]
        for k in range(1, self.n_peaks + 1):
            names += [f"center_{k}", f"width_{k}", f"depth_{k}"]
        return tuple(names)

    @property
    def positive(self) -> np.ndarray:
        mask = [False]
        for _ in range(self.n_peaks):
            mask += [False, True, True]
        return np.array(mask)

    @property
    def center_indices(self) -> list[int]:
        return [1 + 3 * k for k in range(self.n_peaks)]

    def evaluate(self, params: np.ndarray, grid: np.ndarray) -> np.ndarray:
        sig = np.full_like(grid, params[0], dtype=float)
        for k in range(self.n_peaks):
            c, w, a = params[1 + 3 * k : 4 + 3 * k]
            half = w / 2.0
            sig = sig - a * half**2 / ((grid - c) ** 2 + half**2)
        return sig


@dataclass(frozen=True)
class DressedDip:
    """Dressed-state dip model built on the two-mode response.

    Parameter layout: [d, ex, rabi_rf, rabi_mw, gamma_b, gamma_d, contrast]
    plus a trailing sigma_ex when ``fit_sigma_ex`` is set.  The RF frequency
    is a fixed attribute of the model, not a fitted parameter.

    The signal is exactly proportional to contrast * rabi_mw**2, so the two
    cannot be fitted jointly; by default the contrast is frozen at
    ``fixed_contrast`` and excluded from optimization (pass None to fit it
    and freeze rabi_mw instead via ``fixed_rabi_mw``).
    """

    omega_rf: float
    fit_sigma_ex: bool = False
    quadrature_nodes: int = 21
    fixed_contrast: float | None = 0.05
    fixed_rabi_mw: float | None = None

    def __post_init__(self):
        if self.fixed_contrast is not None and self.fixed_rabi_mw is not None:
            raise ValueError("freeze at most one of contrast, rabi_mw")

    @property
    def param_names(self) -> tuple[str, ...]:
        names = ["d", "ex", "rabi_rf", "rabi_mw", "gamma_b", "gamma_d", "contrast"]
        if self.fit_sigma_ex:
            names.append("sigma_ex")
        return tuple(names)

    @property
    def positive(self) -> np.ndarray:
        mask = [False, False, True, True, True, True, True]
        if self.fit_sigma_ex:
            mask.append(True)
        return np.array(mask)

    @property
    def frozen(self) -> dict[str, float]:
        if self.fixed_contrast is not None:
            return {"contrast": self.fixed_contrast}
        if self.fixed_rabi_mw is not None:
            return {"rabi_mw": self.fixed_rabi_mw}
        return {}

    @property
    def center_indices(self) -> list[int]:
        return [0]

    def evaluate(self, params: np.ndarray, grid: np.ndarray) -> np.ndarray:
        d, ex, rabi_rf, rabi_mw, gamma_b, gamma_d, contrast = params[:7]
        sigma_ex = params[7] if self.fit_sigma_ex else 0.0

        def one(ex_i):
            dep = dressed_depletion(
                d, ex_i, self.omega_rf, grid, rabi_rf, rabi_mw, gamma_b, gamma_d
            )
            return 1.0 - contrast * dep

        if sigma_ex == 0.0:
            return one(ex)
        x, w = np.polynomial.hermite.hermgauss(self.quadrature_nodes)
        w = w / np.sqrt(np.pi)
        acc = np.zeros_like(grid, dtype=float)
        for xi, wi in zip(x, w):
            acc = acc + wi * one(ex + np.sqrt(2.0) * sigma_ex * xi)
        return acc


@dataclass
class FitResult:
    """Fitted parameters, uncertainties, and per-peak line properties."""

    param_names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    residual_rms: float
    fwhm_per_peak: list
    contrast_per_peak: list
    converged: bool
    iterations: int
    cost: float
    model_kind: str
    fwhm_reasons: list = field(default_factory=list)

    def param(self, name: str) -> float:
        return float(self.params[self.param_names.index(name)])

    def uncertainty(self, name: str) -> float:
        i = self.param_names.index(name)
        return float(np.sqrt(max(self.covariance[i, i], 0.0)))

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "model": self.model_kind,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_rms": self.residual_rms,
            "cost": self.cost,
            "parameters": [
                {
                    "name": n,
                    "value": float(v),
                    "sigma": self.uncertainty(n),
                }
                for n, v in zip(self.param_names, self.params)
            ],
            "fwhm_mhz": self.fwhm_per_peak,
            "fwhm_reasons": self.fwhm_reasons,
            "contrast_per_peak": self.contrast_per_peak,
        }
        return json.dumps(doc, indent=2)


def _smooth(signal: np.ndarray) -> np.ndarray:
    win = max(3, len(signal) // 50)
    if win % 2 == 0:
        win += 1
    kernel = np.ones(win) / win
    pad = win // 2
    padded = np.concatenate([signal[:pad][::-1], signal, signal[-pad:][::-1]])
    return np.convolve(padded, kernel, mode="valid")


def _detect_dips(spec: Spectrum, n_required: int):
    """Local-minima detection on the smoothed signal.

    Returns (baseline, centers, widths, depths) for the ``n_required`` most
    prominent dips, sorted by center frequency.
    """
    if len(spec) < 10:
        raise FitError(f"need at least 10 points, got {len(spec)}")
    smooth = _smooth(spec.signal)
    baseline = float(np.quantile(smooth, 0.75))
    depth = baseline - smooth
    noise_est = float(np.std(np.diff(spec.signal)) / np.sqrt(2.0))
    floor = max(5.0 * noise_est / np.sqrt(max(len(spec) // 50, 1)), 1e-12)
    if depth.max() <= floor:
        raise FitError(f"detected 0 dips, need {n_required} (spectrum looks flat)")
    idx, props = find_peaks(depth, prominence=0.2 * depth.max())
    if len(idx) < n_required:
        raise FitError(f"detected {len(idx)} dips, need {n_required}")
    order = np.argsort(props["prominences"])[::-1][:n_required]
    idx = np.sort(idx[order])
    w_samples = peak_widths(depth, idx, rel_height=0.5)[0]
    dnu = float(np.mean(np.diff(spec.frequencies)))
    centers = spec.frequencies[idx]
    widths = np.maximum(w_samples * dnu, dnu)
    depths = depth[idx]
    return baseline, centers, widths, depths


def initial_guess(spec: Spectrum, model) -> np.ndarray:
    """Heuristic starting vector for a fit of ``model`` to ``spec``."""
    if isinstance(model, MultiLorentzian):
        baseline, centers, widths, depths = _detect_dips(spec, model.n_peaks)
        params = [baseline]
        for c, w, a in zip(centers, widths, depths):
            params += [float(c), float(w), float(a)]
        return np.array(params)
    if isinstance(model, DressedDip):
        baseline, centers, widths, depths = _detect_dips(spec, 1)
        for n in (4, 2):
            try:
                _, centers, widths, depths = _detect_dips(spec, n)
            except FitError:
                continue
            break
        dnu = float(np.mean(np.diff(spec.frequencies)))
        d = float(np.mean(centers))
        ex = max(model.omega_rf / 2.0, dnu)
        span = float(centers[-1] - centers[0])
        rabi_rf = max(span - model.omega_rf, dnu)
        gamma_b = max(float(np.mean(widths)) / 2.0, dnu / 2.0)
        gamma_d = gamma_b / 10.0
        contrast = model.frozen.get("contrast", min(2.0 * float(depths.max()), 0.5))
        rabi_mw = model.frozen.get(
            "rabi_mw",
            2.0 * gamma_b * np.sqrt(max(float(depths.max()), 1e-6) / contrast),
        )
        params = [d, ex, rabi_rf, rabi_mw, gamma_b, gamma_d, contrast]
        if model.fit_sigma_ex:
            params.append(max(float(np.mean(widths)) / 10.0, dnu / 10.0))
        return np.array(params)
    raise FitError(f"unknown model type {type(model).__name__}")


def _check_guess(spec: Spectrum, model, guess: np.ndarray):
    names = model.param_names
    if len(guess) != len(names):
        raise FitError(f"guess has {len(guess)} entries, model needs {len(names)}")
    pos = model.positive
    bad = [n for n, g, p in zip(names, guess, pos) if p and g <= 0]
    if bad:
        raise FitError(f"positive parameters must start > 0: {', '.join(bad)}")
    lo, hi = spec.frequencies[0], spec.frequencies[-1]
    for i in model.center_indices:
        if not (lo <= guess[i] <= hi):
            raise FitError(
                f"{names[i]} = {guess[i]} outside the grid span [{lo}, {hi}]"
            )


def _free_mask(model) -> np.ndarray:
    frozen = getattr(model, "frozen", {})
    return np.array([n not in frozen for n in model.param_names])


def _to_internal(p, pos):
    x = np.array(p, dtype=float)
    x[pos] = np.log(x[pos])
    return x


def _to_external(x, pos):
    p = np.array(x, dtype=float)
    # Clip so a wild trial step cannot overflow; such steps get rejected anyway.
    p[pos] = np.exp(np.clip(p[pos], -300.0, 300.0))
    return p


def fit(spec: Spectrum, model, guess: np.ndarray | None = None) -> FitResult:
    """Weighted damped least squares of ``model`` against ``spec``.

    Converges when the relative cost change drops below 1e-10 or the step
    norm below 1e-12, within 500 iterations.  Rejected steps raise the
    damping; damping beyond 1e12 is an error.  Per-point weights are
    1/sigma when every sigma is positive, otherwise unit weights.
    """
    if guess is None:
        guess = initial_guess(spec, model)
    guess = np.asarray(guess, dtype=float)
    _check_guess(spec, model, guess)

    grid = spec.frequencies
    data = spec.signal
    weighted = bool(np.all(spec.sigma > 0))
    w = 1.0 / spec.sigma if weighted else np.ones_like(data)

    free = _free_mask(model)
    pos = model.positive
    pos_free = pos[free]
    full = guess.copy()

    def residuals(x_free):
        p = full.copy()
        p[free] = _to_external(x_free, pos_free)
        return w * (model.evaluate(p, grid) - data)

    x = _to_internal(guess[free], pos_free)
    r = residuals(x)
    cost = 0.5 * float(r @ r)
    mu = 1e-3
    converged = False
    iterations = 0

    for iterations in range(1, MAX_ITERATIONS + 1):
        jac = _numeric_jacobian(residuals, x)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = max(diag.max(), 1e-12)
        accepted = False
        while mu <= MAX_DAMPING:
            try:
                dx = np.linalg.solve(jtj + mu * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            if np.linalg.norm(dx) < STEP_ATOL:
                converged = True
                break
            r_new = residuals(x + dx)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                x = x + dx
                r = r_new
                cost = cost_new
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                if rel_drop < COST_RTOL:
                    converged = True
                break
            mu *= 10.0
        if mu > MAX_DAMPING:
            raise FitError(
                f"damping exceeded {MAX_DAMPING:g} after {iterations} iterations"
            )
        if converged or not accepted:
            break

    params = full.copy()
    params[free] = _to_external(x, pos_free)
    resid = model.evaluate(params, grid) - data
    residual_rms = float(np.sqrt(np.mean(resid**2)))
    cov = _covariance(model, params, free, grid, w, weighted, cost, len(data))
    fwhm, reasons, contrasts = peak_properties(model, params, spec)
    return FitResult(
        param_names=model.param_names,
        params=params,
        covariance=cov,
        residual_rms=residual_rms,
        fwhm_per_peak=fwhm,
        contrast_per_peak=contrasts,
        converged=converged,
        iterations=iterations,
        cost=cost,
        model_kind=type(model).__name__,
        fwhm_reasons=reasons,
    )


def _numeric_jacobian(residuals, x):
    r0 = residuals(x)
    jac = np.empty((len(r0), len(x)))
    for i in range(len(x)):
        h = JACOBIAN_REL_STEP * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (residuals(xp) - residuals(xm)) / (2.0 * h)
    return jac


def _covariance(model, params, free, grid, w, weighted, cost, n_points):
    """Covariance of the full parameter vector in external coordinates."""

    def residuals_ext(p_free):
        p = params.copy()
        p[free] = p_free
        return w * model.evaluate(p, grid)

    jac = _numeric_jacobian(residuals_ext, params[free])
    jtj = jac.T @ jac
    cov_free = np.linalg.pinv(jtj)
    n_free = int(np.sum(free))
    if not weighted and n_points > n_free:
        # Unit weights: scale by the residual variance estimate.
        cov_free = cov_free * (2.0 * cost / (n_points - n_free))
    cov = np.zeros((len(params), len(params)))
    ix = np.where(free)[0]
    cov[np.ix_(ix, ix)] = cov_free
    return cov


def peak_properties(model, params, spec: Spectrum, refine: int = 8):
    """FWHM and depth of each resolved dip of the fitted model curve.

    For MultiLorentzian the fitted widths/depths are returned directly.
    For DressedDip each dip's full width is measured at half depth on a
    refined model curve; a missing half-depth crossing between overlapping
    dips yields None with a reason.
    """
    if isinstance(model, MultiLorentzian):
        fwhm = [float(params[2 + 3 * k]) for k in range(model.n_peaks)]
        contrasts = [float(params[3 + 3 * k]) for k in range(model.n_peaks)]
        return fwhm, ["ok"] * model.n_peaks, contrasts

    grid = np.linspace(
        spec.frequencies[0], spec.frequencies[-1], refine * len(spec) + 1
    )
    curve = model.evaluate(params, grid)
    baseline = 1.0
    depth = baseline - curve
    floor = 1e-6 * max(depth.max(), 1e-12)
    idx, _ = find_peaks(depth, prominence=0.05 * depth.max())
    fwhm, reasons, contrasts = [], [], []

    def level(nu):
        return float(model.evaluate(params, np.array([nu]))[0])

    for m in idx:
        d_m = depth[m]
        half = baseline - d_m / 2.0
        contrasts.append(float(d_m))
        left = None
        for i in range(m, 0, -1):
            if curve[i - 1] >= half:
                left = brentq(lambda nu: level(nu) - half, grid[i - 1], grid[m])
                break
        right = None
        for i in range(m, len(grid) - 1):
            if curve[i + 1] >= half:
                right = brentq(lambda nu: level(nu) - half, grid[m], grid[i + 1])
                break
        if left is None or right is None:
            fwhm.append(None)
            reasons.append("unresolved: no half-depth crossing")
        else:
            fwhm.append(float(right - left))
            reasons.append("ok")
    if not fwhm:
        return [None], ["no dip found in fitted curve"], [0.0]
    return fwhm, reasons, contrasts


def extract_linewidth(result: FitResult, model, spec: Spectrum) -> list:
    """Per-peak FWHM (MHz) of a converged fit; None entries are unresolved."""
    if not result.converged:
        raise FitError("linewidth extraction requires a converged fit")
    fwhm, _, _ = peak_properties(model, result.params, spec)
    return fwhm


def multistart_fit(
    spec: Spectrum, model, n_starts: int = 1, seed: int = 0, spread: float = 0.1
) -> FitResult:
    """Best of ``n_starts`` fits from randomly perturbed initial guesses."""
    base = initial_guess(spec, model)
    rng = np.random.default_rng(seed)
    best = None
    for k in range(max(n_starts, 1)):
        guess = base.copy()
        if k > 0:
            factor = 1.0 + spread * rng.standard_normal(len(base))
            guess = base * np.clip(factor, 0.5, 1.5)
        try:
            res = fit(spec, model, guess)
        except FitError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("all fit starts failed")
    return best
