"""Shot-noise-limited temperature sensitivity and drive-parameter sweeps.

Two figures of merit: the max-slope method, which evaluates the steepest
point of a model spectrum, and the conventional Lorentzian linewidth
formula.  Both scale as 1/sqrt(photon rate).  The sweep engine regenerates,
fits, and scores spectra over drive or laser-power grids with deterministic
per-point seeding.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import fitting, lineshape
from .lineshape import Spectrum, StrainDistribution
from .spin import DriveConfig, PhysicalEnvironment

# Analytic max-slope constant of a Lorentzian dip.
LORENTZIAN_SLOPE_CONSTANT = 4.0 / (3.0 * np.sqrt(3.0))

DEFAULT_ABS_DD_DT = 0.0742  # MHz/K

SWEEP_PARAMETER_WHITELIST = ("rabi_rf", "rabi_mw", "laser_power_mw")


@dataclass(frozen=True)
class NoiseBudget:
    """Photon budget and optional laser-power phenomenology.

    ``rate_per_mw`` and ``pump_per_mw`` turn a laser power into a count rate
    and an optical pump rate; the contrast saturates as
    contrast * pump / (pump + gamma_sat).
    """

    photon_rate: float
    contrast: float = 0.05
    rate_per_mw: float | None = None
    pump_per_mw: float | None = None
    gamma_sat: float = 1.0

    def __post_init__(self):
        if self.photon_rate <= 0:
            raise ValueError("photon_rate must be > 0")

    def at_laser_power(self, power_mw: float):
        """(photon_rate, pump_rate, contrast) at a given laser power in mW."""
        if self.rate_per_mw is None or self.pump_per_mw is None:
            raise ValueError("laser-power model not configured")
        if power_mw <= 0:
            raise ValueError("laser power must be > 0")
        rate = self.rate_per_mw * power_mw
        pump = self.pump_per_mw * power_mw
        contrast = self.contrast * pump / (pump + self.gamma_sat)
        return rate, pump, contrast


@dataclass
class SensitivityReport:
    """Temperature sensitivity figures, K/sqrt(Hz)."""

    eta_slope: float
    eta_linewidth: float
    best_frequency: float
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "eta_slope_k_per_rthz": self.eta_slope,
                "eta_linewidth_k_per_rthz": self.eta_linewidth,
                "best_frequency_mhz": self.best_frequency,
                "inputs": self.inputs,
            },
            indent=2,
        )


def linewidth_sensitivity(
    fwhm: float,
    contrast: float,
    budget: NoiseBudget,
    dd_dt: float = -DEFAULT_ABS_DD_DT,
) -> float:
    """Conventional CW-ODMR figure of merit for a Lorentzian line.

    eta = (4 / 3*sqrt(3)) * fwhm / (contrast * sqrt(rate) * |dd_dt|)
    """
    if fwhm <= 0 or contrast <= 0:
        raise ValueError("fwhm and contrast must be > 0")
    if dd_dt == 0:
        raise ValueError("dd_dt must be nonzero")
    return (
        LORENTZIAN_SLOPE_CONSTANT
        * fwhm
        / (contrast * np.sqrt(budget.photon_rate) * abs(dd_dt))
    )


def _curve_fwhm_contrast(grid: np.ndarray, curve: np.ndarray):
    """FWHM and depth of the deepest dip of a sampled curve, or (None, depth)."""
    depth = 1.0 - curve
    m = int(np.argmax(depth))
    d_m = float(depth[m])
    if d_m <= 0:
        return None, 0.0
    half = 1.0 - d_m / 2.0
    left = right = None
    for i in range(m, 0, -1):
        if curve[i - 1] >= half:
            f = (half - curve[i]) / (curve[i - 1] - curve[i])
            left = grid[i] + f * (grid[i - 1] - grid[i])
            break
    for i in range(m, len(grid) - 1):
        if curve[i + 1] >= half:
            f = (half - curve[i]) / (curve[i + 1] - curve[i])
            right = grid[i] + f * (grid[i + 1] - grid[i])
            break
    if left is None or right is None:
        return None, d_m
    return float(abs(right - left)), d_m


def slope_sensitivity(
    curve_fn,
    span: tuple[float, float],
    budget: NoiseBudget,
    dd_dt: float = -DEFAULT_ABS_DD_DT,
    points: int = 20001,
) -> SensitivityReport:
    """Max-slope temperature sensitivity of a model spectrum.

    eta = sqrt(S(nu*) / rate) / (|dS/dnu|(nu*) * |dd_dt|), with nu* the
    steepest point of the normalized signal found on a refined grid and the
    derivative taken by central differences.
    """
    if dd_dt == 0:
        raise ValueError("dd_dt must be nonzero")
    lo, hi = span
    grid = np.linspace(lo, hi, points)
    curve = np.asarray(curve_fn(grid), dtype=float)
    dnu = grid[1] - grid[0]
    slope = np.gradient(curve, dnu)
    k = int(np.argmax(np.abs(slope)))
    max_slope = float(np.abs(slope[k]))
    if max_slope * (hi - lo) < 1e-12:
        raise ValueError("no spectral sensitivity: spectrum is flat")
    eta_slope = float(
        np.sqrt(curve[k] / budget.photon_rate) / (max_slope * abs(dd_dt))
    )
    fwhm, depth = _curve_fwhm_contrast(grid, curve)
    if fwhm is not None and depth > 0:
        eta_lw = linewidth_sensitivity(fwhm, depth, budget, dd_dt)
    else:
        eta_lw = float("nan")
    return SensitivityReport(
        eta_slope=eta_slope,
        eta_linewidth=eta_lw,
        best_frequency=float(grid[k]),
        inputs={
            "photon_rate": budget.photon_rate,
            "dd_dt_mhz_per_k": dd_dt,
            "fwhm_mhz": fwhm,
            "contrast": depth,
        },
    )


def estimate_temperature(
    fit_result: fitting.FitResult,
    calibration: fitting.FitResult,
    dd_dt: float,
    t0: float,
):
    """Temperature from the zero-field-splitting shift between two fits.

    Returns (temperature_k, uncertainty_k); the uncertainty combines both
    fitted center uncertainties.  Both fits must be converged and of the
    same model family.
    """
    if not (fit_result.converged and calibration.converged):
        raise ValueError("both fits must be converged")
    if fit_result.model_kind != calibration.model_kind:
        raise ValueError(
            f"model-family mismatch: {fit_result.model_kind} vs "
            f"{calibration.model_kind}"
        )
    if dd_dt == 0:
        raise ValueError("dd_dt must be nonzero")
    d_fit, var_fit = _center_estimate(fit_result)
    d_cal, var_cal = _center_estimate(calibration)
    delta_t = (d_fit - d_cal) / dd_dt
    uncertainty = float(np.sqrt(var_fit + var_cal) / abs(dd_dt))
    return t0 + delta_t, uncertainty


def _center_estimate(result: fitting.FitResult):
    """Zero-field-splitting estimate and variance from a fit."""
    if result.model_kind == "DressedDip":
        i = result.param_names.index("d")
        return float(result.params[i]), float(max(result.covariance[i, i], 0.0))
    idx = [i for i, n in enumerate(result.param_names) if n.startswith("center_")]
    if not idx:
        raise ValueError(f"no center parameters in model {result.model_kind}")
    centers = result.params[idx]
    sub = result.covariance[np.ix_(idx, idx)]
    return float(np.mean(centers)), float(max(np.sum(sub) / len(idx) ** 2, 0.0))


@dataclass(frozen=True)
class SweepConfig:
    """One- or two-axis sweep over drive or laser-power parameters."""

    axes: tuple
    environment: PhysicalEnvironment
    drive: DriveConfig
    grid: np.ndarray
    gamma_b: float = 1.0
    gamma_d: float = 0.1
    contrast: float = 0.05
    sigma_ex: float = 0.0
    quadrature_nodes: int = 21
    dwell: float = 1.0
    seed: int = 0
    fit_model: str = "dressed"
    lorentzian_peaks: int = 2
    lorentzian_fwhm: float = 8.0
    generator: str = "closed_form"

    def __post_init__(self):
        if not self.axes or len(self.axes) > 2:
            raise ValueError("sweep needs one or two axes")
        for name, values in self.axes:
            if name not in SWEEP_PARAMETER_WHITELIST:
                raise ValueError(
                    f"parameter {name!r} not sweepable; allowed: "
                    f"{', '.join(SWEEP_PARAMETER_WHITELIST)}"
                )
            vals = np.asarray(values, dtype=float)
            if vals.size == 0:
                raise ValueError(f"axis {name!r} has no values")
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"axis {name!r} has non-finite values")
        if self.fit_model not in ("dressed", "lorentzian"):
            raise ValueError(f"unknown fit_model {self.fit_model!r}")
        if self.generator not in ("closed_form", "lindblad"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.generator == "lindblad" and self.sigma_ex != 0.0:
            raise ValueError("lindblad generator does not support strain averaging")


@dataclass
class SweepTable:
    """Sweep results, one row per grid point."""

    columns: list
    rows: list

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for c in self.columns:
                v = row[c]
                if isinstance(v, float):
                    cells.append(f"{v:.17g}")
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"schema_version": 1, "columns": self.columns, "rows": self.rows},
            indent=2,
        )


def sweep(config: SweepConfig, budget: NoiseBudget) -> SweepTable:
    """Generate, fit, and score a spectrum at every sweep grid point.

    Per-point seeds derive deterministically from (seed, point index); rows
    appear in grid order.  Failed fits are recorded with a reason, never
    dropped.
    """
    axis_names = [name for name, _ in config.axes]
    axis_values = [np.asarray(vals, dtype=float) for _, vals in config.axes]
    columns = axis_names + [
        "fwhm_mhz",
        "contrast",
        "eta_slope_k_per_rthz",
        "eta_linewidth_k_per_rthz",
        "converged",
        "status",
    ]
    rows = []
    for index, combo in enumerate(itertools.product(*axis_values)):
        point = dict(zip(axis_names, combo))
        row = {name: float(v) for name, v in point.items()}
        try:
            row.update(_sweep_point(config, budget, point, index))
        except (fitting.FitError, ValueError, RuntimeError) as exc:
            row.update(
                fwhm_mhz=float("nan"),
                contrast=float("nan"),
                eta_slope_k_per_rthz=float("nan"),
                eta_linewidth_k_per_rthz=float("nan"),
                converged=False,
                status=f"error: {exc}",
            )
        rows.append(row)
    return SweepTable(columns=columns, rows=rows)


def _sweep_point(config: SweepConfig, budget: NoiseBudget, point: dict, index: int):
    env = config.environment
    drive = DriveConfig(
        omega_mw=config.drive.omega_mw,
        rabi_mw=point.get("rabi_mw", config.drive.rabi_mw),
        omega_rf=config.drive.omega_rf,
        rabi_rf=point.get("rabi_rf", config.drive.rabi_rf),
    )
    gamma_b, gamma_d = config.gamma_b, config.gamma_d
    contrast = config.contrast
    rate = budget.photon_rate
    if "laser_power_mw" in point:
        rate, pump, contrast = budget.at_laser_power(point["laser_power_mw"])
        gamma_b = pump / 2.0
        gamma_d = pump / 2.0 * (config.gamma_d / config.gamma_b)
    dd_dt = env.dd_dt

    if config.fit_model == "dressed":
        if config.generator == "lindblad":
            # Saturating three-level generator; damping-rate mapping
            # gamma = pump/2 + dephasing.
            from . import oracle as oracle_mod

            g_lo = min(gamma_b, gamma_d)
            pump = 2.0 * g_lo
            clean = oracle_mod.oracle_spectrum(
                env,
                drive,
                config.grid,
                pump,
                dephase_b=gamma_b - g_lo,
                dephase_d=gamma_d - g_lo,
                contrast=contrast,
            )
        else:
            strain = StrainDistribution(
                mean_ex=env.ex, sigma_ex=config.sigma_ex, nodes=config.quadrature_nodes
            )
            clean = lineshape.ensemble_spectrum(
                env, drive, config.grid, gamma_b, gamma_d, contrast, strain
            )
        model = fitting.DressedDip(
            omega_rf=drive.omega_rf, fixed_contrast=contrast
        )
    else:
        clean = lineshape.conventional_spectrum(
            env, config.grid, config.lorentzian_fwhm, contrast
        )
        model = fitting.MultiLorentzian(config.lorentzian_peaks)

    seed = np.random.SeedSequence([config.seed, index])
    noisy = lineshape.synthesize_measurement(clean, rate, config.dwell, seed)
    result = fitting.fit(noisy, model)

    resolved = [f for f in result.fwhm_per_peak if f is not None]
    fwhm = float(np.mean(resolved)) if resolved else float("nan")
    depth = float(max(result.contrast_per_peak)) if result.contrast_per_peak else 0.0

    point_budget = NoiseBudget(
        photon_rate=rate,
        contrast=contrast,
        rate_per_mw=budget.rate_per_mw,
        pump_per_mw=budget.pump_per_mw,
        gamma_sat=budget.gamma_sat,
    )
    span = (float(config.grid[0]), float(config.grid[-1]))
    try:
        report = slope_sensitivity(
            lambda g: model.evaluate(result.params, g), span, point_budget, dd_dt
        )
        eta_slope = report.eta_slope
    except ValueError:
        eta_slope = float("nan")
    if fwhm == fwhm and depth > 0:  # fwhm not NaN
        eta_lw = linewidth_sensitivity(fwhm, depth, point_budget, dd_dt)
    else:
        eta_lw = float("nan")
    return {
        "fwhm_mhz": fwhm,
        "contrast": depth,
        "eta_slope_k_per_rthz": eta_slope,
        "eta_linewidth_k_per_rthz": eta_lw,
        "converged": bool(result.converged),
        "status": "ok" if result.converged else "fit did not converge",
    }
