"""Experiment orchestration: comparative runs, metrics, spectra, output.

A run simulates one truth trajectory, generates one measurement record, and
feeds that identical record to every selected filter. Per-filter results
are error time series on the truth grid plus summary statistics over the
steady-state window (the final quarter of the horizon). A filter that
diverges is recorded with its failure step and does not abort the others.

Outputs are one CSV per filter (t, e_R, e_w components; floats written with
shortest round-trip repr so files are byte-stable) and one JSON summary.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path

import numpy as np
from scipy.signal import detrend as _detrend

from . import _kernels as kern
from .config import ExperimentConfig, case1
from .dynamics import simulate_truth, measure_series
from .filters.gaussian import (GaussianFilterState, UtParams, ukf_step,
                               sigma_points, unscented_moments,
                               normalization_bias, transition_jacobian,
                               output_jacobian_q, output_quadratic,
                               predict_output, quat_left_mat)
from .filters.deterministic import pf_lie_derivative_1, pf_lie_derivative_2
from .integrators import (RigidBodyState, rotor, step_rate,
                          explicit_euler_rigid_body, kinetic_energy,
                          discrete_spatial_momentum)
from .so3 import exp_so3, quat_to_rot

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("gyroless")
except Exception:  # pragma: no cover - source tree without install
    VERSION = "0.0.0+src"

CONVERGENCE_THRESHOLD_RAD = np.deg2rad(2.0)
STEADY_STATE_FRACTION = 0.25
STATUS_NAMES = {0: "ok", 1: "newton-failure", 2: "diverged"}


def _quat_to_rot_batch(qs):
    w, x, y, z = qs[:, 0], qs[:, 1], qs[:, 2], qs[:, 3]
    R = np.empty((qs.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _attitude_error_series(R_true, R_est):
    c = 0.5 * (np.einsum("nij,nij->n", R_true, R_est) - 1.0)
    return np.arccos(np.clip(c, -1.0, 1.0))


@dataclass
class FilterRecord:
    """One filter's error history and summary on the truth grid."""
    name: str
    t: np.ndarray                  # (n_valid,)
    e_att: np.ndarray              # (n_valid,) rad
    e_rate: np.ndarray             # (n_valid, 3) rad/s
    status: int
    status_step: int
    ss_mean: float
    ss_std: float
    conv_time: float               # nan when never converged
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == 0


@dataclass
class RunResult:
    config: dict
    config_hash: str
    seeds: dict
    version: str
    t: np.ndarray
    records: dict

    @property
    def any_divergence(self):
        return any(not r.ok for r in self.records.values())


@dataclass
class SpectralReport:
    """Detrended rate-error spectra over a window, with detected peaks."""
    window: tuple
    freqs: np.ndarray                       # Hz, up to Nyquist
    magnitudes: dict                        # name -> (3, n_freq) array
    peaks: list                             # dicts: filter, component, freq_hz, magnitude

    def peak_magnitude_near(self, name, freq_hz):
        """Largest spectral magnitude over the three components at the bin
        closest to freq_hz."""
        idx = int(np.argmin(np.abs(self.freqs - freq_hz)))
        return float(np.max(self.magnitudes[name][:, idx])), float(self.freqs[idx])


def config_hash(config):
    payload = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def _summaries(t, e_att, horizon):
    """Steady-state stats over the final quarter plus convergence time."""
    window = t >= (1.0 - STEADY_STATE_FRACTION) * horizon
    if window.any():
        ss = e_att[window]
        ss_mean, ss_std = float(np.mean(ss)), float(np.std(ss))
    else:
        ss_mean = ss_std = float("nan")
    below = e_att < CONVERGENCE_THRESHOLD_RAD
    if below.all():
        conv = float(t[0])
    elif below[-1]:
        last_bad = np.max(np.nonzero(~below)[0])
        conv = float(t[last_bad + 1])
    else:
        conv = float("nan")
    return ss_mean, ss_std, conv


def _make_record(name, t, horizon, R_true, spatial_true, R_est, ws, status,
                 bad_step, diagnostics=None):
    n_valid = t.size if status == 0 else bad_step + 1
    tv = t[:n_valid]
    e_att = _attitude_error_series(R_true[:n_valid], R_est[:n_valid])
    spatial_est = np.einsum("nij,nj->ni", R_est[:n_valid], ws[:n_valid])
    e_rate = spatial_est - spatial_true[:n_valid]
    complete = status == 0
    if complete:
        ss_mean, ss_std, conv = _summaries(tv, e_att, horizon)
    else:
        ss_mean = ss_std = conv = float("nan")
    return FilterRecord(name=name, t=tv, e_att=e_att, e_rate=e_rate,
                        status=status, status_step=int(bad_step),
                        ss_mean=ss_mean, ss_std=ss_std, conv_time=conv,
                        diagnostics=diagnostics or {})


def _gaussian_matrices(config, block):
    P0 = block.p0 * np.eye(7)
    W = np.zeros((7, 7))
    W[0:4, 0:4] = block.sigma_q ** 2 * np.eye(4)
    W[4:7, 4:7] = (config.h * block.rate_noise_std) ** 2 * np.eye(3)
    Qm = np.zeros((6, 6))
    Qm[0:3, 0:3] = block.d1 ** 2 * np.eye(3)
    Qm[3:6, 3:6] = block.d2 ** 2 * np.eye(3)
    return P0, W, Qm


def _run_ukf_python(config, Yk, T):
    """Per-step fallback for non-default unscented parameters."""
    n = Yk.shape[0]
    P0, W, Qm = _gaussian_matrices(config, config.ukf)
    params = UtParams(config.ukf.alpha, config.ukf.kappa, config.ukf.beta)
    state = GaussianFilterState(
        x=np.array([1.0, 0, 0, 0, 0, 0, 0]), P=P0, W=W, Q_meas=Qm)
    qs = np.empty((n + 1, 4))
    ws = np.empty((n + 1, 3))
    qs[0], ws[0] = state.x[0:4], state.x[4:7]
    m = config.measurement
    for k in range(n):
        try:
            state = ukf_step(state, T[k], Yk[k], params, config.inertia,
                             config.h, m.a1, m.a2)
        except np.linalg.LinAlgError:
            return qs, ws, kern.STATUS_DIVERGED, k
        qs[k + 1], ws[k + 1] = state.x[0:4], state.x[4:7]
    return qs, ws, kern.STATUS_OK, -1


def run_case(config):
    """Simulate the truth once and run every selected filter against it."""
    traj = simulate_truth(config)
    config.measurement.reset()
    Y = measure_series(traj, config.measurement)
    # row j of Y measures truth state j. Predict-correct filters consume the
    # incoming row j+1 during step j -> j+1; the MEF corrects at the current
    # state before propagating, so it consumes row j during the same step.
    Yk = np.ascontiguousarray(Y[1:])
    Yk0 = np.ascontiguousarray(Y[:-1])
    T = np.ascontiguousarray(traj.torque[:-1])
    In = np.ascontiguousarray(config.inertia)
    h = config.h
    m = config.measurement
    a1, a2 = np.ascontiguousarray(m.a1), np.ascontiguousarray(m.a2)

    R_true = _quat_to_rot_batch(traj.q)
    spatial_true = np.einsum("nij,nj->ni", R_true, traj.w)

    records = {}
    for name in config.filters:
        if name == "ekf":
            P0, W, Qm = _gaussian_matrices(config, config.ekf)
            x0 = np.array([1.0, 0, 0, 0, 0, 0, 0])
            qs, ws, status, bad = kern.ekf_run(x0, P0, W, Qm, Yk, T, In, h,
                                               a1, a2)
            records[name] = _make_record(name, traj.t, config.horizon, R_true,
                                         spatial_true, _quat_to_rot_batch(qs),
                                         ws, status, bad)
        elif name == "ukf":
            u = config.ukf
            if (u.alpha, u.kappa, u.beta) == (1.0, 0.0, 2.0):
                P0, W, Qm = _gaussian_matrices(config, u)
                x0 = np.array([1.0, 0, 0, 0, 0, 0, 0])
                qs, ws, status, bad = kern.ukf_run(x0, P0, W, Qm, Yk, T, In,
                                                   h, a1, a2)
            else:
                qs, ws, status, bad = _run_ukf_python(config, Yk, T)
            records[name] = _make_record(name, traj.t, config.horizon, R_true,
                                         spatial_true, _quat_to_rot_batch(qs),
                                         ws, status, bad)
        elif name == "mef":
            mc = config.mef
            ig = np.linalg.solve(In, config.G)
            brb = mc.brb_gain * (ig @ ig.T)
            Rs, ws, status, bad = kern.mef_run(
                np.eye(3), np.zeros(3), mc.k0 * np.eye(6), Yk0, T, In, h,
                mc.alpha_forget, mc.q1, mc.q2, mc.d1, mc.d2,
                np.ascontiguousarray(brb), a1, a2)
            records[name] = _make_record(name, traj.t, config.horizon, R_true,
                                         spatial_true, Rs, ws, status, bad)
        elif name == "pf":
            p = config.pf
            hp = h if p.horizon is None else p.horizon
            Rs, ws, resid, status, bad = kern.pf_run(
                np.eye(3), np.zeros(3), Yk, T, In, h,
                p.q_pen * np.eye(3), p.sigma_pen * np.eye(3),
                np.ascontiguousarray(config.G), hp,
                p.include_first_order, a1, a2)
            diag = {}
            if status == 0:
                # residual k belongs to t_{k+1}; moment matrix over the
                # steady-state window, where the covariance constraint is
                # meaningful
                t_res = traj.t[1:]
                win = t_res >= (1.0 - STEADY_STATE_FRACTION) * config.horizon
                rw = resid[win]
                M = rw.T @ rw / rw.shape[0]
                diag = {"trace_m": float(np.trace(M)),
                        "sigma_star": float(np.trace(M) / 6.0),
                        "sigma_final": float(p.sigma_pen)}
            records[name] = _make_record(name, traj.t, config.horizon, R_true,
                                         spatial_true, Rs, ws, status, bad,
                                         diagnostics=diag)
        else:  # pragma: no cover - config validation blocks this
            raise ValueError(f"unknown filter {name!r}")

    return RunResult(config=config.to_dict(), config_hash=config_hash(config),
                     seeds={"process": config.seed_process,
                            "measurement": config.seed_measurement},
                     version=VERSION, t=traj.t, records=records)


# --- output ----------------------------------------------------------------

def _float_cell(v):
    return repr(float(v))


def write_result(result, out_dir):
    """One CSV per filter plus summary.json; byte-stable given same inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rec in result.records.items():
        lines = ["t,e_R,e_w_x,e_w_y,e_w_z"]
        for i in range(rec.t.size):
            lines.append(",".join([
                _float_cell(rec.t[i]), _float_cell(rec.e_att[i]),
                _float_cell(rec.e_rate[i, 0]), _float_cell(rec.e_rate[i, 1]),
                _float_cell(rec.e_rate[i, 2])]))
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n")
    (out / "summary.json").write_text(summary_json(result))
    return out


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def summary_json(result):
    payload = {
        "version": result.version,
        "config_hash": result.config_hash,
        "seeds": result.seeds,
        "config": result.config,
        "filters": {
            name: {
                "status": STATUS_NAMES.get(rec.status, str(rec.status)),
                "status_step": rec.status_step,
                "ss_mean_rad": _jsonable(rec.ss_mean),
                "ss_std_rad": _jsonable(rec.ss_std),
                "ss_mean_deg": _jsonable(float(np.degrees(rec.ss_mean))),
                "conv_time_s": _jsonable(rec.conv_time),
                "diagnostics": {k: _jsonable(v)
                                for k, v in rec.diagnostics.items()},
            }
            for name, rec in result.records.items()
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def read_result_dir(path):
    """Rehydrate the error series written by write_result."""
    path = Path(path)
    records = {}
    for csv_path in sorted(path.glob("*.csv")):
        data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
        data = np.atleast_2d(data)
        name = csv_path.stem
        records[name] = FilterRecord(
            name=name, t=data[:, 0], e_att=data[:, 1], e_rate=data[:, 2:5],
            status=0, status_step=-1, ss_mean=float("nan"),
            ss_std=float("nan"), conv_time=float("nan"))
    if not records:
        raise FileNotFoundError(f"no filter CSVs found in {path}")
    t = max((r.t for r in records.values()), key=len)
    summary = {}
    summary_path = path / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
    return RunResult(config=summary.get("config", {}),
                     config_hash=summary.get("config_hash", ""),
                     seeds=summary.get("seeds", {}),
                     version=summary.get("version", ""), t=t, records=records)


# --- spectra ----------------------------------------------------------------

MIN_SPECTRUM_SAMPLES = 64


def spectral_analysis(result, window):
    """Detrended FFT of each rate-error component over a time window.

    Peaks are bins that are local maxima above five times the median
    magnitude of their spectrum.
    """
    t0, t1 = float(window[0]), float(window[1])
    idx = np.nonzero((result.t >= t0) & (result.t <= t1))[0]
    n = idx.size
    if n < MIN_SPECTRUM_SAMPLES:
        raise ValueError(
            f"window [{t0}, {t1}] holds {n} samples; "
            f"need at least {MIN_SPECTRUM_SAMPLES}")
    dt = float(result.t[idx[1]] - result.t[idx[0]])
    freqs = np.fft.rfftfreq(n, d=dt)
    magnitudes = {}
    peaks = []
    for name, rec in result.records.items():
        if rec.t.size <= idx[-1]:
            continue    # record stops before the window ends
        mags = np.empty((3, freqs.size))
        for c in range(3):
            x = _detrend(rec.e_rate[idx, c])
            mags[c] = np.abs(np.fft.rfft(x)) / n
        magnitudes[name] = mags
        for c in range(3):
            mag = mags[c]
            thresh = 5.0 * float(np.median(mag))
            for i in range(1, mag.size - 1):
                if mag[i] > thresh and mag[i] >= mag[i - 1] and mag[i] >= mag[i + 1]:
                    peaks.append({"filter": name, "component": "xyz"[c],
                                  "freq_hz": float(freqs[i]),
                                  "magnitude": float(mag[i])})
    if not magnitudes:
        raise ValueError(
            f"no filter record covers the window [{t0}, {t1}]")
    peaks.sort(key=lambda p: -p["magnitude"])
    return SpectralReport(window=(t0, t1), freqs=freqs,
                          magnitudes=magnitudes, peaks=peaks)


# --- replication -------------------------------------------------------------

@dataclass
class MonteCarloResult:
    trials: int
    base_seeds: dict
    per_filter: dict    # name -> aggregate stats
    table: list         # per-trial summary dicts, sorted by seed

    def to_json(self):
        return json.dumps({
            "trials": self.trials, "base_seeds": self.base_seeds,
            "per_filter": self.per_filter, "table": self.table,
        }, sort_keys=True, indent=2) + "\n"


def monte_carlo(config, trials):
    """Independent reseeded replications with order-independent reduction."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rows = []
    for i in range(trials):
        sp = config.seed_process + i
        sm = config.seed_measurement + i
        res = run_case(config.with_seeds(sp, sm))
        for name, rec in res.records.items():
            rows.append({"seed_process": sp, "seed_measurement": sm,
                         "filter": name, "status": rec.status,
                         "ss_mean_rad": rec.ss_mean, "ss_std_rad": rec.ss_std,
                         "conv_time_s": rec.conv_time,
                         **{f"diag_{k}": v for k, v in rec.diagnostics.items()}})
    rows.sort(key=lambda r: (r["seed_process"], r["filter"]))
    per_filter = {}
    for name in config.filters:
        sub = [r for r in rows if r["filter"] == name]
        good = [r for r in sub if r["status"] == 0]
        ss = np.array([r["ss_mean_rad"] for r in good], dtype=float)
        ct = np.array([r["conv_time_s"] for r in good], dtype=float)
        ct = ct[np.isfinite(ct)]    # trials that never converged carry nan
        per_filter[name] = {
            "n_trials": len(sub),
            "n_diverged": len(sub) - len(good),
            "ss_mean_rad_mean": _jsonable(float(np.mean(ss))) if ss.size else None,
            "ss_mean_rad_std": _jsonable(float(np.std(ss))) if ss.size else None,
            "ss_mean_rad_median": _jsonable(float(np.median(ss))) if ss.size else None,
            "conv_time_s_mean": _jsonable(float(np.mean(ct))) if ct.size else None,
        }
    clean_rows = [{k: _jsonable(v) for k, v in r.items()} for r in rows]
    return MonteCarloResult(trials=trials,
                            base_seeds={"process": config.seed_process,
                                        "measurement": config.seed_measurement},
                            per_filter=per_filter, table=clean_rows)


# --- PF tuning ----------------------------------------------------------------

def tune_pf(config, max_rounds=40, ratio=1.1, dead_band=0.01):
    """Iterate full PF runs, scaling Sigma until the covariance constraint
    trace(M)/6 lands within the dead band of the measurement variance.

    Returns (tuned sigma_pen, history rows). The target is the per-component
    measurement noise variance implied by the config's d scales.
    """
    m = config.measurement
    target = (m.d1 ** 2 * 3 + m.d2 ** 2 * 3) / 6.0
    sigma = config.pf.sigma_pen
    history = []
    for _ in range(max_rounds):
        cfg = ExperimentConfig(**{**_config_kwargs(config),
                                  "pf": dc_replace(config.pf, sigma_pen=sigma)})
        res = run_case(cfg)
        rec = res.records["pf"]
        if rec.status != 0:
            history.append({"sigma_pen": sigma, "sigma_star": None,
                            "status": rec.status})
            sigma *= ratio  # soften the correction and retry
            continue
        sigma_star = rec.diagnostics["sigma_star"]
        history.append({"sigma_pen": sigma, "sigma_star": sigma_star,
                        "status": 0})
        if abs(sigma_star - target) <= dead_band * target:
            break
        sigma = sigma / ratio if sigma_star < target else sigma * ratio
    return sigma, history


def _config_kwargs(config):
    return dict(platform=config.platform, h=config.h, horizon=config.horizon,
                inertia=config.inertia, q0=config.q0, w0=config.w0,
                torque_profile=config.torque_profile,
                model_error=config.model_error,
                measurement=config.measurement, G=config.G,
                filters=("pf",), ekf=config.ekf, ukf=config.ukf,
                mef=config.mef, pf=config.pf,
                seed_process=config.seed_process,
                seed_measurement=config.seed_measurement)


# --- verification suite -------------------------------------------------------

@dataclass
class CheckEntry:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str


@dataclass
class CheckReport:
    entries: list

    @property
    def all_passed(self):
        return all(e.passed for e in self.entries)

    def lines(self):
        out = []
        for e in self.entries:
            mark = "PASS" if e.passed else "FAIL"
            out.append(f"[{mark}] {e.name}: measured {e.measured:.3e} "
                       f"(threshold {e.threshold:.1e}) - {e.detail}")
        return out


def _fd_transition_jacobian(q, w, torque, inertia, h, eps=1e-6):
    """Central finite differences of the full discrete propagation step.

    The quaternion half is the raw bilinear product (no normalization),
    the rate half the Newton momentum solve -- exactly the map the EKF
    covariance transport linearizes.
    """
    def step(x):
        qn = quat_left_mat(x[0:4]) @ rotor(x[4:7], h)
        wn = step_rate(x[4:7], h * torque, inertia, h)
        return np.concatenate([qn, wn])

    x0 = np.concatenate([q, w])
    F = np.empty((7, 7))
    for j in range(7):
        dx = np.zeros(7)
        dx[j] = eps
        F[:, j] = (step(x0 + dx) - step(x0 - dx)) / (2 * eps)
    return F


def _fd_output_jacobian(q, a, eps=1e-6):
    """Central finite differences of the homogeneous output map."""
    J = np.empty((3, 4))
    for j in range(4):
        dq = np.zeros(4)
        dq[j] = eps
        J[:, j] = (output_quadratic(q + dq, a)
                   - output_quadratic(q - dq, a)) / (2 * eps)
    return J


def check_suite(rng_seed=7):
    """Executable property checks with measured margins."""
    rng = np.random.default_rng(rng_seed)
    entries = []

    # energy and momentum conservation of the free rigid body
    cfg = case1("gaussian")
    inertia = cfg.inertia
    n = int(round(100.0 / 1e-3))
    U = np.zeros((n, 3))
    q0 = cfg.q0.copy()
    w0 = cfg.w0.copy()
    qs, ws, status, _ = kern.truth_run(q0, w0, U, inertia, 1e-3)
    ke = 0.5 * np.einsum("ni,ij,nj->n", ws, inertia, ws)
    ke_drift = float(np.max(np.abs(ke - ke[0])) / ke[0])
    entries.append(CheckEntry(
        "kinetic-energy-drift", status == 0 and ke_drift <= 1e-6, ke_drift,
        1e-6, "free rigid body, 100 s at h=1e-3"))
    Rb = _quat_to_rot_batch(qs)
    pis = np.empty((n + 1, 3))
    for k in range(n + 1):
        pis[k] = discrete_spatial_momentum(Rb[k], ws[k], inertia, 1e-3)
    pi_drift = float(np.max(np.linalg.norm(pis - pis[0], axis=1))
                     / np.linalg.norm(pis[0]))
    entries.append(CheckEntry(
        "spatial-momentum-drift", status == 0 and pi_drift <= 1e-6, pi_drift,
        1e-6, "discrete momentum map of the same run"))

    state = RigidBodyState(q=q0, w=w0)
    ke0 = kinetic_energy(state.w, inertia)
    for _ in range(n):
        state = explicit_euler_rigid_body(state, np.zeros(3), inertia, 1e-3)
    euler_drift = float(abs(kinetic_energy(state.w, inertia) - ke0) / ke0)
    entries.append(CheckEntry(
        "explicit-euler-injects-energy", euler_drift > 1e-3, euler_drift,
        1e-3, "control run must exceed the drift bound"))

    # transition Jacobian against finite differences
    worst_f = 0.0
    for _ in range(20):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        w = rng.uniform(-1.0, 1.0, 3)
        torque = rng.uniform(-1.0, 1.0, 3)
        w_next = step_rate(w, 1e-3 * torque, inertia, 1e-3)
        F = transition_jacobian(q, w, w_next, inertia, 1e-3)
        Ffd = _fd_transition_jacobian(q, w, torque, inertia, 1e-3)
        scale = max(1.0, float(np.max(np.abs(Ffd))))
        worst_f = max(worst_f, float(np.max(np.abs(F - Ffd)) / scale))
    entries.append(CheckEntry(
        "transition-jacobian-fd", worst_f <= 1e-5, worst_f, 1e-5,
        "7x7 discrete-step Jacobian, 20 random states"))

    worst_h = 0.0
    for _ in range(20):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        a = rng.standard_normal(3)
        a /= np.linalg.norm(a)
        J = output_jacobian_q(q, a)
        Jfd = _fd_output_jacobian(q, a)
        worst_h = max(worst_h, float(np.max(np.abs(J - Jfd))
                                     / max(1.0, np.max(np.abs(Jfd)))))
    entries.append(CheckEntry(
        "output-jacobian-fd", worst_h <= 1e-5, worst_h, 1e-5,
        "3x4 output Jacobian, 20 random states"))

    # unscented invariance under constant sigma-point offset
    max_ulp = _ukf_offset_invariance(rng)
    entries.append(CheckEntry(
        "unscented-offset-invariance", max_ulp <= 1.0, max_ulp, 1.0,
        "covariance/gain shift under constant propagated offset, in ulps"))

    # quadratic scaling of the normalization bias remainder
    slope = _bias_slope(rng)
    entries.append(CheckEntry(
        "normalization-bias-slope", abs(slope - 2.0) <= 0.1, slope, 2.0,
        "log-log slope of the remainder, target 2 +/- 0.1"))

    # flow derivatives of the predicted output
    worst_l = _lie_derivative_fd(rng, inertia)
    entries.append(CheckEntry(
        "flow-derivative-fd", worst_l <= 1e-5, worst_l, 1e-5,
        "first/second output derivatives along the exact flow"))

    return CheckReport(entries=entries)


_OFFSET_GRID = 2.0 ** 30


def _ukf_offset_invariance(rng):
    """Max ulp change of the unscented covariance, cross-covariance, gain,
    and mean-shift error when a constant vector is added to every propagated
    sigma point.

    Inputs are snapped to a binary grid fine enough that the injection
    itself is exact in floating point; otherwise the rounding of x + c
    already perturbs the points before the moment accumulation runs, and
    no algorithm could be invariant to it. On exact inputs the anchored
    accumulation leaves second moments bitwise unchanged, while a
    mean-centred accumulation drifts by tens of ulps.
    """
    params = UtParams(1.0, 0.0, 2.0)
    wm, wc, _ = params.weights(7)
    a1 = np.array([1.0, 0.0, 0.0])
    a2 = np.array([0.0, 1.0, 0.0])
    x = np.concatenate([rng.standard_normal(4), rng.uniform(-1, 1, 3)])
    x[0:4] /= np.linalg.norm(x[0:4])
    A = rng.standard_normal((7, 7))
    V = A @ A.T / 7 + 0.1 * np.eye(7)
    X = sigma_points(x, V, params)
    # stand-in for propagation, snapped so that adding the offset is exact
    Xp = np.round((X + 0.01 * rng.standard_normal(X.shape))
                  * _OFFSET_GRID) / _OFFSET_GRID
    offset = np.zeros(7)
    offset[4:7] = np.round(
        -np.diag([6.0, 7.0, 9.0]) @ (0.1 * rng.standard_normal(3))
        * _OFFSET_GRID) / _OFFSET_GRID
    Xs = Xp + offset
    if not np.array_equal(Xs - offset, Xp):
        return np.inf

    def moments_and_gain(points):
        m, P, Dx = unscented_moments(points, wm, wc)
        Yp = np.empty((points.shape[0], 6))
        for i in range(points.shape[0]):
            Yp[i] = predict_output(points[i, 0:4], a1, a2)
        _, Pe, Dy = unscented_moments(Yp, wm, wc)
        Pxy = (Dx * wc[:, None]).T @ Dy
        K = np.linalg.solve(Pe + 0.1 * np.eye(6), Pxy.T).T
        return m, P, Pxy, K

    m0, P0v, Pxy0, K0 = moments_and_gain(Xp)
    m1, P1v, Pxy1, K1 = moments_and_gain(Xs)

    def ulps(a, b):
        return np.abs(a - b) / np.spacing(np.maximum(np.abs(a), np.abs(b)))

    mean_ulps = (np.abs((m1 - m0) - offset)
                 / np.spacing(np.maximum(np.abs(m0), np.abs(m1))))
    return float(max(ulps(P0v, P1v).max(), ulps(Pxy0, Pxy1).max(),
                     ulps(K0, K1).max(), mean_ulps.max()))


def _bias_slope(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    norms = np.logspace(-4, -1, 16)
    remainders = []
    for nv in norms:
        c = rng.standard_normal(4)
        c *= nv / np.linalg.norm(c)
        qp = q + c
        approx = qp - normalization_bias(q, c)
        remainders.append(np.linalg.norm(qp / np.linalg.norm(qp) - approx))
    slope = np.polyfit(np.log(norms), np.log(remainders), 1)[0]
    return float(slope)


def _lie_derivative_fd(rng, inertia):
    worst = 0.0
    eps = 1e-4
    for _ in range(20):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        R = quat_to_rot(q)
        w = rng.uniform(-1, 1, 3)
        a = rng.standard_normal(3)
        a /= np.linalg.norm(a)
        torque = rng.uniform(-1, 1, 3)

        def y_of_t(t):
            # exact flow to O(t^3): rotate by the instantaneous rate and
            # accelerate the rate by Euler's equation
            wd = np.linalg.solve(inertia, np.cross(inertia @ w, w) + torque)
            Rt = R @ exp_so3(t * w + 0.5 * t * t * wd)
            return Rt.T @ a

        L1 = pf_lie_derivative_1(R, w, a)
        L1fd = (y_of_t(eps) - y_of_t(-eps)) / (2 * eps)
        err1 = np.max(np.abs(L1 - L1fd)) / max(1.0, np.max(np.abs(L1fd)))

        L2 = pf_lie_derivative_2(R, w, a, torque, inertia, np.eye(3),
                                 np.zeros(3))
        L2fd = (y_of_t(eps) - 2 * y_of_t(0.0) + y_of_t(-eps)) / eps ** 2
        err2 = np.max(np.abs(L2 - L2fd)) / max(1.0, np.max(np.abs(L2fd)))
        worst = max(worst, float(err1), float(err2))
    return worst
