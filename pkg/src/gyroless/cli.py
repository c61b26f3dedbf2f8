"""Command-line front end.

Five subcommands cover the workflow: ``run`` executes one configured case
and writes per-filter error series, ``monte-carlo`` repeats it over
reseeded trials, ``tune-pf`` iterates the predictive-filter covariance
constraint, ``check`` executes the built-in verification suite, and
``spectrum`` reports rate-error spectra of a stored run.

Exit codes: 0 on success, 1 when any filter diverged (or a check failed),
2 on configuration or usage errors.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .harness import (check_suite, monte_carlo, read_result_dir, run_case,
                      spectral_analysis, tune_pf, write_result, STATUS_NAMES,
                      VERSION)

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_CONFIG = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gyroless",
        description="attitude and rate estimation from directional "
                    "measurements: simulation, filtering, analysis")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one case and run its filters")
    p_run.add_argument("--config", required=True, help="JSON config path")
    p_run.add_argument("--out", required=True, help="output directory")

    p_mc = sub.add_parser("monte-carlo",
                          help="repeat a case over reseeded trials")
    p_mc.add_argument("--config", required=True, help="JSON config path")
    p_mc.add_argument("--trials", required=True, type=int,
                      help="number of independent trials")
    p_mc.add_argument("--out", required=True, help="output directory")

    p_tune = sub.add_parser("tune-pf",
                            help="iterate the predictive-filter penalty "
                                 "until the residual variance matches")
    p_tune.add_argument("--config", required=True, help="JSON config path")

    sub.add_parser("check", help="run the verification suite")

    p_spec = sub.add_parser("spectrum",
                            help="rate-error spectra of a stored run")
    p_spec.add_argument("--result", required=True,
                        help="directory written by the run command")
    p_spec.add_argument("--window", required=True,
                        help="time window as t0:t1 in seconds")
    return parser


def _parse_window(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must be t0:t1, got {text!r}")
    try:
        t0, t1 = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"window bounds must be numbers, got {text!r}")
    if not t1 > t0:
        raise ConfigError(f"window must have t1 > t0, got {text!r}")
    return t0, t1


def _cmd_run(args):
    config = load_config(args.config)
    result = run_case(config)
    out = write_result(result, args.out)
    print(f"run {result.config_hash} -> {out}")
    for name, rec in sorted(result.records.items()):
        status = STATUS_NAMES.get(rec.status, str(rec.status))
        if rec.ok:
            print(f"  {name}: ss {np.degrees(rec.ss_mean):.4f} deg, "
                  f"converged at {rec.conv_time:.2f} s")
        else:
            print(f"  {name}: {status} at step {rec.status_step}")
    return EXIT_DIVERGED if result.any_divergence else EXIT_OK


def _cmd_monte_carlo(args):
    config = load_config(args.config)
    mc = monte_carlo(config, args.trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "monte_carlo.json").write_text(mc.to_json())
    diverged = 0
    for name, stats in sorted(mc.per_filter.items()):
        diverged += stats["n_diverged"]
        med = stats["ss_mean_rad_median"]
        med_txt = f"{np.degrees(med):.4f} deg" if med is not None else "n/a"
        print(f"  {name}: median ss {med_txt} over {stats['n_trials']} trials"
              f" ({stats['n_diverged']} diverged)")
    print(f"wrote {out / 'monte_carlo.json'}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _cmd_tune_pf(args):
    config = load_config(args.config)
    sigma, history = tune_pf(config)
    for row in history:
        star = row["sigma_star"]
        star_txt = f"{star:.6g}" if star is not None else "diverged"
        print(f"  sigma_pen {row['sigma_pen']:.6g} -> sigma* {star_txt}")
    print(json.dumps({"sigma_pen": sigma}))
    last = history[-1] if history else {"status": 1}
    return EXIT_OK if last.get("status") == 0 else EXIT_DIVERGED


def _cmd_check(_args):
    report = check_suite()
    for line in report.lines():
        print(line)
    return EXIT_OK if report.all_passed else EXIT_DIVERGED


def _cmd_spectrum(args):
    result = read_result_dir(args.result)
    window = _parse_window(args.window)
    report = spectral_analysis(result, window)
    print(f"window {window[0]:g}:{window[1]:g} s, "
          f"{report.freqs.size} bins up to {report.freqs[-1]:.3f} Hz")
    for p in report.peaks[:12]:
        print(f"  {p['filter']} {p['component']}: {p['freq_hz']:.4f} Hz, "
              f"magnitude {p['magnitude']:.3e}")
    if not report.peaks:
        print("  no peaks above threshold")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "monte-carlo": _cmd_monte_carlo,
    "tune-pf": _cmd_tune_pf,
    "check": _cmd_check,
    "spectrum": _cmd_spectrum,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
