"""Command-line front end.

    ouremote solve      --config cfg.json [--seed N] [--out result.json] [--threads N]
    ouremote simulate   --config cfg.json [--seed N] [--out result.json] [--threads N]
    ouremote sweep-fig2 [--config cfg.json] [--seed N] [--out fig2.csv] [--threads N] [--no-plot]
    ouremote selftest   [--out report.json] [--inject-fault g_inv]

Exit codes: 0 success, 1 self-test failure, 2 configuration error,
3 bracket failure or non-convergence of the solver.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import rng as rngmod
from . import specfun
from .channel import FcfsChannel, NoiseModel, ServiceModel
from .config import FIG2_DEFAULT, ConfigError, ExperimentConfig
from .errors import BracketFailure, DomainError, NonConvergence
from .estimation import EstimatorState, estimate
from .evaluation import noise_term_lemma1, path_discount_integral, policy_report
from .policy import OptimalThreshold, ZeroWait, threshold_v
from .process import OuParams, gap_variance, mse_lower_bound, transition_sample
from .solver import simulate_cycles, solve_beta
from .stats import Z95, combined_se

log = logging.getLogger("ouremote")

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

SWEEP_COLUMNS = [
    "alpha", "beta", "v", "mse_lower", "mse_no_noise", "mse_noise_sim", "mse_upper",
    "ci_mse_no_noise", "ci_mse_noise_sim", "ci_mse_upper", "noise_gap_sim", "ci_noise_gap_sim",
    "status", "config_hash", "seed",
]


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(record, path):
    text = json.dumps(_clean(record), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return text


def _header(cfg, command):
    return {"command": command, "config_hash": cfg.hash, "seed": cfg.seed, "config": cfg.data}


def _solve(cfg, service, workers):
    sim = cfg.sim
    return solve_beta(cfg.params, service, tol_rel=sim["tol_rel"], seed=cfg.seed,
                      n_search=sim["n_search"], n_final=sim["n_cycles"], workers=workers,
                      dt=sim["dt_override"])


def cmd_solve(cfg, out, workers):
    sol = _solve(cfg, cfg.service, workers)
    record = _header(cfg, "solve")
    record["result"] = sol.to_dict()
    _dump_json(record, out)
    print("beta=%.6g v=%.6g residual=%.3g ci=%.3g -> %s"
          % (sol.beta, sol.v, sol.residual, sol.ci_halfwidth, out))
    return sol


def cmd_simulate(cfg, out, workers):
    sim = cfg.sim
    policy = cfg.policy()
    record = _header(cfg, "simulate")
    if policy is None:
        sol = _solve(cfg, cfg.service, workers)
        policy = OptimalThreshold(sol.v, sol.beta)
        record["solution"] = sol.to_dict()
    rep = policy_report(policy, cfg.params, cfg.service, cfg.noise, n=sim["n_cycles"],
                        seed=cfg.seed, lemma_draws=sim["lemma_draws"], horizon=sim["horizon"],
                        workers=workers, n_traj=sim["n_traj"], dt=sim["dt_override"])
    record["policy"] = policy.name
    record["report"] = rep.to_dict()
    _dump_json(record, out)
    print("%s: mse_no_noise=%.5g mse_noise_sim=%.5g mse_upper=%.5g -> %s"
          % (policy.name, rep.mse_no_noise, rep.mse_with_noise_sim, rep.mse_upper_formula, out))
    return rep


def sweep_rows(cfg, workers=1):
    """One result dict per alpha.  Every alpha reuses the master seed, so the
    curves are computed with common random numbers across the sweep."""
    sim = cfg.sim
    alphas = cfg.data.get("sweep", FIG2_DEFAULT["sweep"])["values"]
    rows = []
    for alpha in alphas:
        svc = ServiceModel.lognormal(alpha)
        row = {"alpha": alpha, "config_hash": cfg.hash, "seed": cfg.seed}
        t0 = time.perf_counter()
        try:
            sol = _solve(cfg, svc, workers)
            rep = policy_report(OptimalThreshold(sol.v, sol.beta), cfg.params, svc, cfg.noise,
                                n=sim["n_cycles"], seed=cfg.seed, lemma_draws=sim["lemma_draws"],
                                horizon=sim["horizon"], workers=workers, n_traj=sim["n_traj"],
                                dt=sim["dt_override"])
        except (BracketFailure, NonConvergence, DomainError) as exc:
            log.warning("alpha=%g failed: %s", alpha, exc)
            nan = math.nan
            row.update({k: nan for k in SWEEP_COLUMNS if k not in row})
            row["status"] = "error:%s" % type(exc).__name__
            rows.append(row)
            continue
        row.update(
            beta=sol.beta,
            v=sol.v,
            mse_lower=rep.mse_lower,
            mse_no_noise=rep.mse_no_noise,
            mse_noise_sim=rep.mse_with_noise_sim,
            mse_upper=rep.mse_upper_formula,
            ci_mse_no_noise=Z95 * rep.se_no_noise,
            ci_mse_noise_sim=Z95 * rep.se_with_noise_sim,
            ci_mse_upper=Z95 * rep.se_upper_formula,
            noise_gap_sim=rep.noise_gap_sim,
            ci_noise_gap_sim=Z95 * rep.se_noise_gap_sim,
            status="ok",
        )
        log.info("alpha=%g beta=%.5g done in %.1fs", alpha, sol.beta, time.perf_counter() - t0)
        rows.append(row)
    return rows


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.10g" % x


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in SWEEP_COLUMNS])
    return buf.getvalue()


def sweep_dat(rows, cfg):
    """Whitespace-separated table with '#' comments, readable by gnuplot."""
    lines = ["# config_hash %s seed %d" % (cfg.hash, cfg.seed),
             "# " + " ".join(c for c in SWEEP_COLUMNS if c not in ("config_hash", "seed"))]
    for r in rows:
        lines.append(" ".join(_fmt(r[c]) for c in SWEEP_COLUMNS if c not in ("config_hash", "seed")))
    return "\n".join(lines) + "\n"


def cmd_sweep_fig2(cfg, out, workers, plot=True):
    rows = sweep_rows(cfg, workers)
    text = sweep_csv(rows)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    stem = os.path.splitext(out)[0]
    with open(stem + ".dat", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(sweep_dat(rows, cfg))
    if plot:
        from .plotting import plot_sweep

        p = cfg.data["process"]
        plot_sweep(rows, stem + ".png", title="theta=%g, sigma=%g, b1+b2=%g (config %s)"
                   % (p["theta"], p["sigma"], cfg.noise.total_variance, cfg.hash))
    print("%d rows -> %s" % (len(rows), out))
    return rows


# ---------------------------------------------------------------- self-test


def _kummer_series(z, terms=200):
    """Direct power series of M(1, 1/2, z); fine for moderate |z|."""
    total, term = 1.0, 1.0
    for k in range(terms):
        term *= z / (0.5 + k)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def _check_specfun():
    worst = 0.0
    for y in np.linspace(1.0001, 200.0, 60):
        worst = max(worst, abs(specfun.g_func(specfun.g_inv(y)) - y) / y)
    for y in np.linspace(0.001, 0.9999, 60):
        worst = max(worst, abs(specfun.k_func(specfun.k_inv(y)) - y) / y)
    xs = np.linspace(1e-3, 5.0, 200)
    mono = bool(np.all(np.diff(specfun.g_func(xs)) > 0) and np.all(np.diff(specfun.k_func(xs)) < 0))
    return worst <= 1e-9 and mono, "inverse round-trip max rel err %.2e, monotone=%s" % (worst, mono)


def _check_kummer():
    zs = np.linspace(-5.0, 5.0, 41)
    err = max(abs(specfun.kummer_1f1_1_half(z) - _kummer_series(z)) / max(1.0, abs(_kummer_series(z)))
              for z in zs)
    return err <= 1e-8, "max rel err vs series on [-5, 5]: %.2e" % err


def _check_transition():
    n, ok, worst = 200000, True, 0.0
    for i, th in enumerate((-0.5, 0.0, 0.5)):
        p = OuParams(th)
        x = transition_sample(np.full(n, 1.0), 1.0, p, rngmod.stream(99, 1, i))
        var = gap_variance(1.0, p)
        z = max(abs(x.mean() - math.exp(-th)) / math.sqrt(var / n),
                abs(x.var(ddof=1) - var) / (var * math.sqrt(2.0 / n)))
        worst = max(worst, z)
        ok &= z < 4
    return ok, "worst moment z-score %.2f" % worst


def _check_lower_bound():
    one = ServiceModel.constant(1.0)
    vals = [mse_lower_bound(one, OuParams(t)) for t in (0.5, 0.0, -0.5)]
    want = [1 - math.exp(-1), 1.0, math.e - 1]
    ok = all(abs(a - b) <= 1e-12 * b for a, b in zip(vals, want))
    return ok, "mse_Y = %s" % ", ".join("%.5f" % v for v in vals)


def _check_channel():
    g = rngmod.stream(99, 2)
    ch = FcfsChannel(0.0, 0.0, 1.0)
    s, last = 0.0, 1.0
    ok = True
    for _ in range(200):
        s += g.exponential(0.7)
        y = g.exponential(1.0) + 1e-9
        p = ch.submit(s, 0.0, 0.0, y)
        ok &= p.d == max(s, last) + y
        last = p.d
    st = EstimatorState(OuParams(0.5, mu=2.0))
    from .channel import SamplePacket

    st.deliver(SamplePacket(0.0, 4.0, 4.0, 0.5, 0.5))
    ok &= abs(estimate(1.0, st) - 3.2131) < 5e-5
    return ok, "FCFS recursion and estimator example"


def _check_threshold():
    p = OuParams(0.5)
    mse_y = 1 - math.exp(-1)
    v = threshold_v(0.8, p, mse_y)
    r1 = abs(specfun.g_func(v * math.sqrt(0.5)) - (1 - mse_y) / 0.2)
    r2 = abs(threshold_v(4 / 3, OuParams(0.0), 1.0) - 1.0)
    ok = r1 < 1e-9 and r2 < 1e-12
    return ok, "threshold identities (residuals %.1e, %.1e)" % (r1, r2)


def _check_cycles():
    c = simulate_cycles(ZeroWait(), OuParams(0.0), ServiceModel.constant(1.0), 20000, seed=99)
    m = c.mse()
    z = abs(m.value - 1.5) / m.se
    return z < 4, "Wiener zero-wait cycle MSE %.4f (exact 1.5, z=%.2f)" % (m.value, z)


def _check_lemma():
    p, one = OuParams(0.5), ServiceModel.constant(1.0)
    lem = noise_term_lemma1(1.0, p, one, n=200000, seed=99)
    path = path_discount_integral(1.0, p, one, n=20000, seed=99)
    z = abs(lem.value - path.value) / combined_se(lem.se, path.se)
    return z < 3, "scalar %.5f vs path %.5f (z=%.2f)" % (lem.value, path.value, z)


def _check_determinism():
    raw = json.loads(json.dumps(FIG2_DEFAULT))
    raw["sweep"]["values"] = [0.4, 1.2]
    raw["sim"].update(master_seed=7, n_cycles=1000, n_search=200, tol_rel=0.02,
                      lemma_draws=10000, horizon=400.0, n_traj=4)
    cfg = ExperimentConfig.from_dict(raw)
    texts = [sweep_csv(sweep_rows(cfg, w)) for w in (1, 2, 1)]
    same = texts[0] == texts[1] == texts[2]
    return same, "tiny sweep CSV byte-identical across runs and thread counts: %s" % same


SELFTEST_CHECKS = [
    ("specfun", _check_specfun),
    ("kummer", _check_kummer),
    ("transition", _check_transition),
    ("lower_bound", _check_lower_bound),
    ("channel_estimator", _check_channel),
    ("threshold", _check_threshold),
    ("cycles", _check_cycles),
    ("lemma_vs_path", _check_lemma),
    ("determinism", _check_determinism),
]


def _corrupt_g_inv():
    original = specfun.g_inv

    def bad(y):
        return original(y) * (1.0 + 1e-6)

    specfun.g_inv = bad
    return lambda: setattr(specfun, "g_inv", original)


FAULTS = {"g_inv": _corrupt_g_inv}


def cmd_selftest(out=None, fault=None):
    restore = FAULTS[fault]() if fault else None
    results = []
    try:
        for name, fn in SELFTEST_CHECKS:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed check, not an abort
                ok, detail = False, "raised %s: %s" % (type(exc).__name__, exc)
            dt = time.perf_counter() - t0
            results.append({"check": name, "pass": bool(ok), "detail": detail, "seconds": dt})
            print("%s %-18s %s (%.1fs)" % ("PASS" if ok else "FAIL", name, detail, dt))
    finally:
        if restore:
            restore()
    failed = [r["check"] for r in results if not r["pass"]]
    print("selftest: %d/%d passed" % (len(results) - len(failed), len(results)))
    if out:
        _dump_json({"command": "selftest", "fault": fault, "checks": results}, out)
    return not failed


# ---------------------------------------------------------------- entry point


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--seed", type=int, metavar="N", help="master seed (overrides the file)")
    common.add_argument("--out", metavar="PATH", help="output file")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="ouremote", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve for the optimal threshold")
    sub.add_parser("simulate", parents=[common], help="simulate a policy with and without noise")
    sw = sub.add_parser("sweep-fig2", parents=[common], help="MSE against the log-normal scale")
    sw.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    st = sub.add_parser("selftest", parents=[common], help="reduced invariant checks")
    st.add_argument("--inject-fault", choices=sorted(FAULTS), help=argparse.SUPPRESS)
    return ap


def _load(args, fallback=None):
    if args.config:
        return ExperimentConfig.load(args.config, seed=args.seed)
    if fallback is None:
        raise ConfigError("--config is required for this command")
    return ExperimentConfig.from_dict(fallback, seed=args.seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return EXIT_OK if cmd_selftest(args.out, args.inject_fault) else EXIT_SELFTEST
    try:
        if args.command == "sweep-fig2":
            cfg = _load(args, FIG2_DEFAULT)
        else:
            cfg = _load(args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    workers = max(1, args.threads)
    try:
        if args.command == "solve":
            cmd_solve(cfg, args.out or "solve.json", workers)
        elif args.command == "simulate":
            cmd_simulate(cfg, args.out or "simulate.json", workers)
        else:
            cmd_sweep_fig2(cfg, args.out or "fig2.csv", workers, plot=not args.no_plot)
    except (BracketFailure, NonConvergence) as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
