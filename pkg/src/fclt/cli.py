"""Command-line entry point ``fclt``.

Environment
-----------
FCLT_OUTPUT_DIR
    Overrides the ``output_dir`` of experiment configs.
FCLT_NUM_THREADS
    Thread count for the BLAS/LAPACK backend (must be set before start-up;
    the CLI exports it to the usual OpenMP/BLAS variables).
"""

from __future__ import annotations

import os

THREADS_ENV = "FCLT_NUM_THREADS"
if os.environ.get(THREADS_ENV):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = os.environ[THREADS_ENV]

import argparse  # noqa: E402
import csv  # noqa: E402
import dataclasses  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402

import numpy as np  # noqa: E402

from . import harness  # noqa: E402
from .contour import make_contour  # noqa: E402
from .dyson import solve_m_u, stability_betas, two_resolvent_approx  # noqa: E402
from .ensemble import EntryLaw, SampleSeed, sample_iid  # noqa: E402
from .functions import PowerSeries, kernel_identity_check, monomial, truncated_exp  # noqa: E402
from .hermitize import spectral_norm  # noqa: E402
from .theory import TestPair, contour_covariance, covariance_model  # noqa: E402

LAWS = [law.value for law in EntryLaw]


def _complex(s):
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from exc


def _dims(s):
    return [int(v) for v in s.split(",") if v]


def cmd_sample(args):
    x = sample_iid(args.n, args.law, SampleSeed(args.seed, args.index))
    if args.out:
        np.save(args.out, x)
    info = {
        "n": args.n,
        "law": args.law,
        "seed": args.seed,
        "index": args.index,
        "trace": [float(np.trace(x).real), float(np.trace(x).imag)],
        "spectral_norm": spectral_norm(x),
        "saved_to": args.out,
    }
    print(json.dumps(info, indent=2))
    return 0


DYSON_COLUMNS = [
    "z_re", "z_im", "w_re", "w_im", "eta", "m_re", "m_im", "u_re", "u_im", "residual",
    "beta_re", "beta_im", "beta_star_re", "beta_star_im",
    "tr11_re", "tr11_im", "tr22_re", "tr22_im",
]


def cmd_dyson(args):
    """CSV over the grid ``z x eta``: ``(m, u)``, the betas against ``w`` and the
    block traces of ``M_B(z, w)`` for ``B = A^(11)`` with ``<A> = 1``."""
    args.eta = args.eta or [1e-4]
    w = csv.writer(sys.stdout)
    w.writerow(DYSON_COLUMNS)
    for z in args.z:
        wv = z if args.w is None else args.w
        for eta in args.eta:
            b = solve_m_u(z, eta)
            bw = solve_m_u(wv, eta)
            beta, beta_star = stability_betas(z, wv, eta, b, bw)
            tr11, tr22 = two_resolvent_approx((1, 1), 1.0, z, wv, eta, b, bw).block_traces
            w.writerow(
                [z.real, z.imag, wv.real, wv.imag, eta, b.m.real, b.m.imag, b.u.real, b.u.imag, b.residual,
                 beta.real, beta.imag, beta_star.real, beta_star.imag, tr11.real, tr11.imag, tr22.real, tr22.imag]
            )
    return 0


def cmd_verify_kernels(args):
    c = make_contour(args.radius, args.nodes)
    funcs = [monomial(k) for k in range(1, 5)] + [truncated_exp(12), PowerSeries([0.5, 1j, -0.25, 0.1], label="mixed")]
    rows = []
    ok = True
    for f in funcs:
        for g in funcs:
            cov_res, pseudo_res = kernel_identity_check(f, g, c)
            passed = max(cov_res, pseudo_res) <= args.tol
            ok &= passed
            rows.append((f"kernel {f.label} x {g.label}", max(cov_res, pseudo_res), passed))
    n = 8
    mats = {
        "identity": np.eye(n),
        "cyclic-shift": np.roll(np.eye(n), 1, axis=1),
        "alternating": np.diag((-1.0) ** np.arange(n)),
    }
    pairs = [TestPair(f, a, f"{f.label}|{name}") for f in funcs[:3] + funcs[4:] for name, a in mats.items()]
    for sym in ("complex", "real"):
        model = covariance_model(pairs, sym)
        cov, pseudo = contour_covariance(pairs, c, sym)
        err = max(float(np.max(np.abs(cov - model.cov))), float(np.max(np.abs(pseudo - model.pseudo))))
        passed = err <= args.tol
        ok &= passed
        rows.append((f"covariance model vs contour ({sym})", err, passed))
    width = max(len(r[0]) for r in rows)
    for name, err, passed in rows:
        print(f"{name:<{width}}  {err:10.3e}  {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def _print_report(rep):
    for s in rep.sizes:
        print(f"N={s.n}: kept {s.kept}, discarded {s.discarded}, within 4 SE: {s.within_band()}")
        for i, lab in enumerate(s.labels):
            print(f"  mean[{lab}] = {s.mean[i]:.5g} (theory {s.mean_theory[i]:.5g}, z={s.z_mean[i]:.2f})")
        for i in range(len(s.labels)):
            for j in range(len(s.labels)):
                print(
                    f"  cov[{i},{j}] = {s.cov[i, j]:.5g} (theory {s.cov_theory[i, j]:.5g}, z={s.z_cov[i, j]:.2f});"
                    f" pseudo = {s.pseudo[i, j]:.5g} (theory {s.pseudo_theory[i, j]:.5g}, z={s.z_pseudo[i, j]:.2f})"
                )
        if "energy_p_value" in s.diagnostics:
            print(f"  energy distance p-value: {s.diagnostics['energy_p_value']:.3f}")
        flagged = [r for r in s.diagnostics.get("kurtosis", []) if r["flagged"]]
        if flagged:
            print(f"  kurtosis flagged: {flagged}")


def _progress(rec):
    if rec["index"] % 50 == 0:
        print(f"  N={rec['n']} sample {rec['index']} ({rec['seconds']:.2f}s)", file=sys.stderr)


def cmd_clt(args):
    cfg = harness.load_config(args.config)
    rep = harness.run_experiment(cfg, progress=_progress)
    path = harness.write_report(rep, cfg.resolved_output_dir())
    _print_report(rep)
    print(f"report written to {path}")
    return 0


def cmd_resolvent(args):
    cfg = harness.load_config(args.config)
    rep = harness.resolvent_clt_experiment(cfg, args.z or None, progress=_progress)
    path = harness.write_report(rep, cfg.resolved_output_dir())
    _print_report(rep)
    print(f"report written to {path}")
    return 0


def cmd_report(args):
    cfg = harness.load_config(args.config)
    records = harness.read_records(cfg)
    if not records:
        print(f"no samples in {cfg.checkpoint_path()}", file=sys.stderr)
        return 1
    done = {n for n, _ in records}
    cfg = dataclasses.replace(cfg, dims=tuple(n for n in cfg.dims if n in done))
    reps = []
    if cfg.pairs and cfg.functional:
        reps.append(harness.run_experiment(cfg, records=records))
    if cfg.z_points:
        reps.append(harness.resolvent_clt_experiment(cfg, records=records))
    for rep in reps:
        path = harness.write_report(rep, args.out or cfg.resolved_output_dir())
        _print_report(rep)
        print(f"report written to {path}")
    return 0


def cmd_local_law(args):
    eta = (lambda n: float(n) ** -args.eta_exponent) if args.eta is None else args.eta
    res = harness.local_law_scan(args.dims, args.samples, args.z, args.law, args.seed, eta)
    print("N      " + "  ".join(f"[{k}]".rjust(11) for k in res["medians"]))
    for i, n in enumerate(res["dims"]):
        print(f"{n:<6} " + "  ".join(f"{v[i]:11.3e}" for v in res["medians"].values()))
    print("slope  " + "  ".join(f"{s:11.3f}" for s in res["slopes"].values()))
    if args.csv:
        harness.write_local_law_csv(res, args.csv)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="fclt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw one i.i.d. matrix")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--law", choices=LAWS, default="complex-gaussian")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--out", help="save the matrix as .npy")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("dyson", help="(m, u), stability eigenvalues and M_B block traces as CSV")
    s.add_argument("--z", type=_complex, action="append", required=True, help="repeatable")
    s.add_argument("--w", type=_complex, help="second spectral parameter (default: w = z)")
    s.add_argument("--eta", type=float, action="append", help="repeatable (default 1e-4)")
    s.set_defaults(func=cmd_dyson)

    s = sub.add_parser("verify-kernels", help="check the covariance kernel identities")
    s.add_argument("--radius", type=float, default=1.25)
    s.add_argument("--nodes", type=int, default=256)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_verify_kernels)

    s = sub.add_parser("clt-experiment", help="Monte Carlo CLT for Tr f(X)A")
    s.add_argument("config")
    s.set_defaults(func=cmd_clt)

    s = sub.add_parser("resolvent-clt", help="Monte Carlo CLT for Tr G_z^[21] A")
    s.add_argument("config")
    s.add_argument("--z", type=_complex, action="append", help="spectral parameter (repeatable)")
    s.set_defaults(func=cmd_resolvent)

    s = sub.add_parser("local-law-scan", help="averaged local-law errors against N")
    s.add_argument("--dims", type=_dims, default=[64, 128, 256, 512])
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--z", type=_complex, default=1.5)
    s.add_argument("--law", choices=LAWS, default="complex-gaussian")
    s.add_argument("--seed", type=int, default=0)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--eta-exponent", type=float, default=2.0, help="eta = N^-p")
    g.add_argument("--eta", type=float, help="fixed eta")
    s.add_argument("--csv")
    s.set_defaults(func=cmd_local_law)

    s = sub.add_parser("report", help="re-aggregate a checkpoint without computing new samples")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # report, not traceback, for user-facing errors
        from .errors import ConfigInvalid

        if isinstance(exc, (ConfigInvalid, FileNotFoundError)):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
