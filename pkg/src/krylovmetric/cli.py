"""Command-line front end: chain tables, evolution, metric matrices,
asymptotic fit reports, size-resolved distributions, classification, and a
one-shot reproduction of the reference figure datasets.

Outputs are plain CSV with '#'-prefixed metadata headers plus JSON
sidecars.  For a fixed configuration and seed the outputs are
byte-identical between runs (no timestamps, fixed float formatting).

Exit codes: 0 success, 1 configuration error, 2 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import (
    fit_log_law,
    fit_power_law,
    fit_report_json,
    mbl_asym_diag,
    syk_asym_offdiag,
)
from .classify import classify, verdict_to_json
from .errors import (
    ConvergenceError,
    KrylovMetricError,
    ParameterError,
    PrecisionExhaustedError,
    SingularContourError,
)
from .krylov_core import (
    Conformal,
    Gaussian,
    MomentSeries,
    closed_form_chain,
    evolve_chain,
    krylov_complexity,
    lanczos_from_moments,
)
from .metric import (
    ll_metric_integrand,
    mbl_metric,
    metric_contour_table,
    metric_from_series,
    syk_metric_exact,
    syk_metric_matrix,
    syk_series_source,
    write_metric_csv,
    write_metric_json,
)
from .models import MblParams, gamma_sq
from .sizeres import SizeResolvedParams, SizeDistribution, mbl_size_resolved, syk_Jn, syk_Jn_asym, write_distribution_csv
from .special import DEFAULT_CTX, PrecisionContext

_ENV_BITS = "KRYLOVMETRIC_BITS"


def _ctx_from_args(args) -> PrecisionContext:
    bits = args.bits
    if bits is None:
        bits = int(os.environ.get(_ENV_BITS, DEFAULT_CTX.bits))
    return PrecisionContext(bits=bits, rel_tol=args.rel_tol)


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_csv(path, header_meta: dict, columns: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(f"# version={__version__}\n")
        for key in sorted(header_meta):
            fh.write(f"# {key}={header_meta[key]}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _load_config_defaults(parser, argv):
    """A key=value config file supplies defaults; explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        defaults = {}
        with open(known.config) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                defaults[key.strip().replace("-", "_")] = val.strip()
        parser.set_defaults(**defaults)


def _family_from_args(args):
    if args.family == "gaussian":
        return Gaussian(gamma=float(args.gamma))
    return Conformal(alpha=float(args.alpha), delta=float(args.delta))


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_lanczos(args) -> int:
    ctx = _ctx_from_args(args)
    n_max = int(args.nmax)
    if args.from_moments:
        with open(args.from_moments) as fh:
            text = fh.read().strip()
        if text.startswith("{"):
            mu = json.loads(text)["mu"]
        else:
            mu = [line.strip() for line in text.splitlines() if line.strip()]
        chain = lanczos_from_moments(MomentSeries(mu, ctx=ctx), n_max, ctx=ctx)
        meta = {"source": "moments", "n_max": n_max, "precision_bits": ctx.bits}
    else:
        fam = _family_from_args(args)
        chain = closed_form_chain(fam, n_max)
        meta = {"source": repr(fam), "n_max": n_max, "precision_bits": ctx.bits}
    rows = [(n + 1, float(b)) for n, b in enumerate(chain.b)]
    _write_csv(args.out, meta, ["n", "b_n"], rows)
    print(f"wrote {args.out} ({len(rows)} coefficients)")
    return 0


def cmd_evolve(args) -> int:
    ctx = _ctx_from_args(args)
    fam = _family_from_args(args)
    chain = closed_form_chain(fam, max(int(args.nmax), 128))
    t_grid = np.linspace(0.0, float(args.tmax), int(args.steps) + 1)
    states = evolve_chain(chain, t_grid, ctx=ctx)
    rows = []
    for s in states:
        rows.append((float(s.t), krylov_complexity(s), s.norm_sq() - 1.0, s.tail_mass))
    meta = {"family": repr(fam), "tmax": args.tmax, "precision_bits": ctx.bits}
    _write_csv(args.out, meta, ["t", "complexity", "norm_defect", "tail_mass"], rows)
    print(f"wrote {args.out} ({len(rows)} times)")
    return 0


def _build_metric(args, ctx):
    n_max = int(args.nmax)
    if args.family == "syk":
        delta, h = float(args.delta), float(args.h)
        fam = Conformal(alpha=float(args.alpha), delta=delta)
        if args.route == "exact":
            met = syk_metric_matrix(delta, h, n_max, ctx=ctx, workers=args.workers)
        elif args.route == "contour":
            from .metric import syk_metric_integrand

            met = metric_contour_table(
                syk_metric_integrand(delta, h), fam, n_max, ctx=ctx,
                family_tag="syk", params={"delta": delta, "h": h},
            )
        else:
            met = metric_from_series(
                syk_series_source(delta, h, n_max, ctx=ctx), fam.d_factor(np.arange(n_max + 1)),
                n_max, ctx=ctx,
            )
            met = type(met)(
                values=met.values, family="syk", normalization=met.normalization,
                imag_residual=0.0, params={"delta": delta, "h": h, "route": "series"},
            )
        return met, fam
    if args.family == "ll":
        delta = float(args.delta)
        fam = Conformal(alpha=float(args.alpha), delta=delta)
        met = metric_contour_table(
            ll_metric_integrand(delta), fam, n_max, ctx=ctx,
            family_tag="ll", params={"delta": delta},
        )
        return met, fam
    if args.family == "mbl":
        p = MblParams(j=float(args.j), hfield=float(args.hfield), xi=float(args.xi),
                      nsites=int(args.nsites))
        met = mbl_metric(p, n_max, mode=args.mode)
        fam = Gaussian(gamma=float(np.sqrt(gamma_sq(p))))
        return met, fam
    raise ParameterError(f"unknown family {args.family!r}")


def cmd_metric(args) -> int:
    ctx = _ctx_from_args(args)
    met, _ = _build_metric(args, ctx)
    write_metric_csv(met, args.out)
    write_metric_json(met, str(args.out) + ".json", precision_bits=ctx.bits)
    print(f"wrote {args.out} (m_max={met.n_max}, family={met.family})")
    return 0


def cmd_asym(args) -> int:
    ctx = _ctx_from_args(args)
    n_max = int(args.nmax)
    reports = []
    if args.family == "syk":
        delta, h = float(args.delta), float(args.h)
        lo = max(20, n_max // 3)
        diag = [(n, syk_metric_exact(delta, h, n, n, ctx)) for n in range(lo, n_max + 1)]
        fit = fit_power_law(diag, (lo, n_max))
        reports.append(("diagonal_power", fit, diag))
        lams = [k / 20.0 for k in range(1, 11)]
        offd = []
        for lam in lams:
            m = int(round(n_max * (1 - lam)))
            n = int(round(n_max * (1 + lam)))
            if m < 1:
                continue
            offd.append((lam, abs(syk_metric_exact(delta, h, m, n, ctx))))
        ofit = fit_power_law(offd, (min(x for x, _ in offd), max(x for x, _ in offd)))
        reports.append(("offdiagonal_lambda_power", ofit, offd))
    elif args.family == "mbl":
        p = MblParams(j=float(args.j), hfield=float(args.hfield), xi=float(args.xi),
                      nsites=int(args.nsites))
        from .metric import mbl_metric_diagonal

        diag = mbl_metric_diagonal(p, n_max, mode="exact_sum")
        lo = max(10, n_max // 10)
        samples = [(n, float(diag[n])) for n in range(lo, n_max + 1)]
        fit = fit_log_law(samples, (lo, n_max))
        reports.append(("diagonal_log", fit, samples))
        asym_pairs = [(n, mbl_asym_diag(n, p)) for n in range(lo, n_max + 1, max(1, n_max // 50))]
        reports.append(("log_law_reference", fit_log_law(asym_pairs, (lo, n_max)), asym_pairs))
    else:
        raise ParameterError("asym supports families 'syk' and 'mbl'")
    with open(args.out, "w") as fh:
        for name, fit, samples in reports:
            fh.write(json.dumps({"report": name, "fit": json.loads(fit_report_json(fit, name, samples))},
                                sort_keys=True) + "\n")
    print(f"wrote {args.out} ({len(reports)} fit reports)")
    return 0


def cmd_sizeres(args) -> int:
    ctx = _ctx_from_args(args)
    n = int(args.n)
    if args.family == "syk":
        p = SizeResolvedParams.strong_coupling(delta=float(args.delta), beta_j=float(args.beta_j))
        lam_grid = np.geomspace(float(args.lam_min), float(args.lam_max), int(args.points))
        ells = lam_grid * n * p.k_const
        vals = np.array([syk_Jn(n, e, p, ctx=ctx) for e in ells])
        dist = SizeDistribution(n=n, ell_grid=ells, values=vals)
        meta = {"family": "syk", "n": n, "delta": p.delta, "v": p.v, "k_const": p.k_const,
                "precision_bits": ctx.bits, "quantity": "J_n(ell)"}
    else:
        p = MblParams(j=float(args.j), hfield=float(args.hfield), xi=float(args.xi),
                      nsites=int(args.nsites))
        lmax = int(args.points)
        ells = np.arange(1, lmax + 1, dtype=float)
        vals = np.array([mbl_size_resolved(n, int(e), p, ctx=ctx) for e in ells])
        dist = SizeDistribution(n=n, ell_grid=ells, values=vals)
        meta = {"family": "mbl", "n": n, "xi": p.xi, "j": p.j, "hfield": p.hfield,
                "nsites": p.nsites, "precision_bits": ctx.bits, "quantity": "K_nn(ell)"}
    write_distribution_csv(dist, args.out, params=meta)
    print(f"wrote {args.out} ({len(dist.ell_grid)} sizes)")
    return 0


def cmd_classify(args) -> int:
    ctx = _ctx_from_args(args)
    met, fam = _build_metric(args, ctx)
    chain = closed_form_chain(fam, met.n_max)
    verdict = classify(chain, met, ctx=ctx)
    payload = verdict_to_json(verdict)
    with open(args.out, "w") as fh:
        fh.write(payload + "\n")
    print(f"label={verdict.label} -> {args.out}")
    return 0


def cmd_repro(args) -> int:
    ctx = _ctx_from_args(args)
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    summary = {}

    # -- metric structure, fast scrambler h=3/4 and h=0, diagonal power law
    delta = 0.25
    fam = Conformal(alpha=1.0, delta=delta)
    for tag, h in (("fig2a", 0.75), ("fig2b", 0.0)):
        src = syk_series_source(delta, h, 300, ctx=ctx)
        met = metric_from_series(src, fam.d_factor(np.arange(301)), 300, ctx=ctx)
        rows = [(n, float(met.values[n, n])) for n in range(1, 301)]
        _write_csv(os.path.join(outdir, f"{tag}_diagonal.csv"),
                   {"family": "syk", "delta": delta, "h": h}, ["n", "K_nn"], rows)
        if h > 0:
            fit = fit_power_law(rows, (100, 300))
            summary[f"{tag}_diag_exponent"] = fit.exponent
    # -- orthogonal off-diagonal decay at L = 300
    h = 0.75
    lams = [k / 20.0 for k in range(1, 11)]
    rows = []
    for lam in lams:
        m = int(round(300 * (1 - lam)))
        n = int(round(300 * (1 + lam)))
        rows.append((lam, abs(syk_metric_exact(delta, h, m, n, ctx))))
    _write_csv(os.path.join(outdir, "figs1a_offdiagonal.csv"),
               {"family": "syk", "delta": delta, "h": h, "L": 300}, ["lambda", "abs_K"], rows)
    summary["figs1a_lambda_slope"] = fit_power_law(rows, (lams[0], lams[-1])).exponent

    # -- Luttinger metric: signs, diagonal power law, off-diagonal comparison
    famll = Conformal(alpha=1.0, delta=1.0)
    metll = metric_contour_table(ll_metric_integrand(1.0), famll, 140, ctx=ctx,
                                 family_tag="ll", params={"delta": 1.0})
    rows = [(n, float(np.real(metll.values[n, n]))) for n in range(1, 141)]
    _write_csv(os.path.join(outdir, "fig2c_diagonal.csv"),
               {"family": "ll", "delta": 1.0}, ["n", "K_nn"], rows)
    diag_fit = fit_power_law([(n, abs(v)) for n, v in rows if n >= 40], (40, 140))
    summary["fig2c_diag_exponent"] = diag_fit.exponent
    bigl = 300
    metll_off = metric_contour_table(ll_metric_integrand(1.0), famll, 450, ctx=ctx,
                                     family_tag="ll", params={"delta": 1.0})
    rows = []
    for lam in lams:
        m = int(round(bigl * (1 - lam)))
        n = int(round(bigl * (1 + lam)))
        if (m + n) % 2 == 0:
            rows.append((lam, float(np.abs(metll_off.values[m, n]))))
    _write_csv(os.path.join(outdir, "figs1b_offdiagonal.csv"),
               {"family": "ll", "delta": 1.0, "L": bigl}, ["lambda", "abs_K"], rows)
    summary["figs1b_ratio_lam0.3"] = float(
        np.abs(metll_off.values[int(bigl * 0.7), int(bigl * 1.3)])
        / np.abs(metll_off.values[bigl, bigl])
    )

    # -- localized model: diagonal log law up to n = 1e4
    p = MblParams(j=1.0, hfield=1.0, xi=1.0, nsites=200)
    from .metric import mbl_metric_diagonal

    diag = mbl_metric_diagonal(p, 10_000, mode="exact_sum")
    ns = np.unique(np.geomspace(1, 10_000, 200).astype(int))
    rows = [(int(n), float(diag[n])) for n in ns]
    _write_csv(os.path.join(outdir, "fig2d_diagonal.csv"),
               {"family": "mbl", "xi": 1.0, "j": 1.0, "hfield": 1.0, "nsites": 200},
               ["n", "K_nn"], rows)
    law = [(int(n), mbl_asym_diag(int(n), p)) for n in ns if 8 * n > gamma_sq(p)]
    summary["fig2d_log_slope"] = fit_log_law(rows[20:], (100, 10_000)).slope
    summary["fig2d_law_slope"] = fit_log_law(law[20:], (100, 10_000)).slope

    # -- size-resolved transition and decay law at n = 150
    psz = SizeResolvedParams.strong_coupling(delta=0.25, beta_j=100.0)
    n = 150
    lam_grid = np.linspace(2.0, 6.0, 161)
    vals = np.array([syk_Jn(n, lam * n * psz.k_const, psz, ctx=ctx) for lam in lam_grid])
    rows = list(zip(lam_grid.tolist(), vals.tolist()))
    _write_csv(os.path.join(outdir, "figs2a_transition.csv"),
               {"family": "syk", "n": n, "delta": psz.delta}, ["lambda", "J_n"], rows)
    sign_changes = [float(lam_grid[i]) for i in range(1, len(vals))
                    if np.sign(vals[i]) != np.sign(vals[i - 1])]
    summary["figs2a_last_sign_change"] = sign_changes[-1] if sign_changes else None

    lam_grid = np.linspace(4.5, 8.0, 15)
    rows = []
    for lam in lam_grid:
        v = syk_Jn(n, lam * n * psz.k_const, psz, ctx=ctx)
        rows.append((float(lam), float(np.log(abs(v))), float(np.log(syk_Jn_asym(n, lam)))))
    _write_csv(os.path.join(outdir, "figs2b_decay.csv"),
               {"family": "syk", "n": n, "delta": psz.delta},
               ["lambda", "ln_abs_Jn", "ln_asym"], rows)
    offs = [r[1] - r[2] for r in rows]
    const = float(np.mean(offs))
    summary["figs2b_max_rel_dev"] = float(
        max(abs(o - const) / abs(r[1]) for o, r in zip(offs, rows))
    )

    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {outdir}/summary.json")
    return 0


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--bits", type=int, default=None, help="working precision bits "
                    f"(default: ${_ENV_BITS} or {DEFAULT_CTX.bits})")
    sp.add_argument("--rel-tol", type=float, default=DEFAULT_CTX.rel_tol)
    sp.add_argument("--config", default=None, help="key=value defaults file; flags win")
    sp.add_argument("--out", default=None)


def _add_family(sp, families=("syk", "ll", "mbl")):
    sp.add_argument("--family", choices=families, required=True)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.25)
    sp.add_argument("--h", type=float, default=0.75)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--xi", type=float, default=1.0)
    sp.add_argument("--j", type=float, default=1.0)
    sp.add_argument("--hfield", type=float, default=1.0)
    sp.add_argument("--nsites", type=int, default=200)
    sp.add_argument("--mode", choices=("exact_sum", "log_approx"), default="exact_sum")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krylovmetric",
                                 description="Krylov-space observables of operator growth")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("lanczos", help="Lanczos coefficient table")
    _add_common(sp)
    sp.add_argument("--family", choices=("conformal", "gaussian"), default="conformal")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.25)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--from-moments", default=None, help="moments file, one value per line or JSON")
    sp.add_argument("--nmax", type=int, required=True)
    sp.set_defaults(func=cmd_lanczos)

    sp = sub.add_parser("evolve", help="wavefunction evolution and complexity table")
    _add_common(sp)
    sp.add_argument("--family", choices=("conformal", "gaussian"), default="conformal")
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.25)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--tmax", type=float, default=3.0)
    sp.add_argument("--steps", type=int, default=30)
    sp.add_argument("--nmax", type=int, default=256)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("metric", help="Krylov metric matrix")
    _add_common(sp)
    _add_family(sp)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--route", choices=("series", "exact", "contour"), default="series")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_metric)

    sp = sub.add_parser("asym", help="asymptotic fit reports")
    _add_common(sp)
    _add_family(sp, families=("syk", "mbl"))
    sp.add_argument("--nmax", type=int, required=True)
    sp.set_defaults(func=cmd_asym)

    sp = sub.add_parser("sizeres", help="size-resolved distributions")
    _add_common(sp)
    _add_family(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--beta-j", type=float, default=100.0)
    sp.add_argument("--lam-min", type=float, default=0.5)
    sp.add_argument("--lam-max", type=float, default=8.0)
    sp.add_argument("--points", type=int, default=60)
    sp.set_defaults(func=cmd_sizeres)

    sp = sub.add_parser("classify", help="fast-scrambler verdict")
    _add_common(sp)
    _add_family(sp)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--route", choices=("series", "exact", "contour"), default="series")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("repro", help="regenerate the reference figure datasets")
    _add_common(sp)
    sp.add_argument("--outdir", default="repro_out")
    sp.set_defaults(func=cmd_repro)

    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    _load_config_defaults(ap, argv)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "out", None) is None and args.command != "repro":
        args.out = f"{args.command}.csv"
    try:
        return args.func(args)
    except (ConvergenceError, PrecisionExhaustedError, SingularContourError) as exc:
        print(f"error: nonconvergence: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, KrylovMetricError, OSError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
