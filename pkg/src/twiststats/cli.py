"""Command line interface. Exit codes: 0 success, 2 gate failure, 1 operational error."""
from __future__ import annotations

import json
import logging
import math
import os
import sys

import click
import numpy as np

from . import __version__
from .arith import (_enumerate_classes, _lcm, enumerate_families, family_from_spec,
                    get_curve, resolve_form, valid_pairs, write_coefficients)

EXIT_GATE = 2
EXIT_ERROR = 1


class GateFailure(click.ClickException):
    exit_code = EXIT_GATE


def _dump(obj):
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, complex):
            return [o.real, o.imag]
        raise TypeError(type(o))

    click.echo(json.dumps(obj, sort_keys=True, default=default))


def _forms(labels):
    return tuple(resolve_form(s) for s in labels)


def _sign(text):
    return None if text == "any" else int(text)


def _range(text):
    """'lo:hi' -> (lo, hi) integers (inclusive)."""
    try:
        lo, hi = (int(float(v)) for v in text.split(":"))
    except ValueError:
        raise click.BadParameter(f"expected lo:hi, got {text!r}") from None
    if lo > hi:
        raise click.BadParameter("lo must be <= hi")
    return lo, hi


def _d_in_range(forms, lo, hi, sign):
    n0 = _lcm([8] + [f.level for f in forms])
    top = max(abs(lo), abs(hi))
    d = _enumerate_classes(n0, valid_pairs(forms, sign), 0, top)
    d = d[(d >= lo) & (d <= hi)]
    return d


forms_opt = click.option("--form", "forms", multiple=True, default=("37a1",), show_default=True,
                         help="Curve label or file:<coefficient file>; repeat for several forms.")
sign_opt = click.option("--sign", default="-1", type=click.Choice(["-1", "1", "any"]),
                        show_default=True, help="Required root number of every twist.")
workers_opt = click.option("--workers", type=int, default=None,
                           help="Worker processes (default TWISTSTATS_WORKERS or 1).")


@click.group()
@click.version_option(__version__)
@click.option("--log-level", default="WARNING", show_default=True)
def cli(log_level):
    """Quadratic-twist statistics: sums, proxies, L-values, moments and distributions."""
    logging.basicConfig(level=log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# --------------------------------------------------------------------------

@cli.command()
@forms_opt
@sign_opt
@click.option("--X1", "X1", type=float, required=True, help="Exclusive lower bound for |d|.")
@click.option("--X2", "X2", type=float, required=True, help="Inclusive upper bound for |d|.")
@click.option("--kappa", type=int, default=None)
@click.option("--a", "a", type=int, default=None)
def family(forms, sign, X1, X2, kappa, a):
    """Print the family members d with X1 < |d| <= X2, one per line."""
    fams = family_from_spec(_forms(forms), kappa, a, _sign(sign))
    for d in enumerate_families(fams, X1, X2).tolist():
        click.echo(d)


@cli.command()
@click.option("--curve", required=True)
@click.option("--pmax", type=int, default=1000, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
def coeffs(curve, pmax, out):
    """Write the normalised prime eigenvalues of a curve to a coefficient file."""
    write_coefficients(out, resolve_form(curve), pmax)
    click.echo(out)


@cli.command("gauss-check")
@click.option("--nmax", type=int, default=2000, show_default=True)
@click.option("--mmax", type=int, default=50, show_default=True)
def gauss_check(nmax, mmax):
    """Closed-form Gauss sums against direct summation; fails on any mismatch."""
    from .gauss import check_table

    res = check_table(nmax, mmax)
    click.echo("m\tn\tclosed\tbrute\tstatus")
    for m, n, brute, closed in res.mismatches:
        click.echo(f"{m}\t{n}\t{closed}\t{brute}\tFAIL")
    status = "PASS" if res.ok else "FAIL"
    click.echo(f"# checked {res.checked} cases, {len(res.mismatches)} mismatches: {status}")
    if not res.ok:
        raise GateFailure("Gauss-sum mismatches")


@cli.command()
@forms_opt
@click.option("--n", "n", type=int, required=True)
@click.option("--v", "v", type=int, default=1, show_default=True)
@click.option("--X", "X", type=float, required=True)
@click.option("--kappa", type=int, default=1, show_default=True)
@click.option("--a", "a", type=int, default=1, show_default=True)
@sign_opt
@workers_opt
def charsum(forms, n, v, X, kappa, a, sign, workers):
    """Smoothed character sum over one class: JSON {lhs, main, error, ratio}."""
    from .charsum import char_sum_report

    fam = family_from_spec(_forms(forms), kappa, a, _sign(sign))[0]
    _dump(char_sum_report(n, v, fam, X, workers=workers).as_dict())


@cli.command()
@forms_opt
@click.option("--curve", default=None, help="Curve for C(d; x), R_1, R_2.")
@click.option("--d", "d", type=int, required=True)
@click.option("--x", "x", type=float, required=True)
@click.option("--X", "X", type=float, default=None, help="Normalising scale (default |d|).")
def proxy(forms, curve, d, x, X):
    """Prime-sum proxies at one d: JSON {P, C, Q, R1, R2, mu, sigma2}."""
    from .proxy import ProxyConfig, normalized_stats

    X = float(X or abs(d))
    E = get_curve(curve) if curve else None
    s = normalized_stats(d, _forms(forms), X, x, E, ProxyConfig(X, x=x) if E else None)
    single = len(forms) == 1
    _dump({"P": s.P[0] if single else s.P, "Q": s.Q[0] if single else s.Q, "C": s.C,
           "R1": s.R1, "R2": s.R2, "mu": s.mu, "sigma2": s.sigma2})


@cli.command()
@forms_opt
@click.option("--ell", "ells", type=int, multiple=True, default=(1,), show_default=True)
@click.option("--v", "vs", type=int, multiple=True, default=(1,), show_default=True)
@click.option("--kappa", type=int, default=None)
@click.option("--a", "a", type=int, default=None)
@click.option("--X", "X", type=float, required=True)
@click.option("--L", "L", type=float, default=None, help="Kernel scale (default log X).")
@click.option("--kernel", type=click.Choice(["fejer"]), default="fejer", show_default=True)
@workers_opt
def zerosum(forms, ells, vs, kappa, a, X, L, kernel, workers):
    """Aggregated explicit-formula sums per (ell, v, class): JSONL.

    Every zero sum of an odd twist must be at least M; a violation fails the gate.
    """
    from .charsum import DEFAULT_CUTOFF
    from .explicit import aggregate_S, fejer, zero_sums_family, _family_d

    K = fejer(L or math.log(X))
    fs = _forms(forms)
    fams = family_from_spec(fs, kappa, a, -1)
    floor = len(fs) - 1e-6
    worst = math.inf
    for fam in fams:
        d = _family_d(fam, X, 1, DEFAULT_CUTOFF)
        z = zero_sums_family(d, fs, K, workers)
        worst = min(worst, float(z.min()) if z.size else math.inf)
        for ell in ells:
            for v in vs:
                zv = z if v == 1 else z[d % v == 0]
                r = aggregate_S(ell, v, fam, X, K, workers=workers, zero_sums=zv)
                _dump({"kappa": fam.kappa, "a": fam.a, **r.as_dict(),
                       "min_zero_sum": float(zv.min()) if zv.size else None})
    if worst < floor:
        raise GateFailure(f"zero sum {worst} below the forced-zero floor {floor}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


def _complex(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise click.BadParameter(f"not a number: {text!r}") from None


@cli.command()
@click.option("--form", "form", default="37a1", show_default=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--s", "s", default="0.5", show_default=True, help="Real or complex, e.g. 0.5+2j.")
def lvalue(form, d, s):
    """Completed twisted L-function at s, with functional-equation and truncation checks."""
    from .lvalue import LValueError, doubling_change, fe_residual

    f = resolve_form(form)
    z = _complex(s)
    z = z.real if z.imag == 0 else z
    res, scale, v, _ = fe_residual(f, d, z)
    dbl, _ = doubling_change(f, d, z)
    out = {"d": d, "s": complex(z) if isinstance(z, complex) else z, "Lambda": v.value,
           "sign": v.sign, "truncation": v.truncation, "fe_residual": res, "scale": scale,
           "doubling": dbl}
    _dump(out)
    if res > 1e-8 * scale or dbl > 1e-9 * max(1.0, abs(v.value)):
        raise GateFailure(str(LValueError("L-value contract failed")))


@cli.command()
@click.option("--curve", "--form", "form", default="37a1", show_default=True)
@click.option("--d-range", "d_range", default=None, help="lo:hi over d (inclusive).")
@click.option("--X", "X", type=float, default=None, help="Use X < |d| <= 2X instead.")
@click.option("--validate/--no-validate", default=True, show_default=True,
              help="Finite-difference check of every derivative.")
def lprime(form, d_range, X, validate):
    """Central derivatives over odd-sign twists: JSONL {d, Lprime, logabs, u, residuals}."""
    from .lvalue import LValueError, central_derivative

    f = resolve_form(form)
    if (d_range is None) == (X is None):
        raise click.UsageError("give exactly one of --d-range or --X")
    if X is not None:
        ds = _d_in_range((f,), -int(2 * X), int(2 * X), -1)
        ds = ds[np.abs(ds) > X]
    else:
        ds = _d_in_range((f,), *_range(d_range), -1)
    failed = 0
    for d in ds.tolist():
        try:
            cd = central_derivative(f, d, validate=validate)
        except LValueError as exc:
            failed += 1
            _dump({"d": d, "error": str(exc), "residuals": exc.residuals})
            continue
        row = cd.as_dict()
        row["undecided"] = cd.undecided
        _dump(row)
    if failed:
        raise GateFailure(f"{failed} derivative checks failed")


def _run_config(config, forms, curve, Xs, x_rule, L_rule, seed, workers, out):
    from .scan import RunConfig

    base = RunConfig.from_file(config) if config else RunConfig()
    over = {"forms": list(forms) if forms else None, "curve": curve,
            "X_grid": list(Xs) if Xs else None, "x_rule": x_rule, "L_rule": L_rule,
            "seed": seed, "workers": workers, "out_dir": out}
    return base.with_overrides(**over)


@cli.command()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key = value (or JSON) run configuration; flags override it.")
@click.option("--form", "forms", multiple=True)
@click.option("--curve", default=None)
@click.option("--X", "Xs", type=float, multiple=True)
@click.option("--x-rule", default=None, help="power:<theta>, triple-log or fixed:<x>.")
@click.option("--L-rule", "L_rule", default=None, help="logX or a number; enables zero sums.")
@click.option("--seed", type=int, default=None)
@workers_opt
@click.option("--out", default=None, help="Output directory (chunks, records.jsonl).")
@click.option("--per-d-csv/--no-per-d-csv", default=False)
def moments(config, forms, curve, Xs, x_rule, L_rule, seed, workers, out, per_d_csv):
    """Resumable family scan: moment and shape reports as JSONL."""
    from .scan import run_scan, scan_family, ChunkStore, export_per_d, write_records

    cfg = _run_config(config, forms, curve, Xs, x_rule, L_rule, seed, workers, out)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())
    path = os.path.join(cfg.out_dir, "records.jsonl")
    # records are rebuilt from stored chunks, so a resumed run starts the file afresh
    open(path, "w").close()
    for r in run_scan(cfg):
        write_records([r], path)
        _dump(r.as_dict())
    if per_d_csv:
        store = ChunkStore(cfg.out_dir, cfg.hash())
        for X in cfg.X_grid:
            data, _ = scan_family(cfg, X, store=store)
            export_per_d(data, os.path.join(cfg.out_dir, f"per_d_X{X:.6g}.csv"))


@cli.command()
@click.option("--kind", type=click.Choice(["theorem1", "theorem2", "rank0", "proxy-pair"]),
              default="theorem1", show_default=True)
@forms_opt
@click.option("--X", "X", type=float, required=True, help="Twists with X < |d| <= 2X.")
@click.option("--alpha", required=True, help="Comma-separated lower corners, e.g. -1,-1.")
@click.option("--beta", required=True, help="Comma-separated upper corners.")
@click.option("--fixtures", type=click.Path(file_okay=False), default=None)
@click.option("--computed/--no-computed", default=True, show_default=True,
              help="Fall back to computed-proxy invariants.")
@click.option("--mc", "mc", type=int, default=0, help="Monte Carlo cross-check sample size.")
@click.option("--seed", type=int, default=0, show_default=True)
def dist(kind, forms, X, alpha, beta, fixtures, computed, mc, seed):
    """Empirical rectangle fraction next to C * Gaussian target: one JSON report."""
    from . import bsd, moments as mom
    from .lvalue import central_derivative, central_value
    from .proxy import galois_profile

    alpha, beta = _floats(alpha), _floats(beta)
    if len(alpha) != len(beta):
        raise click.BadParameter("alpha and beta need the same length")
    fs = _forms(forms)
    meta = {"X": X, "forms": list(forms), "seed": seed}
    undecided = 0
    sigma = None
    rows = []
    if kind == "proxy-pair":
        E = get_curve(forms[0])
        prof = galois_profile(E)
        spec = mom.FamilySpec(tuple(forms[:1]), -1, None, forms[0])
        data = mom.family_data(spec, X, math.sqrt(X))
        sel = (np.abs(data.d) > X) & (np.abs(data.d) <= 2 * X)
        stats = mom.proxy_pair_stats(data, prof.sigma2)[sel]
        sigma = prof.sigma
        rep = mom.joint_report(stats, alpha, beta, "theorem2", sigma, 0, meta)
    else:
        sign = 1 if kind == "rank0" else -1
        ds = _d_in_range(fs, -int(2 * X), int(2 * X), sign)
        ds = ds[(np.abs(ds) > X) & (np.abs(ds) > 20)]
        if kind == "theorem1":
            for d in ds.tolist():
                us = []
                for f in fs:
                    cd = central_derivative(f, d)
                    if cd.undecided:
                        break
                    us.append(cd.u)
                if len(us) < len(fs):
                    undecided += 1
                else:
                    rows.append(us)
            rep = mom.joint_report(np.array(rows).reshape(-1, len(fs)), alpha, beta, kind,
                                   undecided=undecided, meta=meta)
        else:
            E = get_curve(forms[0])
            f = fs[0]
            prof = galois_profile(E)
            sigma = prof.sigma
            src = bsd.InvariantSource(fixtures=fixtures, computed=computed)
            approx = 0
            for d in ds.tolist():
                inv = src.load(forms[0], d)
                if inv.approximate:
                    approx += 1
                if kind == "theorem2":
                    cd = central_derivative(f, d)
                    if cd.undecided:
                        undecided += 1
                        continue
                    sr = bsd.sha_reg_proxy(abs(cd.Lprime), inv)
                    rows.append([cd.u, bsd.sha_statistic(sr, d, prof.mu, prof.sigma2)])
                else:
                    cv = central_value(f, d)
                    if cv.vanishing or cv.L <= 0:
                        undecided += 1
                        continue
                    s0 = bsd.s0_proxy(cv.L, inv, 1)
                    rows.append([bsd.central_statistic(cv.L, d),
                                 bsd.s0_statistic(s0, d, prof.mu, prof.sigma2)])
            meta["computed_proxy_rows"] = approx
            rep = mom.joint_report(np.array(rows).reshape(-1, 2), alpha, beta, kind, sigma,
                                   undecided, meta)
    out = rep.as_dict()
    if mc:
        rho = 0.0 if kind == "theorem1" else 1.0 / sigma
        out["monte_carlo"] = mom.mc_rectangle(alpha, beta, rho, n=mc, seed=seed)
    _dump(out)


@cli.command()
@click.option("--fixtures", type=click.Path(file_okay=False), default=None)
@click.option("--remote", default=None, help="Base URL of a JSON invariant service.")
@click.option("--offline", is_flag=True, help="Never touch the network; cache only.")
@click.option("--refresh", is_flag=True, help="Re-fetch cached remote records.")
@click.option("--computed/--no-computed", default=False, show_default=True)
@click.option("--curve", default="37a1", show_default=True)
@click.option("--d-range", "d_range", required=True, help="lo:hi over d (inclusive).")
def bsd(fixtures, remote, offline, refresh, computed, curve, d_range):
    """Invariants and S-statistics per twist: JSONL."""
    from . import bsd as B
    from .lvalue import central_derivative, central_value, twist_sign

    if fixtures is None and remote is None and not computed:
        fixtures = os.path.join(os.path.dirname(__file__), "data", "fixtures")
    rem = B.RemoteInvariants(remote, offline=offline, refresh=refresh) if remote else None
    src = B.InvariantSource(fixtures=fixtures, remote=rem, computed=computed)
    f = resolve_form(curve)
    lo, hi = _range(d_range)
    ds = _d_in_range((f,), lo, hi, None)
    if lo <= 1 <= hi:
        ds = np.concatenate([[1], ds[ds != 1]])
    for d in sorted(ds.tolist(), key=lambda v: (abs(v), v)):
        try:
            inv = src.load(curve, d)
        except B.InvariantNotFound:
            continue
        row = inv.as_dict()
        if twist_sign(f, d) == -1:
            cd = central_derivative(f, d)
            row["Lprime"] = cd.Lprime
            row["SR"] = B.sha_reg_proxy(abs(cd.Lprime), inv)
            row["S"] = row["SR"] / inv.regulator if inv.regulator else None
            if inv.sha and inv.regulator:
                row["SR_over_sha_reg"] = row["SR"] / (inv.sha * inv.regulator)
        else:
            cv = central_value(f, d)
            row["L"] = cv.L
            row["S0"] = B.s0_proxy(cv.L, inv, 1) if cv.L > 0 and not cv.vanishing else None
        _dump(row)


@cli.command()
@click.option("--out", "out", required=True, type=click.Path(file_okay=False, exists=True),
              help="Run directory containing records.jsonl.")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv",
              show_default=True)
@click.option("--dest", default=None, type=click.Path(dir_okay=False))
def report(out, fmt, dest):
    """Export the records of a run directory at 12 significant digits."""
    from .scan import export

    path = os.path.join(out, "records.jsonl")
    with open(path) as fh:
        recs = [json.loads(line) for line in fh if line.strip()]
    text = export(recs, fmt, dest)
    if dest is None:
        click.echo(text, nl=False)


def main(argv=None):
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except GateFailure as exc:
        exc.show()
        return EXIT_GATE
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except click.exceptions.Abort:
        return EXIT_ERROR
    except Exception as exc:  # operational error
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_ERROR
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
