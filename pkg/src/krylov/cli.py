"""Command-line front end: ``krylov <command> ...``.

CSV grids and JSON results carry a ``meta`` block (a leading ``# {...}``
comment line in CSV). Floats are written with 17 significant digits.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
Defaults can be overridden through ``KRYLOV_<OPTION>`` environment variables
(for example ``KRYLOV_THREADS`` or ``KRYLOV_BITS``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import bootstrap as bs
from . import coulomb_gas as cg
from . import greens as gr
from . import pauli_liouville as pl
from . import transport as tr
from . import ullman_compare as uc
from . import universality as un
from . import weight_lanczos as wl
from . import weights as wt
from .errors import KrylovError, NumericalError, ValidationError
from .sequence import LanczosSequence, fmt_float

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
# flags that change neither results nor file contents
PRESENTATION_FLAGS = ("--threads", "--json-errors")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _env(name: str, default: Any, cast: Callable[[str], Any] = str) -> Any:
    raw = os.environ.get("KRYLOV_" + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ValidationError(f"bad value for KRYLOV_{name.upper()}: {raw!r}") from exc


# ---------------------------------------------------------------------------
# file helpers


def _versions() -> dict[str, str]:
    import gmpy2
    import scipy

    return {"krylov": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "gmpy2": gmpy2.version()}


def _meta(ctx: dict[str, Any], **extra: Any) -> dict[str, Any]:
    return {"command": ctx["command"], "versions": _versions(), **extra}


def _jsonable(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_json(obj: dict[str, Any], out: str | None) -> None:
    _emit(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n", out)


def _write_csv(header: Sequence[str], columns: Sequence[np.ndarray], meta: dict[str, Any], out: str | None) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(fmt_float(v) for v in row) + "\n")
    _emit(buf.getvalue(), out)


def read_csv(path: str) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """(meta, columns) from a CSV written by this tool (the meta line is optional)."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    meta: dict[str, Any] = {}
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:])
        except json.JSONDecodeError:
            meta = {}
    rows = list(csv.reader(ln for ln in lines if ln and not ln.startswith("#")))
    if len(rows) < 2:
        raise ValidationError(f"{path} has no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry in {path}: {exc}") from exc
    return meta, {name: data[:, i] for i, name in enumerate(rows[0])}


def _load_coeffs(path: str) -> LanczosSequence:
    return LanczosSequence.load(path)


def _estimate_from_csv(path: str) -> bs.SpectralEstimate:
    meta, cols = read_csv(path)
    try:
        solver, n, rho = meta["solver"], int(meta["n"]), float(meta["rho"])
        d_omega, beta = float(meta["d_omega"]), float(meta["beta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path} lacks the bootstrap meta block: {exc}") from exc
    f = None
    if solver == "airy":
        f = -(1.5 * math.pi * np.clip(0.5 * n - cols["I"], 0.0, None)) ** (2.0 / 3.0)
    extra = {"hn1": float(meta["hn1"])} if "hn1" in meta else {}
    return bs.SpectralEstimate(solver, n, rho, d_omega, beta, cols["omega"], cols["phi_or_envelope"],
                               cols["sigma"], cols["I"], f, extra)


def _measure_from_csv(path: str) -> cg.EquilibriumMeasure:
    meta, cols = read_csv(path)
    try:
        n, beta = float(meta["n"]), float(meta["beta_n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path} lacks the eqmeasure meta block: {exc}") from exc
    return cg.EquilibriumMeasure(n, beta, cols["omega"], cols["sigma"], cols["I"])


def _weight_from_args(args) -> wt.WeightSpec:
    params = {"p_inv": args.pinv, "p": args.p, "omega0": args.omega0_weight}
    return wt.from_tag(args.family, args.rho, **params)


# ---------------------------------------------------------------------------
# commands


def cmd_lanczos_model(args, ctx) -> None:
    builders = {
        "mfim": lambda: pl.mfim(args.gx, args.gz),
        "tfim": lambda: pl.tfim(args.g),
        "xxz": lambda: pl.xxz(args.delta),
        "heisenberg": pl.heisenberg,
    }
    H = builders[args.model]()
    seq = pl.lanczos_from_hamiltonian(H, pl.seed_operator(args.seed, H), args.n, trunc=args.trunc,
                                      max_support=args.max_support, threads=ctx["threads"],
                                      max_terms=args.max_terms)
    meta = _meta(ctx, source="hamiltonian", model=args.model, seed=args.seed, n=args.n, trunc=args.trunc,
                 max_support=args.max_support, precision="float64")
    _write_json({**seq.to_json_dict(), "meta": meta}, args.out)


def cmd_lanczos_weight(args, ctx) -> None:
    spec = _weight_from_args(args)
    seq = wl.stieltjes_coefficients(spec, args.n, precision_bits=args.bits, threads=ctx["threads"])
    meta = _meta(ctx, source="weight", weight=spec.tag, n=args.n, precision_bits=args.bits)
    _write_json({**seq.to_json_dict(), "meta": meta}, args.out)


def cmd_eqmeasure(args, ctx) -> None:
    spec = _weight_from_args(args)
    m = cg.equilibrium_density(spec, args.n, points=args.points)
    meta = _meta(ctx, weight=spec.tag, n=float(args.n), beta_n=m.beta_n, points=args.points)
    _write_csv(("omega", "sigma", "I"), (m.grid, m.sigma, m.cumulative), meta, args.out)


def cmd_greens(args, ctx) -> None:
    coeffs = _load_coeffs(args.coeffs)
    beta = 2.0 * coeffs.b[args.n - 1] if args.beta is None else args.beta
    if args.terminator == "semicircle":
        term: Any = gr.SemicircleTerminator(beta)
    elif args.terminator == "bessel":
        if args.sigma0 is None:
            _, sigma0 = bs.bessel_initial(coeffs, args.n, args.rho, beta, full=True)
        else:
            sigma0 = args.sigma0
        term = gr.BesselTerminator(args.rho, sigma0, beta)
    else:
        if args.hn1 is None:
            raise ValidationError("the airy terminator needs --hn1")
        term = gr.ConstantTerminator(gr.airy_endpoint_green(args.rho, args.hn1, args.n, beta, 1))
    side = 1 if args.side == "plus" else -1
    omega = np.linspace(args.omega_min, args.omega_max, args.points)
    g = np.atleast_1d(gr.continued_fraction(coeffs, term, args.n, omega, side))
    phi = gr.spectral_from_green(g, side).phi
    meta = _meta(ctx, terminator=args.terminator, n=args.n, beta=beta, side=args.side, rho=args.rho)
    _write_csv(("omega", "reG", "imG", "phi"), (omega, g.real, g.imag, phi), meta, args.out)


def cmd_bootstrap(args, ctx) -> None:
    coeffs = _load_coeffs(args.coeffs)
    if args.solver == "bulk":
        est = bs.bulk_bootstrap(coeffs, args.n, args.domega, args.omega_max, beta=args.beta,
                                method=args.method, check_step=not args.no_step_check)
    elif args.solver == "bessel":
        est = bs.bessel_bootstrap(coeffs, args.n, args.rho, args.domega,
                                  2.0 if args.omega_max is None else args.omega_max,
                                  beta=args.beta, method=args.method, full=args.full_bessel)
    else:
        est = bs.airy_bootstrap(coeffs, args.n, args.rho, args.domega, args.omega_min,
                                beta=args.beta, hn1=args.hn1)
    extra = {"hn1": est.meta["hn1"]} if "hn1" in est.meta else {}
    meta = _meta(ctx, solver=est.solver, n=est.n, rho=est.rho, d_omega=est.d_omega, beta=est.beta,
                 method=args.method if args.solver != "airy" else "euler", **extra)
    _write_csv(("omega", "phi_or_envelope", "sigma", "I"),
               (est.omega, est.values, est.sigma, est.cumulative), meta, args.out)


def cmd_transport(args, ctx) -> None:
    coeffs = _load_coeffs(args.coeffs)
    if args.quantity == "diffusion":
        chi = args.chi if args.chi is not None else tr.susceptibility(args.model) if args.model else None
        if chi is None:
            raise ValidationError("diffusion needs --chi or --model")
        res = tr.diffusion_constant(coeffs, chi, n_min=2 if args.n_min is None else args.n_min, n_max=args.n_max,
                                    power=args.extrapolate[0], rho0_check=args.rho0_check)
        out = res.to_json_dict()
    elif args.quantity == "gamma":
        res = tr.superdiffusion_gamma(coeffs, 0.25 if args.chi is None else args.chi,
                                      n_min=2 if args.n_min is None else args.n_min,
                                      n_max=args.n_max, powers=tuple(args.extrapolate),
                                      stated_prefactor=args.stated_prefactor)
        out = res.to_json_dict()
    else:
        n_min = 20 if args.n_min is None else args.n_min
        rho, err = tr.estimate_rho(coeffs, args.p, args.q, n_min=n_min, n_max=args.n_max, force=args.force)
        out = {"quantity": "rho", "rho": fmt_float(rho), "stderr": fmt_float(err)}
    out["meta"] = _meta(ctx, quantity=args.quantity, coeffs=Path(args.coeffs).name)
    _write_json(out, args.out)


def _u_grid(args) -> tuple[np.ndarray, np.ndarray]:
    defaults = {"sine": (-3.0, 3.0, "fixed"), "bessel": (0.01, 1.0, "mirror"), "airy": (-3.0, 0.0, "fixed")}
    lo, hi, mode = defaults[args.kernel]
    lo = lo if args.u_min is None else args.u_min
    hi = hi if args.u_max is None else args.u_max
    mode = mode if args.v_mode is None else args.v_mode
    u = np.linspace(lo, hi, args.points)
    v = -u if mode == "mirror" else np.full_like(u, args.v)
    return u, v


def cmd_universality(args, ctx) -> None:
    coeffs = _load_coeffs(args.coeffs)
    n = args.n if args.n is not None else len(coeffs.b)
    estimate = _estimate_from_csv(args.phi) if args.phi else None
    if args.family:
        weight: Any = _weight_from_args(args)
    elif estimate is not None:
        weight = estimate
    else:
        raise ValidationError("universality needs --family or --phi for the weight")
    if args.sigma:
        measure: Any = _measure_from_csv(args.sigma)
    elif estimate is not None:
        measure = estimate
    else:
        raise ValidationError("universality needs --sigma or --phi for the unfolding")
    if args.kernel == "airy":
        fmap = un.UnfoldingMap.edge(measure) if isinstance(measure, bs.SpectralEstimate) else \
            un.UnfoldingMap.edge(measure, n=measure.n, beta=measure.beta_n)
    else:
        fmap = un.UnfoldingMap.from_measure(measure, args.omega0)
    u, v = _u_grid(args)
    measured = np.atleast_1d(un.unfolded_kernel_ratio(coeffs, weight, fmap, args.omega0, u, v, n))
    if args.kernel == "sine":
        ref = un.sine_kernel(u, v)
    elif args.kernel == "bessel":
        ref = un.bessel_reference(args.rho, u, v)
    else:
        ref = un.airy_kernel(u, v)
    meta = _meta(ctx, kernel=args.kernel, n=n, omega0=args.omega0, rho=args.rho)
    _write_csv(("u", "v", "measured", "reference"), (u, v, measured, np.atleast_1d(ref)), meta, args.out)


def cmd_confinement(args, ctx) -> None:
    spec = _weight_from_args(args)
    try:
        ns = [float(x) for x in args.nlist.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"--nlist must be comma-separated numbers: {exc}") from exc
    tab = uc.confinement_diagnostic(spec, ns, threads=ctx["threads"])
    meta = _meta(ctx, weight=spec.tag, exponent=tab.exponent, log_r2=tab.log_r2, growth=tab.growth)
    _write_csv(("n", "beta_n", "sigma0"), (tab.n, tab.beta, tab.sigma0), meta, args.out)


def cmd_reconstruct(args, ctx) -> None:
    meta_in, cols = read_csv(args.phi)
    if "phi_over_2pi" in cols:
        omega, w = cols["omega"], cols["phi_over_2pi"]
    else:
        est = _estimate_from_csv(args.phi)
        omega, w = est.omega, est.phi / (2 * math.pi)
    order = np.argsort(omega)
    table = wt.TabulatedWeight(omega[order], np.clip(w[order], 0.0, None))
    seq = wl.reconstruct_coefficients(table, args.n)
    out = seq.to_json_dict()
    extra: dict[str, Any] = {}
    if args.compare:
        ref = _load_coeffs(args.compare)
        k = min(len(ref.b), len(seq.b))
        dev = np.abs(seq.b[:k] - ref.b[:k]) / ref.b[:k]
        extra = {"max_rel_deviation": float(np.max(dev)), "compared": k}
        out.update(extra)
    out["meta"] = _meta(ctx, source="reconstruct", n=args.n, **extra)
    _write_json(out, args.out)
    if args.compare:
        sys.stderr.write(f"max relative coefficient deviation: {fmt_float(extra['max_rel_deviation'])}\n")


# ---------------------------------------------------------------------------
# parser


def _weight_flags(p: argparse.ArgumentParser, family_required: bool = True) -> None:
    p.add_argument("--family", required=family_required,
                   help=f"one of {', '.join(wt.FAMILY_TAGS)} or tabulated:<path>")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--pinv", type=float, default=2.0, help="quartic-root p_inv")
    p.add_argument("--p", type=float, default=2.0, help="freud/confining growth exponent")
    p.add_argument("--omega0-weight", type=float, default=1.0, help="gaussian-rho width")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="krylov", description="Lanczos coefficients, spectral bootstrap, transport, universality.")
    top.add_argument("--version", action="version", version=f"krylov {__version__}")
    top.add_argument("--json-errors", action="store_true", default=_env("json_errors", False, lambda s: s == "1"))
    top.add_argument("--threads", type=int, default=None, help="cap on worker threads (default: all cores)")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lan = sub.add_parser("lanczos", help="Lanczos coefficients").add_subparsers(dest="source", required=True,
                                                                               parser_class=_Parser)
    m = lan.add_parser("model", help="from a translation-invariant spin chain")
    m.add_argument("--model", choices=("mfim", "tfim", "xxz", "heisenberg"), required=True)
    m.add_argument("--gx", type=float, default=1.4)
    m.add_argument("--gz", type=float, default=0.9045)
    m.add_argument("--g", type=float, default=1.0)
    m.add_argument("--delta", type=float, default=1.0)
    m.add_argument("--seed", choices=pl.SEEDS, required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--trunc", type=float, default=0.0)
    m.add_argument("--max-support", type=int, default=pl.DEFAULT_MAX_SUPPORT)
    m.add_argument("--max-terms", type=int, default=_env("max_terms", pl.DEFAULT_MAX_TERMS, int))
    m.add_argument("--out")
    m.set_defaults(func=cmd_lanczos_model)

    w = lan.add_parser("weight", help="from a spectral weight by the Stieltjes procedure")
    _weight_flags(w)
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--bits", type=int, default=_env("bits", wl.DEFAULT_BITS, int))
    w.add_argument("--out")
    w.set_defaults(func=cmd_lanczos_weight)

    e = sub.add_parser("eqmeasure", help="Coulomb-gas equilibrium measure")
    _weight_flags(e)
    e.add_argument("--n", type=float, required=True)
    e.add_argument("--points", type=int, default=_env("points", 2001, int))
    e.add_argument("--out")
    e.set_defaults(func=cmd_eqmeasure)

    g = sub.add_parser("greens", help="continued fraction with a terminator")
    g.add_argument("--coeffs", required=True)
    g.add_argument("--terminator", choices=("semicircle", "bessel", "airy"), default="semicircle")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--beta", type=float)
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--sigma0", type=float)
    g.add_argument("--hn1", type=float)
    g.add_argument("--omega-min", type=float, default=0.0)
    g.add_argument("--omega-max", type=float, required=True)
    g.add_argument("--points", type=int, default=1000)
    g.add_argument("--side", choices=("plus", "minus"), default="minus")
    g.add_argument("--out")
    g.set_defaults(func=cmd_greens)

    b = sub.add_parser("bootstrap", help="spectral bootstrap")
    b.add_argument("solver", choices=("bulk", "bessel", "airy"))
    b.add_argument("--coeffs", required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--rho", type=float, default=0.0)
    b.add_argument("--domega", type=float, default=_env("domega", bs.DEFAULT_DOMEGA, float))
    b.add_argument("--omega-max", type=float)
    b.add_argument("--omega-min", type=float, default=0.0)
    b.add_argument("--beta", type=float)
    b.add_argument("--hn1", type=float)
    b.add_argument("--method", choices=bs.METHODS, default=_env("method", "rk4"))
    b.add_argument("--full-bessel", action="store_true", help="keep all terms of the Bessel asymptotics")
    b.add_argument("--no-step-check", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bootstrap)

    t = sub.add_parser("transport", help="transport coefficients")
    t.add_argument("quantity", choices=("diffusion", "gamma", "rho"))
    t.add_argument("--coeffs", required=True)
    t.add_argument("--chi", type=float)
    t.add_argument("--model", choices=("mfim", "xxz", "heisenberg"))
    t.add_argument("--extrapolate", type=float, nargs="+", default=None)
    t.add_argument("--n-min", type=int, help="smallest n used (default 2; 20 for rho)")
    t.add_argument("--n-max", type=int)
    t.add_argument("--rho0-check", action="store_true")
    t.add_argument("--stated-prefactor", action="store_true", help="chi in the numerator of the gamma prefactor")
    t.add_argument("--p", type=float, default=2.0)
    t.add_argument("--q", type=float, default=0.0)
    t.add_argument("--force", action="store_true")
    t.add_argument("--out")
    t.set_defaults(func=cmd_transport)

    u = sub.add_parser("universality", help="unfolded kernel against a reference kernel")
    u.add_argument("kernel", choices=("sine", "bessel", "airy"))
    u.add_argument("--coeffs", required=True)
    u.add_argument("--phi", help="bootstrap CSV (weight and, without --sigma, the unfolding)")
    u.add_argument("--sigma", help="eqmeasure CSV for the unfolding")
    _weight_flags(u, family_required=False)
    u.add_argument("--n", type=int)
    u.add_argument("--omega0", type=float, default=0.0)
    u.add_argument("--u-min", type=float)
    u.add_argument("--u-max", type=float)
    u.add_argument("--v", type=float, default=0.0)
    u.add_argument("--v-mode", choices=("fixed", "mirror"))
    u.add_argument("--points", type=int, default=61)
    u.add_argument("--out")
    u.set_defaults(func=cmd_universality)

    c = sub.add_parser("confinement", help="n-scaling of sigma_n(0)")
    _weight_flags(c)
    c.add_argument("--nlist", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_confinement)

    r = sub.add_parser("reconstruct", help="coefficients from a tabulated weight or bootstrap output")
    r.add_argument("--phi", required=True)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--compare", help="coefficient JSON to report the deviation against")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)
    return top


def _command_line(argv: Sequence[str]) -> str:
    kept: list[str] = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in PRESENTATION_FLAGS:
            skip = a == "--threads"
            continue
        if a.startswith("--threads="):
            continue
        kept.append(a)
    return " ".join(["krylov", *kept])


def _report(exc: BaseException, name: str, code: int, as_json: bool) -> int:
    if as_json:
        sys.stderr.write(json.dumps({"error": name, "message": str(exc), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"{name}: {exc}\n")
    return code


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json-errors" in argv or os.environ.get("KRYLOV_JSON_ERRORS") == "1"
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "extrapolate", None) is None and getattr(args, "quantity", None):
            args.extrapolate = [1.0] if args.quantity == "diffusion" else [1.0, 1.5]
        threads = args.threads if args.threads is not None else _env("threads", os.cpu_count() or 1, int)
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
        ctx = {"threads": threads, "command": _command_line(argv)}
        args.func(args, ctx)
    except _UsageError as exc:
        return _report(exc, "UsageError", EXIT_VALIDATION, as_json)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ValidationError as exc:
        return _report(exc, type(exc).__name__, EXIT_VALIDATION, as_json)
    except (NumericalError, KrylovError) as exc:
        return _report(exc, type(exc).__name__, EXIT_NUMERICAL, as_json)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
