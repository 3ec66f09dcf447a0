"""Command-line interface: lattice arithmetic through the full pipeline.

Exit codes follow the package contract: 0 success, 2 precondition refusal,
3 inequality violation beyond tolerance, 4 I/O or schema error; within one
invocation the strictest code wins.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import carleman as carl
from . import evolution as evo
from .ensembles import bump_case_43, bump_case_gap, solution_like_profile
from .errors import (
    EXIT_IO,
    EXIT_OK,
    EXIT_VIOLATION,
    HalfspaceDecayError,
    SchemaError,
    strictest_exit_code,
)
from .fibers import fiber_residual, gelfand_forward, gelfand_inverse, theta_grid
from .fields import load_field, save_field
from .lattice import (
    Lattice,
    Quasimomentum,
    dual_basis,
    format_rational,
    rational_structure,
    unit_cell_volume,
)
from .manifest import write_csv, write_json
from .pipeline import run_pipeline
from .profiles import SpectralProfile, bump_profile
from .quadrature import uniform_grid
from .runconfig import RunConfig, parallel_map
from .spectrum import density_scan, enumerate_spectrum, find_gaps, max_gap_growth
from .lattice import QuadraticForm


def _parse_gram(text: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([[int(v) for v in row.split(",")] for row in rows], dtype=np.int64)


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _emit_rows(header, rows, out: str | None) -> None:
    if out:
        write_csv(out, header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in row))


def _load_lattice_arg(path: str) -> Lattice:
    return Lattice.load(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halfspace-decay")
    sub = p.add_subparsers(dest="command", required=True)

    lat = sub.add_parser("lattice", help="dual bases, volumes, rational reduction")
    lat_sub = lat.add_subparsers(dest="subcommand", required=True)
    for name in ("dual", "volume", "rational"):
        sp = lat_sub.add_parser(name)
        sp.add_argument("--lattice", required=True, help="lattice JSON file")
        if name == "rational":
            sp.add_argument("--theta", required=True, help="rational coords, e.g. '1/2,0'")

    sp = sub.add_parser("spectrum", help="fiber-operator spectrum up to a cutoff")
    sp.add_argument("--lattice", required=True)
    sp.add_argument("--theta", default=None)
    sp.add_argument("--energy", type=float, default=0.0)
    sp.add_argument("--cutoff", type=float, required=True)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("gaps", help="spectral gaps (and optional gap-growth table)")
    sp.add_argument("--lattice", required=True)
    sp.add_argument("--theta", default=None)
    sp.add_argument("--energy", type=float, default=0.0)
    sp.add_argument("--cutoff", type=float, default=None, help="required unless --growth")
    sp.add_argument("--min-gap", type=float, default=0.0)
    sp.add_argument("--full-axis", action="store_true")
    sp.add_argument("--growth", default=None, help="N list for max-gap growth, e.g. '100,10000'")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("density", help="distinct binary-form values up to N")
    sp.add_argument("--gram", required=True, help="integer matrix 'a,b;b,c'")
    sp.add_argument("--N", type=int, required=True)

    gel = sub.add_parser("gelfand", help="transform, inversion, residual checks")
    gel_sub = gel.add_subparsers(dest="subcommand", required=True)
    for name in ("forward", "inverse", "roundtrip", "residual"):
        sp = gel_sub.add_parser(name)
        sp.add_argument("--lattice", required=True)
        if name == "forward":
            sp.add_argument("--u", required=True)
            sp.add_argument("--theta", required=True)
            sp.add_argument("--lmax", type=int, default=10**6)
            sp.add_argument("--out", required=True, help="fiber .npz output")
        elif name == "inverse":
            sp.add_argument("--fibers", nargs="+", required=True)
            sp.add_argument("--out", required=True)
        elif name == "roundtrip":
            sp.add_argument("--u", required=True)
            sp.add_argument("--theta-points", type=int, required=True)
        else:
            sp.add_argument("--u", required=True)
            sp.add_argument("--theta", required=True)
            sp.add_argument("--v", default=None)
            sp.add_argument("--energy", type=float, default=0.0)
            sp.add_argument("--lmax", type=int, default=10**6)
            sp.add_argument("--out", default=None)

    car = sub.add_parser("carleman", help="weighted inequality verification")
    car_sub = car.add_subparsers(dest="subcommand", required=True)
    sp = car_sub.add_parser("verify43")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--weight-lambda", type=float, default=None)
    sp.add_argument("--modes", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ensemble", type=int, default=1)
    sp.add_argument("--out-dir", default=None)
    sp = car_sub.add_parser("verify-gap")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--eigs", default=None, help="explicit eigenvalues '1,9'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ensemble", type=int, default=1)
    sp.add_argument("--force", action="store_true")
    sp.add_argument("--out-dir", default=None)
    sp = car_sub.add_parser("system-check")
    sp.add_argument("--eigs", required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp = car_sub.add_parser("ellreg")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--s-list", required=True, help="window starts '1,2,3'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ensemble", type=int, default=1)

    sp = sub.add_parser("evolve", help="decaying two-point solve plus rate fit")
    sp.add_argument("--eigs", required=True)
    sp.add_argument("--perturbation", choices=("zero", "diagonal", "full"), default="zero")
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--bound", choices=("const", "exp"), default="exp")
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--boundary", default=None, help="per-mode values '1,0.5'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="profile CSV (t, norm)")
    sp.add_argument("--svg", default=None, help="log-norm decay plot output")

    sp = sub.add_parser("decay", help="rate fit of a stored profile")
    sp.add_argument("--input", required=True, help="CSV with columns t,norm")
    sp.add_argument("--window", required=True, help="'a,b'")

    sp = sub.add_parser("counterexample", help="weighted-mass threshold scan")
    sp.add_argument("--lambdas", required=True)
    sp.add_argument("--T", type=float, default=1000.0)
    sp.add_argument("--X", type=float, default=200.0)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("pipeline", help="full field-to-verdict run from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", default=None)
    sp.add_argument("--threads", type=int, default=None)

    return p


def _cmd_lattice(args) -> int:
    lat = _load_lattice_arg(args.lattice)
    if args.subcommand == "dual":
        dual = dual_basis(lat)
        print(json.dumps({"dual_basis_rows": dual.basis.T.tolist()}))
    elif args.subcommand == "volume":
        dual = dual_basis(lat)
        print(
            json.dumps(
                {"cell_volume": unit_cell_volume(lat), "dual_cell_volume": unit_cell_volume(dual)}
            )
        )
    else:
        theta = Quasimomentum.parse(args.theta)
        dual = dual_basis(lat)
        sigma, q, l, r = rational_structure(dual, theta)
        print(
            json.dumps(
                {
                    "sigma": format_rational(sigma),
                    "G": q.G.tolist(),
                    "l": l,
                    "r": [int(v) for v in r],
                }
            )
        )
    return EXIT_OK


def _theta_or_zero(text, dim: int) -> Quasimomentum:
    return Quasimomentum.parse(text) if text else Quasimomentum.zero(dim)


def _cmd_spectrum(args) -> int:
    lat = _load_lattice_arg(args.lattice)
    theta = _theta_or_zero(args.theta, lat.dim)
    slc = enumerate_spectrum(lat, theta, args.energy, args.cutoff)
    _emit_rows(
        ["value", "multiplicity"],
        [(float(v), int(m)) for v, m in zip(slc.values, slc.mults)],
        args.out,
    )
    return EXIT_OK


def _cmd_gaps(args) -> int:
    lat = _load_lattice_arg(args.lattice)
    theta = _theta_or_zero(args.theta, lat.dim)
    if args.growth:
        dual = dual_basis(lat)
        sigma, q, l, r = rational_structure(dual, theta)
        table = max_gap_growth(q, theta, [int(v) for v in args.growth.split(",")])
        _emit_rows(["N", "max_gap"], [(n, g) for n, g in table], args.out)
        return EXIT_OK
    if args.cutoff is None:
        raise SchemaError("gaps requires --cutoff (or --growth for the growth table)")
    slc = enumerate_spectrum(lat, theta, args.energy, args.cutoff)
    gaps = find_gaps(slc, args.min_gap, full_axis=args.full_axis)
    _emit_rows(["lo", "hi", "length"], [(g.lo, g.hi, g.length) for g in gaps], args.out)
    return EXIT_OK


def _cmd_density(args) -> int:
    q = QuadraticForm(G=_parse_gram(args.gram))
    count, ratio = density_scan(q, args.N)
    print(json.dumps({"count": count, "ratio": ratio}))
    return EXIT_OK


def _cmd_gelfand(args) -> int:
    lat = _load_lattice_arg(args.lattice)
    if args.subcommand == "forward":
        u = load_field(args.u, lat)
        theta = Quasimomentum.parse(args.theta)
        fiber = gelfand_forward(u, theta, args.lmax)
        np.savez(
            args.out,
            data=fiber.data,
            mu=fiber.theta.coeffs,
            points_per_cell=fiber.points_per_cell,
            t_start=fiber.t_start,
            t_end=fiber.t_end,
            tail_bound=fiber.tail_bound,
        )
        print(json.dumps({"tail_bound": fiber.tail_bound}))
        return EXIT_OK
    if args.subcommand == "inverse":
        from .fibers import BlochFiber

        fibers = []
        for path in args.fibers:
            with np.load(path) as data:
                fibers.append(
                    BlochFiber(
                        theta=Quasimomentum(coeffs=data["mu"]),
                        lattice=lat,
                        points_per_cell=int(data["points_per_cell"]),
                        t_start=float(data["t_start"]),
                        t_end=float(data["t_end"]),
                        data=data["data"],
                        tail_bound=float(data["tail_bound"]),
                    )
                )
        u = gelfand_inverse(fibers, lat)
        save_field(u, args.out)
        return EXIT_OK
    if args.subcommand == "roundtrip":
        u = load_field(args.u, lat)
        fibers = [gelfand_forward(u, theta, 10**6) for theta in theta_grid(lat, args.theta_points)]
        back = gelfand_inverse(fibers, lat)
        if back.values.shape != u.values.shape or back.cells_lo != u.cells_lo:
            raise SchemaError(
                "round trip box mismatch: theta grid does not resolve the field box"
            )
        err = float(np.max(np.abs(back.values - u.values)))
        print(json.dumps({"max_error": err}))
        return EXIT_OK
    u = load_field(args.u, lat)
    theta = Quasimomentum.parse(args.theta)
    fiber = gelfand_forward(u, theta, args.lmax)
    v = load_field(args.v, lat) if args.v else None
    res = fiber_residual(fiber, v, args.energy)
    t = fiber.t_grid[1:-1]
    _emit_rows(["t", "residual"], list(zip(t.tolist(), res.tolist())), args.out)
    return EXIT_OK


def _report_dir(out_dir, reports, prefix: str) -> None:
    if not out_dir:
        return
    from .svgplot import PlotTable, emit_plots

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{prefix}_reports.json", [r.to_json() for r in reports])
    rows = [
        (i, r.lhs, r.rhs, r.margin, r.quad_err, str(r.passed))
        for i, r in enumerate(reports)
    ]
    write_csv(out / f"{prefix}_summary.csv", ["case", "lhs", "rhs", "margin", "quad_err", "passed"], rows)
    if len(reports) >= 2:
        emit_plots(
            [
                PlotTable(
                    name=f"{prefix}_margins",
                    xs=tuple(float(i) for i in range(len(reports))),
                    ys=tuple(r.margin for r in reports),
                    kind="line",
                    x_label="case",
                    y_label="margin",
                )
            ],
            out,
        )


def _cmd_carleman(args) -> int:
    if args.subcommand == "verify43":
        wl = args.weight_lambda if args.weight_lambda is not None else args.eps ** (-4.0 / 3.0)

        def run_case_43(i):
            profile, _ = bump_case_43(args.seed, i, args.eps, wl, max_modes=args.modes)
            return carl.verify_carleman_43(profile, wl, args.eps)

        reports = parallel_map(run_case_43, range(args.ensemble))
        _report_dir(args.out_dir, reports, "verify43")
        for r in reports:
            print(json.dumps(r.to_json()))
        return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION
    if args.subcommand == "verify-gap":

        def run_case_gap(i):
            if args.eigs:
                eigs = _parse_floats(args.eigs)
                t = uniform_grid(4.0, 4097)
                profile = bump_profile((0.5, 3.0), [(mu, 1.0) for mu in eigs], t, alpha=args.alpha)
                a, b, alpha = args.a, args.b, args.alpha
            else:
                profile, a, b, alpha = bump_case_gap(args.seed, i)
            return carl.verify_carleman_gap(profile, a, b, alpha, force=args.force)

        reports = parallel_map(run_case_gap, range(args.ensemble))
        _report_dir(args.out_dir, reports, "verify_gap")
        for r in reports:
            print(json.dumps(r.to_json()))
        if args.force:
            return EXIT_OK
        return EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION
    if args.subcommand == "system-check":
        eigs = _parse_floats(args.eigs)
        t = uniform_grid(4.0, 4097)
        profile = bump_profile((0.5, 3.0), [(mu, 1.0) for mu in eigs], t)
        report = carl.first_order_system_check(profile, args.a, args.b)
        print(json.dumps(report.to_json()))
        return EXIT_OK if report.certificates_ok else EXIT_VIOLATION
    s_list = _parse_floats(args.s_list)
    codes = []
    for i in range(args.ensemble):
        profile, beta = solution_like_profile(args.seed, i)
        report = carl.ellreg_bound_check(profile, args.eps, s_list)
        print(json.dumps(report.to_json()))
        codes.append(EXIT_OK)
    return strictest_exit_code(codes)


def _cmd_evolve(args) -> int:
    eigs = _parse_floats(args.eigs)
    if args.perturbation == "zero":
        pert = evo.PerturbationFamily.zero()
    else:
        bound = (
            evo.constant_bound(args.beta)
            if args.bound == "const"
            else evo.exponential_bound(args.beta)
        )
        maker = (
            evo.PerturbationFamily.diagonal
            if args.perturbation == "diagonal"
            else evo.PerturbationFamily.full
        )
        pert = maker(bound, beta=args.beta, decays=(args.bound == "exp"), seed=args.seed)
    pos = [mu for mu in eigs if mu > 0]
    T = args.T if args.T else (30.0 / min(np.sqrt(pos)) if pos else 30.0)
    g = _parse_floats(args.boundary) if args.boundary else [1.0] * len(eigs)
    result = evo.solve_decaying(eigs, pert, T, g)
    window = evo.default_tail_window(T)
    est = evo.decay_rate_estimate(result.profile, window)
    if args.out:
        t = result.profile.t_grid
        norms = result.profile.norms()
        write_csv(args.out, ["t", "norm"], list(zip(t.tolist(), norms.tolist())))
    if args.svg:
        from pathlib import Path as _Path

        from .svgplot import PlotTable, render_svg

        t = result.profile.t_grid
        lognorm = np.log(np.maximum(result.profile.norms(), 1e-300))
        table = PlotTable(
            name=_Path(args.svg).stem, xs=tuple(t.tolist()), ys=tuple(lognorm.tolist()),
            kind="line", x_label="t", y_label="log ||phi||",
        )
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(render_svg(table))
    print(
        json.dumps(
            {
                "solver_residual": result.residual,
                "growth": result.growth,
                "decay": est.to_json(),
            }
        )
    )
    return EXIT_OK


def _cmd_decay(args) -> int:
    rows = np.loadtxt(args.input, delimiter=",", skiprows=1, ndmin=2)
    t, norms = rows[:, 0], rows[:, 1]
    window = tuple(_parse_floats(args.window))
    profile = SpectralProfile(
        eigs=np.array([0.0]), t_grid=t, coeffs=norms[None, :].astype(complex)
    )
    est = evo.decay_rate_estimate(profile, window)
    print(json.dumps(est.to_json()))
    return EXIT_OK


def _cmd_counterexample(args) -> int:
    rows = evo.harmonic_counterexample(_parse_floats(args.lambdas), args.T, args.X)
    table = [
        (
            r.weight_rate,
            r.t_used,
            r.partial_integral,
            r.tail_bound if r.tail_bound is not None else float("nan"),
            r.growth_ratio,
            r.indicator,
        )
        for r in rows
    ]
    _emit_rows(
        ["weight_rate", "t_used", "partial_integral", "tail_bound", "growth_ratio", "indicator"],
        table,
        args.out,
    )
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.out_dir:
        cfg = RunConfig(
            command=cfg.command,
            params=cfg.params,
            seed=cfg.seed,
            out_dir=args.out_dir,
            threads=args.threads if args.threads is not None else cfg.threads,
            tolerances=cfg.tolerances,
        )
    elif args.threads is not None:
        cfg = RunConfig(
            command=cfg.command,
            params=cfg.params,
            seed=cfg.seed,
            out_dir=cfg.out_dir,
            threads=args.threads,
            tolerances=cfg.tolerances,
        )
    manifest, code = run_pipeline(cfg)
    print(json.dumps({"verdict_hash": manifest.verdict_hash(), "exit_code": code}))
    return code


_HANDLERS = {
    "lattice": _cmd_lattice,
    "spectrum": _cmd_spectrum,
    "gaps": _cmd_gaps,
    "density": _cmd_density,
    "gelfand": _cmd_gelfand,
    "carleman": _cmd_carleman,
    "evolve": _cmd_evolve,
    "decay": _cmd_decay,
    "counterexample": _cmd_counterexample,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except HalfspaceDecayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
