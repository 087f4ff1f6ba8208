"""Command-line interface: ``polycycle <command> --family FILE ...``.

Exit codes: 0 success, 2 flagged boundary zeros (after the optional
perturbation retry), 3 transport or tracing failure, 64 usage error or
malformed family file.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bruteforce import brute_force_limit_cycles
from .config import ConfigError, FamilyConfig, config_hash, load_family, parse_lambda_args
from .counter import DomainError, WindingConfig, build_domain, winding
from .family import CrossSection, SaddleError
from .hamiltonian import (HamiltonianError, abelian_integral, picard_lefschetz_imaginary,
                          poincare_pontryagin_check)
from .locus import TraceError, trace_locus
from .report import domain_svg, svg_curves, write_csv, write_json, write_svg
from .transport import HolonomyMap, TransportError, dulac, transport_tolerances

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FLAGGED", "EXIT_TRANSPORT", "EXIT_USAGE"]

EXIT_OK, EXIT_FLAGGED, EXIT_TRANSPORT, EXIT_USAGE = 0, 2, 3, 64
LOG_ENV = "POLYCYCLE_LOG_LEVEL"

logger = logging.getLogger("polycycle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, *, radius: bool = True, k: bool = False) -> None:
    p.add_argument("--family", required=True, help="YAML family file")
    p.add_argument("--lambda", dest="lambdas", action="append", default=[],
                   help="parameter values 'l1,l2,...'; any component may be a sweep a:b:n "
                        "(repeatable; default: the values shipped in the family file)")
    if radius:
        p.add_argument("--radius", type=float, help="radius R of the counting/tracing disc")
    if k:
        p.add_argument("--k", type=int, action="append", help="locus index (repeatable; default +-1)")
    p.add_argument("--tol-transport", type=float, default=1e-12, help="integrator relative tolerance")
    p.add_argument("--tol-corrector", type=float, default=1e-11, help="locus corrector tolerance")
    p.add_argument("--out-dir", default="polycycle-out", help="directory for reports")
    p.add_argument("--seed", type=int, default=0, help="seed for random sample grids")
    p.add_argument("--svg", dest="svg", action="store_true", default=True, help="write SVG figures")
    p.add_argument("--no-svg", dest="svg", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="polycycle", description="Zero counting for displacement maps of polycycles.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="winding-number bound on the number of limit cycles")
    _common(p)
    p.add_argument("--loop", choices=["one-saddle", "two-saddle"],
                   help="loop kind (must match the family file)")
    p.add_argument("--perturb", type=float, help="shift psi by this constant when the zero guard trips")
    p.add_argument("--check-bruteforce", action="store_true",
                   help="also count real cycles by direct return-map integration")

    p = sub.add_parser("trace", help="trace the loci {h^k(z) = conj z} on a chart section")
    _common(p, k=True)
    p.add_argument("--corner", type=int, default=0, help="saddle index in the family file")

    p = sub.add_parser("dulac", help="evaluate the Dulac map on a (rho, phi) grid")
    _common(p, radius=False)
    p.add_argument("--corner", type=int, default=0)
    p.add_argument("--rho", type=float, nargs=2, default=(1e-3, 1e-1), metavar=("MIN", "MAX"))
    p.add_argument("--n-rho", type=int, default=9)
    p.add_argument("--phi", type=float, nargs=2, default=(-2 * np.pi, 2 * np.pi), metavar=("MIN", "MAX"))
    p.add_argument("--n-phi", type=int, default=9)
    p.add_argument("--random-points", type=int, default=0, help="extra random (rho, phi) samples")

    p = sub.add_parser("holonomy", help="k-fold holonomy of a separatrix and its derivative at 0")
    _common(p, radius=False, k=True)
    p.add_argument("--corner", type=int, default=0)
    p.add_argument("--section", choices=["sigma", "tau"], default="sigma")
    p.add_argument("--rho", type=float, nargs=2, default=(1e-3, 1e-1), metavar=("MIN", "MAX"))
    p.add_argument("--n-rho", type=int, default=5)

    p = sub.add_parser("abelian", help="Abelian integrals, Picard-Lefschetz and Poincare-Pontryagin checks")
    _common(p, radius=False)
    p.add_argument("--h", dest="hs", action="append", default=[],
                   help="energy values (repeatable, sweep a:b:n allowed)")
    p.add_argument("--picard-lefschetz", action="store_true",
                   help="cross-check Im I+ on the given h past the saddle value")
    p.add_argument("--pontryagin", type=float, action="append", default=[], metavar="L1",
                   help="compare psi/l1 with I(h) for this l1 (repeatable)")
    p.add_argument("--omega", nargs=2, metavar=("A", "B"),
                   help="override the one-form A dx + B dy of the family file")

    p = sub.add_parser("bruteforce", help="real limit cycles by return-map integration")
    _common(p)
    p.add_argument("--window", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--n", type=int, help="number of samples in the window")
    return ap


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _lambdas(args, cfg: FamilyConfig) -> list:
    if args.lambdas:
        return parse_lambda_args(args.lambdas, cfg.family.n_params)
    if cfg.lambdas:
        return cfg.lambdas
    if cfg.family.n_params == 0:
        return [[]]
    raise ConfigError("no --lambda given and the family file ships no values")


def _radius(args, cfg: FamilyConfig) -> float:
    R = getattr(args, "radius", None) or cfg.radius
    if R is None or R <= 0:
        raise ConfigError("a positive --radius is required")
    return float(R)


def _header(args, cfg: FamilyConfig, command: str) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("out_dir", "svg", "func")}
    return {
        "command": command,
        "family": cfg.name,
        "family_file": str(args.family),
        "config_hash": config_hash(cfg.raw, opts),
        "options": opts,
        "tolerances": {"transport_rtol": args.tol_transport, "corrector": args.tol_corrector},
        "version": __version__,
    }


def _out(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _bruteforce_for(cfg: FamilyConfig, lam, psi=None, window=None, n=None):
    bf = cfg.bruteforce
    sign = 1.0
    if isinstance(bf.get("section"), dict):
        d = bf["section"]
        direction = np.asarray(d["direction"], float)
        section = CrossSection(np.asarray(d["point"], float), float(d.get("radius", 1.0)), None, "line",
                               direction / np.hypot(*direction), name="bruteforce")
    else:
        if psi is None:
            psi = cfg.build_displacement(lam)
        section = psi.meta["sigma"]
        if psi.kind == "one-saddle":
            sign = psi.meta["sign"]
    if window is None:
        window = bf.get("window")
    if window is None:
        raise ConfigError("brute force needs a window (--window or bruteforce.window)")
    lo, hi = float(window[0]), float(window[1])
    if psi is not None and psi.punctures:
        lo = max(lo, max(psi.punctures) + 1e-6)
    res = brute_force_limit_cycles(cfg.family, lam, section, (lo, hi), sign=sign,
                                   n=int(n or bf.get("n", 41)), spacing=bf.get("spacing", "linear"))
    return res, section


def cmd_count(args, cfg: FamilyConfig) -> int:
    if cfg.loop is None:
        raise ConfigError(f"family '{cfg.name}' declares no loop")
    if args.loop and args.loop != cfg.loop.kind:
        raise ConfigError(f"--loop {args.loop} does not match the family loop '{cfg.loop.kind}'")
    R = _radius(args, cfg)
    out = _out(args)
    code = EXIT_OK
    for i, lam in enumerate(_lambdas(args, cfg)):
        psi = cfg.build_displacement(lam)
        dom = build_domain(psi, R, trace_kw={"tol": args.tol_corrector})
        rep = winding(psi, dom, WindingConfig(perturb=args.perturb))
        payload = _header(args, cfg, "count")
        payload.update({
            "lambda": lam,
            "loop": psi.kind,
            "alphas": [c.alpha for c in psi.corners],
            "punctures": psi.punctures,
            "report": rep.to_dict(),
            "errors": {
                "integrality_defect": rep.integrality_defect,
                "half_density_variation_gap": abs(rep.total_variation - rep.half_density_variation),
                "domain_closure_gap": dom.closure_gap(),
                "trace_max_residual": max(float(np.max(t.residuals)) for t in dom.traces.values()),
            },
            "traces": {f"{c}:{k}": {"status": t.status, "tangent": t.tangent_at_origin,
                                    "expected": t.expected_angle, "reached": t.reached}
                       for (c, k), t in sorted(dom.traces.items())},
        })
        if args.check_bruteforce:
            bf, _ = _bruteforce_for(cfg, lam, psi, window=(1e-4, 0.999 * R))
            payload["bruteforce"] = {"roots": bf.roots, "degenerate": bf.degenerate, "flags": bf.flags,
                                     "window": bf.window}
        write_json(out / f"count_{i:03d}.json", payload)
        b = rep.boundary
        write_csv(out / f"boundary_{i:03d}.csv", ["segment", "z_re", "z_im", "psi_re", "psi_im"],
                  ([b["labels"][int(s)], float(z.real), float(z.imag), float(v.real), float(v.imag)]
                   for s, z, v in zip(b["segment"], b["z"], b["psi"])))
        if args.svg:
            write_svg(out / f"domain_{i:03d}.svg",
                      domain_svg(dom, f"{cfg.name} lambda={lam} count_bound={rep.count_bound}"))
        print(f"lambda={lam} kind={psi.kind} count_bound={rep.count_bound} status={rep.status}")
        for note in rep.notes:
            print(f"  note: {note}", file=sys.stderr)
        if rep.status != "ok":
            code = max(code, EXIT_FLAGGED)
    return code


def cmd_trace(args, cfg: FamilyConfig) -> int:
    out = _out(args)
    ks = args.k or [1, -1]
    for i, lam in enumerate(_lambdas(args, cfg)):
        ch, sigma, _ = cfg.build_chart(lam, args.corner)
        R = min(getattr(args, "radius", None) or cfg.radius or sigma.radius, sigma.radius)
        info = {}
        curves = []
        for k in ks:
            tr = trace_locus(cfg.family, lam, ch, sigma, k, R, tol=args.tol_corrector)
            tr.to_csv(out / f"trace_{i:03d}_k{k:+d}.csv")
            dev = float(np.angle(np.exp(1j * (tr.tangent_at_origin - tr.expected_angle))))
            info[str(k)] = {"status": tr.status, "tangent": tr.tangent_at_origin,
                            "expected": tr.expected_angle, "tangent_error": abs(dev),
                            "reached": tr.reached, "points": len(tr.points),
                            "max_residual": float(np.max(tr.residuals)),
                            "max_condition": tr.max_condition}
            curves.append((f"k={k}", tr.points))
            print(f"lambda={lam} k={k} status={tr.status} tangent={tr.tangent_at_origin:.6f} "
                  f"expected={tr.expected_angle:.6f}")
        payload = _header(args, cfg, "trace")
        payload.update({"lambda": lam, "alpha": ch.alpha, "radius": R, "traces": info})
        write_json(out / f"trace_{i:03d}.json", payload)
        if args.svg:
            write_svg(out / f"trace_{i:03d}.svg",
                      svg_curves(curves, [("0", 0j)], title=f"{cfg.name} lambda={lam} alpha={ch.alpha:.6g}"))
    return EXIT_OK


def cmd_dulac(args, cfg: FamilyConfig) -> int:
    out = _out(args)
    rng = np.random.default_rng(args.seed)
    for i, lam in enumerate(_lambdas(args, cfg)):
        ch, sigma, tau = cfg.build_chart(lam, args.corner)
        rho = np.geomspace(args.rho[0], args.rho[1], args.n_rho)
        phi = np.linspace(args.phi[0], args.phi[1], args.n_phi)
        Rg, Pg = np.meshgrid(rho, phi, indexing="ij")
        rr, pp = Rg.ravel(), Pg.ravel()
        if args.random_points:
            lr = rng.uniform(np.log(args.rho[0]), np.log(args.rho[1]), args.random_points)
            rr = np.concatenate([rr, np.exp(lr)])
            pp = np.concatenate([pp, rng.uniform(args.phi[0], args.phi[1], args.random_points)])
        res = dulac(cfg.family, lam, ch, sigma, tau, rr, pp)
        if not res.ok:
            raise TransportError(res.status, "Dulac map")
        a = ch.alpha
        c1, c2 = float(np.real(sigma.anchor)), float(np.real(tau.anchor))
        model = c1 * c2 ** (-a) * np.exp(a * (np.log(rr) + 1j * pp))
        rel = np.abs(res.endpoint - model) / np.abs(model)
        write_csv(out / f"dulac_{i:03d}.csv", ["rho", "phi", "D_re", "D_im", "power_re", "power_im"],
                  ([float(r), float(p), float(d.real), float(d.imag), float(m.real), float(m.imag)]
                   for r, p, d, m in zip(rr, pp, res.endpoint, model)))
        payload = _header(args, cfg, "dulac")
        payload.update({"lambda": lam, "alpha": a, "c1": c1, "c2": c2,
                        "errors": {"transport_estimate": res.error_estimate,
                                   "max_rel_dev_from_power_law": float(np.max(rel))}})
        write_json(out / f"dulac_{i:03d}.json", payload)
        print(f"lambda={lam} alpha={a:.12g} max rel. deviation from c1 c2^-a z^a: {np.max(rel):.3e}")
    return EXIT_OK


def cmd_holonomy(args, cfg: FamilyConfig) -> int:
    out = _out(args)
    ks = args.k or [1]
    for i, lam in enumerate(_lambdas(args, cfg)):
        ch, sigma, tau = cfg.build_chart(lam, args.corner)
        sec = sigma if args.section == "sigma" else tau
        rho = np.geomspace(args.rho[0], args.rho[1], args.n_rho)
        rows, info = [], {}
        for k in ks:
            h = HolonomyMap(cfg.family, lam, ch, sec, k)
            v = h(rho.astype(complex))
            d0 = complex(h.derivative(np.array([0.0]))[0])
            ratio = ch.alpha if args.section == "sigma" else 1.0 / ch.alpha
            ref = np.exp(-2j * np.pi * k / ratio)
            info[str(k)] = {"derivative_at_0": d0, "linear_reference": ref, "deviation": abs(d0 - ref)}
            rows += [[k, float(r), float(w.real), float(w.imag)] for r, w in zip(rho, v)]
            print(f"lambda={lam} k={k} h'(0)={d0:.10f} reference={ref:.10f}")
        write_csv(out / f"holonomy_{i:03d}.csv", ["k", "z", "h_re", "h_im"], rows)
        payload = _header(args, cfg, "holonomy")
        payload.update({"lambda": lam, "alpha": ch.alpha, "section": args.section, "holonomy": info})
        write_json(out / f"holonomy_{i:03d}.json", payload)
    return EXIT_OK


def _values(texts) -> list[float]:
    out = []
    for t in texts:
        out += [v[0] for v in parse_lambda_args([t], 1)]
    return out


def cmd_abelian(args, cfg: FamilyConfig) -> int:
    setup = cfg.hamiltonian
    if setup is None:
        raise ConfigError(f"family '{cfg.name}' declares no hamiltonian block")
    if args.omega:
        setup = replace(setup, A=args.omega[0], B=args.omega[1])
    out = _out(args)
    lam = _lambdas(args, cfg)[0] if (args.lambdas or cfg.lambdas) else [1.0]
    hs = _values(args.hs)
    if not hs:
        raise ConfigError("give energy values with --h")
    payload = _header(args, cfg, "abelian")
    payload["lambda"] = lam
    rows = []
    for h in hs:
        I = abelian_integral(setup, lam, h)
        rows.append([h, float(I.real), float(I.imag)])
        print(f"h={h:.6g} I={I.real:.15g}{I.imag:+.3g}i")
    write_csv(out / "abelian.csv", ["h", "re_I", "im_I"], rows)
    payload["integrals"] = rows
    code = EXIT_OK
    if args.picard_lefschetz:
        far = [h for h in hs if not setup.on_oval_side(h) and h != 0]
        res = picard_lefschetz_imaginary(setup, lam, far)
        payload["picard_lefschetz"] = [r.__dict__ for r in res]
        for r in res:
            print(f"h={r.h:.6g} Im I+ continuation={r.im_continuation:.15g} vanishing cycle="
                  f"{r.im_vanishing:.15g} disagreement={r.disagreement:.2e}")
        if not all(r.ok for r in res):
            code = EXIT_FLAGGED
    if args.pontryagin:
        on = [h for h in hs if setup.on_oval_side(h)]
        rep = poincare_pontryagin_check(setup, args.pontryagin, on, other_params=lam[1:])
        payload["poincare_pontryagin"] = rep
        for r in rep["rows"]:
            print(f"l1={r['lambda1']:.3g} max relative deviation={r['max_rel_deviation']:.3e}")
    write_json(out / "abelian.json", payload)
    if args.svg and len(rows) > 1:
        curve = np.array([complex(r[0], r[1]) for r in rows])
        write_svg(out / "abelian.svg", svg_curves([("Re I(h)", curve)], title=f"{cfg.name}: (h, Re I)"))
    return code


def cmd_bruteforce(args, cfg: FamilyConfig) -> int:
    out = _out(args)
    for i, lam in enumerate(_lambdas(args, cfg)):
        window = args.window
        if window is None and args.radius:
            window = (1e-4, args.radius)
        psi = None if isinstance(cfg.bruteforce.get("section"), dict) else cfg.build_displacement(lam)
        res, _ = _bruteforce_for(cfg, lam, psi, window=window, n=args.n)
        payload = _header(args, cfg, "bruteforce")
        payload.update({"lambda": lam, "roots": res.roots, "window": res.window,
                        "degenerate": res.degenerate, "flags": res.flags})
        write_json(out / f"bruteforce_{i:03d}.json", payload)
        print(f"lambda={lam} roots={res.roots} degenerate={res.degenerate}")
    return EXIT_OK


COMMANDS = {"count": cmd_count, "trace": cmd_trace, "dulac": cmd_dulac, "holonomy": cmd_holonomy,
            "abelian": cmd_abelian, "bruteforce": cmd_bruteforce}


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        cfg = load_family(args.family)
        with transport_tolerances(rtol=args.tol_transport):
            return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"polycycle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, TraceError, SaddleError, DomainError, HamiltonianError) as exc:
        print(f"polycycle: failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
