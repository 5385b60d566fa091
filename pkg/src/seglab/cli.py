"""Batch driver: config-file runs, property verification, barrier dumps.

Config files are flat ``section.key = value`` text with comma lists and #
comments.  Artifacts are plain CSV, written deterministically so identical
configs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import analysis
from .barriers import (
    REPORT_HEADER,
    BarrierSpec,
    min_alpha,
    subsolution_barrier,
    supersolution_barrier,
    verify_barrier,
)
from .geometry import (
    BoundarySegment,
    DomainMask,
    Grid,
    ScalarField,
    build_boundary_data,
    build_disk_domain,
    dump_field,
)
from .pucci import Ellipticity, run_algebra_suite
from .solver import LOG_HEADER, SolveConfig, SystemState, epsilon_continuation

__all__ = ["main", "RunConfig", "ConfigError", "parse_config", "load_run_config"]

_ALGEBRA_TOL = 1e-10


class ConfigError(Exception):
    """Config problem tied to a source line (0 = file level)."""

    def __init__(self, line: int, message: str):
        super().__init__(message)
        self.line = line
        self.message = message

    def __str__(self) -> str:
        return f"config:{self.line}: {self.message}"


_KNOWN_KEYS = {
    "domain.radius",
    "domain.h",
    "domain.center",
    "populations.d",
    "populations.arcs",
    "populations.exponent",
    "ellipticity.lam",
    "ellipticity.Lam",
    "epsilon.schedule",
    "solver.inner_tol",
    "solver.outer_tol",
    "solver.max_inner",
    "solver.max_outer",
    "solver.cfl_safety",
    "solver.damping",
    "diagnostics.enable",
    "diagnostics.delta",
    "diagnostics.holder_depth",
    "diagnostics.growth_radii",
    "diagnostics.acf_radii",
    "output.dir",
    "seed",
}

_DIAGNOSTICS = ("overlap", "subharmonicity", "limit", "holder", "growth", "lipschitz", "acf")


@dataclass(frozen=True)
class RunConfig:
    radius: float
    h: float
    center: tuple[float, float]
    segments: tuple[BoundarySegment, ...]
    d: int
    exponent: float
    ell: Ellipticity
    schedule: tuple[float, ...]
    solve: SolveConfig
    diagnostics: tuple[str, ...]
    delta: float | None
    holder_depth: int
    growth_radii_h: tuple[float, ...]  # in units of h
    acf_radii: tuple[float, ...] | None
    out_dir: Path
    seed: int


def parse_config(text: str) -> dict[str, tuple[str, int]]:
    """Flat key = value lines; returns {key: (raw value, line number)}."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected key = value, got {raw.strip()!r}")
        key, val = line.split("=", 1)
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(lineno, f"unknown key {key!r}")
        if key in out:
            raise ConfigError(lineno, f"duplicate key {key!r} (first on line {out[key][1]})")
        out[key] = (val.strip(), lineno)
    return out


_REQUIRED = object()


class _Getter:
    def __init__(self, raw: dict[str, tuple[str, int]]):
        self.raw = raw

    def line(self, key: str) -> int:
        return self.raw[key][1] if key in self.raw else 0

    def _fetch(self, key: str, default):
        if key in self.raw:
            return self.raw[key][0]
        if default is _REQUIRED:
            raise ConfigError(0, f"missing required key {key!r}")
        return _REQUIRED  # caller substitutes its default

    def floatv(self, key: str, default=_REQUIRED) -> float:
        s = self._fetch(key, default)
        if s is _REQUIRED:
            return default
        try:
            return float(s)
        except ValueError:
            raise ConfigError(self.line(key), f"{key}: not a number: {s!r}") from None

    def intv(self, key: str, default=_REQUIRED) -> int:
        s = self._fetch(key, default)
        if s is _REQUIRED:
            return default
        try:
            return int(s)
        except ValueError:
            raise ConfigError(self.line(key), f"{key}: not an integer: {s!r}") from None

    def floats(self, key: str, default=_REQUIRED) -> tuple[float, ...]:
        s = self._fetch(key, default)
        if s is _REQUIRED:
            return default
        try:
            return tuple(float(p.strip()) for p in s.split(",") if p.strip())
        except ValueError:
            raise ConfigError(self.line(key), f"{key}: bad number list: {s!r}") from None

    def strs(self, key: str, default=_REQUIRED) -> tuple[str, ...]:
        s = self._fetch(key, default)
        if s is _REQUIRED:
            return default
        return tuple(p.strip() for p in s.split(",") if p.strip())

    def strv(self, key: str, default=_REQUIRED) -> str:
        s = self._fetch(key, default)
        return default if s is _REQUIRED else s


def load_run_config(path: Path) -> RunConfig:
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(0, f"cannot read {path}: {e}") from None
    raw = parse_config(text)
    g = _Getter(raw)

    radius = g.floatv("domain.radius", 1.0)
    h = g.floatv("domain.h", 1.0 / 64.0)
    center_vals = g.floats("domain.center", (0.0, 0.0))
    if len(center_vals) != 2:
        raise ConfigError(g.line("domain.center"), "domain.center needs two numbers")
    d = g.intv("populations.d", 2)
    if d < 1:
        raise ConfigError(g.line("populations.d"), f"populations.d must be >= 1, got {d}")

    default_arcs = None
    if "populations.arcs" not in raw:
        # evenly spaced disjoint arcs, one per population, amplitude 1
        width = 2.0 * math.pi / d
        default_arcs = tuple(
            f"{i}:{i * width:.17g}:{(i + 1) * width:.17g}:1" for i in range(d)
        )
    arc_specs = g.strs("populations.arcs", default_arcs)
    segments = []
    for part in arc_specs:
        bits = part.split(":")
        if len(bits) != 4:
            raise ConfigError(
                g.line("populations.arcs"),
                f"arc {part!r}: expected population:theta0:theta1:amplitude",
            )
        try:
            pop = int(bits[0])
            t0, t1, amp = (float(b) for b in bits[1:])
        except ValueError:
            raise ConfigError(g.line("populations.arcs"), f"arc {part!r}: bad number") from None
        if not 0 <= pop < d:
            raise ConfigError(
                g.line("populations.arcs"), f"arc {part!r}: population out of range 0..{d-1}"
            )
        try:
            segments.append(BoundarySegment(t0, t1, amp, pop))
        except ValueError as e:
            raise ConfigError(g.line("populations.arcs"), f"arc {part!r}: {e}") from None
    for sa in segments:
        for sb in segments:
            if sa.population < sb.population and max(sa.theta0, sb.theta0) < min(
                sa.theta1, sb.theta1
            ) - 1e-15:
                raise ConfigError(
                    g.line("populations.arcs"),
                    f"arcs for populations {sa.population} and {sb.population} overlap",
                )

    exponent = g.floatv("populations.exponent", 1.0)
    try:
        ell = Ellipticity(g.floatv("ellipticity.lam", 1.0), g.floatv("ellipticity.Lam", 2.0))
    except ValueError as e:
        raise ConfigError(g.line("ellipticity.lam") or g.line("ellipticity.Lam"), str(e)) from None

    schedule = g.floats("epsilon.schedule", (1.0,))
    try:
        solve = SolveConfig(
            inner_tol=g.floatv("solver.inner_tol", 2e-7),
            outer_tol=g.floatv("solver.outer_tol", 1e-6),
            max_inner=g.intv("solver.max_inner", 400_000),
            max_outer=g.intv("solver.max_outer", 200),
            cfl_safety=g.floatv("solver.cfl_safety", 0.9),
            damping=g.floatv("solver.damping", 1.0),
        )
    except ValueError as e:
        raise ConfigError(0, f"solver settings: {e}") from None

    diags = g.strs("diagnostics.enable", ())
    for name in diags:
        if name not in _DIAGNOSTICS:
            raise ConfigError(
                g.line("diagnostics.enable"),
                f"unknown diagnostic {name!r}; known: {', '.join(_DIAGNOSTICS)}",
            )
    diags = tuple(name for name in _DIAGNOSTICS if name in diags)

    delta = g.floatv("diagnostics.delta", math.nan)
    out_dir = Path(os.environ.get("SEGLAB_OUT") or g.strv("output.dir", "."))
    return RunConfig(
        radius=radius,
        h=h,
        center=(center_vals[0], center_vals[1]),
        segments=tuple(segments),
        d=d,
        exponent=exponent,
        ell=ell,
        schedule=schedule,
        solve=solve,
        diagnostics=diags,
        delta=None if math.isnan(delta) else delta,
        holder_depth=g.intv("diagnostics.holder_depth", 5),
        growth_radii_h=g.floats("diagnostics.growth_radii", (4.0, 8.0, 16.0, 32.0)),
        acf_radii=g.floats("diagnostics.acf_radii", None),
        out_dir=out_dir,
        seed=g.intv("seed", 0),
    )


def interface_center(state: SystemState, mask: DomainMask, delta: float) -> tuple[int, int]:
    """Node where the two leading populations balance, nearest the domain
    center among candidates carrying real mass; the domain center node for a
    single population."""
    grid = state.grid
    ci = int(round((mask.center[0] - grid.origin[0]) / grid.h))
    cj = int(round((mask.center[1] - grid.origin[1]) / grid.h))
    if state.d < 2:
        return ci, cj
    u = state.fields[0].values
    v = state.fields[1].values
    peak = np.maximum(u, v)
    cand = mask.interior & (peak > delta)
    if not cand.any():
        return ci, cj
    gap = np.abs(u - v)
    best = None
    ii, jj = np.nonzero(cand)
    d2 = (ii - ci) ** 2 + (jj - cj) ** 2
    order = np.lexsort((jj, ii, d2, gap[cand]))
    k = order[0]
    best = (int(ii[k]), int(jj[k]))
    return best


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _cmd_run(config_path: str) -> int:
    try:
        cfg = load_run_config(Path(config_path))
        grid, mask = build_disk_domain(cfg.radius, cfg.h, cfg.center)
        phis = build_boundary_data(
            mask, list(cfg.segments), exponent=cfg.exponent, populations=cfg.d
        )
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config:0: {e}", file=sys.stderr)
        return 2

    out = cfg.out_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        print(f"config:0: output directory {out} not writable: {e}", file=sys.stderr)
        return 2

    log: list = []
    states = epsilon_continuation(phis, list(cfg.schedule), cfg.ell, mask, cfg.solve, log=log)

    summary: list[tuple[str, str, str]] = []
    diag_errors: list[tuple[str, str]] = []
    # field dumps
    for k, st in enumerate(states):
        for i, f in enumerate(st.fields):
            name = f"field_e{k}_p{i}.csv"
            dump_field(f, mask, out / name)
            summary.append((name, f"sup_eps_{_fmt(st.epsilon)}", _fmt(float(f.values.max()))))
    # convergence log
    rows = [LOG_HEADER]
    rows += [f"{_fmt(e)},{o},{c},{_fmt(r)},{n}" for (e, o, c, r, n) in log]
    _write(out / "convergence_log.csv", "\n".join(rows) + "\n")
    for st in states:
        summary.append(
            ("convergence_log.csv", f"residual_eps_{_fmt(st.epsilon)}", _fmt(max(st.residuals)))
        )

    phi_sup = max(float(f.values.max()) for f in phis) or 1.0
    delta = cfg.delta if cfg.delta is not None else analysis.default_support_delta(
        cfg.solve.outer_tol, phi_sup
    )
    final = states[-1]
    h = grid.h

    if "overlap" in cfg.diagnostics:
        rows = [f"# segregation delta={_fmt(delta)}", "epsilon,support_overlap,interaction_mass"]
        for st in states:
            rows.append(
                f"{_fmt(st.epsilon)},{_fmt(analysis.support_overlap(st, delta))},"
                f"{_fmt(analysis.interaction_mass(st))}"
            )
        _write(out / "segregation.csv", "\n".join(rows) + "\n")
        first_o = analysis.support_overlap(states[0], delta)
        last_o = analysis.support_overlap(final, delta)
        summary.append(
            ("segregation.csv", "final_over_initial_overlap",
             _fmt(last_o / first_o) if first_o > 0 else "nan")
        )

    if "subharmonicity" in cfg.diagnostics:
        rows = ["# subharmonicity_check", "epsilon,component,min_laplacian"]
        worst = math.inf
        for st in states:
            for i, f in enumerate(st.fields):
                v = analysis.subharmonicity_check(f, mask)
                worst = min(worst, v)
                rows.append(f"{_fmt(st.epsilon)},{i},{_fmt(v)}")
        _write(out / "subharmonicity.csv", "\n".join(rows) + "\n")
        summary.append(("subharmonicity.csv", "min_laplacian", _fmt(worst)))

    if "limit" in cfg.diagnostics:
        rep = analysis.limit_residual(final, cfg.ell, mask, max(delta, 0.05))
        _write(out / "limit_residual.csv", rep.csv())
        summary.append(("limit_residual.csv", "deep_residual", _fmt(rep.deep_residual)))
        summary.append(("limit_residual.csv", "supersolution_max", _fmt(rep.supersolution_max)))

    center = interface_center(final, mask, delta)
    center_xy = (grid.x(center[0]), grid.y(center[1]))

    if "holder" in cfg.diagnostics:
        rows = [
            f"# holder_exponent_estimate center=({_fmt(center_xy[0])},{_fmt(center_xy[1])})",
            "epsilon,component,alpha_hat,constant,fit_residual",
        ]
        alphas = []
        try:
            for st in states:
                for i, f in enumerate(st.fields):
                    est = analysis.holder_exponent_estimate(f, mask, center_xy, cfg.holder_depth)
                    alphas.append(est.alpha_hat)
                    rows.append(
                        f"{_fmt(st.epsilon)},{i},{_fmt(est.alpha_hat)},"
                        f"{_fmt(est.constant)},{_fmt(est.fit_residual)}"
                    )
        except ValueError as e:
            print(f"holder diagnostic failed: {e}", file=sys.stderr)
            diag_errors.append(("holder", str(e)))
        else:
            _write(out / "holder.csv", "\n".join(rows) + "\n")
            summary.append(("holder.csv", "alpha_spread", _fmt(max(alphas) - min(alphas))))

    points: list[tuple[int, int]] = []
    if "growth" in cfg.diagnostics or "lipschitz" in cfg.diagnostics:
        fb = analysis.free_boundary_points(final.fields[0], mask, delta)
        fb.sort(key=lambda ij: ((ij[0] - center[0]) ** 2 + (ij[1] - center[1]) ** 2, ij))
        points = fb[:20]

    if "growth" in cfg.diagnostics:
        blocks = []
        worst_spread = 0.0
        try:
            for pt in points:
                gp = analysis.linear_growth_profile(
                    final.fields[0], mask, pt, [q * h for q in cfg.growth_radii_h]
                )
                blocks.append(gp.csv())
                ratios = [q for _, _, q in gp.entries]
                if len(ratios) >= 2 and min(ratios) > 0:
                    worst_spread = max(worst_spread, max(ratios) / min(ratios))
        except ValueError as e:
            print(f"growth diagnostic failed: {e}", file=sys.stderr)
            diag_errors.append(("growth", str(e)))
        else:
            _write(out / "growth.csv", "".join(blocks) if blocks else "# no candidate nodes\n")
            summary.append(("growth.csv", "worst_ratio_spread", _fmt(worst_spread)))

    if "lipschitz" in cfg.diagnostics:
        rows = ["# lipschitz_norm_estimate radius=0.125", "epsilon,max_over_points"]
        per_eps = []
        try:
            for st in states:
                vals = [
                    analysis.lipschitz_norm_estimate(st.fields[0], mask, pt, 0.125)
                    for pt in points
                ] or [0.0]
                per_eps.append(max(vals))
                rows.append(f"{_fmt(st.epsilon)},{_fmt(per_eps[-1])}")
        except ValueError as e:
            print(f"lipschitz diagnostic failed: {e}", file=sys.stderr)
            diag_errors.append(("lipschitz", str(e)))
        else:
            _write(out / "lipschitz.csv", "\n".join(rows) + "\n")
            if per_eps and per_eps[0] > 0:
                summary.append(
                    ("lipschitz.csv", "sweep_max_over_first", _fmt(max(per_eps) / per_eps[0]))
                )

    if "acf" in cfg.diagnostics:
        if cfg.acf_radii:
            radii = cfg.acf_radii
        else:
            # keep the largest ball inside the domain from the chosen center
            room = mask.radius - math.hypot(
                center_xy[0] - mask.center[0], center_xy[1] - mask.center[1]
            ) - 2.0 * h
            radii = tuple(
                rho for rho in (8 * h, 12 * h, 16 * h, 24 * h, 32 * h, 0.375, 0.5)
                if rho <= room
            )
        others = np.zeros((grid.nx, grid.ny))
        for f in final.fields[1:]:
            others += f.values
        try:
            if final.d < 2:
                raise ValueError("needs at least two populations")
            if not radii:
                raise ValueError("no radius fits the domain from the chosen center")
            curve = analysis.acf_functional(
                final.fields[0],
                ScalarField(grid, others),
                mask,
                center_xy,
                radii,
            )
        except ValueError as e:
            print(f"acf diagnostic failed: {e}", file=sys.stderr)
            diag_errors.append(("acf", str(e)))
        else:
            _write(out / "acf.csv", curve.csv())
            js = curve.values
            monotone = all(js[k + 1] >= js[k] * 0.9 for k in range(len(js) - 1))
            summary.append(("acf.csv", "monotone_within_10pct", "yes" if monotone else "no"))
            summary.append(
                ("acf.csv", "below_bound", "yes" if max(js) <= curve.bound_estimate else "no")
            )

    for name, msg in diag_errors:
        summary.append((f"({name})", "error", msg.replace(",", ";")))
    rows = ["artifact,key,value"] + [f"{a},{k},{v}" for a, k, v in summary]
    _write(out / "summary.csv", "\n".join(rows) + "\n")

    if not all(st.converged for st in states):
        bad = [st.epsilon for st in states if not st.converged]
        print(f"solver did not converge at epsilon {bad}", file=sys.stderr)
        return 3
    return 4 if diag_errors else 0


_VERIFY_BARRIER_PRESETS = [(1.0, 2.0), (1.0, 5.0)]
_VERIFY_ELLIPTICITIES = [(1.0, 2.0), (1.0, 4.0)]


def _cmd_verify(lam: float | None, Lam: float | None, alpha_scale: float, samples: int) -> int:
    try:
        if lam is None and Lam is None:
            ells = [Ellipticity(*lp) for lp in _VERIFY_ELLIPTICITIES]
        else:
            ells = [Ellipticity(1.0 if lam is None else lam, 2.0 if Lam is None else Lam)]
    except ValueError as e:
        print(f"config:0: {e}", file=sys.stderr)
        return 2

    failures = 0
    rep = run_algebra_suite(samples, seed=0)
    ok = rep.max_violation <= _ALGEBRA_TOL
    failures += 0 if ok else 1
    print(f"algebra,samples={samples},max_violation={rep.max_violation:.3e},"
          f"{'PASS' if ok else 'FAIL'}")

    print(REPORT_HEADER)
    h = 1.0 / 128.0
    for ell in ells:
        base = min_alpha(ell, 2)
        for a, b in _VERIFY_BARRIER_PRESETS:
            for alpha in (base * alpha_scale, base * alpha_scale + 1.0):
                spec = BarrierSpec(1.0, 1.0, a, b, alpha, ell)
                for make in (subsolution_barrier, supersolution_barrier):
                    profile = make(spec, require_admissible=False)
                    r = verify_barrier(profile, h)
                    failures += 0 if r.passed else 1
                    print(r.csv_row())
    return 0 if failures == 0 else 4


def _cmd_dump_barrier(args) -> int:
    try:
        ell = Ellipticity(args.lam, args.Lam)
        if args.n != 2:
            raise ValueError("only dimension 2 is supported for discrete verification")
        spec = BarrierSpec(args.amplitude, args.scale, args.a, args.b, args.alpha, ell, args.n)
    except ValueError as e:
        print(f"config:0: {e}", file=sys.stderr)
        return 2
    make = subsolution_barrier if args.kind == "sub" else supersolution_barrier
    profile = make(spec, require_admissible=False)
    report = verify_barrier(profile, args.h)

    out = Path(os.environ.get("SEGLAB_OUT", "."))
    samples = np.linspace(spec.inner_radius, spec.r, 257)
    rows = [
        f"# barrier kind={args.kind} a={_fmt(args.a)} b={_fmt(args.b)} alpha={_fmt(args.alpha)}",
        "radius,value,slope",
    ]
    vals = profile.value(samples)
    slopes = profile.slope(samples)
    rows += [f"{_fmt(s)},{_fmt(v)},{_fmt(w)}" for s, v, w in zip(samples, vals, slopes)]
    _write(out / f"barrier_{args.kind}.csv", "\n".join(rows) + "\n")

    print(REPORT_HEADER)
    print(report.csv_row())
    return 0 if report.passed else 4


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seglab",
        description="Segregation laboratory for competing densities under "
        "extremal elliptic operators",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a config-file run")
    p_run.add_argument("config", help="path to the run configuration")

    p_ver = sub.add_parser("verify", help="operator algebra and barrier property suites")
    p_ver.add_argument("--lam", type=float, default=None,
                       help="restrict barrier rows to one ellipticity (with --Lam)")
    p_ver.add_argument("--Lam", type=float, default=None)
    p_ver.add_argument("--alpha-scale", type=float, default=1.0,
                       help="scale the minimal admissible exponent (below 1 must fail)")
    p_ver.add_argument("--samples", type=int, default=10_000)

    p_dump = sub.add_parser("dump-barrier", help="emit one barrier profile and its report")
    p_dump.add_argument("kind", choices=["sub", "super"])
    p_dump.add_argument("a", type=float)
    p_dump.add_argument("b", type=float)
    p_dump.add_argument("alpha", type=float)
    p_dump.add_argument("lam", type=float)
    p_dump.add_argument("Lam", type=float)
    p_dump.add_argument("n", type=int)
    p_dump.add_argument("--h", type=float, default=1.0 / 128.0)
    p_dump.add_argument("--amplitude", type=float, default=1.0)
    p_dump.add_argument("--scale", type=float, default=1.0)

    args = parser.parse_args(argv)
    if args.verb == "run":
        return _cmd_run(args.config)
    if args.verb == "verify":
        return _cmd_verify(args.lam, args.Lam, args.alpha_scale, args.samples)
    return _cmd_dump_barrier(args)


if __name__ == "__main__":
    sys.exit(main())
