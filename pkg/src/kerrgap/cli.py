"""Command-line front end.

Every subcommand writes its CSV table (and SVG figure where one applies) to
the output directory, together with ``<command>.config.txt`` echoing the
resolved configuration. Exit codes: 0 all checks pass, 1 some row has
``pass=false``, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import energy, studies
from .cutpaste import DELTA_MIN
from .errors import InequalityViolation, KerrgapError
from .fields_grid import MapField, Region, build_grid, class_member_em, class_member_vacuum, \
    kerr_fields, kerr_newman_fields
from .kerr_maps import KerrNewmanParams, KerrParams
from .perturbation_classes import ClassSpec, derived_rates, rates_to_csv, validate
from .plotting import KINDS, plot, write_atomic

COMMANDS = ("energy", "el-check", "first-variation", "convexity-sweep", "gap-check",
            "cutpaste-study", "validate-class", "curvature-audit", "plot")

DEFAULTS = {
    "grid.r_min": "0.01",
    "grid.r_max": "100",
    "grid.n_r": "128",
    "grid.n_theta": "64",
    "grid.theta_min": "",
    "background.kind": "kerr",
    "background.J": "1",
    "background.m": "",
    "background.a": "1",
    "background.q": "1",
    "perturbation.amplitude": "0.1",
    "perturbation.seeds": "10",
    "perturbation.seed0": "0",
    "perturbation.class": "em_asymptotic",
    "perturbation.lambda": "2",
    "ladder.rungs": "4",
    "ladder.delta0": "0.25",
    "study.functional": "",
    "study.region": "all",
    "study.refinements": "3",
    "study.pairs": "1000",
    "study.points": "200",
    "study.seed": "0",
    "plot.table": "",
    "plot.kind": "convergence",
    "output.dir": "kerrgap_out",
}

# grid defaults that differ per command unless the user sets them
COMMAND_DEFAULTS = {
    "validate-class": {"grid.r_min": "0.001", "grid.r_max": "1000", "grid.theta_min": "1e-4"},
    "first-variation": {"perturbation.amplitude": "0.3"},
    "convexity-sweep": {"perturbation.amplitude": "0.3"},
}

# flag name -> config key
FLAGS = {
    "config": None,
    "out": "output.dir",
    "r_min": "grid.r_min", "r_max": "grid.r_max", "n_r": "grid.n_r", "n_theta": "grid.n_theta",
    "theta_min": "grid.theta_min",
    "background": "background.kind", "J": "background.J", "m": "background.m",
    "a": "background.a", "q": "background.q",
    "amplitude": "perturbation.amplitude", "seeds": "perturbation.seeds",
    "seed0": "perturbation.seed0", "class_id": "perturbation.class", "lam": "perturbation.lambda",
    "rungs": "ladder.rungs", "delta0": "ladder.delta0",
    "functional": "study.functional", "region": "study.region",
    "refinements": "study.refinements", "pairs": "study.pairs", "points": "study.points",
    "seed": "study.seed", "table": "plot.table", "kind": "plot.kind",
}


class ConfigError(KerrgapError):
    pass


class RunConfig(dict):
    """Flat ``section.key -> text`` mapping with typed accessors."""

    def text(self, key):
        return self[key]

    def number(self, key, kind=float):
        try:
            return kind(self[key])
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r}: cannot read {self[key]!r} as {kind.__name__}") from None

    def optional(self, key):
        return None if self[key] in ("", "none") else self.number(key)

    def numbers(self, key):
        try:
            return [float(x) for x in self[key].split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"field {key!r}: expected comma-separated numbers, got {self[key]!r}") from None

    def echo(self):
        return "".join(f"{k}={self[k]}\n" for k in sorted(self))


def read_config_file(path):
    """Parse ``section.key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{i}: unknown field {key!r}")
        out[key] = val
    return out


def resolve_config(command, args):
    cfg = RunConfig(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    if args.config:
        cfg.update(read_config_file(args.config))
    for flag, key in FLAGS.items():
        val = getattr(args, flag, None)
        if key is not None and val is not None:
            cfg[key] = str(val)
    env = os.environ.get("KERRGAP_OUT")
    if env:
        cfg["output.dir"] = env
    return cfg


def build_parser():
    p = argparse.ArgumentParser(prog="kerrgap", description="Energy-gap studies for extreme Kerr(-Newman) maps.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key=value config file")
        s.add_argument("--out", help="output directory (KERRGAP_OUT overrides)")
        for flag in ("r-min", "r-max", "n-r", "n-theta", "theta-min", "J", "m", "a", "q",
                     "amplitude", "seeds", "seed0", "lam", "rungs", "delta0", "functional",
                     "region", "refinements", "pairs", "points", "seed", "table", "kind"):
            s.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
        s.add_argument("--background", choices=("kerr", "kn"))
        s.add_argument("--class", dest="class_id")
    return p


# ---------------------------------------------------------------------------
# helpers


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def table_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _grid(cfg):
    return build_grid(r_min=cfg.number("grid.r_min"), r_max=cfg.number("grid.r_max"),
                      n_r=cfg.number("grid.n_r", int), n_theta=cfg.number("grid.n_theta", int),
                      theta_min=cfg.optional("grid.theta_min"))


def _kn_params(cfg):
    a, q = cfg.number("background.a"), cfg.number("background.q")
    m = cfg.optional("background.m")
    if m is None:
        return KerrNewmanParams.from_charge(a, q)
    m_ext = float(np.hypot(a, q))
    # command-line masses are typed with a few digits; snap if extremal to 1e-6
    if abs(m - m_ext) <= 1e-6 * m_ext:
        return KerrNewmanParams.from_charge(a, q)
    return KerrNewmanParams(m, a, q)


def _background(cfg, grid, functional=None):
    kind = cfg.text("background.kind")
    fid = functional if functional is not None else (cfg.text("study.functional") or None)
    if kind == "kn":
        p = _kn_params(cfg)
        return studies.background_fields(grid, "kn", m=p.m, a=p.a, q=p.q, functional=fid)
    return studies.background_fields(grid, kind, J=cfg.number("background.J"), functional=fid)


def _seeds(cfg):
    s0, n = cfg.number("perturbation.seed0", int), cfg.number("perturbation.seeds", int)
    if n < 1:
        raise ConfigError("perturbation.seeds must be at least 1")
    return list(range(s0, s0 + n))


# ---------------------------------------------------------------------------
# commands (each returns a list of (name, header, rows, plot kind or None))


def cmd_energy(cfg):
    grid = _grid(cfg)
    region = Region.parse(cfg.text("study.region"))
    fid = cfg.text("study.functional") or None
    if fid in ("E", "E_em"):
        B, base = _background(cfg, grid, "M" if fid == "E" else "I_em")
        rep = (energy.harmonic_energy_E(energy.X_from_x(B["x"]), B["Y"], region) if fid == "E"
               else energy.em_harmonic_energy_E(B, region))
    else:
        B, fid = _background(cfg, grid, fid)
        rep = energy.evaluate(fid, B, region)
    return [("energy", energy.REPORT_HEADER, [rep.csv_row()], None)]


def cmd_el_check(cfg):
    head, rows = studies.el_check(J=cfg.number("background.J"),
                                  refinements=cfg.number("study.refinements", int))
    return [("el-check", head, rows, "convergence")]


def cmd_first_variation(cfg):
    B, fid = _background(cfg, _grid(cfg))
    head, rows = studies.first_variation_rows(B, fid, _seeds(cfg), cfg.number("perturbation.amplitude"))
    return [("first-variation", head, rows, None)]


def cmd_convexity_sweep(cfg):
    B, fid = _background(cfg, _grid(cfg))
    head, rows, phead, prof = studies.convexity_rows(B, fid, _seeds(cfg),
                                                     cfg.number("perturbation.amplitude"))
    return [("convexity-sweep", head, rows, None), ("convexity-profiles", phead, prof, "profile")]


def cmd_gap_check(cfg):
    B, fid = _background(cfg, _grid(cfg))
    amps = cfg.numbers("perturbation.amplitude")
    head, rows = studies.gap_rows(B, fid, _seeds(cfg), amps)
    return [("gap-check", head, rows, None)]


def cmd_cutpaste_study(cfg):
    kind = cfg.text("background.kind")
    delta0 = cfg.number("ladder.delta0")
    rungs = cfg.number("ladder.rungs", int)
    if delta0 * 2.0 ** -(rungs - 1) < DELTA_MIN:
        raise ConfigError(f"ladder reaches delta below {DELTA_MIN}")
    kw = {"J": cfg.number("background.J")} if kind == "kerr" else \
        {"a": cfg.number("background.a"), "q": cfg.number("background.q")}
    table, checks = studies.cutpaste_rows(kind, lam=cfg.number("perturbation.lambda"),
                                          n_rungs=rungs, delta0=delta0, **kw)
    rows = [[r.delta, r.eps, r.stage, r.delta_I, r.fitted_exponent] for r in table.rows]
    return [("cutpaste-study", ["delta", "eps", "stage", "delta_I", "fitted_exponent"], rows,
             "convergence"),
            ("cutpaste-checks", ["check", "measured", "threshold", "pass"], checks, None)]


def cmd_validate_class(cfg):
    grid = _grid(cfg)
    spec = ClassSpec(cfg.text("perturbation.class"), cfg.number("perturbation.lambda"))
    lam = spec.lam
    if spec.class_id in ("em_eq59", "em_asymptotic"):
        B = kerr_newman_fields(grid, _kn_params(cfg))
        dU, dv, dc, dp = class_member_em(grid, B["psi"], lam)
        P = MapField(grid, "CH2", {"U": dU, "v": dv, "chi": dc, "psi": dp})
    else:
        J = KerrParams(cfg.number("background.J"))
        dU, dw = class_member_vacuum(grid, lam)
        if spec.class_id == "chrusciel":
            B = kerr_fields(grid, J, "Uw")
            P = MapField(grid, "H2", {"U": dU, "w": dw})
        else:
            B = kerr_fields(grid, J, "xY")
            P = MapField(grid, "H2", {"x": dU * -2.0, "Y": dw * 2.0})
    rep = validate(P, spec, B)
    rate_rows = list(csv.reader(io.StringIO(rates_to_csv(derived_rates(spec)))))
    return [("validate-class", ["condition", "measured", "threshold", "pass"],
             [list(r) for r in rep.rows], None),
            ("derived-rates", rate_rows[0], rate_rows[1:], None)]


def cmd_curvature_audit(cfg):
    head, rows = studies.curvature_audit(n_pairs=cfg.number("study.pairs", int),
                                         n_points=cfg.number("study.points", int),
                                         seed=cfg.number("study.seed", int))
    return [("curvature-audit", head, rows, None)]


HANDLERS = {
    "energy": cmd_energy,
    "el-check": cmd_el_check,
    "first-variation": cmd_first_variation,
    "convexity-sweep": cmd_convexity_sweep,
    "gap-check": cmd_gap_check,
    "cutpaste-study": cmd_cutpaste_study,
    "validate-class": cmd_validate_class,
    "curvature-audit": cmd_curvature_audit,
}


def _failing_rows(header, rows):
    if "pass" not in header:
        return []
    k = header.index("pass")
    return [r for r in rows if _fmt(r[k]) != "true"]


def run(argv=None):
    """Entry point returning the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = resolve_config(args.command, args)
        out = Path(cfg.text("output.dir"))
        if args.command == "plot":
            table = cfg.text("plot.table")
            kind = cfg.text("plot.kind")
            if not table or not Path(table).exists():
                raise ConfigError(f"plot needs an existing --table, got {table!r}")
            if kind not in KINDS:
                raise ConfigError(f"plot kind must be one of {KINDS}")
            target = out / (Path(table).stem + ".svg")
            plot(table, kind, target)
            print(target)
            return 0
        tables = HANDLERS[args.command](cfg)
    except (KerrgapError, ValueError) as exc:
        if isinstance(exc, InequalityViolation):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = 0
    write_atomic(out / f"{args.command}.config.txt", cfg.echo())
    for name, header, rows, kind in tables:
        text = table_csv(header, rows)
        path = out / f"{name}.csv"
        write_atomic(path, text)
        print(path)
        if kind is not None:
            plot(text, kind, out / f"{name}.svg")
            print(out / f"{name}.svg")
        bad = _failing_rows(header, rows)
        for r in bad:
            print(f"FAIL {name}: " + ",".join(_fmt(x) for x in r), file=sys.stderr)
        if bad:
            code = 1
    return code


def main(argv=None):
    sys.exit(run(argv))
