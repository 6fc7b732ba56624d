"""Command-line entry point.

Scenarios live in INI files with sections ``model``, ``prior``,
``ambiguity``, ``solver``, ``output``, ``crisis`` and ``figure``. Every key
can be overridden on the command line as ``--section.key VALUE`` or, when
the key name is unambiguous, ``--key VALUE``.

Exit codes: 0 ok, 2 configuration or assumption failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import inspect
import json
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import equilibrium as eq
from . import regime
from .errors import AmbiggError, AssumptionError, ConfigError, DomainError, NumericalError, UnsupportedError
from .interim import meu_value
from .model import AmbiguitySet, PriorFamily, linear_model, preset, validate_assumptions
from .numerics import KAPPA_SCAN, ROOT_TOL

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

MODEL_FACTORIES = {
    "linear": linear_model,
    "debt": regime.debt_model,
    "currency": regime.currency_model,
    "synthetic": regime.synthetic_model,
    "bankrun": regime.bankrun_model,
}

# section -> key -> parser
SCHEMA = {
    "prior": {"kind": str, "eta": float, "y": float, "noise": str},
    "ambiguity": {"xi": float, "xi_lo": float, "xi_hi": float, "opp_lo": float, "opp_hi": float},
    "solver": {"tol": float, "grid": int, "xi_grid": int, "max_rounds": int},
    "output": {"dir": str},
    "crisis": {
        "lam": float,
        "theta": float,
        "xi": float,
        "sweep": str,
        "sweep_from": float,
        "sweep_to": float,
        "sweep_n": int,
        "sweep_scale": str,
    },
    "figure": {"id": str},
}


def _model_keys(name: str) -> dict:
    if name == "custom":
        return {"u1_const": float, "u1_l": float, "u1_theta": _knots, "u0_const": float, "u0_l": float, "u0_theta": _knots}
    if name not in MODEL_FACTORIES:
        raise ConfigError(f"[model] preset: unknown preset {name!r}; choose from {sorted([*MODEL_FACTORIES, 'custom'])}")
    sig = inspect.signature(MODEL_FACTORIES[name])
    return {k: float for k in sig.parameters}


def _knots(text: str):
    """``"0:0, 1:1.5"`` -> ``((0.0, 0.0), (1.0, 1.5))``."""
    pts = []
    for item in re.split(r"[,\s]+", text.strip()):
        if not item:
            continue
        t, _, v = item.partition(":")
        pts.append((float(t), float(v)))
    return tuple(pts)


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    model_name: str = "linear"
    model_params: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)
    ambiguity: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    crisis: dict = field(default_factory=dict)
    figure: dict = field(default_factory=dict)

    @property
    def tol(self) -> float:
        return self.solver.get("tol", ROOT_TOL)

    @property
    def grid(self) -> int:
        return self.solver.get("grid", KAPPA_SCAN)

    @property
    def out_dir(self) -> str | None:
        return self.output.get("dir")

    def model(self):
        return preset(self.model_name, **self.model_params)

    def priors(self) -> PriorFamily:
        p = self.prior
        kind = p.get("kind", "normal" if "eta" in p else "improper")
        noise = p.get("noise", "normal")
        if kind == "improper":
            if "eta" in p or "y" in p:
                raise ConfigError("[prior] eta/y given with kind = improper")
            return PriorFamily.improper(noise)
        if kind != "normal":
            raise ConfigError(f"[prior] kind: expected normal or improper, got {kind!r}")
        if "eta" not in p or "y" not in p:
            raise ConfigError("[prior] a normal prior needs eta and y")
        return PriorFamily.normal(p["eta"], p["y"], noise)

    def ambiguity_set(self) -> AmbiguitySet:
        a = self.ambiguity
        if "xi" in a:
            if "xi_lo" in a or "xi_hi" in a:
                raise ConfigError("[ambiguity] give either xi or xi_lo/xi_hi")
            own = AmbiguitySet.singleton(a["xi"])
        elif "xi_lo" in a and "xi_hi" in a:
            own = AmbiguitySet.interval(a["xi_lo"], a["xi_hi"])
        else:
            raise ConfigError("[ambiguity] needs xi or both xi_lo and xi_hi")
        if "opp_lo" in a or "opp_hi" in a:
            if not ("opp_lo" in a and "opp_hi" in a):
                raise ConfigError("[ambiguity] needs both opp_lo and opp_hi")
            return AmbiguitySet.product(own.own, (a["opp_lo"], a["opp_hi"]))
        return own


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return n
    return None


def _convert(section: str, key: str, raw: str, parser, where: str):
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}[{section}] {key} = {raw!r}: {exc}") from None


def load_config(path: str | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse an INI file plus ``section.key -> value`` overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            cp.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)

    cfg = RunConfig()
    for section in cp.sections():
        if section != "model" and section not in SCHEMA:
            raise ConfigError(f"{path or 'flags'}: unknown section [{section}]")
    model_items = dict(cp.items("model")) if cp.has_section("model") else {}
    cfg.model_name = model_items.pop("preset", "linear")
    keys = _model_keys(cfg.model_name)
    for key, raw in model_items.items():
        where = _where(path, text, "model", key)
        if key not in keys:
            raise ConfigError(f"{where}unknown key [model] {key} for preset {cfg.model_name!r}; allowed: {sorted(keys)}")
        cfg.model_params[key] = _convert("model", key, raw, keys[key], where)
    for section, keys in SCHEMA.items():
        if not cp.has_section(section):
            continue
        target = getattr(cfg, section)
        for key, raw in cp.items(section):
            where = _where(path, text, section, key)
            if key not in keys:
                raise ConfigError(f"{where}unknown key [{section}] {key}; allowed: {sorted(keys)}")
            target[key] = _convert(section, key, raw, keys[key], where)
    return cfg


def _where(path, text, section, key) -> str:
    line = _line_of(text, section, key) if text else None
    if path is None or line is None:
        return ""
    return f"{path}:{line}: "


def _split_overrides(tokens: list[str]) -> dict[str, str]:
    bare = {}
    for section, keys in SCHEMA.items():
        for k in keys:
            bare.setdefault(k, []).append(section)
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name, eq_sign, value = tok[2:].partition("=")
        if not eq_sign:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"flag --{name} needs a value") from None
        name = name.replace("-", "_")
        if "." in name:
            out[name] = value
            continue
        sections = bare.get(name, [])
        if name == "preset":
            sections = ["model"]
        if len(sections) != 1:
            if not sections:
                # model parameters are preset-specific; validated later
                out[f"model.{name}"] = value
                continue
            raise ConfigError(f"--{name} is ambiguous between sections {sections}; use --section.{name}")
        out[f"{sections[0]}.{name}"] = value
    return out


# --------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    write_atomic(path, "\n".join(lines) + "\n")


def _threads() -> int:
    raw = os.environ.get("AMBIGG_THREADS", "")
    try:
        n = int(raw) if raw else os.cpu_count() or 1
    except ValueError:
        raise ConfigError(f"AMBIGG_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _pmap(fn, items):
    items = list(items)
    n = min(_threads(), len(items)) or 1
    if n == 1:
        return [fn(v) for v in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# --------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig, out=sys.stdout) -> int:
    report = validate_assumptions(cfg.model(), cfg.priors(), cfg.ambiguity_set())
    print(report.summary(), file=out)
    return EXIT_OK if report.passed else EXIT_CONFIG


def _validated(cfg: RunConfig, out):
    model, priors, amb = cfg.model(), cfg.priors(), cfg.ambiguity_set()
    report = validate_assumptions(model, priors, amb)
    if not report.passed:
        for c in report.failures():
            print(f"assumption {c.name} failed: {c.detail}", file=out)
        raise AssumptionError("model fails " + ", ".join(c.name for c in report.failures()))
    return model, priors, amb


def cmd_solve(cfg: RunConfig, out=sys.stdout) -> int:
    model, priors, amb = _validated(cfg, out)
    rep = eq.equilibrium_cutoffs(model, priors, amb, scan_points=cfg.grid, tol=cfg.tol, xi_scan=cfg.solver.get("xi_grid", 256))
    lines = [
        f"model: {cfg.model_name}",
        f"equilibria: {len(rep.cutoffs)}",
        *(
            f"  cutoff {_fmt(k)}  residual {r:.3g}  argmin xi (a=1, a=0) {a}"
            for k, r, a in zip(rep.cutoffs, rep.cutoffs.residuals, rep.argmin_xi)
        ),
        f"min cutoff: {_fmt(rep.min_cutoff)}",
        f"max cutoff: {_fmt(rep.max_cutoff)}",
        f"dominance window: ({_fmt(rep.dominance[0])}, {_fmt(rep.dominance[1])})",
    ]
    text = "\n".join(lines) + "\n"
    out.write(text)
    if cfg.out_dir:
        write_atomic(os.path.join(cfg.out_dir, "solve.txt"), text)
        doc = {"model": cfg.model_name, "params": cfg.model_params, **rep.as_dict()}
        write_atomic(os.path.join(cfg.out_dir, "solve.json"), json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    if any(r > cfg.tol for r in rep.cutoffs.residuals):
        print("residual above tolerance", file=out)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_deletion(cfg: RunConfig, out=sys.stdout) -> int:
    model, priors, amb = _validated(cfg, out)
    trace = eq.iterated_deletion(model, priors, amb, cfg.solver.get("max_rounds", 500), cfg.tol)
    rows = [(n, lo, hi, hi - lo) for n, (lo, hi) in enumerate(trace.rounds)]
    print("n,kappa_lo,kappa_hi,width", file=out)
    for row in rows:
        print(",".join(_fmt(v) for v in row), file=out)
    lo, hi = trace.limits
    print(f"limits: {_fmt(lo)} {_fmt(hi)} converged={trace.converged}", file=out)
    if cfg.out_dir:
        write_csv(os.path.join(cfg.out_dir, "deletion.csv"), ["n", "kappa_lo", "kappa_hi", "width"], rows)
    return EXIT_OK


# figure id -> (y, kappa window, far edge or None, curves as (label, Xi))
FIGURES = {
    "fig1a": (0.52, (-3.0, 4.0), None, [
        ("xi_1e6", (1e6, 1e6)), ("xi_1.1", (1.1, 1.1)), ("xi_0.56", (0.56, 0.56)), ("xi_0.37", (0.37, 0.37)),
        ("min_0.56_1.1", (0.56, 1.1)),
    ]),
    "fig1b": (0.48, (-3.0, 4.0), None, [
        ("xi_1e6", (1e6, 1e6)), ("xi_1.1", (1.1, 1.1)), ("xi_0.56", (0.56, 0.56)), ("xi_0.37", (0.37, 0.37)),
        ("min_0.37_0.56", (0.37, 0.56)),
    ]),
    "fig2a": (0.55, (-1.5, 2.0), None, [("min_1_3", (1.0, 3.0)), ("xi_2", (2.0, 2.0))]),
    "fig2b": (0.55, (-1.5, 2.0), None, [("xi_1", (1.0, 1.0)), ("xi_2", (2.0, 2.0))]),
    "fig3": (0.4, (-12.0, 16.0), 2.0e4, [("min_1e-4_0.1", (1e-4, 0.1)), ("xi_0.1", (0.1, 0.1))]),
}
FIGURE_ETA = 2.0


def figure_grid(window, far, n: int) -> np.ndarray:
    """``n`` points on ``window``, denser near its middle, plus a geometric
    tail out to ``far`` when given."""
    lo, hi = window
    u = np.linspace(-1.0, 1.0, n)
    core = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.sign(u) * np.abs(u) ** 1.5
    if far is None:
        return core
    tail = np.geomspace(hi, far, max(n // 2, 50))[1:]
    return np.concatenate([core, tail])


def figure_curves(fig_id: str, n: int = 600) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    if fig_id not in FIGURES:
        raise ConfigError(f"unknown figure id {fig_id!r}; choose from {sorted(FIGURES)}")
    y, window, far, curves = FIGURES[fig_id]
    kappa = figure_grid(window, far, max(n, 400))
    model, priors = linear_model(), PriorFamily.normal(FIGURE_ETA, y)

    def one(item):
        label, (a, b) = item
        amb = AmbiguitySet.singleton(a) if a == b else AmbiguitySet.interval(a, b)
        return label, (kappa, np.asarray(meu_value(model, priors, amb, 1, kappa, kappa), dtype=float))

    return dict(_pmap(one, curves))


def cmd_figure(cfg: RunConfig, fig_id: str | None, out=sys.stdout) -> int:
    fig_id = fig_id or cfg.figure.get("id")
    if not fig_id:
        raise ConfigError("figure id missing (positional argument or [figure] id)")
    out_dir = cfg.out_dir or "."
    curves = figure_curves(fig_id, max(cfg.solver.get("grid", 600), 400))
    plots = []
    for label, (k, v) in curves.items():
        name = f"{fig_id}_{label}.csv"
        write_csv(os.path.join(out_dir, name), ["kappa", "value", "curve_label"], ((a, b, label) for a, b in zip(k, v)))
        plots.append(f"'{name}' using 1:2 skip 1 with lines title '{label}'")
        print(f"{name}: {len(k)} points", file=out)
    y, window, _, _ = FIGURES[fig_id]
    script = "\n".join(
        [
            "set datafile separator ','",
            f"set title '{fig_id}: y={y}, eta={FIGURE_ETA}'",
            "set xlabel 'kappa'",
            "set ylabel 'min over Xi of interim payoff to investing'",
            f"set xrange [{window[0]}:{window[1]}]",
            "set xzeroaxis",
            f"set terminal pngcairo size 800,500",
            f"set output '{fig_id}.png'",
            "plot " + ", \\\n     ".join(plots),
            "",
        ]
    )
    write_atomic(os.path.join(out_dir, f"{fig_id}.gp"), script)
    return EXIT_OK


def _sweep_values(c: dict) -> np.ndarray:
    try:
        a, b, n = c["sweep_from"], c["sweep_to"], c.get("sweep_n", 40)
    except KeyError as exc:
        raise ConfigError(f"[crisis] missing {exc.args[0]}") from None
    scale = c.get("sweep_scale", "log")
    if scale == "log":
        if a <= 0 or b <= 0:
            raise ConfigError("[crisis] log sweep needs positive bounds")
        return np.geomspace(a, b, n)
    if scale == "linear":
        return np.linspace(a, b, n)
    raise ConfigError(f"[crisis] sweep_scale: expected log or linear, got {scale!r}")


def crisis_rows(cfg: RunConfig) -> tuple[list, str]:
    c = cfg.crisis
    sweep = c.get("sweep", "xi_hi")
    for key in ("theta", "xi"):
        if key not in c:
            raise ConfigError(f"[crisis] missing {key}")
    theta, xi_true = c["theta"], c["xi"]
    name = cfg.model_name
    if name not in ("debt", "currency"):
        raise ConfigError("crisis sweeps need the debt or currency preset")
    values = _sweep_values(c)
    base = cfg.ambiguity

    def row(v):
        params = dict(cfg.model_params)
        if name == "debt" and "lam" in c:
            params.setdefault("lam", c["lam"])
        lo, hi = base.get("xi_lo", base.get("xi")), base.get("xi_hi", base.get("xi"))
        if sweep == "xi_hi":
            hi = v
        elif sweep == "xi_lo":
            lo = v
        elif sweep == "lam":
            if name != "debt":
                raise ConfigError("lam sweeps need the debt preset")
            params["lam"] = v
        elif sweep == "width":
            lo, hi = xi_true * math.exp(-v), xi_true * math.exp(v)
        else:
            raise ConfigError(f"[crisis] sweep: expected xi_hi, xi_lo, lam or width, got {sweep!r}")
        if lo is None or hi is None:
            raise ConfigError("[ambiguity] needs xi_lo/xi_hi for this sweep")
        if name == "debt" and params.get("lam") == 0.5:
            return (v, float("nan"), float("nan"), "degenerate")
        m = regime.debt_model(**params) if name == "debt" else regime.currency_model(**params)
        amb = AmbiguitySet.interval(min(lo, hi), max(lo, hi))
        kstar = regime.ambiguous_cutoff(m, amb)
        ts = regime.theta_star(kstar, xi_true)
        return (v, kstar, ts, bool(theta <= ts))

    rows = _pmap(row, values)
    note = ""
    if name == "debt" and sweep != "lam":
        lam = cfg.model_params.get("lam", c.get("lam", 0.4))
        note = f"theta_bar(lam={float(lam)!r}, xi={float(xi_true)!r}) = {regime.crisis_bound(lam, xi_true)!r}"
    return rows, note


def cmd_crisis(cfg: RunConfig, out=sys.stdout) -> int:
    rows, note = crisis_rows(cfg)
    header = ["param", "kstar", "theta_star", "occurs"]
    print(",".join(header), file=out)
    for r in rows:
        print(",".join(_fmt(v) for v in r), file=out)
    if note:
        print(note, file=out)
    if cfg.out_dir:
        write_csv(os.path.join(cfg.out_dir, "crisis.csv"), header, rows)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ambigg", description="Switching equilibria of global games with ambiguous signal precision.")
    p.add_argument("command", choices=["solve", "figure", "crisis", "deletion", "validate"])
    p.add_argument("figure_id", nargs="?", help="figure id for the figure command")
    p.add_argument("--config", help="INI scenario file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tol", type=float, help="root tolerance")
    p.add_argument("--grid", type=int, help="scan points")
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        overrides = _split_overrides(rest)
        if args.out is not None:
            overrides["output.dir"] = args.out
        if args.tol is not None:
            overrides["solver.tol"] = repr(args.tol)
        if args.grid is not None:
            overrides["solver.grid"] = str(args.grid)
        cfg = load_config(args.config, overrides)
        if args.command == "validate":
            return cmd_validate(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "deletion":
            return cmd_deletion(cfg, out)
        if args.command == "figure":
            return cmd_figure(cfg, args.figure_id, out)
        return cmd_crisis(cfg, out)
    except (ConfigError, AssumptionError, UnsupportedError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AmbiggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
