"""Command-line front end.

Subcommands::

    asym      one- and two-term expansions of P{L_mu > j} on a j grid
    pmf       exact series pmf/cdf/tail of L_mu, L_inf or R_mu
    simulate  discrete-event simulation; CSV of the L_mu pmf plus a JSON manifest
    compare   expansion errors against the exact series tail
    validate  run the acceptance suite

The model is given by ``--family`` (a family name, optionally followed by its
parameters, e.g. ``--family "burr b=2 v=3 w=1"``), ``--lambda`` and ``--mu``
(``inf`` for the ordinary M/G/1 queue).  Any option can also come from a
``--config`` file of ``key=value`` tokens; family parameters are plain keys
(``b=2``).  Every CSV starts with a ``# config: ...`` comment holding the full
configuration, so ``--config out.csv`` reruns it.

Exit status: 0 ok, 2 configuration error, 3 numerical guard tripped,
4 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import shlex
import sys
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .dist import ServiceModel, parse_service
from .errors import (
    ConfigError,
    DivergenceGuard,
    IndexBeyondTruncation,
    InvalidParameter,
    RetrialError,
    SecondOrderUnavailable,
    UnstableModel,
    UnsupportedFamily,
)
from .simulator import conditional_Rmu_estimate, run_retrial_simulation, write_manifest
from .transforms import QueueModel, pmf_L_infinity, pmf_L_mu, pmf_R_mu, tail_from_pmf

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

DEFAULTS = {
    "family": "burr b=2 v=3 w=1",
    "lambda": 0.5,
    "mu": "1",
    "order": 4096,
    "horizon": 1e6,
    "warmup": None,
    "batches": 32,
    "seed": 0,
    "jmax": None,
    "jgrid": None,
    "quantity": "Lmu",
    "corrected": False,
}
# config keys that are not family parameters
_KNOWN = set(DEFAULTS) | {"out", "manifest", "only"}


@dataclass
class ExperimentConfig:
    service: ServiceModel
    lam: float
    mu: float
    order: int = 4096
    horizon: float = 1e6
    warmup: float | None = None
    batches: int = 32
    seed: int = 0
    jmax: int | None = None
    jgrid: list[int] | None = None
    quantity: str = "Lmu"
    corrected: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def model(self) -> QueueModel:
        return QueueModel(self.lam, self.mu, self.service)

    def tokens(self) -> str:
        """The configuration as ``key=value`` tokens (shell-quoted)."""
        items = {
            "family": self.service.spec_string().removeprefix("family="),
            "lambda": repr(self.lam),
            "mu": "inf" if math.isinf(self.mu) else repr(self.mu),
            "order": self.order,
            "horizon": repr(self.horizon),
            "batches": self.batches,
            "seed": self.seed,
            "quantity": self.quantity,
            "corrected": self.corrected,
        }
        if self.warmup is not None:
            items["warmup"] = repr(self.warmup)
        if self.jmax is not None:
            items["jmax"] = self.jmax
        if self.jgrid is not None:
            items["jgrid"] = ",".join(map(str, self.jgrid))
        return " ".join(shlex.quote(f"{k}={v}") for k, v in items.items())


def _parse_float(name, text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {text!r}") from None


def _parse_int(name, text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected an integer, got {text!r}") from None
    if value != int(value):
        raise ConfigError(f"{name}: expected an integer, got {text!r}")
    return int(value)


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def read_config_file(path) -> dict:
    """Read ``key=value`` tokens from a config file or a previous output CSV.

    If the file has a ``# config:`` line only that line is used; otherwise
    every non-comment line is read.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    tagged = [ln.split(":", 1)[1] for ln in lines if ln.startswith("# config:")]
    if not tagged:
        tagged = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    out = {}
    for line in tagged:
        for tok in shlex.split(line):
            if "=" not in tok:
                raise ConfigError(f"config token {tok!r} is not key=value")
            k, v = tok.split("=", 1)
            out[k.strip().lower()] = v.strip()
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, the optional config file and explicit flags, then
    validate everything before any computation starts."""
    raw = dict(DEFAULTS)
    params = {}
    if getattr(args, "config", None):
        for k, v in read_config_file(args.config).items():
            if k in _KNOWN:
                raw[k] = v
            else:
                params[k] = v
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            raw[key] = value
    family = str(raw["family"])
    if params:
        family = family + " " + " ".join(f"{k}={v}" for k, v in params.items())
    try:
        service = parse_service(family)
    except (InvalidParameter, KeyError) as exc:
        raise ConfigError(f"bad service specification {family!r}: {exc}") from None

    mu_text = str(raw["mu"]).strip().lower()
    mu = math.inf if mu_text in ("inf", "infinity") else _parse_float("mu", mu_text)
    jgrid = raw["jgrid"]
    if isinstance(jgrid, str):
        jgrid = [_parse_int("jgrid", x) for x in jgrid.split(",") if x.strip()]
    cfg = ExperimentConfig(
        service=service,
        lam=_parse_float("lambda", raw["lambda"]),
        mu=mu,
        order=_parse_int("order", raw["order"]),
        horizon=_parse_float("horizon", raw["horizon"]),
        warmup=None if raw["warmup"] in (None, "None") else _parse_float("warmup", raw["warmup"]),
        batches=_parse_int("batches", raw["batches"]),
        seed=_parse_int("seed", raw["seed"]),
        jmax=None if raw["jmax"] in (None, "None") else _parse_int("jmax", raw["jmax"]),
        jgrid=jgrid,
        quantity=str(raw["quantity"]),
        corrected=_parse_bool(raw["corrected"]),
    )
    if cfg.order < 1:
        raise ConfigError("order must be positive")
    if cfg.quantity not in ("Lmu", "Linf", "Rmu"):
        raise ConfigError("quantity must be one of Lmu, Linf, Rmu")
    try:
        cfg.model  # stability and parameter checks
    except UnstableModel as exc:
        raise ConfigError(str(exc)) from None
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _jgrid(cfg: ExperimentConfig, default_max: int) -> list[int]:
    if cfg.jgrid:
        return sorted(set(cfg.jgrid))
    jmax = cfg.jmax or default_max
    grid = np.unique(np.round(np.geomspace(10, max(jmax, 10), 13)).astype(int))
    return [int(j) for j in grid]


def _writer(out):
    if out in (None, "-"):
        return sys.stdout, False
    return open(out, "w", newline=""), True


def _emit(out, command: str, cfg: ExperimentConfig, header, rows, notes=()):
    fh, close = _writer(out)
    try:
        fh.write(f"# config: {cfg.tokens()}\n")
        fh.write(f"# command: {command}\n")
        for note in notes:
            fh.write(f"# {note}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    finally:
        if close:
            fh.close()


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


# ---------------------------------------------------------------------------
# subcommands


def cmd_asym(cfg: ExperimentConfig, out=None):
    """Rows (j, first_order, second_order, delta)."""
    exp = asy.theorem1_expansion(cfg.model, corrected=cfg.corrected)
    rows = []
    for j in _jgrid(cfg, 10_000):
        first, both = exp(float(j), 1), exp(float(j), 2)
        rows.append((j, first, both, both - first))
    notes = [f"c1={exp.c1:.17g} e1={exp.e1:g} c2={exp.c2:.17g} e2={exp.e2:g}"]
    _emit(out, "asym", cfg, ["j", "first_order", "second_order", "delta"], rows, notes)
    return rows


def _series_for(cfg: ExperimentConfig):
    model = cfg.model
    return {"Lmu": pmf_L_mu, "Linf": pmf_L_infinity, "Rmu": pmf_R_mu}[cfg.quantity](model, cfg.order)


def cmd_pmf(cfg: ExperimentConfig, out=None):
    series = _series_for(cfg)
    cdf = series.cdf()
    tail = series.tail()
    n_max = cfg.jmax if cfg.jmax is not None else series.order
    rows = [(n, series[n], cdf[n], tail[n]) for n in range(min(n_max, series.order) + 1)]
    mass, alpha = series.tail_mass_estimate()
    notes = [f"quantity={cfg.quantity} fitted_mass_beyond_order={mass:.3g} fitted_decay={alpha:.4g}"]
    _emit(out, "pmf", cfg, ["n", "pmf", "cdf", "tail"], rows, notes)
    return series


def cmd_simulate(cfg: ExperimentConfig, out=None, manifest=None):
    model = cfg.model
    if not model.retrials:
        raise ConfigError("simulation needs a finite --mu")
    est = run_retrial_simulation(model, cfg.horizon, cfg.warmup, cfg.batches, cfg.seed)
    lmu = est.L_mu()
    p0, hw = est.idle_probability()
    n_max = cfg.jmax if cfg.jmax is not None else len(lmu.pmf) - 1
    rows = [(n, lmu.pmf[n], lmu.half_width[n]) for n in range(min(n_max, len(lmu.pmf) - 1) + 1)]
    notes = [f"idle_probability={p0:.6f} half_width={hw:.6f} expected={1 - model.rho:.6f}"]
    _emit(out, "simulate", cfg, ["state", "pmf", "half_width"], rows, notes)
    if manifest is None and out not in (None, "-"):
        manifest = str(out) + ".json"
    if manifest:
        info = {
            "command": "simulate",
            "seed": cfg.seed,
            "horizon": cfg.horizon,
            "warmup": est.warmup,
            "batches": cfg.batches,
            "model": model.describe(),
            "config": cfg.tokens(),
            "idle_probability": [p0, hw],
        }
        try:
            cond = conditional_Rmu_estimate(est)
            info["Rmu_head"] = cond.pmf[:10].tolist()
        except RetrialError:
            pass
        write_manifest(manifest, **info)
    return est


def cmd_compare(cfg: ExperimentConfig, out=None):
    """Rows (j, exact_tail, e1_rel, e2_rel, reliable); reports the crossover j*
    beyond which the two-term expansion is the more accurate one."""
    grid = cfg.jgrid or ([500, 1000, 2000] if cfg.jmax is None else _jgrid(cfg, cfg.jmax))
    if max(grid) >= cfg.order:
        raise ConfigError(f"series order {cfg.order} must exceed max j = {max(grid)}")
    series = pmf_L_mu(cfg.model, cfg.order)
    exp = asy.theorem1_expansion(cfg.model, corrected=cfg.corrected)
    rows = []
    for j in grid:
        est = tail_from_pmf(series, j)
        exact = est.value
        reliable = exact > 10 * est.uncertainty
        e1 = abs(exact - exp(float(j), 1)) / exact if exact > 0 else math.inf
        e2 = abs(exact - exp(float(j), 2)) / exact if exact > 0 else math.inf
        rows.append((j, exact, e1, e2, reliable))
    crossover = None
    for i, (j, _, e1, e2, ok) in enumerate(rows):
        if all(r[3] < r[2] for r in rows[i:] if r[4]):
            crossover = j
            break
    notes = [f"crossover_j={crossover if crossover is not None else 'none'}"]
    _emit(out, "compare", cfg, ["j", "exact_tail", "e1_rel", "e2_rel", "reliable"], rows, notes)
    return rows, crossover


def cmd_validate(only=None, stream=None) -> int:
    from .validation import run_criteria

    stream = stream or sys.stdout
    results = run_criteria(only, report=lambda line: print(line, file=stream, flush=True))
    failed = [r.number for r in results if not r.passed]
    if failed:
        print("failed criteria: " + ", ".join(map(str, failed)), file=stream)
        return EXIT_VALIDATION
    print("all criteria passed", file=stream)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _model_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--family", help='service law, e.g. "burr b=2 v=3 w=1", "hallweiss v=3 w=-1", '
                   '"studentt v=4", "lomax b=2 v=3", "exponential nu=1"')
    g.add_argument("--lambda", dest="lambda", help="arrival rate (default 0.5)")
    g.add_argument("--mu", help='retrial rate, or "inf" for no retrials (default 1)')
    p.add_argument("--config", help="file of key=value tokens, or a CSV written by this tool")
    p.add_argument("--out", help="output CSV path (default stdout)")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mg1retrial", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("asym", help="expansion values on a j grid")
    _model_flags(p)
    p.add_argument("--jmax", help="largest j of the default log grid (default 10000)")
    p.add_argument("--jgrid", help="comma-separated j values")
    p.add_argument("--corrected", action="store_true", help="use the corrected second-order constant")

    p = sub.add_parser("pmf", help="exact series pmf, cdf and tail")
    _model_flags(p)
    p.add_argument("--order", help="series truncation order N (default 4096)")
    p.add_argument("--jmax", help="last state written (default N)")
    p.add_argument("--quantity", choices=["Lmu", "Linf", "Rmu"], help="which law (default Lmu)")

    p = sub.add_parser("simulate", help="discrete-event simulation")
    _model_flags(p)
    p.add_argument("--horizon", help="simulated time including warm-up (default 1e6)")
    p.add_argument("--warmup", help="discarded initial time (default 10%% of horizon)")
    p.add_argument("--batches", help="number of batches for confidence intervals (default 32)")
    p.add_argument("--seed", help="random seed (default 0)")
    p.add_argument("--jmax", help="last state written")
    p.add_argument("--manifest", help="JSON manifest path (default <out>.json)")

    p = sub.add_parser("compare", help="expansion errors against the exact series")
    _model_flags(p)
    p.add_argument("--order", help="series truncation order N (default 4096)")
    p.add_argument("--jmax", help="largest j of a log grid (default: j = 500, 1000, 2000)")
    p.add_argument("--jgrid", help="comma-separated j values")
    p.add_argument("--corrected", action="store_true", help="use the corrected second-order constant")

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "validate":
            only = None
            if args.only:
                from .validation import CRITERIA

                only = [_parse_int("only", x) for x in args.only.split(",")]
                bad = [n for n in only if n not in CRITERIA]
                if bad:
                    raise ConfigError(f"unknown criteria {bad}")
            return cmd_validate(only)
        cfg = build_config(args)
        out = args.out
        if args.command == "asym":
            cmd_asym(cfg, out)
        elif args.command == "pmf":
            cmd_pmf(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out, getattr(args, "manifest", None))
        elif args.command == "compare":
            cmd_compare(cfg, out)
    except (ConfigError, InvalidParameter, UnstableModel, UnsupportedFamily,
            SecondOrderUnavailable, IndexBeyondTruncation) as exc:
        print(f"mg1retrial: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceGuard, ArithmeticError) as exc:
        print(f"mg1retrial: numerical guard tripped: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
