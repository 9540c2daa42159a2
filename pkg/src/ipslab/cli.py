"""The ``ipslab`` command line.

Every subcommand produces a table of rows. ``--format json`` writes
``{"command", "passed", "meta", "rows"}``; ``--format csv`` writes the
same rows with a header. Exit codes: 0 when every check passes, 1 when a
check fails, 2 on a usage or parameter error.

Options may also come from an INI file given by ``--config``: section
``[<subcommand>]`` holds the same keys as the long flags (dashes become
underscores). Flags override the file. ``--save-config`` writes the
resolved options back in that format, so a run can be repeated exactly.
The environment variable ``IPSLAB_THREADS`` sets the Monte Carlo thread
count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .models import FAMILIES, FAMILY_Q_VALUES, ModelSpec, ParameterError

SEARCHES = ("rank1", "symmetric", "braid-a", "braid-b")
EXACT_KINDS = ("scam", "reshuffle", "dimer", "dual-ode")
OBSERVABLE_DEFAULT = "density,pair:0,pair:1,pair:2,pair:3,pair:4,pair:5,run:1,run:2,run:3,run:4"


class UsageError(Exception):
    pass


@dataclass
class Report:
    command: str
    rows: list
    passed: bool = True
    meta: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    """Resolved options of one invocation; round-trips through the INI format."""

    subcommand: str
    options: dict

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser[self.subcommand] = {k: _ini_value(v) for k, v in sorted(self.options.items())
                                   if v is not None}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, subcommand: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_string(text)
        options = dict(parser[subcommand]) if parser.has_section(subcommand) else {}
        return cls(subcommand, options)


def _ini_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value)
    if isinstance(value, float) and (math.isinf(value) or math.isnan(value)):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "item"):
        return value.item()
    return value


# Argument handling

def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--model", default=None, help=f"model name, one of {', '.join(FAMILIES)}")
    p.add_argument("--theta", default=None)
    p.add_argument("--r", default=None)
    p.add_argument("--l", default=None)
    p.add_argument("--alpha1", default=None, help="reshuffle weight of 11")
    p.add_argument("--rho", default=None, help="reshuffle density")
    p.add_argument("--param", action="append", default=None, metavar="KEY=P/Q",
                   help="extra model parameter, repeatable")
    p.add_argument("--conjugation", default=None, choices=("none", "rho", "tau", "rhotau"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipslab", description="Exact and Monte Carlo tools for two-site interacting particle systems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI file with defaults")
    common.add_argument("--save-config", default=None, help="write the resolved options here")
    common.add_argument("--format", default=None, choices=("json", "csv"))
    common.add_argument("--out", default=None, help="output file (default stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="relations satisfied by a model")
    _add_model_flags(p)

    p = sub.add_parser("classify", parents=[common], help="exhaustive generator searches")
    p.add_argument("--search", default=None, choices=SEARCHES)
    p.add_argument("--grid", default=None, type=int, help="grid denominator")

    p = sub.add_parser("duality", parents=[common], help="duality identity checks")
    _add_model_flags(p)
    p.add_argument("--family", default=None,
                   choices=("alternating_interval", "product_moment", "staircase"))
    p.add_argument("--sites", default=None, type=int)
    p.add_argument("--order", default=None, type=int)
    p.add_argument("--w", default=None, help="site vector as a,b")
    p.add_argument("--anchors", default=None, help="emit the dual action of these anchors")

    p = sub.add_parser("exact", parents=[common], help="exact solutions")
    p.add_argument("kind", nargs="?", choices=EXACT_KINDS,
                   help="solution family; may come from --config instead")
    _add_model_flags(p)
    p.add_argument("--t", default=None, help="time, or inf")
    p.add_argument("--nmax", default=None, type=int)
    p.add_argument("--p", default=None, help="dimer density on the first sublattice")
    p.add_argument("--family", default=None, choices=("alternating_interval", "product_moment"))
    p.add_argument("--order", default=None, type=int)
    p.add_argument("--window", default=None, type=int)
    p.add_argument("--w", default=None)
    p.add_argument("--initial", default=None)

    p = sub.add_parser("ybe", parents=[common], help="Baxterised R-matrix and residuals")
    _add_model_flags(p)
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--root", default=None, choices=("small", "large"))

    p = sub.add_parser("repdims", parents=[common], help="spin-chain representation dimensions")
    p.add_argument("--sites", default=None, type=int)
    p.add_argument("--r", default=None, help="right hopping rate for the invariance check")
    p.add_argument("--invariance", default=None, choices=("yes", "no"))

    p = sub.add_parser("simulate", parents=[common], help="continuous-time Monte Carlo")
    _add_model_flags(p)
    p.add_argument("--sites", default=None, type=int)
    p.add_argument("--t", default=None, type=float)
    p.add_argument("--replicas", default=None, type=int)
    p.add_argument("--seed", default=None, type=int)
    p.add_argument("--topology", default=None, choices=("ring", "segment"))
    p.add_argument("--initial", default=None, help="all_ones, all_zeros, bernoulli:p or bits")
    p.add_argument("--observables", default=None,
                   help="comma list of density, pair:g, run:n, empty:a:b, sites:x;y;z")

    p = sub.add_parser("compare", parents=[common], help="z-score Monte Carlo vs exact values")
    _add_model_flags(p)
    p.add_argument("--mc", default=None, help="JSON or CSV written by simulate")
    p.add_argument("--exact", default=None, help="optional table of exact values (name,value)")
    p.add_argument("--t", default=None, help="time for the exact values, or inf")
    return parser


DEFAULTS = {
    "common": {"format": "json"},
    "verify": {},
    "classify": {"search": "rank1", "grid": 20},
    "duality": {"sites": 8, "order": 2},
    "exact": {"nmax": 12, "t": "inf", "p": "1/3", "order": 1, "window": 120,
              "initial": "all_ones"},
    "ybe": {"x": "3/7", "y": "2/5", "root": "small"},
    "repdims": {"sites": 6, "r": "1/3", "invariance": "yes"},
    "simulate": {"sites": 200, "t": 1.0, "replicas": 10000, "seed": 0, "topology": "ring",
                 "initial": "all_ones", "observables": OBSERVABLE_DEFAULT},
    "compare": {},
}

_INT_KEYS = {"grid", "sites", "order", "nmax", "window", "replicas", "seed"}
_FLOAT_KEYS = {("simulate", "t")}
_META_KEYS = {"command", "config", "save_config", "kind"}


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the config file over the built-in defaults."""
    command = args.command
    file_opts: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_opts = RunConfig.from_ini(fh.read(), command).options
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    options = {}
    for key, value in vars(args).items():
        if key in _META_KEYS:
            continue
        if value is None and key in file_opts:
            value = file_opts[key]
            if key == "param":
                value = [v for v in value.split(",") if v]
        if value is None:
            value = DEFAULTS[command].get(key, DEFAULTS["common"].get(key))
        if value is not None and key in _INT_KEYS:
            value = int(value)
        if value is not None and (command, key) in _FLOAT_KEYS:
            value = float(value)
        options[key] = value
    if command == "exact":
        kind = args.kind or file_opts.get("kind")
        if kind not in EXACT_KINDS:
            raise UsageError(f"exact needs a kind, one of {EXACT_KINDS}")
        options["kind"] = kind
    return RunConfig(command, options)


def model_from_options(opts: dict, required: bool = True) -> ModelSpec | None:
    name = opts.get("model")
    if not name:
        if required:
            raise UsageError("--model is required")
        return None
    params = {}
    for key in ("theta", "r", "l"):
        if opts.get(key) is not None:
            params[key] = Fraction(opts[key])
    for item in opts.get("param") or []:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = Fraction(v.strip())
    name = name.upper()
    if name == "RM" and (opts.get("rho") is not None or opts.get("alpha1") is not None):
        a1 = Fraction(opts.get("alpha1") or 0)
        if opts.get("rho") is None:
            raise UsageError("reshuffle needs --rho together with --alpha1")
        params.update(alpha1=a1, rho=Fraction(opts["rho"]))
    return ModelSpec(name, params, opts.get("conjugation") or "none")


def _pair(text: str) -> tuple[Fraction, Fraction]:
    parts = [p for p in text.split(",") if p]
    if len(parts) != 2:
        raise UsageError(f"expected a,b, got {text!r}")
    return Fraction(parts[0]), Fraction(parts[1])


# Subcommands

def run_verify(opts: dict) -> Report:
    from .models import build_model, check_braid, check_idempotent, check_stochastic, check_temperley_lieb

    spec = model_from_options(opts)
    g = build_model(spec)
    stochastic, idempotent = check_stochastic(g), check_idempotent(g)
    braid = check_braid(g)
    rows = [
        {"check": "stochastic", "holds": stochastic, "detail": ""},
        {"check": "idempotent", "holds": idempotent, "detail": ""},
        {"check": "braid", "holds": braid.holds,
         "detail": f"Q={braid.Q}" if braid.holds else f"residual={braid.residual_norm}"},
    ]
    passed = stochastic and idempotent
    if spec.name in FAMILY_Q_VALUES and spec.conjugation == "none":
        expected = FAMILY_Q_VALUES[spec.name](g.params)
        ok = braid.holds and braid.Q == expected
        rows.append({"check": "braid Q matches the family value", "holds": ok,
                     "detail": f"expected Q={expected}"})
        passed = passed and ok
    if braid.holds and braid.Q is not None:
        rows.append({"check": "temperley_lieb", "holds": check_temperley_lieb(g, braid.Q),
                     "detail": f"Q={braid.Q}"})
        rows.append({"check": "temperley_lieb (I - sigma)",
                     "holds": check_temperley_lieb(g, braid.Q, "complement"),
                     "detail": f"Q={braid.Q}"})
    return Report("verify", rows, passed, {"model": spec.describe()})


def run_classify(opts: dict) -> Report:
    from . import classify

    search, grid = opts["search"], opts["grid"]
    if search == "rank1":
        result = classify.search_rank1(grid)
    elif search == "symmetric":
        result = classify.search_symmetric(grid)
    else:
        result = classify.search_braid_ansatz(search[-1], grid)
    data = result.to_dict()
    rows = [{"sigma": json.dumps(h["sigma"]), "match": h["match"] or ""} for h in data["hits"]]
    meta = {k: v for k, v in data.items() if k != "hits"}
    return Report("classify", rows, data["unmatched"] == 0, meta)


def run_duality(opts: dict) -> Report:
    from . import duality

    spec = model_from_options(opts)
    family = opts.get("family")
    if family is None:
        raise UsageError("--family is required")
    w = _pair(opts["w"]) if opts.get("w") else None
    if opts.get("anchors"):
        anchors = tuple(int(a) for a in opts["anchors"].split(",") if a)
        if w is None:
            w = duality.preferred_eigenvector(spec)
        e = duality.DualityBasisElement(family, w, anchors, opts["sites"])
        action = duality.dual_generator_action(spec, e)
        rows = [{"anchors": ",".join(map(str, k)), "coefficient": v}
                for k, v in sorted(action.as_dict().items())]
        return Report("duality", rows, True, {"model": spec.describe(), "family": family})
    if family == "staircase":
        from .models import build_model

        params = build_model(spec).params
        ok = duality.staircase_relation_check(params["r"], params["l"], opts["sites"], opts["order"])
        ok = ok and duality.staircase_boundary_identity(params["r"], params["l"], opts["sites"])
        rows = [{"family": family, "sites": opts["sites"], "checked": "relations",
                 "max_residual": 0 if ok else "nonzero"}]
        return Report("duality", rows, ok, {"model": spec.describe()})
    res = duality.duality_identity_check(spec, family, opts["sites"], opts["order"], w)
    rows = [{"family": family, "sites": opts["sites"], "checked": res.checked,
             "max_residual": res.max_residual}]
    return Report("duality", rows, res.max_residual == 0,
                  {"model": spec.describe(), "failures": [list(f) for f in res.failures[:20]]})


def run_exact(opts: dict) -> Report:
    from . import exact

    kind = opts["kind"]
    nmax = opts["nmax"]
    if kind == "scam":
        theta = Fraction(opts.get("theta") or "1/2")
        sol = exact.scam_renewal_measure(theta, opts["t"], nmax)
        rows = [{"n": n, "janossi": sol[n]} for n in range(1, nmax + 1)]
        return Report("exact", rows, True, {"kind": kind, "theta": theta, "t": str(opts["t"])})
    if kind == "reshuffle":
        spec = model_from_options(opts, required=False)
        if spec is not None and spec.name == "RM":
            from .models import build_model

            alpha1, rho = exact.reshuffle_parameters(build_model(spec).sigma[0])
        else:
            alpha1, rho = Fraction(opts.get("alpha1") or 0), Fraction(opts.get("rho") or "1/2")
        runs = exact.reshuffle_run_probabilities(alpha1, rho, nmax)
        kernel = exact.reshuffle_kernel(alpha1, rho, nmax) if rho > 0 else None
        rows = [{"n": n, "run_probability": runs[n],
                 "kernel": kernel(n) if kernel is not None else ""} for n in range(nmax + 1)]
        return Report("exact", rows, True, {"kind": kind, "alpha1": alpha1, "rho": rho})
    if kind == "dimer":
        theta = Fraction(opts.get("theta") or "1/3")
        m = exact.dimer_invariant_measure(theta, Fraction(opts["p"]))
        rows = [{"quantity": "phi", "value": m.phi},
                {"quantity": "phi_is_involution", "value": m.involution},
                {"quantity": "stationarity_residual_forward", "value": m.residual_forward},
                {"quantity": "stationarity_residual_backward", "value": m.residual_backward},
                {"quantity": "phi_fixed_point", "value": m.fixed_point},
                {"quantity": "conjugation_residual_N8",
                 "value": exact.dimer_lattice_conjugation_residual(theta, 8)}]
        ok = m.involution and m.residual_forward == 0 and m.residual_backward == 0
        return Report("exact", rows, ok, {"kind": kind, "theta": theta})
    spec = model_from_options(opts)
    if opts.get("family") is None:
        raise UsageError("dual-ode needs --family")
    w = _pair(opts["w"]) if opts.get("w") else None
    sol = exact.solve_dual_ode(spec, opts["family"], opts["order"], opts["window"],
                               opts["t"], opts["initial"], w)
    rows = [{"anchors": ",".join(map(str, k)), "value": v} for k, v in sorted(sol.interior().items())]
    return Report("exact", rows, sol.boundary_error <= 1e-8,
                  {"kind": kind, "model": spec.describe(), "boundary_error": sol.boundary_error})


def run_ybe(opts: dict) -> Report:
    from .models import build_model
    from . import yangbaxter as yb

    spec = model_from_options(opts)
    g = build_model(spec)
    fam = yb.baxterise_auto(g, opts["root"])
    x, y = Fraction(opts["x"]), Fraction(opts["y"])
    mat = fam(x)
    rows = [{"row": i, **{f"c{j}": mat[i, j] for j in range(4)}} for i in range(4)]
    res, swapped = yb.ybe_residual(fam, x, y), yb.ybe_residual_swapped(fam, x, y)
    meta = {"model": spec.describe(), "Q": fam.Q, "q": fam.q, "x": x, "y": y,
            "residual": res, "residual_swapped": swapped}
    return Report("ybe", rows, res == 0 and swapped == 0, meta)


def run_repdims(opts: dict) -> Report:
    from . import replab

    n = opts["sites"]
    rows, passed = [], True
    for k, dp, dq in replab.span_dimensions(n):
        expected = replab.expected_dimension(n, k)
        passed = passed and dp == dq == expected
        rows.append({"k": k, "dim_P": dp, "dim_Q": dq, "binomial": expected})
    meta = {"sites": n}
    if opts["invariance"] == "yes":
        r = Fraction(opts["r"])
        rep = replab.invariance_check(n, r, 1 - r)
        meta.update(invariance_residual=rep.max_residual, quotient_residual=rep.quotient_residual,
                    checked=rep.checked)
        passed = passed and rep.max_residual == 0 and rep.quotient_residual == 0
    return Report("repdims", rows, passed, meta)


def parse_observable(text: str) -> tuple[str, dict]:
    parts = text.strip().split(":")
    name = parts[0]
    if name == "density" and len(parts) == 1:
        return "density", {}
    if name == "pair" and len(parts) == 2:
        return "pair", {"gap": int(parts[1])}
    if name == "run" and len(parts) == 2:
        return "run", {"n": int(parts[1])}
    if name == "empty" and len(parts) == 3:
        return "empty_interval", {"a": int(parts[1]), "b": int(parts[2])}
    if name == "sites" and len(parts) == 2:
        return "sites", {"sites": [int(s) for s in parts[1].split(";")]}
    raise UsageError(f"unknown observable {text!r}")


def _initial(text: str):
    if text in ("all_ones", "all_zeros") or text.startswith("bernoulli:"):
        return text
    if set(text) <= {"0", "1"}:
        return tuple(int(c) for c in text)
    raise UsageError(f"unknown initial condition {text!r}")


def run_simulate(opts: dict) -> Report:
    from . import simulate as sim

    threads = os.environ.get("IPSLAB_THREADS")
    if threads:
        import numba

        numba.set_num_threads(int(threads))
    spec = model_from_options(opts)
    params = sim.SimParams(spec, opts["sites"], opts["t"], opts["replicas"], opts["seed"],
                           opts["topology"], _initial(opts["initial"]))
    ensemble = sim.simulate(params)
    rows = []
    for text in opts["observables"].split(","):
        name, kw = parse_observable(text)
        est = sim.estimate(ensemble, name, name=text.strip(), **kw)
        rows.append({"observable": est.name, "value": est.value, "stderr": est.stderr,
                     "replicas": est.replicas})
    meta = {"model": spec.name, "params": {k: str(v) for k, v in spec.params.items()},
            "conjugation": spec.conjugation, "sites": opts["sites"], "t": opts["t"],
            "replicas": opts["replicas"], "seed": opts["seed"], "topology": opts["topology"],
            "initial": opts["initial"]}
    return Report("simulate", rows, True, meta)


def exact_observable(spec: ModelSpec, t, observable: str) -> float:
    """Exact value of a simulate observable when a closed form is available."""
    from . import exact
    from .models import build_model

    name, kw = parse_observable(observable)
    g = build_model(spec)
    if name == "density":
        sites = [0]
    elif name == "pair":
        sites = [0, kw["gap"] + 1]
    elif name == "run":
        sites = list(range(kw["n"]))
    elif name == "sites":
        sites = kw["sites"]
    else:
        sites = None
    if spec.name == "SCAM" and spec.conjugation == "none" and sites is not None:
        if name == "density":
            return exact.scam_density(g.params["theta"], t)
        return exact.scam_correlation(g.params["theta"], t, sites)
    if spec.name == "RM" and spec.conjugation == "none" and sites is not None:
        alpha1, rho = exact.reshuffle_parameters(g.sigma[0])
        if name in ("density", "run"):
            return float(exact.reshuffle_run_probabilities(alpha1, rho, len(sites))[len(sites)])
        kernel = exact.reshuffle_kernel(alpha1, rho, sites[-1] - sites[0] + 1)
        return float(exact.reshuffle_correlation(kernel, sites))
    if spec.name == "EM2" and name == "density":
        return math.exp(-float(exact._time(t)))
    raise UsageError(f"no exact value for {observable!r} in {spec.describe()}")


def _read_table(path: str) -> tuple[list[dict], dict]:
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json") or text.lstrip().startswith("{"):
        data = json.loads(text)
        return data["rows"], data.get("meta", {})
    return list(csv.DictReader(io.StringIO(text))), {}


def run_compare(opts: dict) -> Report:
    from .simulate import ObservableEstimate, compare

    if not opts.get("mc"):
        raise UsageError("--mc is required")
    rows, meta = _read_table(opts["mc"])
    if opts.get("model") is None and meta:
        spec = ModelSpec(meta["model"], meta.get("params", {}), meta.get("conjugation", "none"))
    else:
        spec = model_from_options(opts)
    t = opts.get("t") if opts.get("t") is not None else meta.get("t")
    if t is None:
        raise UsageError("--t is required when the Monte Carlo file has no metadata")
    mc = {r["observable"]: ObservableEstimate(r["observable"], float(r["value"]),
                                              float(r["stderr"]), int(r["replicas"]))
          for r in rows}
    if opts.get("exact"):
        table, _ = _read_table(opts["exact"])
        exact = {r["observable"]: float(r["value"]) for r in table}
    else:
        exact = {key: exact_observable(spec, t, key) for key in mc}
    report = compare(exact, mc)
    out = [{"observable": e.key, "exact": e.exact, "mc": e.value, "stderr": e.stderr, "z": e.z}
           for e in report.entries]
    return Report("compare", out, report.passed,
                  {"model": spec.describe(), "t": t, "fraction_within_4": report.fraction_within,
                   "max_abs_z": report.max_abs_z})


HANDLERS = {
    "verify": run_verify, "classify": run_classify, "duality": run_duality, "exact": run_exact,
    "ybe": run_ybe, "repdims": run_repdims, "simulate": run_simulate, "compare": run_compare,
}


# Output

def render(report: Report, fmt: str) -> str:
    rows = [{k: _jsonable(v) for k, v in row.items()} for row in report.rows]
    if fmt == "json":
        payload = {"command": report.command, "passed": report.passed,
                   "meta": _jsonable(report.meta), "rows": rows}
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    fields = list(dict.fromkeys(k for row in rows for k in row))
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = resolve(args)
        report = HANDLERS[config.subcommand](config.options)
    except (UsageError, ParameterError, ValueError, KeyError, OSError) as exc:
        print(f"ipslab {args.command}: {exc}", file=sys.stderr)
        return 2
    if args.save_config:
        with open(args.save_config, "w") as fh:
            fh.write(config.to_ini())
    text = render(report, config.options["format"])
    if config.options.get("out"):
        with open(config.options["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not report.passed:
        print(f"ipslab {args.command}: check failed", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
