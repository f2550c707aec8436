"""Command line entry point: ``scfcq {simulate,estimate,bootstrap}``.

Settings come from an optional JSON file (``--config``) overlaid by flags.
Exit codes: 0 success, 2 configuration error, 3 runtime failure; failures
print a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisSpec
from .errors import ConfigError, ScfcqError
from .estimator import Dataset, ScfcqConfig, estimate_path, trim
from .first_stage import LOCAL_LINEAR, PARAMETRIC, FirstStageConfig, fit_control
from .inference import BootstrapConfig, bootstrap_path, summarize
from .simulation import DGP_I, DGP_II, REPORT_TAUS, DgpSpec, default_first_stage, run_mc
from .svg import line_chart
from .tables import numeric_columns, write_rows

COMMANDS = ("simulate", "estimate", "bootstrap")
FIRST_STAGE_MODES = {"parametric": PARAMETRIC, PARAMETRIC: PARAMETRIC, "local-linear": LOCAL_LINEAR}
DGPS = {"DGP-I": DGP_I, "I": DGP_I, "1": DGP_I, "DGP-II": DGP_II, "II": DGP_II, "2": DGP_II}


@dataclass
class RunConfig:
    command: str
    out: str = "."
    input: str | None = None
    y: str | None = None
    x: list = field(default_factory=list)
    r: str | None = None
    z: list = field(default_factory=list)
    transforms: list = field(default_factory=list)
    scfcq: ScfcqConfig = ScfcqConfig()
    first_stage: FirstStageConfig = FirstStageConfig()
    bootstrap: BootstrapConfig = BootstrapConfig()
    dgp: DgpSpec = DgpSpec()
    n: int = 1000
    G: int = 200
    report_taus: tuple = REPORT_TAUS
    seed: int = 0


def build_parser():
    ap = argparse.ArgumentParser(prog="scfcq", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--input", help="input CSV (estimate, bootstrap)")
    ap.add_argument("--y", help="outcome column")
    ap.add_argument("--x", help="comma-separated exogenous regressors")
    ap.add_argument("--r", help="endogenous regressor column")
    ap.add_argument("--z", help="comma-separated excluded instruments")
    ap.add_argument("--square", action="append", help="add the square of a column as a regressor")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tau0", type=float)
    ap.add_argument("--tau-l", dest="tauL", type=float)
    ap.add_argument("--step", type=float)
    ap.add_argument("--q0", type=float)
    ap.add_argument("--q1", type=float)
    ap.add_argument("--trim", dest="trim_fraction", type=float)
    ap.add_argument("--basis", help="poly:J or bspline:K")
    ap.add_argument("--first-stage", dest="mode", help="parametric | local-linear")
    ap.add_argument("--draws", type=int)
    ap.add_argument("--ci-level", dest="ci_level", type=float)
    ap.add_argument("--unit-weights", action="store_true", default=None, help="test hook: bootstrap weights = 1")
    ap.add_argument("--dgp", help="DGP-I | DGP-II")
    ap.add_argument("--n", type=int)
    ap.add_argument("--G", type=int)
    return ap


def _section(doc, key):
    val = doc.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(key, "must be an object")
    return dict(val)


def _names(value, field_name):
    if value is None:
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return list(value)
    raise ConfigError(field_name, "must be a list of column names")


def _build(fn, field_name, **kwargs):
    try:
        return fn(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, str(exc)) from None


def parse_config(argv):
    """Merge the JSON file (if any) with flags into a validated RunConfig."""
    args = build_parser().parse_args(argv)
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
            doc = json.loads(text) if text.strip() else {}
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "top level must be an object")

    cols = _section(doc, "columns")
    sc = _section(doc, "scfcq")
    fs = _section(doc, "first_stage")
    bs = _section(doc, "bootstrap")
    sim = _section(doc, "simulate")

    for key in ("tau0", "tauL", "step", "q0", "q1", "trim_fraction"):
        if getattr(args, key) is not None:
            sc[key] = getattr(args, key)
    if args.basis is not None:
        sc["basis"] = args.basis
    if args.mode is not None:
        fs["mode"] = args.mode
    if args.draws is not None:
        bs["draws"] = args.draws
    if args.ci_level is not None:
        bs["ci_level"] = args.ci_level
    if args.unit_weights:
        bs["unit_weights"] = True
    for key in ("dgp", "n", "G"):
        if getattr(args, key) is not None:
            sim[key] = getattr(args, key)
    for key in ("y", "r"):
        if getattr(args, key) is not None:
            cols[key] = getattr(args, key)
    for key in ("x", "z"):
        if getattr(args, key) is not None:
            cols[key] = getattr(args, key)

    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")

    basis_text = sc.pop("basis", "poly:3")
    try:
        m_basis = BasisSpec.parse(str(basis_text))
    except ValueError as exc:
        raise ConfigError("scfcq.basis", str(exc)) from None
    unknown = set(sc) - {"tau0", "tauL", "step", "q0", "q1", "trim_fraction"}
    if unknown:
        raise ConfigError(f"scfcq.{sorted(unknown)[0]}", "unknown field")
    q0, q1 = sc.get("q0", ScfcqConfig.q0), sc.get("q1", ScfcqConfig.q1)
    if not 0 <= q1 <= q0 < 1:
        raise ConfigError("scfcq.q1", f"need 0 <= q1 <= q0 < 1, got q0={q0}, q1={q1}")
    scfcq_cfg = _build(ScfcqConfig, "scfcq", m_basis=m_basis, **sc)

    mode = fs.pop("mode", "parametric")
    if mode not in FIRST_STAGE_MODES:
        raise ConfigError("first_stage.mode", f"expected parametric or local-linear, got {mode!r}")
    if "v_pair" in fs:
        fs["v_pair"] = tuple(fs["v_pair"])
    unknown = set(fs) - {"v_center", "v_pair", "z_degree", "bandwidth_rule", "clamp_sigma"}
    if unknown:
        raise ConfigError(f"first_stage.{sorted(unknown)[0]}", "unknown field")

    unknown = set(bs) - {"draws", "ci_level", "reuse_selectors", "unit_weights"}
    if unknown:
        raise ConfigError(f"bootstrap.{sorted(unknown)[0]}", "unknown field")
    boot_cfg = _build(BootstrapConfig, "bootstrap", seed=seed, **bs)

    dgp_name = str(sim.pop("dgp", DGP_I))
    if dgp_name not in DGPS:
        raise ConfigError("simulate.dgp", f"unknown DGP {dgp_name!r} (use DGP-I or DGP-II)")
    n = sim.pop("n", 1000)
    G = sim.pop("G", 200)
    taus = tuple(sim.pop("report_taus", REPORT_TAUS))
    unknown = set(sim) - {"rho", "beta0", "censor_target"}
    if unknown:
        raise ConfigError(f"simulate.{sorted(unknown)[0]}", "unknown field")
    dgp = _build(DgpSpec, "simulate", variant=DGPS[dgp_name], **sim)
    if not isinstance(n, int) or n < 10:
        raise ConfigError("simulate.n", "must be an integer >= 10")
    if not isinstance(G, int) or G < 2:
        raise ConfigError("simulate.G", "must be an integer >= 2")

    if "clamp_sigma" not in fs and args.command == "simulate":
        fs["clamp_sigma"] = default_first_stage(dgp).clamp_sigma
    fs_cfg = _build(FirstStageConfig, "first_stage", mode=FIRST_STAGE_MODES[mode], **fs)

    transforms = list(doc.get("transforms", []))
    for col in args.square or []:
        transforms.append(f"square:{col}")
    for t in transforms:
        if not isinstance(t, str) or not t.startswith("square:") or not t[7:]:
            raise ConfigError("transforms", f"unsupported directive {t!r} (use 'square:<column>')")

    cfg = RunConfig(
        command=args.command,
        out=args.out or doc.get("out", "."),
        input=args.input or doc.get("input"),
        y=cols.get("y"),
        x=_names(cols.get("x"), "columns.x"),
        r=cols.get("r"),
        z=_names(cols.get("z"), "columns.z"),
        transforms=transforms,
        scfcq=scfcq_cfg,
        first_stage=fs_cfg,
        bootstrap=boot_cfg,
        dgp=dgp,
        n=n,
        G=G,
        report_taus=taus,
        seed=seed,
    )
    if cfg.command in ("estimate", "bootstrap"):
        if not cfg.input:
            raise ConfigError("input", "required for this command")
        for key in ("y", "r"):
            if not getattr(cfg, key):
                raise ConfigError(f"columns.{key}", "required")
        if not cfg.z:
            raise ConfigError("columns.z", "at least one excluded instrument is required")
    return cfg


def load_dataset(cfg):
    """Read the bound columns and assemble the estimation dataset.

    X gets an intercept, the listed exogenous columns and any squared
    columns; Z holds the exogenous columns plus the excluded instruments
    (squared terms are not instruments).
    """
    squares = [t[7:] for t in cfg.transforms]
    names = [cfg.y, cfg.r] + cfg.x + cfg.z + squares
    names = list(dict.fromkeys(names))
    try:
        data = numeric_columns(cfg.input, names)
    except KeyError as exc:
        missing = exc.args[0]
        where = "columns.y" if missing == cfg.y else "columns.r" if missing == cfg.r else (
            "columns.x" if missing in cfg.x else "columns.z" if missing in cfg.z else "transforms"
        )
        raise ConfigError(where, f"column {missing!r} not found in {cfg.input}") from None
    n = data[cfg.y].size
    X = [np.ones(n)] + [data[c] for c in cfg.x] + [data[c] ** 2 for c in squares]
    x_names = ("const", *cfg.x, *(f"{c}_sq" for c in squares))
    Z = [data[c] for c in cfg.x] + [data[c] for c in cfg.z]
    y = data[cfg.y]
    if np.any(y < 0):
        raise ScfcqError(f"outcome column {cfg.y!r} has negative values; censoring point must be 0")
    return Dataset(y, np.column_stack(X), data[cfg.r], np.column_stack(Z), x_names=x_names)


def _estimate(cfg):
    ds = load_dataset(cfg)
    cv = fit_control(ds.R, ds.Z, cfg.first_stage)
    ds = trim(ds, cfg.scfcq.trim_fraction)
    return ds, cv, estimate_path(ds, cv.v_hat, cfg.scfcq)


def path_rows(path):
    names = path.coef_names() + tuple(f"delta{j + 1}" for j in range(path.delta.shape[1]))
    return [
        {"tau": float(tau), "coef": name, "estimate": float(path.theta[l, j])}
        for l, tau in enumerate(path.grid)
        for j, name in enumerate(names)
    ]


def diagnostic_rows(path):
    return [
        {
            "tau": float(tau),
            "threshold": float(path.eta_pass2[l]),
            "subsample_size": int(path.n_pass2[l]),
            "status": path.status[l],
            "threshold_pass1": float(path.eta_pass1[l]),
            "subsample_pass1": int(path.n_pass1[l]),
        }
        for l, tau in enumerate(path.grid)
    ]


def cmd_estimate(cfg):
    ds, _, path = _estimate(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    write_rows(os.path.join(cfg.out, "path.csv"), ("tau", "coef", "estimate"), path_rows(path))
    write_rows(
        os.path.join(cfg.out, "diagnostics.csv"),
        ("tau", "threshold", "subsample_size", "status", "threshold_pass1", "subsample_pass1"),
        diagnostic_rows(path),
    )
    series = {name: path.theta[:, j] for j, name in enumerate(path.coef_names()) if name != "const"}
    line_chart(os.path.join(cfg.out, "path.svg"), path.grid, series, title="Coefficient path")
    print(f"estimated {path.grid.size} quantiles on {int(ds.T.sum())} trimmed observations -> {cfg.out}")
    return 0


def cmd_bootstrap(cfg):
    ds, cv, path = _estimate(cfg)
    workers = int(os.environ.get("SCFCQ_WORKERS", "1"))
    res = bootstrap_path(ds, cv.v_hat, cfg.scfcq, cfg.bootstrap, point=path, workers=workers)
    rows = summarize(res, path)
    os.makedirs(cfg.out, exist_ok=True)
    write_rows(
        os.path.join(cfg.out, "bootstrap_summary.csv"),
        ("tau", "coef", "estimate", "se", "ci_lo", "ci_hi"),
        rows,
    )
    names = [c for c in res.coef_names if c != "const"]
    idx = {c: j for j, c in enumerate(res.coef_names)}
    line_chart(
        os.path.join(cfg.out, "bootstrap.svg"),
        path.grid,
        {c: path.theta[:, idx[c]] for c in names},
        bands={c: (res.ci_lo[:, idx[c]], res.ci_hi[:, idx[c]]) for c in names},
        title=f"Coefficient path with {int(round(100 * res.ci_level))}% bootstrap bands",
    )
    print(f"{res.n_ok} of {cfg.bootstrap.draws} bootstrap draws succeeded -> {cfg.out}")
    return 0


def cmd_simulate(cfg):
    report = run_mc(
        cfg.G,
        cfg.n,
        cfg.dgp,
        cfg.scfcq,
        cfg.first_stage,
        seed=cfg.seed,
        report_taus=cfg.report_taus,
    )
    os.makedirs(cfg.out, exist_ok=True)
    report.to_csv(os.path.join(cfg.out, "mc_report.csv"))
    print(f"{cfg.dgp.variant} n={cfg.n} G={cfg.G} basis={cfg.scfcq.m_basis.label()} failures={report.failures}")
    print(f"{'tau':>5} {'coef':>6} {'bias':>8} {'rmse':>8}")
    for row in report.rows:
        print(f"{row['tau']:5.2f} {row['coef']:>6} {row['bias']:8.4f} {row['rmse']:8.4f}")
    return 0


HANDLERS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "bootstrap": cmd_bootstrap}


def _fail(code, exc, **extra):
    record = {"error": type(exc).__name__, "message": str(exc), **extra}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        return _fail(2, exc, field=exc.field)
    try:
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        return _fail(2, exc, field=exc.field)
    except (ScfcqError, OSError, ValueError) as exc:
        extra = {"line": exc.line} if getattr(exc, "line", None) is not None else {}
        return _fail(3, exc, **extra)


if __name__ == "__main__":
    sys.exit(main())
