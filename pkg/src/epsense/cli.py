"""``epsense`` command line: validation, sweeps, oracle comparison and figure presets.

Exit codes: 0 ok, 1 an expectation was missed, 2 invalid model, 3 I/O or
config problem, 4 numeric range exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import presets
from .errors import ClusteringError, ModelError, NumericRangeError, StructureError, TruncationError
from .model import build_dynamical_matrix, load_model, model_from_dict, validate_symmetries
from .qfi import CoherentState, evaluate, qfi_coherent, model_coefficients
from .spectral import ep_order, fit_line, fit_power_law, parse_window, spectrum, spectrum_response

EXIT_OK, EXIT_MISS, EXIT_MODEL, EXIT_IO, EXIT_RANGE = 0, 1, 2, 3, 4


class ConfigError(Exception):
    """Malformed or inconsistent experiment configuration."""


# --- configuration -------------------------------------------------------------

def _grid(raw, name):
    try:
        lo, hi, count = float(raw[0]), float(raw[1]), int(raw[2])
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{name} must be [lo, hi, count]") from None
    if count < 1 or not (0 < lo <= hi) or (count > 1 and lo == hi):
        raise ConfigError(f"{name}: need 0 < lo < hi and count >= 1, got {raw}")
    return np.logspace(math.log10(lo), math.log10(hi), count) if count > 1 else np.array([lo])


def _alpha(raw, n):
    if raw is None:
        return CoherentState.vacuum(n)
    vals = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in raw]
    if len(vals) != n:
        raise ConfigError(f"alpha has {len(vals)} entries, model has {n} modes")
    return CoherentState(np.array(vals))


@dataclass
class ExperimentConfig:
    kind: str
    label: str = "run"
    model: dict | None = None
    family: dict | None = None
    param: str = ""
    t_grid: list | None = None
    eps_grid: list | None = None
    n_range: list | None = None
    t0: float | None = None
    window: list | None = None
    alpha: list | None = None
    expect: dict | None = None
    points: list = field(default_factory=list)
    threshold: float = 1e-2
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "kind" not in doc:
            raise ConfigError("config needs a 'kind'")
        cfg = cls(**doc)
        if cfg.window is not None:
            if len(cfg.window) != 2 or not float(cfg.window[0]) < float(cfg.window[1]):
                raise ConfigError(f"window must be [lo, hi] with lo < hi, got {cfg.window}")
        return cfg

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if getattr(self, k) not in (None, [])}


def _check_window_points(grid, window):
    if window is None:
        return
    lo, hi = window
    inside = int(np.sum((grid >= lo * (1 - 1e-12)) & (grid <= hi * (1 + 1e-12))))
    if inside < 3:
        raise ConfigError(f"window [{lo:g}, {hi:g}] needs >= 3 grid points, has {inside}")


# --- runners --------------------------------------------------------------------

@dataclass
class RunResult:
    columns: list
    rows: list
    fit: object = None
    error: Exception | None = None
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.checks)


def _pool_map(fn, items, jobs):
    """Ordered map; stops at the first failing item and returns the prefix plus the error."""
    out = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        it = pool.map(fn, items)
        try:
            for r in it:
                out.append(r)
        except NumericRangeError as exc:
            return out, exc
    return out, None


def _slope_check(cfg, fit):
    exp = cfg.expect or {}
    checks = []
    if fit is not None and "slope" in exp:
        ok = abs(fit.slope - exp["slope"]) <= exp["tol"]
        checks.append((f"slope {fit.slope:.4f} vs {exp['slope']} +/- {exp['tol']}", ok))
    if fit is not None and "lo" in exp:
        ok = exp["lo"] <= fit.slope <= exp["hi"]
        checks.append((f"slope {fit.slope:.4f} in [{exp['lo']}, {exp['hi']}]", ok))
    return checks


def run_qfi(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    model = model_from_dict(cfg.model)
    grid = _grid(cfg.t_grid, "t_grid")
    _check_window_points(grid, cfg.window)
    st = _alpha(cfg.alpha, model.n_modes)
    model.binding(cfg.param)
    pts, err = _pool_map(lambda t: evaluate(model, cfg.param, t, st), list(grid), jobs)
    mid = cfg.model.get("catalog", cfg.label) if isinstance(cfg.model, dict) else cfg.label
    rows = [[mid, cfg.param, p.t, p.F, p.Q, p.c2_frobenius] for p in pts]
    if err is not None:
        err.last_good = pts[-1].t if pts else None
    res = RunResult(["model_id", "param", "t", "F", "Q", "c2_frobenius"], rows, error=err)
    if cfg.window is not None and err is None:
        ts = np.array([p.t for p in pts])
        F = np.array([p.F for p in pts])
        res.fit = fit_power_law(ts, F, cfg.window)
        res.checks = _slope_check(cfg, res.fit)
        peak = (cfg.expect or {}).get("min_peak_slope")
        if peak is not None:
            local = np.diff(np.log(F)) / np.diff(np.log(ts))
            res.checks.append((f"peak local slope {local.max():.2f} >= {peak}", bool(local.max() >= peak)))
    return res


def run_spectrum(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    model = model_from_dict(cfg.model)
    grid = _grid(cfg.eps_grid, "eps_grid")
    _check_window_points(grid, cfg.window)
    model.binding(cfg.param)
    vals, err = _pool_map(lambda e: spectrum_response(model, cfg.param, e).max_abs, list(grid), jobs)
    rows = [[e, v] for e, v in zip(grid, vals)]
    res = RunResult(["epsilon", "max_abs_domega"], rows, error=err)
    if cfg.window is not None and err is None:
        res.fit = fit_power_law(grid, vals, cfg.window)
        res.checks = _slope_check(cfg, res.fit)
    return res


def run_size(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    if cfg.family is None or cfg.n_range is None or cfg.t0 is None:
        raise ConfigError("size sweep needs 'family', 'n_range' and 't0'")
    lo, hi = int(cfg.n_range[0]), int(cfg.n_range[1])
    if hi - lo < 2:
        raise ConfigError("n_range must span at least 3 sizes")
    Ns = list(range(lo, hi + 1))
    t0 = float(cfg.t0)

    def one(n):
        model = model_from_dict({**cfg.family, "N": n})
        return evaluate(model, cfg.param, t0)

    pts, err = _pool_map(one, Ns, jobs)
    rows = [[n, t0, p.F, p.Q, math.log(p.F)] for n, p in zip(Ns, pts)]
    if err is not None:
        err.last_good = None
        err.args = (f"{err.args[0]} (N={Ns[len(pts)]}); try a smaller t0",)
    res = RunResult(["N", "t0", "F", "Q", "lnF"], rows, error=err)
    if err is None:
        window = cfg.window or [lo, hi]
        res.fit = fit_line([r[0] for r in rows], [r[4] for r in rows], window)
        res.checks = _slope_check(cfg, res.fit)
    return res


DEFAULT_ORACLE_POINTS = [
    {"model": {"catalog": "single_mode", "delta": 1.0, "kappa": 1.0}, "param": "kappa", "eta0": 1.0,
     "t": t, "alpha": [a], "cutoff": 80}
    for a in (0.0, 1.0)
    for t in (0.25, 0.5, 1.0)
] + [
    {"model": presets.THREE_MODE_EP, "param": "kappa1", "eta0": presets.R2, "t": 0.5, "alpha": [0, 0, 0],
     "cutoff": 10, "tail_tol": 1e-2}
]


def run_oracle(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    from .fock import FockBasis, coherent_vector, fidelity_qfi

    points = cfg.points or DEFAULT_ORACLE_POINTS

    def one(pt):
        model = model_from_dict(pt["model"])
        st = _alpha(pt.get("alpha"), model.n_modes)
        Fa = qfi_coherent(model_coefficients(model, pt["param"], pt["t"]), st)
        basis = FockBasis(model.n_modes, int(pt.get("cutoff", 30)))
        psi0 = coherent_vector(st.alpha, basis)
        Fo = fidelity_qfi(model, pt["param"], pt["t"], psi0, eta0=pt.get("eta0", 0.0),
                          tail_tol=pt.get("tail_tol", 1e-8))
        rel = abs(Fa - Fo) / abs(Fo) if Fo else abs(Fa)
        mid = pt["model"].get("catalog", "custom")
        return [mid, pt["param"], pt["t"], json.dumps(pt.get("alpha")), Fa, Fo, rel]

    rows, err = _pool_map(one, points, jobs)
    res = RunResult(["model_id", "param", "t", "alpha", "F_analytic", "F_oracle", "rel_err"], rows, error=err)
    worst = max((r[-1] for r in rows), default=0.0)
    res.checks = [(f"max relative deviation {worst:.3e} <= {cfg.threshold:g}", worst <= cfg.threshold)]
    return res


RUNNERS = {"qfi": run_qfi, "spectrum": run_spectrum, "size": run_size, "oracle": run_oracle}


# --- output ---------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def render_csv(cfg: ExperimentConfig, res: RunResult) -> str:
    lines = ["# " + json.dumps(cfg.to_dict(), sort_keys=True), ",".join(res.columns)]
    lines += [",".join(_fmt(v) for v in row) for row in res.rows]
    return "\n".join(lines) + "\n"


def emit(cfg: ExperimentConfig, res: RunResult, out: Path | None):
    text = render_csv(cfg, res)
    if out is None:
        sys.stdout.write(text)
        if res.fit is not None:
            sys.stderr.write(res.fit.to_json() + "\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    if res.fit is not None:
        out.with_suffix(".fit.json").write_text(res.fit.to_json() + "\n")


def _report(cfg, res, stream=None):
    stream = stream or sys.stderr
    for msg, ok in res.checks:
        print(f"{cfg.label}: {'PASS' if ok else 'FAIL'} {msg}", file=stream)
    if res.error is not None:
        last = getattr(res.error, "last_good", None)
        tail = "" if last is None else f" (last good t: {last})"
        print(f"{cfg.label}: numeric range exceeded: {res.error}{tail}", file=stream)


def _status(res) -> int:
    if res.error is not None:
        return EXIT_RANGE
    return EXIT_OK if res.passed else EXIT_MISS


def _load_config(path, kind, window):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    doc.setdefault("kind", kind)
    if doc["kind"] != kind:
        raise ConfigError(f"config kind {doc['kind']!r} does not match command ({kind!r})")
    if window is not None:
        doc["window"] = list(window)
    return ExperimentConfig.from_dict(doc)


def _run_one(cfg, jobs, out):
    res = RUNNERS[cfg.kind](cfg, jobs)
    emit(cfg, res, out)
    _report(cfg, res)
    return _status(res)


# --- commands ---------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        model = load_model(args.model_file)
    except OSError as exc:
        print(f"error: cannot read {args.model_file}: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: {args.model_file} is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_IO
    H = build_dynamical_matrix(model)
    sym = validate_symmetries(H)
    for name, v in sym.violations.items():
        print(f"symmetry {name}: {v:.3e}")
    if not sym.passed:
        print("error: dynamical matrix violates the Bogoliubov symmetries", file=sys.stderr)
        return EXIT_MODEL
    rep = spectrum(H, digits=args.digits)
    print(f"modes: {model.n_modes}")
    print(f"stable: {rep.stable} (max |Im w| = {rep.max_imag:.3e})")
    print(f"spectrum closure defect: {rep.closure_defect:.3e}")
    try:
        for ep in ep_order(H, args.cluster_tol):
            print(
                f"cluster at {ep.value.real:+.6g}{ep.value.imag:+.6g}i: multiplicity {ep.algebraic_multiplicity},"
                f" EP order {ep.jordan_order}"
            )
    except ClusteringError as exc:
        print(f"warning: {exc}", file=sys.stderr)
    return EXIT_OK


def _sweep(kind):
    def cmd(args) -> int:
        cfg = _load_config(args.config, kind, args.window)
        return _run_one(cfg, args.jobs, Path(args.out) if args.out else None)

    return cmd


def cmd_oracle(args) -> int:
    if args.config:
        cfg = _load_config(args.config, "oracle", None)
    else:
        cfg = ExperimentConfig(kind="oracle", label="oracle")
    res = run_oracle(cfg, args.jobs)
    emit(cfg, res, Path(args.out) if args.out else None)
    _report(cfg, res)
    return _status(res)


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out or "epsense-out")
    worst = EXIT_OK
    for doc in presets.preset(args.figure):
        if args.window is not None and doc["kind"] != "size":
            doc["window"] = list(args.window)
        cfg = ExperimentConfig.from_dict(doc)
        status = _run_one(cfg, args.jobs, out_dir / f"{cfg.label}.csv")
        worst = max(worst, status)
    return worst


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epsense", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("-c", "--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads for grid points")
        sp.add_argument("--out", help="output CSV path (directory for reproduce)")
        sp.add_argument("--window", type=parse_window, help="fit window lo:hi (overrides config)")

    v = sub.add_parser("validate", help="check a model file and report its spectrum and EP orders")
    v.add_argument("model_file")
    v.add_argument("--cluster-tol", type=float, default=1e-4)
    v.add_argument("--digits", type=int, default=None, help="solve the spectrum in extended precision")
    v.set_defaults(func=cmd_validate)

    for name, kind in (("qfi-sweep", "qfi"), ("spectrum-sweep", "spectrum"), ("size-sweep", "size")):
        sp = sub.add_parser(name, help=f"{kind} sweep from a config")
        common(sp)
        sp.set_defaults(func=_sweep(kind))

    o = sub.add_parser("oracle-compare", help="compare the analytic QFI with the Fock-space oracle")
    o.add_argument("-c", "--config", help="oracle config (default: built-in preset points)")
    o.add_argument("--jobs", type=int, default=1)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("reproduce", help="run a figure preset")
    r.add_argument("figure", choices=sorted(presets.PRESETS))
    common(r, config=False)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ModelError, StructureError) as exc:
        print(f"error: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConfigError, OSError, KeyError, TypeError, ValueError, TruncationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericRangeError as exc:
        print(f"error: numeric range: {exc}", file=sys.stderr)
        return EXIT_RANGE


if __name__ == "__main__":
    sys.exit(main())
