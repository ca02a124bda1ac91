"""Command-line entry point: ``maxsum <command> --config run.toml``.

Exit status: 0 when every verdict passes, 1 when some verdict fails, 2 on a
configuration or contract error (nothing is written in that case).

Random streams: command k of a run (in config order, starting at 0) and cell
j inside it draw from ``SeedSequence(root_seed, spawn_key=(k, j))`` with PCG64.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import applications, condition_checker, diagnostics
from .limit_law import Atoms, CharacteristicsError, JumpMeasure, LimitCharacteristics, TailFunction
from .limit_sampler import HybridSampleConfig, stopped_limit_batch
from .presets import get_preset, list_presets
from .triangular_array import ArrayModel, Marginal, child_rng, family_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

COMMANDS = ("verify", "sweep", "probe-j", "risk", "examples")
SEED_RULE = "numpy SeedSequence(entropy=root_seed, spawn_key=(command_index, cell_index)) -> PCG64"


class ConfigError(ValueError):
    pass


# config --------------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc


def _parse_tail(d: dict) -> TailFunction:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "frechet":
        return TailFunction.frechet(**d)
    if kind == "gumbel":
        return TailFunction.gumbel(**d)
    if kind == "negweibull":
        return TailFunction.negweibull(**d)
    if kind in ("step", "tabulated"):
        return TailFunction.step(d.get("points", []), d.get("masses", []), d.get("floor", -np.inf))
    if kind == "zero_above":
        return TailFunction.zero_above(d["threshold"])
    raise ConfigError(f"unknown tail kind {kind!r}")


def _parse_chars(d: dict) -> LimitCharacteristics:
    rows = []
    for r in d.get("atoms", []):
        if len(r) != 4:
            raise ConfigError("atoms are [u_mark_or_NONE, v, w, mass]")
        rows.append((None if r[0] in ("NONE", None) else float(r[0]), float(r[1]), float(r[2]), float(r[3])))
    a, b2, c = float(d.get("a", 0.0)), float(d.get("b2", 0.0)), float(d.get("c", 0.0))
    if "tail" in d:
        return LimitCharacteristics(_parse_tail(d["tail"]), JumpMeasure(Atoms.from_rows(rows)), a, b2, c)
    return LimitCharacteristics.from_atoms(rows, a, b2, c, float(d.get("floor", -np.inf)))


def build_setup(cfg: dict) -> tuple[ArrayModel | None, LimitCharacteristics]:
    model_cfg = cfg.get("model", {})
    chars_cfg = cfg.get("characteristics")
    model, chars = None, None
    if "preset" in model_cfg:
        model, chars = get_preset(model_cfg["preset"]).make(model_cfg.get("params"))
    elif "family" in model_cfg:
        eps = tuple(float(e) for e in model_cfg.get("eps_grid", (1e-2, 1e-3, 1e-4)))
        model = ArrayModel(family_from_dict(model_cfg["family"]), eps, name=model_cfg.get("name", "custom"))
    if chars_cfg is not None:
        chars = _parse_chars(chars_cfg)
    if chars is None:
        raise ConfigError("no characteristics: give model.preset or a [characteristics] block")
    return model, chars


def validate(cfg: dict, commands: list[str]) -> tuple[ArrayModel | None, LimitCharacteristics]:
    if "seed" not in cfg:
        raise ConfigError("root seed is mandatory (top-level 'seed')")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    bad = [c for c in commands if c not in COMMANDS]
    if bad:
        raise ConfigError(f"unknown commands {bad}; choose from {COMMANDS}")
    try:
        model, chars = build_setup(cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    needs_model = {"verify", "sweep", "probe-j"}
    if model is None and needs_model & set(commands):
        raise ConfigError(f"commands {sorted(needs_model & set(commands))} need an array model")
    if model is not None:
        eps = cfg.get("sweep", {}).get("eps", list(model.eps_grid))
        for e in eps:
            model.n(float(e))
    return model, chars


# outputs -------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])
    return buf.getvalue()


class Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[str] = []
        self.pending: dict[str, str] = {}

    def add(self, name: str, rows: list[dict]) -> None:
        self.pending[name] = rows_to_csv(rows)

    def flush(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.pending.items():
            (self.dir / name).write_text(text)
            self.files.append(name)
        self.pending.clear()


# commands ---------------------------------------------------------------------

def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def cmd_verify(cfg, model, chars, seed, k, jobs, out: Outputs) -> dict:
    vc = cfg.get("verify", {})
    eps = [float(e) for e in cfg.get("sweep", {}).get("eps", model.eps_grid)]
    u_grid = [float(u) for u in vc.get("u_grid", [0.5, 1.0, 2.0])]
    v_grid = [float(v) for v in vc.get("v_grid", [0.5, 1.5])]
    w_grid = [float(w) for w in vc.get("w_grid", [0.5, 2.0])]
    samples = int(vc.get("samples", 20000))
    conditions = vc.get("conditions", ["A", "B", "C", "D"])

    def cell(j):
        rng = child_rng(seed, k, j)
        name = conditions[j]
        if name == "A":
            return condition_checker.check_condition_A(model, chars, eps, u_grid, samples, rng)
        if name == "B":
            return condition_checker.check_condition_B(model, chars, eps, v_grid, w_grid, samples, rng)
        if name == "C":
            cu = [u for u in u_grid if u > chars.u_pi]
            return condition_checker.check_condition_C(model, chars, eps, cu, samples, rng)
        d = condition_checker.classify_condition_D(chars, model, eps)
        rep = condition_checker.ConditionReport(meta={"D": {"D": d.D, "D1": d.D1, "D2": d.D2, "V": d.V_description}})
        rep.verdicts["D"] = bool(d.D)
        return rep

    report = condition_checker.ConditionReport()
    for r in _pmap(cell, range(len(conditions)), jobs):
        report.merge(r)
    for sec, rows in report.sections.items():
        out.add(f"verify_{sec}.csv", rows)
    return {"verdicts": report.verdicts, "meta": report.meta}


def cmd_sweep(cfg, model, chars, seed, k, jobs, out: Outputs) -> dict:
    sc = cfg.get("sweep", {})
    eps = [float(e) for e in sc.get("eps", model.eps_grid)]
    t = float(sc.get("t", 1.0))
    comp = {"xi": 0, "gamma": 1, "kappa": 2}[sc.get("component", "xi")]
    samples = int(sc.get("samples", 10000))
    threshold = float(sc.get("final_threshold", 0.03))
    horizon = float(sc.get("limit_horizon", max(2.0, 2 * t)))
    limit_rng = child_rng(seed, k, len(eps))
    lim = stopped_limit_batch(HybridSampleConfig(chars, horizon), [t], samples, limit_rng)[:, 0, comp]

    def cell(j):
        rng = child_rng(seed, k, j)
        x = diagnostics.prelimit_stopped(model, eps[j], t, samples, rng)[:, comp]
        return diagnostics.ks_distance(x, lim), diagnostics.ks_se(samples, samples)

    res = _pmap(cell, range(len(eps)), jobs)
    sweep = diagnostics.SweepResult(eps, [model.n(e) for e in eps], [r[0] for r in res], [r[1] for r in res],
                                    threshold, f"stopped {sc.get('component', 'xi')} at t={t:g}")
    out.add("sweep.csv", sweep.rows())
    return {"verdicts": {"sweep_trend": sweep.trend_ok, "sweep_final": sweep.final_ok}, "meta": {"statement": sweep.verdict()}}


def cmd_probe_j(cfg, model, chars, seed, k, jobs, out: Outputs) -> dict:
    pc = cfg.get("probe_j", {})
    eps = [float(e) for e in pc.get("eps", cfg.get("sweep", {}).get("eps", model.eps_grid))]
    c_list = [float(c) for c in pc.get("c_list", [0.01, 0.05, 0.1])]
    T, T2 = float(pc.get("T", 0.5)), float(pc.get("T2", 2.0))
    delta = float(pc.get("delta", 0.1))
    samples = int(pc.get("samples", 200))
    stopped = bool(pc.get("stopped", False))

    def cell(j):
        rng = child_rng(seed, k, j)
        return diagnostics.j_compactness_probe(model, [eps[j]], c_list, T, T2, delta, samples, rng, stopped)

    tabs = _pmap(cell, range(len(eps)), jobs)
    table = diagnostics.CompactnessTable(eps, tabs[0].c_list, np.vstack([t.prob for t in tabs]), samples,
                                         float(pc.get("threshold", 0.05)))
    out.add("probe_j.csv", table.rows())
    return {"verdicts": {"probe_j": table.passed, "probe_j_monotone": table.monotone_in_c}, "meta": {}}


def _risk_model(cfg, model) -> tuple[applications.RiskModel, float]:
    rc = cfg.get("risk", {})
    if model is not None and getattr(model.family, "kind", "") == "risk":
        fam = model.family
        risk = applications.RiskModel(fam.kappa, fam.claim, fam.premium)
    else:
        risk = applications.RiskModel(Marginal("exponential", {"rate": 1.0}, scale_exponent=1.0),
                                      Marginal("exponential", {"rate": float(rc.get("claim_rate", 1.0))},
                                               scale_exponent=1.0), float(rc.get("premium", 1.2)))
    return risk, float(rc.get("epsilon", 1e-2))


def cmd_risk(cfg, model, chars, seed, k, jobs, out: Outputs) -> dict:
    rc = cfg.get("risk", {})
    risk, eps = _risk_model(cfg, model)
    horizon = float(rc.get("horizon", 2.0))
    reps = int(rc.get("replicates", 100))
    t_grid = np.linspace(0.0, horizon, int(rc.get("grid_points", 51)))[1:]

    def cell(j):
        return applications.build_risk_process(risk, eps, horizon, child_rng(seed, k, j), t_grid)

    runs = _pmap(cell, range(reps), jobs)
    rows = []
    for j, run in enumerate(runs):
        for r in run.rows():
            rows.append({"replicate": j, **r})
    out.add("risk.csv", rows)
    err = max(r.representation_error for r in runs)
    ok_bound = all(r.bound_holds for r in runs)
    return {"verdicts": {"risk_representation": err <= 1e-12, "risk_bound": ok_bound},
            "meta": {"max_representation_error": err}}


def cmd_examples(cfg, model, chars, seed, k, jobs, out: Outputs) -> dict:
    ec = cfg.get("examples", {})
    kind = ec.get("kind", "insurance_pair")
    params = ec.get("params", {"X": {"law": "exponential", "params": {"rate": 1.0}},
                               "Y": {"law": "pareto", "params": {"alpha": 2.5}},
                               "Z": {"law": "normal", "params": {"mu": 0.0, "sigma": 1.0}}})
    eps = float(ec.get("epsilon", 1.0))
    horizon = float(ec.get("horizon", 10.0))
    reps = int(ec.get("replicates", 10))
    t_grid = np.linspace(0.0, horizon, int(ec.get("grid_points", 11)))[1:]

    def cell(j):
        run = applications.build_example(kind, params, eps, horizon, child_rng(seed, k, j))
        return [{"replicate": j, **run.stopped_at(float(t))} for t in t_grid]

    rows = [r for block in _pmap(cell, range(reps), jobs) for r in block]
    out.add("examples.csv", rows)
    ok = all(r["tau_count"] == r["raw_count"] + 1 for r in rows)
    return {"verdicts": {"examples_counts": ok}, "meta": {"kind": kind}}


HANDLERS = {"verify": cmd_verify, "sweep": cmd_sweep, "probe-j": cmd_probe_j, "risk": cmd_risk,
            "examples": cmd_examples}


def execute(cfg: dict, commands: list[str], out_dir: Path, jobs: int = 1, config_path: str | None = None) -> int:
    try:
        model, chars = validate(cfg, commands)
    except (ConfigError, CharacteristicsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    seed = int(cfg["seed"])
    out = Outputs(out_dir)
    manifest = {"config": config_path, "root_seed": seed, "seed_rule": SEED_RULE, "commands": commands,
                "results": {}, "complete": False, "started": time.strftime("%Y-%m-%dT%H:%M:%S")}
    status = 0
    try:
        for k, name in enumerate(commands):
            res = HANDLERS[name](cfg, model, chars, seed, k, jobs, out)
            manifest["results"][name] = res
            if not all(res["verdicts"].values()):
                status = 1
        manifest["complete"] = True
    except (CharacteristicsError, ValueError) as exc:
        manifest["error"] = str(exc)
        print(f"contract error: {exc}", file=sys.stderr)
        status = 2
    out.flush()
    manifest["files"] = out.files
    manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=_json_default))
    for name, res in manifest["results"].items():
        for v, ok in sorted(res["verdicts"].items()):
            print(f"{name:9s} {v:28s} {'consistent' if ok else 'NOT consistent'}")
    return status


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="maxsum", description="max-sum processes with renewal stopping")
    ap.add_argument("command", choices=COMMANDS + ("run", "presets"))
    ap.add_argument("--config", help="TOML or JSON run configuration")
    ap.add_argument("--seed", type=int, help="override the root seed")
    ap.add_argument("--out", default=None, help="output directory (default: config 'output' or ./maxsum-out)")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for independent cells")
    args = ap.parse_args(argv)
    if args.command == "presets":
        print(json.dumps(list_presets(), indent=1))
        return 0
    if not args.config:
        print("config error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    commands = list(cfg.get("commands", [])) if args.command == "run" else [args.command]
    if not commands:
        print("config error: 'run' needs a commands list", file=sys.stderr)
        return 2
    out_dir = Path(args.out or cfg.get("output", "maxsum-out"))
    return execute(cfg, commands, out_dir, max(1, args.jobs), args.config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
