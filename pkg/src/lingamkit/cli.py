"""Batch command line: describe, discover, bootstrap, effects, fit, compare, export-dot.

Artifacts go to ``<output_dir>/run-<key>/`` where ``key`` hashes the input
bytes and every analysis setting, so runs with different settings never
overwrite each other and reruns reproduce identical files.

Exit codes: 0 success, 2 usage, 3 configuration, 4 data validation,
5 numeric failure, 6 missing input file or artifact.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bootstrap as boot
from . import lingam, plotting, report, sem, stats, synth
from .config import PipelineConfig, from_mapping, load_config
from .dataset import describe, load_trials, spearman_matrix, to_matrix, vif, write_trials
from .errors import ConfigError, ConstraintError, DataValidationError, NumericError

log = logging.getLogger("lingamkit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_NUMERIC = 5
EXIT_MISSING = 6


class MissingArtifact(FileNotFoundError):
    pass


# --------------------------------------------------------------------------- helpers

def _records(cfg: PipelineConfig):
    if not cfg.input:
        raise ConfigError("no input file given (use --input or the config 'input' key)")
    path = Path(cfg.input)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    recs = load_trials(path, cfg.schema, cfg.delimiter)
    if cfg.exclude_conditions:
        recs = [r for r in recs if r.condition not in set(cfg.exclude_conditions)]
    return recs


def _matrix(cfg: PipelineConfig, records=None, aggregate: bool = False):
    records = _records(cfg) if records is None else records
    return to_matrix(records, cfg.variables, aggregate=aggregate)


def _prior(cfg: PipelineConfig) -> lingam.PriorKnowledge:
    return lingam.PriorKnowledge.from_labels(cfg.variables, cfg.exogenous, cfg.sinks, cfg.sink_to_sink)


def _write(run_dir: Path, stem: str, cfg: PipelineConfig, payload=None, text=None, csv=None,
           dot=None) -> dict[str, Path]:
    run_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if payload is not None and "json" in cfg.formats:
        written["json"] = run_dir / f"{stem}.json"
        written["json"].write_text(report.to_json(payload))
    if text is not None and "text" in cfg.formats:
        written["text"] = run_dir / f"{stem}.txt"
        written["text"].write_text(text)
    if csv is not None and "csv" in cfg.formats:
        written["csv"] = run_dir / f"{stem}.csv"
        written["csv"].write_text(csv)
    if dot is not None:
        written["dot"] = run_dir / f"{stem}.dot"
        written["dot"].write_text(dot)
    return written


def _config_snapshot(cfg: PipelineConfig, run_dir: Path):
    run_dir.mkdir(parents=True, exist_ok=True)
    snap = {k: v for k, v in vars(cfg).items() if k not in ("output_dir",)}
    (run_dir / "config.json").write_text(report.to_json(snap))


class Outcome:
    def __init__(self, payload=None, text="", dot=None, files=None):
        self.payload, self.text, self.dot, self.files = payload, text, dot, files or {}


# --------------------------------------------------------------------------- commands

def cmd_describe(cfg: PipelineConfig, args=None) -> Outcome:
    m = _matrix(cfg, aggregate=cfg.aggregate)
    payload = report.describe_payload(describe(m), spearman_matrix(m), vif(m))
    payload["aggregated"] = cfg.aggregate
    run_dir = cfg.run_dir()
    _config_snapshot(cfg, run_dir)
    text = report.describe_text(payload)
    files = _write(run_dir, "describe", cfg, payload, text, report.describe_csv(payload))
    if cfg.plots:
        files["png"] = plotting.correlation_heatmap(m.column_names, payload["spearman"]["rho"],
                                                    run_dir / "describe_spearman.png")
    return Outcome(payload, text, files=files)


def cmd_discover(cfg: PipelineConfig, args=None) -> Outcome:
    m = _matrix(cfg)
    model = lingam.fit(m, _prior(cfg), cfg.standardize, cfg.constants, cfg.regression, cfg.ols_threshold)
    audit = lingam.residual_normality_audit(model, m) if 3 <= m.n <= 5000 else []
    payload = {**model.to_dict(),
               "normality_audit": [vars(a) for a in audit],
               "exogenous": list(cfg.exogenous), "sinks": list(cfg.sinks)}
    run_dir = cfg.run_dir()
    _config_snapshot(cfg, run_dir)
    dot = model.to_dot()
    text = report.model_text(model, audit)
    files = _write(run_dir, "model", cfg, payload, text,
                   report.matrix_csv(model.variable_names, model.adjacency), dot)
    if cfg.plots:
        files["png"] = plotting.causal_graph(model.variable_names, model.adjacency, run_dir / "model.png",
                                             sources=cfg.exogenous, sinks=cfg.sinks,
                                             title="DirectLiNGAM direct effects")
    return Outcome(payload, text, dot, files)


def cmd_bootstrap(cfg: PipelineConfig, args=None) -> Outcome:
    m = _matrix(cfg)
    summary = boot.bootstrap_fit(m, _prior(cfg), int(cfg.bootstrap_count), int(cfg.seed),
                                 standardize_data=cfg.standardize, constants=cfg.constants,
                                 method=cfg.regression, ols_threshold=cfg.ols_threshold)
    pruned = boot.prune(summary, float(cfg.prune_threshold))
    run_dir = cfg.run_dir()
    _config_snapshot(cfg, run_dir)
    _write(run_dir, "bootstrap_raw", cfg, summary.to_dict())
    dot = pruned.to_dot()
    text = report.bootstrap_text(pruned)
    csv = report.delimited(["cause", "effect", "median_direct_effect", "probability"], report.edge_rows(pruned))
    files = _write(run_dir, "bootstrap", cfg, pruned.to_dict(), text, csv, dot)
    # effects reads this copy, so it exists whatever the configured formats are
    (run_dir / "bootstrap.artifact.json").write_text(report.to_json(pruned.to_dict()))
    if cfg.plots:
        labels = [[f"{pruned.median_direct_effect[i, j]:.2f} ({pruned.edge_probability[i, j] * 100:.0f}%)"
                   for j in range(m.p)] for i in range(m.p)]
        files["png"] = plotting.causal_graph(m.column_names, pruned.median_direct_effect,
                                             run_dir / "bootstrap.png", labels=labels,
                                             sources=cfg.exogenous, sinks=cfg.sinks,
                                             title=f"Bootstrap median direct effects (B={summary.B})")
    return Outcome(pruned.to_dict(), text, dot, files)


def _load_bootstrap(cfg: PipelineConfig, path=None) -> boot.BootstrapSummary:
    path = Path(path) if path else cfg.run_dir() / "bootstrap.artifact.json"
    if not path.is_file():
        raise MissingArtifact(f"bootstrap artifact not found: {path} (run 'bootstrap' first)")
    return boot.BootstrapSummary.load(path)


def cmd_effects(cfg: PipelineConfig, args=None) -> Outcome:
    s = _load_bootstrap(cfg, getattr(args, "artifact", None))
    grid = report.effects_grid(s)
    run_dir = cfg.run_dir()
    text = report.effects_text(grid)
    files = _write(run_dir, "effects", cfg, grid, text, report.effects_csv(grid))
    if cfg.plots:
        files["png"] = plotting.effect_heatmap(s.variable_names, s.median_total_effect,
                                               run_dir / "effects.png", s.total_probability)
    return Outcome(grid, text, files=files)


def _dof_audit(label: str, model: lingam.CausalModel) -> str:
    p = model.p
    q_edges = model.free_edge_count()
    return (f"{label}: dof = p(p+1)/2 - q = {p * (p + 1) // 2} - ({q_edges} edges + {p} variances)"
            f" = {sem.model_dof(model)}")


def _parse_replay(text: str):
    parts = [x.strip() for x in text.split(",")]
    if len(parts) != 5:
        raise ConfigError("--replay expects chi,dof,chi_baseline,dof_baseline,n")
    try:
        chi, dof, chi_b, dof_b, n = float(parts[0]), int(parts[1]), float(parts[2]), int(parts[3]), int(parts[4])
    except ValueError:
        raise ConfigError(f"cannot parse --replay {text!r}") from None
    return chi, dof, chi_b, dof_b, n


def cmd_fit(cfg: PipelineConfig, args=None) -> Outcome:
    replay = getattr(args, "replay", None)
    rows, audits = [], []
    if replay:
        chi, dof, chi_b, dof_b, n = _parse_replay(replay)
        rows.append(("Replay", sem.fit_indices(chi, dof, chi_b, dof_b, n, gfi_form="baseline")))
    else:
        m = _matrix(cfg)
        run_dir = cfg.run_dir()
        model_path = run_dir / "model.json"
        if model_path.is_file():
            model = lingam.CausalModel.load(model_path)
        else:
            model = lingam.fit(m, _prior(cfg), cfg.standardize, cfg.constants, cfg.regression,
                               cfg.ols_threshold)
        kw = dict(baseline_convention=cfg.fit_baseline, gfi_form=cfg.fit_gfi, refit=cfg.fit_refit)
        rows.append(("Causal model", sem.assess(model, m, **kw)))
        audits.append(_dof_audit("Causal model", model))
        bpath = run_dir / "bootstrap.artifact.json"
        if bpath.is_file():
            s = boot.BootstrapSummary.load(bpath)
            bmodel = boot.summary_adjacency_model(s, standardized=cfg.standardize, n=m.n)
            bmodel = sem.residual_variances_for(bmodel, m)
            rows.append(("Bootstrapped causal model", sem.assess(bmodel, m, **kw)))
            audits.append(_dof_audit("Bootstrapped causal model", bmodel))
    payload = {"rows": [{"model": label, **fi.to_dict()} for label, fi in rows],
               "thresholds": sem.ACCEPTABLE, "dof_audit": audits}
    text = report.fit_text(rows, audits)
    files = _write(cfg.run_dir(), "fit", cfg, payload, text, report.fit_csv(rows))
    return Outcome(payload, text, files=files)


def cmd_compare(cfg: PipelineConfig, args=None) -> Outcome:
    replay_w = getattr(args, "replay_w", None)
    if replay_w is not None:
        fr = stats.friedman_f(replay_w, args.n, args.k)
        payload = {"friedman": fr.to_dict()}
        text = report.table(["Factor", "W", "ddof1", "ddof2", "F", "p"], [report.friedman_row("replay", fr)])
        return Outcome(payload, text)
    records = _records(cfg)
    results = stats.compare_all(records, cfg.variables, cfg.conditions, cfg.compare_raw, cfg.compare_family)
    payload = {"family": cfg.compare_family, "raw": cfg.compare_raw,
               "results": [r.to_dict() for r in results]}
    run_dir = cfg.run_dir()
    _config_snapshot(cfg, run_dir)
    text = report.compare_text(results)
    files = _write(run_dir, "compare", cfg, payload, text, report.compare_csv(results))
    if cfg.plots:
        tables = [stats.participant_condition_means(records, f, cfg.conditions, cfg.compare_raw)
                  for f in cfg.variables]
        files["png"] = plotting.condition_means(tables, run_dir / "compare.png")
    return Outcome(payload, text, files=files)


def cmd_export_dot(cfg: PipelineConfig, args=None) -> Outcome:
    which = getattr(args, "which", "model")
    run_dir = cfg.run_dir()
    if which == "bootstrap":
        s = _load_bootstrap(cfg, getattr(args, "artifact", None))
        dot = s.to_dot(float(cfg.prune_threshold))
    else:
        path = Path(getattr(args, "artifact", None) or run_dir / "model.json")
        if not path.is_file():
            raise MissingArtifact(f"model artifact not found: {path} (run 'discover' first)")
        dot = lingam.CausalModel.load(path).to_dot()
    return Outcome(None, dot, dot)


def cmd_synth(cfg: PipelineConfig, args=None) -> Outcome:
    shift = {}
    for item in args.shift or []:
        try:
            cond, rest = item.split(":", 1)
            var, val = rest.split("=", 1)
            shift.setdefault(cond, {})[var] = float(val)
        except ValueError:
            raise ConfigError(f"--shift expects condition:VAR=value, got {item!r}") from None
    recs = synth.fixture_trials(args.seed if args.seed is not None else 0, condition_shift=shift)
    write_trials(recs, args.output, cfg.schema)
    return Outcome({"rows": len(recs), "output": str(args.output)}, f"wrote {len(recs)} trials to {args.output}\n")


COMMANDS = {
    "describe": cmd_describe,
    "discover": cmd_discover,
    "bootstrap": cmd_bootstrap,
    "effects": cmd_effects,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "export-dot": cmd_export_dot,
    "synth": cmd_synth,
}


# --------------------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline configuration")
    common.add_argument("--input", help="trial CSV (overrides config)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--bootstrap-count", type=int, help="bootstrap resamples B")
    common.add_argument("--prune-threshold", type=float, help="probability cut, default 0.30")
    common.add_argument("--output-dir", help="artifact root directory")
    common.add_argument("--format", choices=("json", "text", "dot"), default="text",
                        help="what to print on stdout")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lingamkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("effects", "export-dot"):
            sp.add_argument("--artifact", help="explicit artifact path instead of the run directory")
        if name == "export-dot":
            sp.add_argument("which", nargs="?", choices=("model", "bootstrap"), default="model")
        if name == "fit":
            sp.add_argument("--replay", help="chi,dof,chi_baseline,dof_baseline,n: indices only")
        if name == "compare":
            sp.add_argument("--replay-w", type=float, help="Kendall's W to push through the F formula")
            sp.add_argument("--n", type=int, default=42)
            sp.add_argument("--k", type=int, default=4)
        if name == "synth":
            sp.add_argument("--output", required=True, help="CSV to write")
            sp.add_argument("--shift", action="append", help="condition:VAR=sd shift, repeatable")
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for flag, key in (("input", "input"), ("seed", "seed"), ("bootstrap_count", "bootstrap_count"),
                      ("prune_threshold", "prune_threshold"), ("output_dir", "output_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[key] = v
    if args.no_plots:
        overrides["plots"] = False
    cfg = from_mapping(overrides, cfg) if overrides else cfg
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = COMMANDS[args.command](cfg, args)
    except (ConfigError, ConstraintError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    for kind, path in out.files.items():
        log.info("wrote %s: %s", kind, path)
    if args.format == "json" and out.payload is not None:
        sys.stdout.write(report.to_json(out.payload))
    elif args.format == "dot" and out.dot is not None:
        sys.stdout.write(out.dot)
    else:
        sys.stdout.write(out.text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
