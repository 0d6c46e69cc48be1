"""Batch command-line driver: ``tradeflag {synth,fit,label,net,report}``.

Every stage reads and writes fixed filenames under ``--out`` so stages can be
rerun independently. Errors are reported as one JSON object on stderr with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .anomaly import label_all, read_flagged_ids, write_labels
from .errors import ConfigInvalid, MissingArtifact, TradeflagError
from .features import EncodingSchema, assemble_design
from .ingest import build_provenance, derive_flips, parse_transactions, write_transactions
from .regress import RegressionFit, fit_ols, predict, residuals
from .rfcde import CdeForest, CdeForestParams, fit_forest
from .synth import MarketConfig, generate_market
from .tradenet import (
    STATISTICS, anomalous_subnetwork, bootstrap_statistics, build_network, hits_ks_bootstrap,
    network_report, sample_edge_subnetworks, write_centralities, write_degrees, write_edge_list,
)

# fixed artifact names, relative to --out
TRANSACTIONS = "transactions.csv"
GROUND_TRUTH = "ground_truth.json"
SYNTH_CONFIG = "synth_config.json"
SCHEMA = "design_schema.json"
REGRESSION = "regression.json"
FOREST = "forest.zip"
TRAINING_IDS = "training_ids.txt"
FIT_SUMMARY = "fit_summary.json"
LABELS = "labels.csv"
LABEL_SUMMARY = "label_summary.json"
NETWORK_EDGES = "network_edges.tsv"
NETWORK_METRICS = "network_metrics.json"
BOOTSTRAP = "bootstrap.json"
REPORT = "report.json"
BOOTSTRAP_TSV = "bootstrap_pvalues.tsv"

DEFAULT_STATISTICS = ("edge_density", "global_clustering", "alpha_in", "alpha_out", "alpha_total")


@dataclass
class RunConfig:
    input: str | None = None
    out: str = "out"
    synth: dict = field(default_factory=dict)
    threshold: float = 0.01
    deltas: list = field(default_factory=lambda: [1.0, 500.0, 1000.0])
    trees: int = 100
    min_leaf: int = 50
    basis: int = 15
    bootstrap_samples: int = 20_000
    seed: int = 7
    score_mode: str = "oob"
    subnetwork_mode: str = "flagged"
    statistics: list = field(default_factory=lambda: list(DEFAULT_STATISTICS))
    hits_ks: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigInvalid(f"threshold {self.threshold} outside (0, 1)")
        if not self.deltas:
            raise ConfigInvalid("delta list is empty")
        deltas = [float(d) for d in self.deltas]
        if any(d <= 0 for d in deltas):
            raise ConfigInvalid("delta values must be positive")
        self.deltas = sorted(set(deltas))
        for name in ("trees", "min_leaf", "basis", "bootstrap_samples", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ConfigInvalid(f"{name} must be >= 1")
        if self.score_mode not in ("oob", "in_sample"):
            raise ConfigInvalid(f"score_mode must be 'oob' or 'in_sample', got {self.score_mode!r}")
        if self.subnetwork_mode not in ("flagged", "induced"):
            raise ConfigInvalid(f"subnetwork_mode must be 'flagged' or 'induced', got {self.subnetwork_mode!r}")
        unknown = set(self.statistics) - set(STATISTICS)
        if unknown:
            raise ConfigInvalid(f"unknown statistics {sorted(unknown)}")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def forest_params(self) -> CdeForestParams:
        return CdeForestParams(n_trees=self.trees, min_leaf_size=self.min_leaf,
                               n_basis=self.basis, rng_seed=self.seed)

    def market_config(self) -> MarketConfig:
        d = {"rng_seed": self.seed}
        d.update(self.synth)
        return MarketConfig.from_dict(d)

    def to_dict(self) -> dict:
        # the output location is not part of the run's identity
        d = asdict(self)
        d.pop("out")
        return d


_FLAG_FIELDS = {
    "input": "input", "out": "out", "threshold": "threshold", "delta": "deltas",
    "trees": "trees", "min_leaf": "min_leaf", "basis": "basis",
    "bootstrap_samples": "bootstrap_samples", "seed": "seed",
}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then command-line flags, then the ``--config`` JSON on top."""
    values = {}
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                overrides = json.load(fh)
        except FileNotFoundError:
            raise MissingArtifact(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config file {args.config}: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        if "delta" in overrides:
            overrides["deltas"] = overrides.pop("delta")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys {sorted(unknown)}")
        values.update(overrides)
    return RunConfig(**values)


# -- helpers ------------------------------------------------------------------

def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _read_json(path: Path):
    _require(path)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path}")
    return path


def _input_path(run: RunConfig) -> Path:
    return _require(Path(run.input) if run.input else run.path(TRANSACTIONS))


def _load_transactions(run: RunConfig):
    with open(_input_path(run), "rb") as fh:
        return parse_transactions(fh)


def _delta_tag(delta: float) -> str:
    return f"{delta:g}".replace(".", "p")


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# -- stages -------------------------------------------------------------------

def cmd_synth(run: RunConfig) -> dict:
    """Generate a synthetic market log with planted anomalies."""
    config = run.market_config()
    txs, truth = generate_market(config)
    run.out_dir.mkdir(parents=True, exist_ok=True)
    write_transactions(txs, run.path(TRANSACTIONS))
    with open(run.path(GROUND_TRUTH), "w", encoding="utf-8") as fh:
        fh.write(truth.to_json() + "\n")
    _dump_json(config.to_dict(), run.path(SYNTH_CONFIG))
    return {"transactions": len(txs), "anomalies": len(truth.anomalous_transaction_ids)}


def _design_for(run: RunConfig, schema: EncodingSchema | None = None):
    txs = _load_transactions(run)
    flips = derive_flips(build_provenance(txs))
    return txs, assemble_design(flips, schema)


def cmd_fit(run: RunConfig) -> dict:
    """Profit regression, then the residual density forest on its residuals."""
    _, design = _design_for(run)
    schema = EncodingSchema.from_flips(design.flips)
    fit = fit_ols(design.X, design.y, design.columns)
    p_hat = predict(fit, design.X)
    resid = residuals(fit, design.X, design.y)
    forest = fit_forest(p_hat, resid, run.forest_params())

    run.out_dir.mkdir(parents=True, exist_ok=True)
    with open(run.path(SCHEMA), "w", encoding="utf-8") as fh:
        fh.write(schema.to_json() + "\n")
    with open(run.path(REGRESSION), "w", encoding="utf-8") as fh:
        fh.write(fit.to_json() + "\n")
    forest.save(run.path(FOREST))
    with open(run.path(TRAINING_IDS), "w", encoding="utf-8") as fh:
        for f in design.flips:
            fh.write(f.sale_transaction.transaction_id + "\n")
    summary = {
        "n_flips": len(design.flips),
        "n_cold_start": int(design.cold_start.sum()),
        "r_squared": fit.r_squared,
        "adjusted_r_squared": fit.adjusted_r_squared,
        "residual_std_error": fit.residual_std_error,
        "forest": asdict(run.forest_params()),
        "n_leaves": forest.n_leaves,
    }
    _dump_json(summary, run.path(FIT_SUMMARY))
    return summary


def cmd_label(run: RunConfig) -> dict:
    """Score every flip and flag low tail probabilities."""
    schema = EncodingSchema.from_json(_require(run.path(SCHEMA)).read_text(encoding="utf-8"))
    fit = RegressionFit.from_json(_require(run.path(REGRESSION)).read_text(encoding="utf-8"))
    forest = CdeForest.load(_require(run.path(FOREST)))
    _, design = _design_for(run, schema)

    train_index = None
    if run.score_mode == "oob":
        ids = _require(run.path(TRAINING_IDS)).read_text(encoding="utf-8").split()
        pos = {tid: i for i, tid in enumerate(ids)}
        train_index = np.array([pos.get(f.sale_transaction.transaction_id, -1)
                                for f in design.flips], dtype=np.int64)
    labels, summary = label_all(design.flips, design.X, fit, forest, run.threshold,
                                train_index=train_index)
    write_labels(labels, run.path(LABELS))
    out = summary.to_dict()
    out["score_mode"] = run.score_mode
    _dump_json(out, run.path(LABEL_SUMMARY))
    return out


def cmd_net(run: RunConfig) -> dict:
    """Network metrics and bootstrap tests for each anomalous subnetwork."""
    txs = _load_transactions(run)
    flagged = read_flagged_ids(_require(run.path(LABELS)))
    host = build_network(txs)
    write_edge_list(host, run.path(NETWORK_EDGES))
    full = network_report(host, "full")
    write_degrees(host, full, run.path("degrees_full.tsv"))
    write_centralities(host, full, run.path("centrality_full.tsv"))

    metrics = {"full": full.to_dict(), "subnetworks": {}}
    boot = {"n_samples": run.bootstrap_samples, "seed": run.seed, "subnetworks": {}}
    for i, delta in enumerate(run.deltas):
        tag = _delta_tag(delta)
        sub = anomalous_subnetwork(flagged, txs, delta, mode=run.subnetwork_mode, host=host)
        write_edge_list(sub, run.path(f"subnet_delta{tag}_edges.tsv"))
        rep = network_report(sub, f"delta={delta:g}")
        write_degrees(sub, rep, run.path(f"degrees_delta{tag}.tsv"))
        write_centralities(sub, rep, run.path(f"centrality_delta{tag}.tsv"))
        entry = rep.to_dict()
        entry["delta"] = delta
        seed = _derived_seed(run.seed, i)
        bentry = {"delta": delta, "n_nodes": sub.n_nodes, "seed": seed}
        if sub.n_nodes >= 2:
            results = bootstrap_statistics(host, sub, run.statistics, run.bootstrap_samples,
                                           seed, run.jobs)
            bentry["statistics"] = {k: v.to_dict() for k, v in results.items()}
            if run.hits_ks and sub.n_edges:
                bentry["hits_ks"] = hits_ks_bootstrap(host, sub, run.bootstrap_samples,
                                                      seed, run.jobs).to_dict()
            if sub.n_edges:
                # same-edge-count comparison, exported for reference only
                sample = next(sample_edge_subnetworks(host, sub.n_edges, 1,
                                                      _derived_seed(run.seed, i, 1)))
                entry["edge_matched_sample"] = network_report(sample, "edge-matched").to_dict()
        else:
            bentry["note"] = "fewer than 2 nodes; bootstrap skipped"
        metrics["subnetworks"][tag] = entry
        boot["subnetworks"][tag] = bentry
    _dump_json(metrics, run.path(NETWORK_METRICS))
    _dump_json(boot, run.path(BOOTSTRAP))
    return {"full_nodes": host.n_nodes, "full_edges": host.n_edges,
            "subnetworks": {k: v["n_nodes"] for k, v in metrics["subnetworks"].items()}}


def cmd_report(run: RunConfig) -> dict:
    """Consolidated JSON report plus a p-value table."""
    fit = _read_json(run.path(REGRESSION))
    rfit = RegressionFit.from_dict(fit)
    labels = _read_json(run.path(LABEL_SUMMARY))
    metrics = _read_json(run.path(NETWORK_METRICS))
    boot = _read_json(run.path(BOOTSTRAP))
    coefs = {c: {"estimate": float(b), "std_error": float(s), "p_value": float(p), "stars": st}
             for c, b, s, p, st in zip(rfit.columns, rfit.coefficients, rfit.standard_errors,
                                       rfit.p_values, rfit.stars)}
    rows = []
    pvalues = {}
    for tag, entry in boot["subnetworks"].items():
        for name, res in entry.get("statistics", {}).items():
            pvalues.setdefault(tag, {})[name] = res["empirical_pvalue"]
            rows.append((entry["delta"], name, res["observed"], res["empirical_pvalue"],
                         res["n_valid"]))
    report = {
        "config": run.to_dict(),
        "regression": {"r_squared": rfit.r_squared,
                       "adjusted_r_squared": rfit.adjusted_r_squared,
                       "residual_std_error": rfit.residual_std_error,
                       "f_statistic": rfit.f_statistic,
                       "n_observations": rfit.n_observations,
                       "coefficients": coefs},
        "labels": labels,
        "network": metrics,
        "bootstrap_pvalues": pvalues,
    }
    if run.path(FIT_SUMMARY).exists():
        report["fit"] = _read_json(run.path(FIT_SUMMARY))
    _dump_json(report, run.path(REPORT))
    with open(run.path(BOOTSTRAP_TSV), "w", encoding="utf-8") as fh:
        fh.write("delta\tstatistic\tobserved\tempirical_pvalue\tn_valid\n")
        for d, name, obs, p, nv in rows:
            fh.write(f"{d:g}\t{name}\t{obs!r}\t{p!r}\t{nv}\n")
    return {"report": str(run.path(REPORT))}


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "label": cmd_label,
            "net": cmd_net, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="transactions CSV (default: <out>/transactions.csv)")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--threshold", type=float, help="tail-probability threshold")
    common.add_argument("--delta", type=float, action="append",
                        help="subnetwork price floor; repeatable")
    common.add_argument("--trees", type=int)
    common.add_argument("--min-leaf", type=int, dest="min_leaf")
    common.add_argument("--basis", type=int)
    common.add_argument("--bootstrap-samples", type=int, dest="bootstrap_samples")
    common.add_argument("--seed", type=int)
    common.add_argument("--config", help="JSON file whose keys override the flags")
    parser = argparse.ArgumentParser(prog="tradeflag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = load_run_config(args)
        result = COMMANDS[args.command](run)
    except (TradeflagError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
