"""Sweeps over (policy, T, seed): run records, CSV series, summaries, replay."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import adversary
from ..allocator import Policy, log_over_sqrt_applies, run_policy
from ..benchmark import regret_report, solve_pstar
from ..core import BmmfaError, ConfigurationError, RngHandle
from .config import ALPHA_STREAM, ENV_STREAM, ConfigError, ExperimentConfig, build_instance, content_hash
from .stats import MIN_FIT_POINTS, fit_loglog, mean_std

log = logging.getLogger(__name__)

FULL_TRACE_MAX_T = 1 << 12
TRACE_POINTS = 4096
CSV_COLUMNS = ("policy", "T", "seed", "surrogate_regret_ub", "min_realized", "min_expected",
               "clean", "phi_monotone_ok")
RECORD_SCHEMA = 1


class ReplayError(BmmfaError):
    pass


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(json.dumps(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def env_seed(cfg: ExperimentConfig, T: int, seed_index: int) -> int:
    # Independent of the policy: every policy faces the same draws, and adding
    # a policy never changes the runs of the others.
    return derive_seed(cfg.master_seed, "env", T, seed_index)


def run_fingerprint(config_fp: str, policy: str, T: int, seed_index: int, seed: int) -> str:
    return content_hash({"config": config_fp, "policy": policy, "T": T,
                         "seed_index": seed_index, "seed": seed})


def thinned_rounds(T: int, first: int = 1) -> list[int]:
    if T <= FULL_TRACE_MAX_T:
        return list(range(first, T + 1))
    stride = math.ceil(T / TRACE_POINTS)
    rounds = list(range(first, T + 1, stride))
    if rounds[-1] != T:
        rounds.append(T)
    return rounds


def _is_adversarial(cfg: ExperimentConfig) -> bool:
    return cfg.instance.get("type") == "alpha" and cfg.instance.get("erase_block") is None


@lru_cache(maxsize=64)
def _empirical_opt_cached(content_json: str, T: int) -> float:
    cfg = ExperimentConfig.from_dict(json.loads(content_json))
    return estimate_empirical_opt(cfg, T)


def estimate_empirical_opt(cfg: ExperimentConfig, T: int) -> float:
    """Monte-Carlo E[OPT]: the known optimal constant allocation on fresh draws."""
    total = []
    for r in range(cfg.opt_replications):
        seed = derive_seed(cfg.master_seed, "opt", T, r)
        inst, alpha = build_instance(cfg.instance, T, RngHandle(seed, ALPHA_STREAM))
        total.append(adversary.optimal_min_utility(inst, alpha, RngHandle(seed, ENV_STREAM)))
    return math.fsum(total) / len(total)


def execute_run(cfg: ExperimentConfig, policy: Policy, T: int, seed_index: int) -> dict:
    """Run one (policy, T, seed) cell and return its JSON-ready record."""
    seed = env_seed(cfg, T, seed_index)
    inst, alpha = build_instance(cfg.instance, T, RngHandle(seed, ALPHA_STREAM))
    oracle = cfg.matroid_oracle(inst.n, inst.m)
    lp = solve_pstar(inst.means, oracle)
    p_star = lp.p_star if lp.p_star > 0 else None
    run = run_policy(inst, policy, cfg.policy_config(), RngHandle(seed, ENV_STREAM),
                     p_star=p_star, matroid=oracle)
    empirical_opt = None
    if _is_adversarial(cfg):
        empirical_opt = _empirical_opt_cached(json.dumps(cfg.content(), sort_keys=True), T)
    report = regret_report(run, lp, empirical_opt)

    rounds = thinned_rounds(T)
    record = {
        "schema_version": RECORD_SCHEMA,
        "config": cfg.content(),
        "config_fingerprint": cfg.fingerprint,
        "fingerprint": run_fingerprint(cfg.fingerprint, policy.label, T, seed_index, seed),
        "policy": policy.label,
        "T": T,
        "seed_index": seed_index,
        "seed": seed,
        "n": inst.n,
        "m": inst.m,
        "epsilon": run.epsilon,
        "c_rad": run.c_rad,
        "init_rounds": run.init_rounds,
        "lp": lp.to_dict(),
        "trace": {
            "thinned": T > FULL_TRACE_MAX_T,
            "rounds": rounds,
            "owners": run.owners[np.array(rounds) - 1].tolist(),
        },
        "ledger": {
            "realized": run.ledger.realized.tolist(),
            "expected": run.ledger.expected.tolist(),
            "ucb": run.ledger.ucb.tolist(),
            "rounds_elapsed": T,
        },
        "clean": run.all_clean,
        "first_violation": run.first_violation,
        "phi": None,
        "alpha": None if alpha is None else alpha.to_list(),
        "n_alpha_k": None if alpha is None else adversary.correct_assignment_counts(run.owners, alpha),
        "report": report.to_dict(),
    }
    if run.log_phi is not None:
        s_values = thinned_rounds(T, first=run.init_rounds) if T > run.init_rounds else [T]
        record["phi"] = {
            "s": s_values,
            "log_values": run.log_phi[np.array(s_values) - run.init_rounds].tolist(),
            "monotone_ok": run.phi_monotone(),
        }
    return record


def dump_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=1) + "\n"


def record_filename(policy: str, T: int, seed_index: int) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "-", policy)
    return f"{safe}__T{T}__s{seed_index}.json"


def csv_row(record: dict) -> list[str]:
    rep = record["report"]
    phi_ok = "" if record["phi"] is None else str(record["phi"]["monotone_ok"]).lower()
    return [
        record["policy"],
        str(record["T"]),
        str(record["seed_index"]),
        repr(float(rep["surrogate_regret_ub"])),
        repr(float(rep["alg_min_realized"])),
        repr(float(rep["alg_min_expected"])),
        str(record["clean"]).lower(),
        phi_ok,
    ]


def write_csv(rows: list[list[str]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


@dataclass
class SweepSummary:
    config_fingerprint: str
    policies: dict
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"schema_version": RECORD_SCHEMA, "config_fingerprint": self.config_fingerprint,
                "policies": self.policies, "failures": self.failures, "notes": self.notes}


def summarize(cfg: ExperimentConfig, records: list[dict], failures: list[dict]) -> SweepSummary:
    policies = {}
    for policy in cfg.policies:
        per_T = []
        for T in cfg.T:
            recs = [r for r in records if r["policy"] == policy.label and r["T"] == T]
            row = {"T": T, "n_runs": len(recs)}
            if recs:
                for key in ("surrogate_regret_ub", "per_round_fairness_gap", "empirical_regret"):
                    vals = [r["report"][key] for r in recs]
                    if any(v is None for v in vals):
                        row[f"{key}_mean"] = row[f"{key}_std"] = None
                    else:
                        row[f"{key}_mean"], row[f"{key}_std"] = mean_std(vals)
                row["clean_fraction"] = sum(r["clean"] for r in recs) / len(recs)
            per_T.append(row)
        block = {"per_T": per_T, "fit": None, "fit_note": None}
        series = [(r["T"], r["surrogate_regret_ub_mean"]) for r in per_T if r["n_runs"]]
        if len(series) < MIN_FIT_POINTS:
            block["fit_note"] = f"fewer than {MIN_FIT_POINTS} horizons"
        elif any(y <= 0 for _, y in series):
            block["fit_note"] = "nonpositive mean regret at some horizon"
        else:
            block["fit"] = fit_loglog(series).to_dict()
        policies[policy.label] = block
    return SweepSummary(cfg.fingerprint, policies, failures, regime_notes(cfg))


def regime_notes(cfg: ExperimentConfig) -> list[str]:
    notes = []
    for T in cfg.T:
        inst, _ = build_instance(cfg.instance, T, RngHandle(0, ALPHA_STREAM))
        p_star = solve_pstar(inst.means, cfg.matroid_oracle(inst.n, inst.m)).p_star
        ok = log_over_sqrt_applies(inst.n, inst.m, T, p_star)
        notes.append(f"T={T}: horizon condition for the log_over_sqrt schedule "
                     f"{'holds' if ok else 'fails'}; schedule in use: {cfg.epsilon_schedule}")
    if cfg.instance.get("type") == "alpha":
        for T in cfg.T:
            reasons = adversary.opt_concentration_guard(cfg.instance["n"], cfg.instance["b"], T)
            if reasons:
                notes.append(f"T={T}: realized-regret lower-bound conditions fail ({'; '.join(reasons)})")
    return notes


def _task(args):
    cfg_dict, policy, T, seed_index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    start = time.perf_counter()
    try:
        record = execute_run(cfg, policy, T, seed_index)
        return record, None, time.perf_counter() - start
    except (BmmfaError, ArithmeticError, ValueError) as exc:
        failure = {"policy": policy.label, "T": T, "seed": seed_index,
                   "error": f"{type(exc).__name__}: {exc}"}
        return None, failure, time.perf_counter() - start


def default_threads(cfg: ExperimentConfig) -> int:
    env = os.environ.get("BMMFA_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError("BMMFA_THREADS", f"not an integer: {env!r}") from None
        if value < 1:
            raise ConfigError("BMMFA_THREADS", "must be >= 1")
        return value
    return cfg.parallelism


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int | None = None) -> SweepSummary:
    """Run the full sweep and persist records, series.csv, summary.json and plots."""
    out = Path(out_dir or cfg.output_dir or os.environ.get("BMMFA_OUT") or "bmmfa_out")
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output_dir", f"cannot create {out}: {exc}") from None
    threads = threads or default_threads(cfg)
    if cfg.instance.get("type") == "alpha":
        for T in cfg.T:
            adversary.warn_if_unguarded(cfg.instance["n"], cfg.instance["b"], T)

    order = {p.label: k for k, p in enumerate(cfg.policies)}
    tasks = [(cfg.to_dict(), p, T, s) for p in cfg.policies for T in cfg.T for s in range(cfg.seeds)]
    log.info("running %d runs on %d worker(s)", len(tasks), threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    records, failures, timings = [], [], {}
    for record, failure, seconds in results:
        if record is None:
            failures.append(failure)
            log.warning("run failed: %s", failure)
            continue
        records.append(record)
        timings[record_filename(record["policy"], record["T"], record["seed_index"])] = seconds
    records.sort(key=lambda r: (order[r["policy"]], r["T"], r["seed_index"]))

    for record in records:
        path = out / "runs" / record_filename(record["policy"], record["T"], record["seed_index"])
        path.write_text(dump_record(record))
    write_csv([csv_row(r) for r in records], out / "series.csv")
    summary = summarize(cfg, records, failures)
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True) + "\n")
    if cfg.plot and records:
        from .plotting import plot_regret

        plot_regret(summary.to_dict(), out / "regret.svg")
    return summary


def replay(record: dict, cfg: ExperimentConfig | None = None) -> dict:
    """Re-execute a persisted run; refuses records whose fingerprints do not match."""
    if cfg is None:
        try:
            cfg = ExperimentConfig.from_dict(record["config"])
        except KeyError:
            raise ReplayError("record carries no config") from None
    if record.get("config_fingerprint") != cfg.fingerprint:
        raise ReplayError("config fingerprint mismatch")
    try:
        policy = Policy.parse(record["policy"])
        T, seed_index, seed = int(record["T"]), int(record["seed_index"]), int(record["seed"])
    except (KeyError, ValueError, ConfigurationError) as exc:
        raise ReplayError(f"malformed record: {exc}") from None
    expected_fp = run_fingerprint(cfg.fingerprint, policy.label, T, seed_index, seed)
    if record.get("fingerprint") != expected_fp or seed != env_seed(cfg, T, seed_index):
        raise ReplayError("run fingerprint mismatch")
    return execute_run(cfg, policy, T, seed_index)


def load_record(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(io.StringIO(fh.read())))
