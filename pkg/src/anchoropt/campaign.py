"""Campaign orchestration: wires a space, an optimizer and a fitness
provider, enforces the generation barrier, persists every trial to an
append-only JSONL log, and supports resume and reporting.

Log layout: one config header line, then trial lines; CMA-ES campaigns
additionally write a state snapshot line after every generation so a
killed campaign can resume bit-exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from time import perf_counter

import numpy as np

from . import __version__
from .analysis import fit_importance_regression, generation_stats, stats_to_csv
from .cmaes import CmaEs, CmaesParams, default_lambda
from .objective import (
    FitnessRequest,
    external_evaluate,
    load_annotations,
    proxy_objective,
)
from .space import HyperParamSpace, default_vector, resolve_space
from .surrogate import BoConfig, run_sequential_bo
from .trials import Trial, append_line, read_log, trial_from_record, trial_to_record

__all__ = ["CampaignConfig", "run_campaign", "resume_campaign", "report"]

# Config fields that pin the search trajectory; resume refuses if any differ.
_TRAJECTORY_FIELDS = (
    "space",
    "optimizer",
    "budget",
    "sigma0",
    "lam",
    "mean0",
    "initial_design",
    "xi",
    "acquisition_samples",
    "objective",
    "annotations",
    "evaluator",
    "timeout",
    "max_parallel",
    "seed",
)


@dataclass
class CampaignConfig:
    space: str = "ssd"
    optimizer: str = "cmaes"            # cmaes | bogp | smac
    budget: int = 225
    sigma0: float = 0.3
    lam: int | None = None              # default: 4 + floor(3 ln n)
    mean0: list[float] | None = None    # default: the builtin space's default vector
    initial_design: int | None = None
    xi: float = 0.01
    acquisition_samples: int = 2048
    objective: str = "proxy"            # proxy | external
    annotations: str | None = None
    evaluator: str | None = None
    timeout: float | None = None
    max_parallel: int = 1
    seed: int = 0
    out: str = "campaign.jsonl"

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.optimizer not in ("cmaes", "bogp", "smac"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.objective not in ("proxy", "external"):
            raise ValueError(f"unknown objective kind {self.objective!r}")
        if self.objective == "proxy" and not self.annotations:
            raise ValueError("proxy objective needs --annotations")
        if self.objective == "external" and not self.evaluator:
            raise ValueError("external objective needs an evaluator command")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


class _Evaluator:
    """Maps scaled vectors to fitness, in-process or via child processes."""

    def __init__(self, config: CampaignConfig, space: HyperParamSpace):
        self.config = config
        self.space = space
        if config.objective == "proxy":
            ann = load_annotations(config.annotations)
            self._fn = proxy_objective(space, ann)
        else:
            self._fn = None

    def eval_batch(self, generation: int, first_trial_id: int, X: np.ndarray) -> list[tuple[float, str, float]]:
        """Evaluate a generation; returns (fitness, status, wall_time) per row."""
        if self._fn is not None:
            out = []
            for row in X:
                start = perf_counter()
                try:
                    fit = float(self._fn(row))
                    status = "ok" if math.isfinite(fit) else "failed"
                except Exception:
                    fit, status = float("nan"), "failed"
                out.append((fit, status, perf_counter() - start))
            return out
        batch = [
            FitnessRequest(first_trial_id + i, generation, self.space.transform(row))
            for i, row in enumerate(X)
        ]
        start = perf_counter()
        responses = external_evaluate(
            batch, self.config.evaluator, self.config.timeout, self.config.max_parallel
        )
        wall = perf_counter() - start
        return [(r.fitness, r.status, wall / len(batch)) for r in responses]

    def eval_one(self, trial_id: int, x: np.ndarray) -> float:
        """Single evaluation for the sequential optimizers; raises on failure."""
        if self._fn is not None:
            return float(self._fn(x))
        req = FitnessRequest(trial_id, trial_id, self.space.transform(x))
        resp = external_evaluate(
            [req], self.config.evaluator, self.config.timeout, self.config.max_parallel
        )[0]
        if not resp.ok:
            raise RuntimeError(f"evaluation failed: {resp.detail}")
        return resp.fitness


def _config_header(config: CampaignConfig) -> dict:
    return {"type": "config", "version": __version__, "config": asdict(config)}


def _check_writable(path: str) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ValueError(f"output path {path!r} is not writable")


def _initial_mean(config: CampaignConfig, space: HyperParamSpace) -> np.ndarray:
    if config.mean0 is not None:
        return np.asarray(config.mean0, dtype=float)
    if space.kind in ("ssd", "faster_rcnn"):
        return default_vector(space)
    return (space.lo + space.hi) / 2.0


def _best_trial(trials: list[Trial]) -> Trial | None:
    good = [t for t in trials if math.isfinite(t.fitness)]
    if not good:
        return None
    return max(good, key=lambda t: (t.fitness, -t.trial_id))


def _log_trial(path: str, trial: Trial) -> None:
    append_line(path, trial_to_record(trial))


def _run_cmaes(
    config: CampaignConfig,
    space: HyperParamSpace,
    evaluator: _Evaluator,
    opt: CmaEs,
    existing: list[Trial],
    log_path: str,
) -> list[Trial]:
    trials = list(existing)
    while True:
        stop, _reason = opt.should_stop()
        if stop or opt.evaluations + opt.lam > config.budget:
            break
        generation = opt.generation
        X = opt.ask()
        first_id = len(trials)
        results = evaluator.eval_batch(generation, first_id, X)
        fitnesses = [r[0] for r in results]
        batch_trials = [
            Trial(
                trial_id=first_id + i,
                generation=generation,
                params_scaled=[float(v) for v in X[i]],
                params_physical=space.transform(X[i]),
                fitness=fitnesses[i],
                status=results[i][1],
                wall_time_s=results[i][2],
            )
            for i in range(len(X))
        ]
        opt.tell(X, fitnesses)
        for t in batch_trials:
            _log_trial(log_path, t)
            trials.append(t)
        append_line(log_path, {"type": "cmaes_state", "snapshot": opt.snapshot()})
    return trials


def _run_bo(
    config: CampaignConfig,
    space: HyperParamSpace,
    evaluator: _Evaluator,
    existing: list[Trial],
    log_path: str,
) -> list[Trial]:
    bo = BoConfig(
        budget=config.budget,
        initial_design_size=config.initial_design,
        acquisition_samples=config.acquisition_samples,
        xi=config.xi,
        seed=config.seed,
    )
    counter = {"next": len(existing)}

    def objective(x: np.ndarray) -> float:
        trial_id = counter["next"]
        counter["next"] += 1
        return evaluator.eval_one(trial_id, x)

    kind = "gp" if config.optimizer == "bogp" else "rf"
    done = len(existing)

    history = run_sequential_bo(objective, space, bo, surrogate_kind=kind, initial_history=existing)
    for t in history[done:]:
        _log_trial(log_path, t)
    return history


def _execute(config: CampaignConfig, existing: list[Trial], opt_state: dict | None, log_path: str) -> dict:
    space = resolve_space(config.space)
    evaluator = _Evaluator(config, space)

    if config.optimizer == "cmaes":
        lam = config.lam if config.lam is not None else default_lambda(space.n)
        if opt_state is not None:
            opt = CmaEs.from_snapshot(opt_state, space=space)
        else:
            params = CmaesParams(
                sigma0=config.sigma0,
                lam=lam,
                mean0=_initial_mean(config, space),
                max_evaluations=config.budget,
                seed=config.seed,
            )
            opt = CmaEs(params, space=space)
        trials = _run_cmaes(config, space, evaluator, opt, existing, log_path)
    else:
        trials = _run_bo(config, space, evaluator, existing, log_path)

    best = _best_trial(trials)
    final = {
        "type": "final",
        "best_trial_id": best.trial_id if best else None,
        "best_fitness": best.fitness if best else None,
        "n_trials": len(trials),
    }
    append_line(log_path, final)
    return {"best": best, "n_trials": len(trials), "log": log_path}


def run_campaign(config: CampaignConfig) -> dict:
    """Run a fresh campaign to its budget; returns best trial and log path."""
    _check_writable(config.out)
    if config.objective == "proxy" and not Path(config.annotations).exists():
        raise ValueError(f"annotations file {config.annotations!r} does not exist")
    with open(config.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_config_header(config)) + "\n")
    return _execute(config, existing=[], opt_state=None, log_path=config.out)


def _load_state(log_path: str) -> tuple[CampaignConfig, list[Trial], dict | None, list[dict]]:
    records, _torn = read_log(log_path)
    if not records or records[0].get("type") != "config":
        raise ValueError(f"{log_path}: missing config header")
    config = CampaignConfig(**records[0]["config"])
    trials = [trial_from_record(r) for r in records if r.get("type") == "trial"]
    snapshots = [r["snapshot"] for r in records if r.get("type") == "cmaes_state"]
    return config, trials, snapshots[-1] if snapshots else None, records


def resume_campaign(log_path: str, config: CampaignConfig | None = None) -> dict:
    """Continue an interrupted campaign from its log.

    The stored config governs the run; a config argument is only checked
    for compatibility and refused on any trajectory-relevant difference.
    An incomplete trailing generation is truncated and re-evaluated.
    """
    stored, trials, snapshot, _records = _load_state(log_path)
    if config is not None:
        stored_d, given_d = asdict(stored), asdict(config)
        diffs = [
            f"{k}: logged={stored_d[k]!r} requested={given_d[k]!r}"
            for k in _TRAJECTORY_FIELDS
            if stored_d[k] != given_d[k]
        ]
        if diffs:
            raise ValueError("config does not match the campaign log:\n  " + "\n  ".join(diffs))

    if stored.optimizer == "cmaes":
        done_gens = snapshot["generation"] if snapshot else 0
        lam = snapshot["lam"] if snapshot else None
        keep = [t for t in trials if t.generation < done_gens]
        if lam is not None and len(keep) != done_gens * lam:
            raise ValueError(f"{log_path}: trial count does not match {done_gens} generations")
        trials = keep
        opt_state = snapshot
    else:
        opt_state = None

    if len(trials) >= stored.budget:
        return {"best": _best_trial(trials), "n_trials": len(trials), "log": log_path,
                "notice": "campaign already complete"}

    # Rewrite the log up to the consistent prefix, then continue appending.
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_config_header(stored)) + "\n")
        for t in trials:
            fh.write(json.dumps(trial_to_record(t)) + "\n")
        if stored.optimizer == "cmaes" and opt_state is not None:
            fh.write(json.dumps({"type": "cmaes_state", "snapshot": opt_state}) + "\n")
    return _execute(stored, existing=trials, opt_state=opt_state, log_path=log_path)


def report(log_path: str, out_dir: str | Path | None = None) -> dict:
    """Summarize a campaign log: best trial, per-generation CSV, regression."""
    stored, trials, _snapshot, _records = _load_state(log_path)
    if not trials:
        raise ValueError(f"{log_path}: no trials logged")
    space = resolve_space(stored.space)
    best = _best_trial(trials)
    stats = generation_stats(trials)
    csv_text = stats_to_csv(stats)
    finite = sum(1 for t in trials if math.isfinite(t.fitness))
    regression = None
    if finite >= space.n + 2:
        regression = fit_importance_regression(trials, space).to_dict()
    summary = {
        "log": str(log_path),
        "n_trials": len(trials),
        "n_failed": len(trials) - finite,
        "best_trial_id": best.trial_id if best else None,
        "best_fitness": best.fitness if best else None,
        "best_params_scaled": best.params_scaled if best else None,
        "best_params_physical": best.params_physical if best else None,
        "regression": regression,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        (out / "generations.csv").write_text(csv_text, encoding="utf-8")
        if regression is not None:
            (out / "regression.json").write_text(
                json.dumps(regression, indent=2) + "\n", encoding="utf-8"
            )
    summary["generations_csv"] = csv_text
    return summary
