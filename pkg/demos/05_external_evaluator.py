"""Drive a campaign through the external-evaluator wire protocol.

One evaluator process per trial: the orchestrator writes a single JSON
request line to the child's stdin and reads a single JSON response line
from its stdout.  Here the child is the TypeScript reference stub in
evaluator/ (build it first: ``npm --prefix evaluator run build``); swap in
any command that speaks the same protocol, e.g. a wrapper around real
detector training.

Request :  {"trial_id": 3, "generation": 0, "params": {"scale_0": 0.1, ...}}
Response:  {"trial_id": 3, "fitness": 0.42, "status": "ok", "detail": ""}
"""

import tempfile
import time
from pathlib import Path

from anchoropt import CampaignConfig, FitnessRequest, external_evaluate, run_campaign

STUB = Path(__file__).resolve().parent.parent / "evaluator" / "dist" / "stub.js"
if not STUB.exists():
    raise SystemExit(f"stub not built: run  npm --prefix {STUB.parent.parent} run build")

# --- a raw batch through the protocol ----------------------------------------

batch = [FitnessRequest(trial_id=i, generation=0, params={"a": 0.1 * i, "b": 0.5})
         for i in range(9)]

responses = external_evaluate(batch, f"node {STUB} --mode sum", timeout=30, max_parallel=9)
print("sum-mode fitnesses:", [round(r.fitness, 2) for r in responses])

start = time.perf_counter()
external_evaluate(batch, f"node {STUB} --mode delay --seconds 0.5", timeout=30, max_parallel=9)
print(f"nine 0.5s evaluations, nine workers: wall {time.perf_counter() - start:.2f}s "
      f"(serial would be 4.5s)")

# --- a whole campaign against the stub ----------------------------------------

workdir = Path(tempfile.mkdtemp(prefix="external-demo-"))
config = CampaignConfig(
    space="ssd",
    optimizer="cmaes",
    budget=90,
    lam=9,
    objective="external",
    evaluator=f"node {STUB} --mode sphere --optimum 0.1,0.2,0.37,0.54,0.71,0.88,1.05",
    timeout=30,
    max_parallel=9,
    seed=0,
    out=str(workdir / "external.jsonl"),
)
result = run_campaign(config)
best = result["best"]
print(f"\nsphere-stub campaign: best fitness {best.fitness:.5f} at scales "
      f"{[round(v, 3) for v in best.params_scaled]}")
print(f"log: {result['log']}")
