#!/usr/bin/env node
/**
 * Reference external evaluator.
 *
 * Reads one fitness request line from stdin, computes a toy fitness (or
 * forwards to a wrapped training command), writes one response line to
 * stdout, and exits 0.  A malformed request is reported as a failed
 * response, still exit 0: protocol-level failures are data, not crashes.
 *
 * Modes:
 *   sum                      fitness = sum of param values
 *   sphere [--optimum v,..]  fitness = -||params - optimum||^2
 *   delay --seconds s        sleep s seconds, fitness 0
 *   fail                     exit 1 without a response
 *   forward --cmd "..."      relay the request to a wrapped command; its
 *                            stdout line may be a bare number or a full
 *                            response object
 *
 * Copy this file next to a real training script and replace the mode
 * dispatch with a call into it; nothing here knows about optimization.
 */

import { spawn } from "node:child_process";
import process from "node:process";

import {
  FitnessRequest,
  failedResponse,
  okResponse,
  parseRequest,
  readOneLine,
  responseLine,
} from "./protocol.js";

interface StubConfig {
  mode: "sum" | "sphere" | "delay" | "fail" | "forward";
  seconds: number;
  optimum: number[] | null;
  cmd: string | null;
}

function parseArgs(argv: string[]): StubConfig {
  const config: StubConfig = { mode: "sum", seconds: 0, optimum: null, cmd: null };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${arg}`);
      return argv[i];
    };
    switch (arg) {
      case "--mode":
        config.mode = next() as StubConfig["mode"];
        break;
      case "--seconds":
        config.seconds = Number(next());
        break;
      case "--optimum":
        config.optimum = next().split(",").map(Number);
        break;
      case "--cmd":
        config.cmd = next();
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  if (!["sum", "sphere", "delay", "fail", "forward"].includes(config.mode)) {
    throw new Error(`unknown mode ${config.mode}`);
  }
  if (config.seconds < 0) throw new Error("--seconds must be nonnegative");
  if (config.mode === "forward" && !config.cmd) {
    throw new Error("forward mode needs --cmd");
  }
  return config;
}

function sphereFitness(params: Record<string, number>, optimum: number[] | null): number {
  const values = Object.values(params);
  let total = 0;
  for (let i = 0; i < values.length; i++) {
    const target = optimum === null ? 0 : optimum[Math.min(i, optimum.length - 1)];
    const diff = values[i] - target;
    total += diff * diff;
  }
  return -total;
}

function sumFitness(params: Record<string, number>): number {
  return Object.values(params).reduce((acc, v) => acc + v, 0);
}

function sleep(seconds: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, seconds * 1000));
}

/** Run the wrapped command, passing the request line on its stdin. */
async function forward(cmd: string, requestLine: string, trialId: number) {
  const child = spawn(cmd, { shell: true, stdio: ["pipe", "pipe", "inherit"] });
  child.stdin.write(requestLine + "\n");
  child.stdin.end();
  const output = await readOneLine(child.stdout);
  const exitCode: number = await new Promise((resolve) => child.on("close", resolve));
  if (exitCode !== 0) {
    return failedResponse(trialId, `wrapped command exited ${exitCode}`);
  }
  const text = output.trim();
  const asNumber = Number(text);
  if (text.length > 0 && Number.isFinite(asNumber)) {
    return okResponse(trialId, asNumber);
  }
  try {
    const data = JSON.parse(text);
    if (typeof data.fitness === "number" && Number.isFinite(data.fitness)) {
      return okResponse(trialId, data.fitness);
    }
    return failedResponse(trialId, "wrapped command reported no finite fitness");
  } catch {
    return failedResponse(trialId, `unparseable wrapped output: ${text.slice(0, 120)}`);
  }
}

async function serveOne(config: StubConfig): Promise<number> {
  if (config.mode === "fail") {
    // Simulates a crashed training run: no response, nonzero exit.
    return 1;
  }
  const line = await readOneLine(process.stdin);
  let request: FitnessRequest;
  try {
    request = parseRequest(line);
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    process.stdout.write(responseLine(failedResponse(-1, `malformed request: ${detail}`)) + "\n");
    return 0;
  }

  let response;
  switch (config.mode) {
    case "sum":
      response = okResponse(request.trial_id, sumFitness(request.params));
      break;
    case "sphere":
      response = okResponse(request.trial_id, sphereFitness(request.params, config.optimum));
      break;
    case "delay":
      await sleep(config.seconds);
      response = okResponse(request.trial_id, 0);
      break;
    case "forward":
      response = await forward(config.cmd as string, line, request.trial_id);
      break;
    default:
      response = failedResponse(request.trial_id, `unhandled mode ${config.mode}`);
  }
  process.stdout.write(responseLine(response) + "\n");
  return 0;
}

async function main(): Promise<number> {
  let config: StubConfig;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`anchor-eval-stub: ${err instanceof Error ? err.message : err}`);
    return 2;
  }
  return serveOne(config);
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`anchor-eval-stub: ${err}`);
    process.exit(2);
  },
);
