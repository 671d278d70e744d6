/**
 * Oracle episode runner: drives a connected environment for a number of
 * steps and logs gaze/touch/action events for harness-side analysis
 * (one JSON record per step, the shared behavior-log shape).
 */

import { ClientEnv } from "./client.js";
import { Observation } from "./obs.js";
import { makeOracle } from "./oracles.js";

export interface BehaviorRecord {
  step: number;
  gaze_dir: number[];
  fixated_entity: number | null;
  touch_count: number;
  action: number[];
}

export async function runOracle(
  name: string,
  env: ClientEnv,
  steps: number,
  seed = 0,
): Promise<BehaviorRecord[]> {
  const policy = makeOracle(name, seed);
  const log: BehaviorRecord[] = [];
  let obs: Observation = env.lastObservation!;
  for (let i = 0; i < steps; i++) {
    const action = policy(obs);
    obs = await env.step(action);
    let touches = 0;
    for (const b of obs.touch) touches += b;
    log.push({
      step: obs.step,
      gaze_dir: Array.from(obs.gazeDir),
      fixated_entity: obs.fixatedEntity,
      touch_count: touches,
      action,
    });
  }
  return log;
}

export function behaviorLogLines(log: BehaviorRecord[]): string {
  return log.map((r) => JSON.stringify(r)).join("\n") + "\n";
}
