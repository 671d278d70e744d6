/**
 * Scripted oracle agents, deterministic per seed. The expectation-
 * paradigm pair (ideal-looker, random-gaze) mirrors the server-side
 * behavioral contracts so discrimination numbers reproduce over the wire.
 */

import { Observation } from "./obs.js";
import { N_MOTORS } from "./client.js";
import { Rng } from "./rng.js";

export type Policy = (obs: Observation) => number[];

export function gazeAction(pan: number, tilt: number, focal = 1.2): number[] {
  const a = new Array<number>(N_MOTORS).fill(0);
  a[0] = pan;
  a[1] = tilt;
  a[2] = focal;
  return a;
}

export interface VexpBriefing {
  kind: string;
  start_step: number;
  onset_steps: number;
  isi_steps: number;
  trials: number;
  anticipation_steps: number;
  sides: string[];
  pan_tilt: Record<string, [number, number]>;
}

/** Saccades to a uniform random direction, holding 12-30 steps. */
export function randomGaze(seed: number): Policy {
  const rng = new Rng(seed * 2654435761 + 13);
  let hold = 0;
  let pan = 0;
  let tilt = 0;
  return () => {
    if (hold <= 0) {
      pan = rng.uniform(-45, 45);
      tilt = rng.uniform(-40, 40);
      hold = rng.int(12, 31);
    }
    hold -= 1;
    return gazeAction(pan, tilt);
  };
}

/** Knows the left/right alternation; saccades to the upcoming side as
 * soon as each inter-stimulus interval begins. */
export function idealLooker(briefing: Record<string, unknown>): Policy {
  const b = briefing as unknown as VexpBriefing;
  const period = b.isi_steps + b.onset_steps;
  return (obs) => {
    const local = obs.step - b.start_step;
    const trial = Math.max(0, local) / period | 0;
    const side = b.sides[trial % b.sides.length];
    const [pan, tilt] = b.pan_tilt[side];
    return gazeAction(pan, tilt);
  };
}

/**
 * Habituating looker (client-side twin of the server oracle): looks at a
 * scheduled target for a decaying time per trial. Needs per-trial context,
 * so it is driven by a local trial schedule rather than the wire.
 */
export class HabituatingLooker {
  constructor(
    public initialLookS = 10.0,
    public decay = 0.9,
    public novelBoost = 3.0,
    public capS = 20.0,
  ) {}

  plannedLookSteps(
    trial: number,
    phase: "habituation" | "test",
    stimulus: string,
    habTrials = 0,
  ): number {
    if (phase === "habituation") {
      return Math.round(100 * this.initialLookS * this.decay ** trial);
    }
    let level = this.initialLookS * this.decay ** habTrials;
    if (stimulus === "novel") level = Math.min(this.capS, level * this.novelBoost);
    return Math.round(100 * level);
  }
}

/** Sweeps the left arm and squeezes the hand; drives touch events. */
export function reflexToucher(): Policy {
  let step = 0;
  return () => {
    const a = new Array<number>(N_MOTORS).fill(0);
    a[9] = Math.sin(step / 50);
    a[12] = 0.6;
    for (let i = 23; i < 32; i++) a[i] = 0.8;
    step += 1;
    return a;
  };
}

export const ORACLES: Record<
  string,
  (seed: number, briefing: Record<string, unknown>) => Policy
> = {
  "random-gaze": (seed) => randomGaze(seed),
  "ideal-looker": (_seed, briefing) => idealLooker(briefing),
  "reflex-toucher": () => reflexToucher(),
};

export function makeOracle(
  name: string,
  seed: number,
  briefing: Record<string, unknown> = {},
): Policy {
  const factory = ORACLES[name];
  if (!factory) {
    throw new Error(
      `unknown oracle '${name}'; known: ${Object.keys(ORACLES).sort().join(", ")}`,
    );
  }
  return factory(seed, briefing);
}
