/** Session-config construction from the setup form (configuration only;
 * every game outcome still comes from the server). */

export type { ContextChoice } from "./types.js";

export type JsonObject = { [key: string]: unknown };

export interface SetupValues {
  engine: "quantum" | "macroreal";
  rounds: number;
  odds: number;
  seed: number;
  f_herald: number;
  f_readout: number;
  p_preserve: number;
  rf_epsilon: number;
}

/** The classical mirror of the quantum protocol: ball heralded in box 3,
 * information-destroying uniform shuffles, non-disturbing measurements. */
export function hiddenBallStrategy(): JsonObject {
  const uniform = [
    [1 / 3, 1 / 3, 1 / 3],
    [1 / 3, 1 / 3, 1 / 3],
    [1 / 3, 1 / 3, 1 / 3],
  ];
  const identity = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
  return {
    placement: [0, 0, 1],
    shuffle_before: uniform,
    shuffle_after: uniform,
    measurement_disturbance: identity,
  };
}

export function buildSessionConfig(setup: SetupValues): JsonObject {
  const config: JsonObject = {
    engine: setup.engine,
    rounds: setup.rounds,
    context_schedule: "external",
    odds: setup.odds,
    seed: setup.seed,
    noise: {
      f_herald: setup.f_herald,
      f_readout: setup.f_readout,
      p_preserve: setup.p_preserve,
      rf_epsilon: setup.rf_epsilon,
    },
  };
  if (setup.engine === "macroreal") {
    config.mr_strategy = hiddenBallStrategy();
  }
  return config;
}

export function readSetupForm(form: HTMLFormElement): SetupValues {
  const data = new FormData(form);
  const num = (name: string, fallback: number) => {
    const raw = data.get(name);
    const value = raw === null ? NaN : Number(raw);
    return Number.isFinite(value) ? value : fallback;
  };
  const engine = data.get("engine") === "macroreal" ? "macroreal" : "quantum";
  return {
    engine,
    rounds: Math.max(1, Math.floor(num("rounds", 50))),
    odds: num("odds", 2),
    seed: Math.max(0, Math.floor(num("seed", Date.now() % 1_000_000))),
    f_herald: num("f_herald", 0.95),
    f_readout: num("f_readout", 0.96),
    p_preserve: num("p_preserve", 0.7),
    rf_epsilon: num("rf_epsilon", 0),
  };
}
