import { describe, expect, it } from "vitest";
import {
  applyCreated,
  applyReport,
  applyReveal,
  applySubmit,
  initialState,
  scoreboard,
  type UiSessionState,
} from "../src/state.js";
import type {
  CanonicalRecord,
  ReportResponse,
  RevealResponse,
  SessionView,
  SubmitResponse,
} from "../src/types.js";

const CREATED: SessionView = {
  session_id: "feedbead",
  phase: "AwaitingContext",
  round_id: 1,
  rounds_total: 2,
  rounds_played: 0,
  engine: "quantum",
  odds: 2,
  ledger: 0,
};

function record(roundId: number, overrides: Partial<CanonicalRecord> = {}): CanonicalRecord {
  return {
    round_id: roundId,
    engine: "quantum",
    context: "M1",
    bob_outcome: "true",
    alice_m3: true,
    alice_bets: true,
    alice_wins: true,
    gt_box_t1: null,
    gt_box_t2: null,
    gt_box_t3: null,
    seed_path: `9/${roundId}`,
    ...overrides,
  };
}

const SUBMIT_1: SubmitResponse = {
  phase: "AwaitingReveal",
  round_id: 1,
  context: "M1",
  commitment_hash: "c1",
  bob_outcome: "true",
};

const REVEAL_1: RevealResponse = {
  phase: "AwaitingContext",
  round_id: 1,
  alice_m3: true,
  alice_bets: true,
  alice_wins: true,
  payoff_delta: 1,
  ledger: 1,
  salt: "s1",
  commitment_hash: "c1",
  record: record(1),
  rounds_played: 1,
  rounds_total: 2,
};

const SUBMIT_2: SubmitResponse = {
  phase: "AwaitingReveal",
  round_id: 2,
  context: "none",
  commitment_hash: "c2",
};

const REVEAL_2: RevealResponse = {
  phase: "Settled",
  round_id: 2,
  alice_m3: false,
  alice_bets: false,
  alice_wins: null,
  payoff_delta: 0,
  ledger: 1,
  salt: "s2",
  commitment_hash: "c2",
  record: record(2, { context: "none", bob_outcome: null, alice_m3: false,
                      alice_bets: false, alice_wins: null }),
  rounds_played: 2,
  rounds_total: 2,
};

const REPORT: ReportResponse = {
  ...CREATED,
  phase: "Settled",
  rounds_played: 2,
  ledger: 1,
  report: {
    k_hat: -1.2,
    k_std_err: 0.1,
    k_hat_adverse: -1.1,
    k_std_err_adverse: 0.1,
    sigma_fair: 2.0,
    sigma_adverse: 1.0,
    q1: 1,
    conditionals: {},
    adverse_conditionals: {},
    sampling_policy_notes: "",
  },
  per_context: {
    M1: { rounds: 1, alice_true: 1, bet_rate: 1, bets_decided: 1, win_rate: 1 },
    M2: { rounds: 0, alice_true: 0, bet_rate: null, bets_decided: 0, win_rate: null },
    none: { rounds: 1, alice_true: 0, bet_rate: 0, bets_decided: 0, win_rate: null },
  },
  history: [],
};

function replayTranscript(): UiSessionState {
  let state = applyCreated(CREATED);
  state = applySubmit(state, SUBMIT_1);
  state = applyReveal(state, REVEAL_1, true);
  state = applySubmit(state, SUBMIT_2);
  state = applyReveal(state, REVEAL_2, true);
  state = applyReport(state, REPORT);
  return state;
}

describe("session state reducer", () => {
  it("starts empty", () => {
    const state = initialState();
    expect(state.sessionId).toBeNull();
    expect(state.history).toEqual([]);
  });

  it("tracks phases through a full transcript", () => {
    let state = applyCreated(CREATED);
    expect(state.phase).toBe("AwaitingContext");
    state = applySubmit(state, SUBMIT_1);
    expect(state.phase).toBe("AwaitingReveal");
    expect(state.pending?.bobOutcome).toBe("true");
    state = applyReveal(state, REVEAL_1, true);
    expect(state.phase).toBe("AwaitingContext");
    expect(state.pending).toBeNull();
    expect(state.history).toHaveLength(1);
  });

  it("keeps the none-context round free of a Bob outcome", () => {
    let state = applyCreated(CREATED);
    state = applySubmit(state, SUBMIT_2);
    expect(state.pending?.bobOutcome).toBeNull();
  });

  it("is replay-deterministic from a logged transcript", () => {
    const a = replayTranscript();
    const b = replayTranscript();
    expect(a).toEqual(b);
    expect(a.phase).toBe("Settled");
    expect(a.ledger).toBe(1);
    expect(a.history.map((r) => r.roundId)).toEqual([1, 2]);
  });

  it("accumulates the K trace only when a report is estimable", () => {
    let state = applyCreated(CREATED);
    state = applyReport(state, { ...REPORT, report: null });
    expect(state.kTrace).toHaveLength(0);
    state = applyReport(state, REPORT);
    expect(state.kTrace).toEqual([{ roundsPlayed: 2, kHat: -1.2, kStdErr: 0.1 }]);
  });

  it("carries verification results into the scoreboard", () => {
    let state = applyCreated(CREATED);
    state = applySubmit(state, SUBMIT_1);
    state = applyReveal(state, REVEAL_1, false); // forged reveal
    const score = scoreboard(state);
    expect(score.allCommitmentsVerified).toBe(false);
  });

  it("derives bet and win rates from settled rounds", () => {
    const state = replayTranscript();
    const score = scoreboard(state);
    expect(score.roundsPlayed).toBe(2);
    expect(score.betRate).toBeCloseTo(0.5);
    expect(score.winRate).toBeCloseTo(1.0);
    expect(score.ledger).toBe(1);
    expect(score.allCommitmentsVerified).toBe(true);
  });
});
