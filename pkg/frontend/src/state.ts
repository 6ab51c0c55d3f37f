/**
 * Client session state as a pure reducer over server responses.
 *
 * No game outcome is computed here: every field is copied from a response
 * (commitment verification results are computed outside, from revealed
 * data, and passed in as booleans). Replaying a logged transcript of
 * responses through the reducers reproduces the state exactly.
 */
import type {
  ContextChoice,
  LgReportDto,
  Phase,
  ReportResponse,
  RevealResponse,
  SessionView,
  SubmitResponse,
} from "./types.js";

export interface RoundView {
  roundId: number;
  context: ContextChoice;
  bobOutcome: string | null;
  commitmentHash: string;
  revealed: null | {
    aliceM3: boolean;
    aliceBets: boolean;
    aliceWins: boolean | null;
    payoffDelta: number;
    salt: string;
    verified: boolean;
  };
}

export interface KPoint {
  roundsPlayed: number;
  kHat: number;
  kStdErr: number;
}

export interface UiSessionState {
  sessionId: string | null;
  phase: Phase;
  engine: string;
  odds: number;
  roundId: number;
  roundsTotal: number;
  roundsPlayed: number;
  ledger: number;
  pending: RoundView | null;
  history: RoundView[];
  report: LgReportDto | null;
  perContext: ReportResponse["per_context"] | null;
  kTrace: KPoint[];
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    phase: "AwaitingContext",
    engine: "",
    odds: 2,
    roundId: 1,
    roundsTotal: 0,
    roundsPlayed: 0,
    ledger: 0,
    pending: null,
    history: [],
    report: null,
    perContext: null,
    kTrace: [],
  };
}

export function applyCreated(view: SessionView): UiSessionState {
  return {
    ...initialState(),
    sessionId: view.session_id,
    phase: view.phase,
    engine: view.engine,
    odds: view.odds,
    roundId: view.round_id,
    roundsTotal: view.rounds_total,
    roundsPlayed: view.rounds_played,
    ledger: view.ledger,
  };
}

export function applySubmit(
  state: UiSessionState,
  response: SubmitResponse
): UiSessionState {
  return {
    ...state,
    phase: response.phase,
    roundId: response.round_id,
    pending: {
      roundId: response.round_id,
      context: response.context,
      bobOutcome: response.bob_outcome ?? null,
      commitmentHash: response.commitment_hash,
      revealed: null,
    },
  };
}

export function applyReveal(
  state: UiSessionState,
  response: RevealResponse,
  verified: boolean
): UiSessionState {
  const pending = state.pending;
  const settled: RoundView = {
    roundId: response.round_id,
    context: pending?.context ?? response.record.context,
    bobOutcome: response.record.bob_outcome,
    commitmentHash: response.commitment_hash,
    revealed: {
      aliceM3: response.alice_m3,
      aliceBets: response.alice_bets,
      aliceWins: response.alice_wins,
      payoffDelta: response.payoff_delta,
      salt: response.salt,
      verified,
    },
  };
  return {
    ...state,
    phase: response.phase,
    ledger: response.ledger,
    roundsPlayed: response.rounds_played,
    roundId: Math.min(response.round_id + 1, response.rounds_total),
    pending: null,
    history: [...state.history, settled],
  };
}

export function applyReport(
  state: UiSessionState,
  response: ReportResponse
): UiSessionState {
  const kTrace =
    response.report === null
      ? state.kTrace
      : [
          ...state.kTrace,
          {
            roundsPlayed: response.rounds_played,
            kHat: response.report.k_hat,
            kStdErr: response.report.k_std_err,
          },
        ];
  return {
    ...state,
    ledger: response.ledger,
    roundsPlayed: response.rounds_played,
    report: response.report,
    perContext: response.per_context,
    kTrace,
  };
}

/** Scoreboard numbers derived from settled rounds (display only). */
export function scoreboard(state: UiSessionState) {
  const settled = state.history;
  const bets = settled.filter((r) => r.revealed?.aliceBets && r.context !== "none");
  const wins = bets.filter((r) => r.revealed?.aliceWins === true);
  const verifiedAll = settled.every((r) => r.revealed?.verified !== false);
  return {
    roundsPlayed: settled.length,
    betRate: settled.length ? bets.length / settled.length : null,
    winRate: bets.length ? wins.length / bets.length : null,
    ledger: state.ledger,
    allCommitmentsVerified: verifiedAll,
  };
}
