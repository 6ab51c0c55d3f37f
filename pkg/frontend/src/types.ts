/** Wire types for the three-box game service (all shapes server-defined). */

export type Phase = "AwaitingContext" | "AwaitingReveal" | "Settled";
export type ContextChoice = "M1" | "M2" | "none";
export type BobOutcome = "true" | "false" | "undetermined";

/** The committed view of a round; exactly the object the server hashes. */
export interface CanonicalRecord {
  round_id: number;
  engine: string;
  context: ContextChoice;
  bob_outcome: BobOutcome | null;
  alice_m3: boolean;
  alice_bets: boolean;
  alice_wins: boolean | null;
  gt_box_t1: number | null;
  gt_box_t2: number | null;
  gt_box_t3: number | null;
  seed_path: string;
}

export interface SessionView {
  session_id: string;
  phase: Phase;
  round_id: number;
  rounds_total: number;
  rounds_played: number;
  engine: string;
  odds: number;
  ledger: number;
}

export interface SubmitResponse {
  phase: Phase;
  round_id: number;
  context: ContextChoice;
  commitment_hash: string;
  bob_outcome?: BobOutcome;
}

export interface RevealResponse {
  phase: Phase;
  round_id: number;
  alice_m3: boolean;
  alice_bets: boolean;
  alice_wins: boolean | null;
  payoff_delta: number;
  ledger: number;
  salt: string;
  commitment_hash: string;
  record: CanonicalRecord;
  rounds_played: number;
  rounds_total: number;
}

export interface ConditionalDto {
  context: string;
  n_alice_true: number;
  n_joint_true: number;
  p_hat: number;
  std_err: number;
}

export interface LgReportDto {
  k_hat: number;
  k_std_err: number;
  k_hat_adverse: number;
  k_std_err_adverse: number;
  sigma_fair: number | null;
  sigma_adverse: number | null;
  q1: number;
  conditionals: Record<string, ConditionalDto>;
  adverse_conditionals: Record<string, ConditionalDto>;
  sampling_policy_notes: string;
}

export interface ContextStats {
  rounds: number;
  alice_true: number;
  bet_rate: number | null;
  bets_decided: number;
  win_rate: number | null;
}

export interface HistoryEntry {
  record: CanonicalRecord;
  commitment_hash: string;
  salt: string;
  payoff_delta: number;
}

export interface ReportResponse extends SessionView {
  report: LgReportDto | null;
  per_context: Record<string, ContextStats>;
  history: HistoryEntry[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
