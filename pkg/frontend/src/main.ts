/**
 * Single-page client: a human plays Bob round by round against the
 * simulated Alice. All game results come from the server; this file only
 * renders responses, keeps the scoreboard, and independently verifies the
 * commitment hash of every revealed round.
 */
import { ApiError, createSession, fetchReport, reveal, submitContext } from "./api.js";
import { kChartSvg } from "./chart.js";
import { verifyCommitment } from "./commitment.js";
import {
  applyCreated,
  applyReport,
  applyReveal,
  applySubmit,
  initialState,
  scoreboard,
  type UiSessionState,
} from "./state.js";
import type { ContextChoice, JsonObject } from "./config.js";
import { buildSessionConfig, readSetupForm } from "./config.js";

const SERVER_BASE = "";

let state: UiSessionState = initialState();
let busy = false;
let statusMessage = "create a session to start playing";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(value: number | null | undefined, digits = 3): string {
  if (value === null || value === undefined || Number.isNaN(value)) return "–";
  return value.toFixed(digits);
}

function pct(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return (100 * value).toFixed(1) + "%";
}

function render(): void {
  const inSession = state.sessionId !== null;
  const canChoose = inSession && state.phase === "AwaitingContext" && !busy;
  const canReveal = inSession && state.phase === "AwaitingReveal" && !busy;

  el("status").textContent = statusMessage;
  el("phase").textContent = inSession
    ? `${state.phase} — round ${state.roundId}/${state.roundsTotal} (${state.engine})`
    : "no session";

  for (const ctx of ["M1", "M2", "none"] as const) {
    (el(`btn-${ctx}`) as HTMLButtonElement).disabled = !canChoose;
  }
  (el("btn-reveal") as HTMLButtonElement).disabled = !canReveal;

  const pending = state.pending;
  const outcome = el("outcome-card");
  if (pending) {
    const secret =
      pending.bobOutcome === null
        ? "you did not measure this round"
        : `your secret outcome: box ${pending.context} is ${pending.bobOutcome.toUpperCase()}`;
    outcome.innerHTML =
      `<p class="secret">${secret}</p>` +
      `<p class="hash">Alice committed: <code>${pending.commitmentHash.slice(0, 16)}…</code></p>`;
  } else {
    outcome.innerHTML = "<p>choose a box (or pass on measuring) to play a round</p>";
  }

  const last = state.history[state.history.length - 1];
  const settle = el("settle-card");
  if (last?.revealed) {
    const r = last.revealed;
    const betLine = r.aliceBets
      ? r.aliceWins === null
        ? "Alice bet, but you had not measured — no settlement"
        : r.aliceWins
          ? "Alice bet and WON"
          : "Alice bet and LOST"
      : "Alice passed";
    const check = r.verified ? "✓ commitment verified" : "✗ COMMITMENT MISMATCH";
    settle.innerHTML =
      `<p>round ${last.roundId}: Alice's box-3 check ${r.aliceM3 ? "fired" : "stayed quiet"}; ${betLine}</p>` +
      `<p>payoff to Alice: ${fmt(r.payoffDelta, 2)} — ledger ${fmt(state.ledger, 2)}</p>` +
      `<p class="${r.verified ? "ok" : "bad"}">${check}</p>`;
  } else {
    settle.innerHTML = "<p>nothing settled yet</p>";
  }

  const score = scoreboard(state);
  el("stat-ledger").textContent = `${fmt(score.ledger, 2)} (Bob: ${fmt(-score.ledger, 2)})`;
  el("stat-betrate").textContent = pct(score.betRate);
  el("stat-winrate").textContent = pct(score.winRate);
  el("stat-verified").textContent = score.allCommitmentsVerified ? "all ✓" : "MISMATCH";
  const m1 = state.perContext?.["M1"];
  const m2 = state.perContext?.["M2"];
  el("stat-win-m1").textContent = pct(m1?.win_rate ?? null);
  el("stat-win-m2").textContent = pct(m2?.win_rate ?? null);

  const report = state.report;
  el("stat-k").textContent = report
    ? `${fmt(report.k_hat)} ± ${fmt(2 * report.k_std_err)} (2σ)`
    : "needs bets in both contexts";
  el("stat-sigma").textContent = report
    ? `fair ${fmt(report.sigma_fair, 1)}σ / adverse ${fmt(report.sigma_adverse, 1)}σ`
    : "–";
  el("chart").innerHTML = kChartSvg(state.kTrace);

  const rows = state.history
    .slice(-12)
    .reverse()
    .map((round) => {
      const r = round.revealed;
      return (
        `<tr><td>${round.roundId}</td><td>${round.context}</td>` +
        `<td>${round.bobOutcome ?? "—"}</td>` +
        `<td>${r ? (r.aliceBets ? (r.aliceWins === null ? "bet (void)" : r.aliceWins ? "win" : "loss") : "pass") : ""}</td>` +
        `<td>${r ? fmt(r.payoffDelta, 2) : ""}</td>` +
        `<td>${r ? (r.verified ? "✓" : "✗") : ""}</td></tr>`
      );
    })
    .join("");
  el("history-body").innerHTML = rows;
}

async function guarded(label: string, action: () => Promise<void>): Promise<void> {
  if (busy) return;
  busy = true;
  render();
  try {
    await action();
    statusMessage = label;
  } catch (err) {
    statusMessage =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  } finally {
    busy = false;
    render();
  }
}

async function newSession(): Promise<void> {
  await guarded("session created — you are Bob", async () => {
    const setup = readSetupForm(el<HTMLFormElement>("setup-form"));
    const config: JsonObject = buildSessionConfig(setup);
    const view = await createSession(SERVER_BASE, config);
    state = applyCreated(view);
  });
}

async function chooseContext(context: ContextChoice): Promise<void> {
  if (!state.sessionId) return;
  const sid = state.sessionId;
  await guarded("Alice has committed her turn — reveal when ready", async () => {
    const response = await submitContext(SERVER_BASE, sid, context);
    state = applySubmit(state, response);
  });
}

async function revealRound(): Promise<void> {
  if (!state.sessionId) return;
  const sid = state.sessionId;
  await guarded("settled", async () => {
    const response = await reveal(SERVER_BASE, sid);
    const verified = await verifyCommitment(
      response.record as unknown as Parameters<typeof verifyCommitment>[0],
      response.salt,
      response.commitment_hash
    );
    state = applyReveal(state, response, verified);
    const report = await fetchReport(SERVER_BASE, sid);
    state = applyReport(state, report);
  });
}

export function wireUp(): void {
  el("btn-new").addEventListener("click", () => void newSession());
  el("btn-M1").addEventListener("click", () => void chooseContext("M1"));
  el("btn-M2").addEventListener("click", () => void chooseContext("M2"));
  el("btn-none").addEventListener("click", () => void chooseContext("none"));
  el("btn-reveal").addEventListener("click", () => void revealRound());
  render();
}

if (typeof document !== "undefined" && document.getElementById("btn-new")) {
  wireUp();
}
