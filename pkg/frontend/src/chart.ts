/**
 * Minimal SVG chart for the live K estimate: the server-computed values
 * with a 2-sigma band, drawn against the macrorealist floor at -1 and the
 * quantum floor at -13/9.
 */
import type { KPoint } from "./state.js";

export const MR_BOUND = -1;
export const QM_BOUND = -13 / 9;

export interface ChartLayout {
  width: number;
  height: number;
  padding: number;
}

const DEFAULT_LAYOUT: ChartLayout = { width: 560, height: 240, padding: 36 };

function yRange(points: KPoint[]): [number, number] {
  let lo = QM_BOUND - 0.15;
  let hi = 0.1;
  for (const p of points) {
    lo = Math.min(lo, p.kHat - 2 * p.kStdErr - 0.05);
    hi = Math.max(hi, p.kHat + 2 * p.kStdErr + 0.05);
  }
  return [lo, hi];
}

export function kChartSvg(
  points: KPoint[],
  layout: ChartLayout = DEFAULT_LAYOUT
): string {
  const { width, height, padding } = layout;
  const [yLo, yHi] = yRange(points);
  const xMax = Math.max(points.length ? points[points.length - 1]!.roundsPlayed : 1, 1);
  const x = (rounds: number) =>
    padding + ((width - 2 * padding) * rounds) / xMax;
  const y = (k: number) =>
    height - padding - ((height - 2 * padding) * (k - yLo)) / (yHi - yLo);

  const refLine = (value: number, cls: string, label: string) =>
    `<line class="${cls}" x1="${padding}" y1="${y(value).toFixed(1)}" ` +
    `x2="${width - padding}" y2="${y(value).toFixed(1)}"/>` +
    `<text class="${cls}-label" x="${width - padding + 4}" ` +
    `y="${(y(value) + 4).toFixed(1)}">${label}</text>`;

  let band = "";
  let line = "";
  let marks = "";
  if (points.length > 0) {
    const upper = points.map(
      (p) => `${x(p.roundsPlayed).toFixed(1)},${y(p.kHat + 2 * p.kStdErr).toFixed(1)}`
    );
    const lower = points
      .slice()
      .reverse()
      .map(
        (p) => `${x(p.roundsPlayed).toFixed(1)},${y(p.kHat - 2 * p.kStdErr).toFixed(1)}`
      );
    band = `<polygon class="k-band" points="${upper.concat(lower).join(" ")}"/>`;
    const path = points.map(
      (p) => `${x(p.roundsPlayed).toFixed(1)},${y(p.kHat).toFixed(1)}`
    );
    line = `<polyline class="k-line" points="${path.join(" ")}"/>`;
    const last = points[points.length - 1]!;
    marks =
      `<circle class="k-dot" cx="${x(last.roundsPlayed).toFixed(1)}" ` +
      `cy="${y(last.kHat).toFixed(1)}" r="3"/>`;
  }

  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="running K estimate">` +
    `<rect class="chart-bg" x="0" y="0" width="${width}" height="${height}"/>` +
    refLine(MR_BOUND, "mr-line", "MR -1") +
    refLine(QM_BOUND, "qm-line", "QM -13/9") +
    band +
    line +
    marks +
    `<text class="axis-label" x="${padding}" y="${height - 8}">rounds -></text>` +
    `</svg>`
  );
}
