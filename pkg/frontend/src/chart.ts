/**
 * Posterior density panel rendered as an SVG string: a filled density curve
 * with vertical markers at the recommended dose (alpha-quantile) and the
 * posterior median (interim MTD estimate).  Pure string output so the panel
 * can be snapshot-tested without a DOM.
 */

import { DensityTrace } from "./api.js";

export interface ChartMarkers {
  alphaQuantile: number;
  median: number;
  alpha: number;
}

const WIDTH = 560;
const HEIGHT = 260;
const MARGIN = { top: 16, right: 16, bottom: 36, left: 48 };

function fmt(x: number): string {
  return Number(x.toFixed(3)).toString();
}

export function renderPosteriorSvg(
  trace: DensityTrace,
  markers: ChartMarkers,
): string {
  if (trace.dose.length < 2 || trace.dose.length !== trace.density.length) {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}"` +
      ` class="posterior-chart posterior-chart--empty">` +
      `<text x="${WIDTH / 2}" y="${HEIGHT / 2}" text-anchor="middle"` +
      ` class="placeholder">posterior density unavailable</text></svg>`
    );
  }
  const x0 = trace.dose[0];
  const x1 = trace.dose[trace.dose.length - 1];
  const yMax = Math.max(...trace.density, 1e-12);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * plotW;
  const sy = (y: number) => MARGIN.top + (1 - y / yMax) * plotH;

  const line = trace.dose
    .map((d, i) => `${i === 0 ? "M" : "L"}${fmt(sx(d))},${fmt(sy(trace.density[i]))}`)
    .join(" ");
  const area =
    `M${fmt(sx(x0))},${fmt(sy(0))} ` +
    trace.dose
      .map((d, i) => `L${fmt(sx(d))},${fmt(sy(trace.density[i]))}`)
      .join(" ") +
    ` L${fmt(sx(x1))},${fmt(sy(0))} Z`;

  const marker = (x: number, cls: string, label: string) =>
    `<line x1="${fmt(sx(x))}" y1="${MARGIN.top}" x2="${fmt(sx(x))}"` +
    ` y2="${MARGIN.top + plotH}" class="${cls}"/>` +
    `<text x="${fmt(sx(x))}" y="${MARGIN.top - 4}" text-anchor="middle"` +
    ` class="${cls}-label">${label}</text>`;

  const axisTicks = [0, 0.25, 0.5, 0.75, 1]
    .filter((t) => t >= x0 - 1e-9 && t <= x1 + 1e-9)
    .map(
      (t) =>
        `<line x1="${fmt(sx(t))}" y1="${MARGIN.top + plotH}" x2="${fmt(sx(t))}"` +
        ` y2="${MARGIN.top + plotH + 5}" class="tick"/>` +
        `<text x="${fmt(sx(t))}" y="${MARGIN.top + plotH + 18}"` +
        ` text-anchor="middle" class="tick-label">${t}</text>`,
    )
    .join("");

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}"` +
    ` class="posterior-chart">` +
    `<path d="${area}" class="density-area"/>` +
    `<path d="${line}" class="density-line" fill="none"/>` +
    marker(markers.alphaQuantile, "marker-dose", `dose (α=${fmt(markers.alpha)})`) +
    marker(markers.median, "marker-median", "median") +
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}"` +
    ` x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" class="axis"/>` +
    axisTicks +
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 4}" text-anchor="middle"` +
    ` class="axis-label">standardized dose</text>` +
    `</svg>`
  );
}
