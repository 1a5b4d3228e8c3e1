/** The four figure kinds rendered from flowchain CSV artifacts. */

import { filterSection, numericColumns, parseCsv, stringColumn, Table } from "./csv.js";
import {
  axes,
  document,
  el,
  Element,
  legend,
  linearScale,
  logScale,
  plotArea,
  polylinePath,
} from "./svg.js";

export const RETURN_LIMIT = 1 - Math.exp(-(Math.PI * Math.PI) / 6);

const GFN_COLOR = "#1f77b4";
const MH_COLOR = "#ff7f0e";
const TARGET_COLOR = "#2ca02c";

export type FigureKind = "tv_curve" | "autocorr" | "pterm_overlay" | "counterexample";

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let p = Math.ceil(Math.log10(lo)); p <= Math.floor(Math.log10(hi)); p++) {
    ticks.push(10 ** p);
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

function linearTicks(lo: number, hi: number, count = 5): number[] {
  const step = (hi - lo) / count;
  return Array.from({ length: count + 1 }, (_, i) => lo + i * step);
}

/** Total-variation-to-target curves for both samplers, sample count on a log axis. */
export function tvCurveFigure(compare: Table): string {
  const tv = filterSection(compare, "tv");
  const [x, gfn, mh] = numericColumns(tv, ["x", "gfn", "mh"]);
  const { xRange, yRange } = plotArea();
  const xs = logScale([Math.min(...x), Math.max(...x)], xRange);
  const top = Math.max(...gfn, ...mh) * 1.1;
  const ys = linearScale([0, top], yRange);
  const elements: Element[] = [
    ...axes(xs, ys, "samples", "TV distance to target", logTicks(xs.domain[0], xs.domain[1]), linearTicks(0, top)),
    el("path", { d: polylinePath(x, gfn, xs, ys), fill: "none", stroke: GFN_COLOR, "stroke-width": 2 }),
    el("path", { d: polylinePath(x, mh, xs, ys), fill: "none", stroke: MH_COLOR, "stroke-width": 2 }),
    ...legend([
      { label: "terminating samples", color: GFN_COLOR },
      { label: "metropolis-hastings", color: MH_COLOR },
    ]),
  ];
  return document("empirical TV to target vs sample count", elements);
}

/** Side-by-side autocorrelation bars per lag for both samplers. */
export function autocorrFigure(compare: Table): string {
  const rows = filterSection(compare, "autocorr");
  const [lag, gfn, mh] = numericColumns(rows, ["x", "gfn", "mh"]);
  const { xRange, yRange } = plotArea();
  const xs = linearScale([0, Math.max(...lag) + 1], xRange);
  const lo = Math.min(0, ...gfn, ...mh);
  const hi = Math.max(1, ...mh, ...gfn);
  const ys = linearScale([lo, hi], yRange);
  const barWidth = (xs(1) - xs(0)) * 0.35;
  const elements: Element[] = [
    ...axes(xs, ys, "lag", "autocorrelation", lag.filter((v) => v % 5 === 0 || v === 1), linearTicks(lo, hi)),
    el("line", { x1: xRange[0], y1: ys(0), x2: xRange[1], y2: ys(0), stroke: "#999", "stroke-width": 1 }),
  ];
  lag.forEach((value, i) => {
    for (const [series, color, offset] of [
      [gfn, GFN_COLOR, -barWidth] as const,
      [mh, MH_COLOR, 0] as const,
    ]) {
      const height = Math.abs(ys(series[i]) - ys(0));
      const y = Math.min(ys(series[i]), ys(0));
      elements.push(
        el("rect", { x: xs(value) + offset, y, width: barWidth, height: Math.max(height, 0.5), fill: color })
      );
    }
  });
  elements.push(
    ...legend([
      { label: "terminating samples", color: GFN_COLOR },
      { label: "metropolis-hastings", color: MH_COLOR },
    ])
  );
  return document("lag autocorrelation of the mode statistic", elements);
}

/** Terminating-state frequencies overlaid on the normalized reward. */
export function ptermOverlayFigure(pterm: Table, rewardByState: Record<string, number>): string {
  const states = stringColumn(pterm, "state");
  const [probs] = numericColumns(pterm, ["prob"]);
  const total = Object.values(rewardByState).reduce((acc, value) => acc + value, 0);
  if (!(total > 0)) {
    throw new Error("reward section is empty or non-positive");
  }
  const target = states.map((name) => (rewardByState[name] ?? 0) / total);
  const { xRange, yRange } = plotArea();
  const xs = linearScale([0, states.length], xRange);
  const hi = Math.max(...probs, ...target) * 1.15;
  const ys = linearScale([0, hi], yRange);
  const slot = xs(1) - xs(0);
  const elements: Element[] = [
    ...axes(xs, ys, "terminating state", "probability", [], linearTicks(0, hi)),
  ];
  states.forEach((name, i) => {
    elements.push(
      el("rect", {
        x: xs(i) + slot * 0.15, y: ys(probs[i]), width: slot * 0.3,
        height: ys(0) - ys(probs[i]), fill: GFN_COLOR,
      }),
      el("rect", {
        x: xs(i) + slot * 0.5, y: ys(target[i]), width: slot * 0.3,
        height: ys(0) - ys(target[i]), fill: TARGET_COLOR,
      }),
      el("text", {
        x: xs(i) + slot * 0.5, y: ys(0) + 16, "text-anchor": "middle",
        "font-size": 11, "font-family": "monospace",
      }, name)
    );
  });
  elements.push(
    ...legend([
      { label: "estimated", color: GFN_COLOR },
      { label: "reward / Z", color: TARGET_COLOR },
    ])
  );
  return document("terminating distribution vs normalized reward", elements);
}

/** Counter-example convergence with the 1 - exp(-pi^2/6) asymptote. */
export function counterexampleFigure(ce: Table): string {
  const [n, analytic, simulated] = numericColumns(ce, ["n", "analytic_cumulative", "simulated_fraction"]);
  const { xRange, yRange } = plotArea();
  const xs = logScale([1, Math.max(...n)], xRange);
  const ys = linearScale([0.5, 1.0], yRange);
  const elements: Element[] = [
    ...axes(xs, ys, "steps n", "P(return within n)", logTicks(1, Math.max(...n)), linearTicks(0.5, 1.0)),
    el("path", { d: polylinePath(n, analytic, xs, ys), fill: "none", stroke: TARGET_COLOR, "stroke-width": 2 }),
    el("path", { d: polylinePath(n, simulated, xs, ys), fill: "none", stroke: GFN_COLOR, "stroke-width": 1.5, "stroke-dasharray": "1 2" }),
    el("line", {
      x1: xRange[0], y1: ys(RETURN_LIMIT), x2: xRange[1], y2: ys(RETURN_LIMIT),
      stroke: "#d62728", "stroke-width": 1.5, "stroke-dasharray": "6 4", id: "asymptote",
    }),
    el("text", {
      x: xRange[0] + 8, y: ys(RETURN_LIMIT) - 6, "font-size": 11, "font-family": "monospace", fill: "#d62728",
    }, `limit 1-exp(-pi^2/6) = ${RETURN_LIMIT.toFixed(5)}`),
    ...legend([
      { label: "analytic cumulative", color: TARGET_COLOR },
      { label: "simulated fraction", color: GFN_COLOR },
    ]),
  ];
  return document("return probability never reaches 1", elements);
}

export interface RenderSpec {
  kind: FigureKind;
  csvText: string;
  configText?: string;
}

/** Render one figure kind to SVG text; throws on schema mismatch. */
export function render(spec: RenderSpec): string {
  const table = parseCsv(spec.csvText);
  switch (spec.kind) {
    case "tv_curve":
      return tvCurveFigure(table);
    case "autocorr":
      return autocorrFigure(table);
    case "pterm_overlay": {
      if (!spec.configText) {
        throw new Error("pterm_overlay needs --config for the reward section");
      }
      const config = JSON.parse(spec.configText) as { reward?: Record<string, number> };
      if (!config.reward) {
        throw new Error("config has no reward section");
      }
      return ptermOverlayFigure(table, config.reward);
    }
    case "counterexample":
      return counterexampleFigure(table);
    default:
      throw new Error(`unknown figure kind ${spec.kind as string}`);
  }
}
