/** Minimal deterministic SVG assembly: fixed canvas, fixed fonts, no runtime layout. */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 36, right: 24, bottom: 48, left: 64 };

export interface Scale {
  (value: number): number;
  domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  return scale;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  const scale = ((value: number) => inner(Math.log10(value))) as Scale;
  scale.domain = domain;
  return scale;
}

const fmt = (value: number) => (Math.abs(value) >= 1e4 || (value !== 0 && Math.abs(value) < 1e-3)
  ? value.toExponential(1)
  : String(Math.round(value * 1e6) / 1e6));

export function polylinePath(xs: number[], ys: number[], x: Scale, y: Scale): string {
  return xs.map((v, i) => `${i === 0 ? "M" : "L"}${x(v).toFixed(2)},${y(ys[i]).toFixed(2)}`).join("");
}

export interface Element {
  tag: string;
  attrs: Record<string, string | number>;
  text?: string;
}

export function el(tag: string, attrs: Record<string, string | number>, text?: string): Element {
  return { tag, attrs, text };
}

function render(element: Element): string {
  const attrs = Object.entries(element.attrs)
    .map(([key, value]) => `${key}="${value}"`)
    .join(" ");
  if (element.text !== undefined) {
    return `<${element.tag} ${attrs}>${element.text}</${element.tag}>`;
  }
  return `<${element.tag} ${attrs}/>`;
}

export function axes(x: Scale, y: Scale, xLabel: string, yLabel: string, xTicks: number[], yTicks: number[]): Element[] {
  const out: Element[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  out.push(el("line", { x1: x0, y1: y0, x2: x1, y2: y0, stroke: "#333", "stroke-width": 1 }));
  out.push(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, stroke: "#333", "stroke-width": 1 }));
  for (const tick of xTicks) {
    const px = x(tick);
    out.push(el("line", { x1: px, y1: y0, x2: px, y2: y0 + 5, stroke: "#333", "stroke-width": 1 }));
    out.push(el("text", { x: px, y: y0 + 18, "text-anchor": "middle", "font-size": 11, "font-family": "monospace" }, fmt(tick)));
  }
  for (const tick of yTicks) {
    const py = y(tick);
    out.push(el("line", { x1: x0 - 5, y1: py, x2: x0, y2: py, stroke: "#333", "stroke-width": 1 }));
    out.push(el("text", { x: x0 - 8, y: py + 4, "text-anchor": "end", "font-size": 11, "font-family": "monospace" }, fmt(tick)));
  }
  out.push(el("text", { x: (x0 + x1) / 2, y: HEIGHT - 10, "text-anchor": "middle", "font-size": 12, "font-family": "monospace" }, xLabel));
  out.push(el("text", {
    x: 16, y: (y0 + y1) / 2, "text-anchor": "middle", "font-size": 12, "font-family": "monospace",
    transform: `rotate(-90 16 ${(y0 + y1) / 2})`,
  }, yLabel));
  return out;
}

export function legend(entries: Array<{ label: string; color: string }>): Element[] {
  return entries.flatMap((entry, i) => [
    el("rect", { x: WIDTH - MARGIN.right - 150, y: MARGIN.top + 18 * i, width: 12, height: 12, fill: entry.color }),
    el("text", {
      x: WIDTH - MARGIN.right - 132, y: MARGIN.top + 18 * i + 10,
      "font-size": 11, "font-family": "monospace",
    }, entry.label),
  ]);
}

export function document(title: string, elements: Element[]): string {
  const body = elements.map(render).join("\n  ");
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    `  <rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `  <text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="14" font-family="monospace">${title}</text>`,
    `  ${body}`,
    `</svg>`,
    ``,
  ].join("\n");
}

export function plotArea(): { xRange: [number, number]; yRange: [number, number] } {
  return {
    xRange: [MARGIN.left, WIDTH - MARGIN.right],
    yRange: [HEIGHT - MARGIN.bottom, MARGIN.top],
  };
}
