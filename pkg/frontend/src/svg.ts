/**
 * Minimal SVG assembly: element builder, linear scales and axis rendering.
 * No DOM, no canvas; output is a plain SVG string.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 36, right: 24, bottom: 44, left: 56 };

export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

function escapeText(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function el(
  tag: string,
  attrs: Record<string, string | number>,
  children: string[] | string = [],
): string {
  const attrText = Object.entries(attrs)
    .map(([key, value]) => `${key}="${value}"`)
    .join(" ");
  const body = Array.isArray(children) ? children.join("") : children;
  if (body === "") {
    return `<${tag} ${attrText}/>`;
  }
  return `<${tag} ${attrText}>${body}</${tag}>`;
}

export function text(
  content: string,
  x: number,
  y: number,
  attrs: Record<string, string | number> = {},
): string {
  return el(
    "text",
    { x: round(x), y: round(y), "font-family": "sans-serif", "font-size": 11, ...attrs },
    escapeText(content),
  );
}

export function round(value: number): number {
  return Math.round(value * 100) / 100;
}

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  ticks(count?: number): number[];
}

/** Linear scale; a degenerate domain is padded so rendering stays finite. */
export function linearScale(domain: [number, number], range: [number, number]): Scale {
  let [d0, d1] = domain;
  if (!Number.isFinite(d0) || !Number.isFinite(d1)) {
    d0 = 0;
    d1 = 1;
  }
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const [r0, r1] = range;
  const scale = ((value: number) => r0 + ((value - d0) / (d1 - d0)) * (r1 - r0)) as Scale;
  scale.domain = [d0, d1];
  scale.range = [r0, r1];
  scale.ticks = (count = 6) => {
    const step = niceStep((d1 - d0) / count);
    const start = Math.ceil(d0 / step) * step;
    const ticks: number[] = [];
    for (let v = start; v <= d1 + 1e-9; v += step) {
      ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
    }
    return ticks;
  };
  return scale;
}

function niceStep(raw: number): number {
  const power = Math.pow(10, Math.floor(Math.log10(Math.abs(raw) || 1)));
  const base = raw / power;
  const factor = base >= 5 ? 10 : base >= 2 ? 5 : base >= 1 ? 2 : 1;
  return factor * power;
}

export function formatTick(value: number): string {
  if (value === 0) return "0";
  if (Math.abs(value) >= 10000 || Math.abs(value) < 0.01) {
    return value.toExponential(1);
  }
  return String(Math.round(value * 1000) / 1000);
}

export interface Frame {
  width: number;
  height: number;
  margin: Margin;
  x: Scale;
  y: Scale;
}

export function makeFrame(
  xDomain: [number, number],
  yDomain: [number, number],
  width = 640,
  height = 420,
  margin = DEFAULT_MARGIN,
): Frame {
  return {
    width,
    height,
    margin,
    x: linearScale(xDomain, [margin.left, width - margin.right]),
    y: linearScale(yDomain, [height - margin.bottom, margin.top]),
  };
}

export function axes(frame: Frame, xLabel: string, yLabel: string): string[] {
  const { x, y, width, height, margin } = frame;
  const parts: string[] = [];
  const bottom = height - margin.bottom;
  parts.push(el("line", {
    x1: margin.left, y1: bottom, x2: width - margin.right, y2: bottom,
    stroke: "#333",
  }));
  parts.push(el("line", {
    x1: margin.left, y1: margin.top, x2: margin.left, y2: bottom,
    stroke: "#333",
  }));
  for (const tick of x.ticks()) {
    const px = x(tick);
    parts.push(el("line", { x1: round(px), y1: bottom, x2: round(px), y2: bottom + 4, stroke: "#333" }));
    parts.push(text(formatTick(tick), px, bottom + 16, { "text-anchor": "middle" }));
  }
  for (const tick of y.ticks()) {
    const py = y(tick);
    parts.push(el("line", { x1: margin.left - 4, y1: round(py), x2: margin.left, y2: round(py), stroke: "#333" }));
    parts.push(text(formatTick(tick), margin.left - 7, py + 3, { "text-anchor": "end" }));
  }
  parts.push(text(xLabel, (margin.left + width - margin.right) / 2, height - 8, {
    "text-anchor": "middle", "font-size": 12,
  }));
  parts.push(text(yLabel, 14, (margin.top + bottom) / 2, {
    "text-anchor": "middle", "font-size": 12,
    transform: `rotate(-90 14 ${round((margin.top + bottom) / 2)})`,
  }));
  return parts;
}

export function document(width: number, height: number, parts: string[], title: string): string {
  const header =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">`;
  const background = el("rect", { x: 0, y: 0, width, height, fill: "white" });
  const caption = text(title, width / 2, 20, {
    "text-anchor": "middle", "font-size": 14, "font-weight": "bold",
  });
  return `${header}${background}${caption}${parts.join("")}</svg>\n`;
}

/** Placeholder figure for artifacts with no data points. */
export function emptyFigure(title: string, note: string, width = 640, height = 420): string {
  const frame = makeFrame([0, 1], [0, 1], width, height);
  const parts = axes(frame, "", "");
  parts.push(text(note, width / 2, height / 2, {
    "text-anchor": "middle", "font-size": 13, fill: "#888",
  }));
  return document(width, height, parts, title);
}
