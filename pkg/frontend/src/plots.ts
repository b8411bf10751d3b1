/**
 * Figure renderers for the six job kinds. Every renderer consumes artifact
 * numbers verbatim and echoes them back in `plotted`, so tests can assert
 * nothing was recomputed on the way to the figure.
 */

import type { Bundle } from "./bundle.js";
import type {
  ContextBinsData,
  FitData,
  FundamentalPoint,
  Histogram2dData,
  HistogramData,
  LaneLoadData,
  SliceRow,
} from "./schema.js";
import {
  PALETTE,
  axes,
  document,
  el,
  emptyFigure,
  formatTick,
  makeFrame,
  round,
  text,
} from "./svg.js";

export type PlotKind =
  | "line"
  | "stacked"
  | "hist_pdf"
  | "heatmap"
  | "bars3d"
  | "scatter3d";

export interface PlotJob {
  artifact: string;
  kind: PlotKind;
  title?: string;
  out: string;
}

export interface RenderResult {
  svg: string;
  plotted: unknown;
}

const KIND_COMPAT: Record<PlotKind, string[]> = {
  line: ["slices"],
  stacked: ["lane_load"],
  hist_pdf: ["histogram"],
  heatmap: ["histogram2d"],
  bars3d: ["context_bins"],
  scatter3d: ["fundamental"],
};

export function renderJob(bundle: Bundle, job: PlotJob): RenderResult {
  const artifactKind = bundle.kindOf(job.artifact);
  if (artifactKind === undefined) {
    throw new Error(`artifact ${job.artifact} not present in the bundle`);
  }
  if (!KIND_COMPAT[job.kind].includes(artifactKind)) {
    throw new Error(
      `plot kind ${job.kind} is incompatible with artifact kind ${artifactKind}`,
    );
  }
  const title = job.title ?? job.artifact;
  switch (job.kind) {
    case "line":
      return renderLine(bundle.load<SliceRow[]>(job.artifact).data, title);
    case "stacked":
      return renderStacked(bundle.load<LaneLoadData>(job.artifact).data, title);
    case "hist_pdf":
      return renderHistPdf(bundle, job.artifact, title);
    case "heatmap":
      return renderHeatmap(bundle.load<Histogram2dData>(job.artifact).data, title);
    case "bars3d":
      return renderBars3d(bundle.load<ContextBinsData>(job.artifact).data, title);
    case "scatter3d":
      return renderScatter3d(bundle.load<FundamentalPoint[]>(job.artifact).data, title);
  }
}

function renderLine(rows: SliceRow[], title: string): RenderResult {
  const directions = [...new Set(rows.map((r) => r.direction))].sort();
  const plotted = directions.map((direction) => {
    const mine = rows.filter((r) => r.direction === direction);
    return {
      direction,
      index: mine.map((r) => r.index),
      q_veh_h: mine.map((r) => r.q_veh_h),
      v_kmh: mine.map((r) => r.v_mean_space_kmh),
    };
  });
  if (rows.length === 0) {
    return { svg: emptyFigure(title, "no slices"), plotted };
  }
  const maxQ = Math.max(...rows.map((r) => r.q_veh_h), 1);
  const maxIdx = Math.max(...rows.map((r) => r.index));
  const frame = makeFrame([0, Math.max(maxIdx, 1)], [0, maxQ * 1.05]);
  const parts = axes(frame, "minute slice", "q [veh/h/lane]");
  plotted.forEach((series, i) => {
    if (series.index.length === 0) return;
    const path = series.index
      .map((idx, k) => `${k === 0 ? "M" : "L"}${round(frame.x(idx))},${round(frame.y(series.q_veh_h[k]))}`)
      .join("");
    parts.push(el("path", { d: path, fill: "none", stroke: PALETTE[i % PALETTE.length], "stroke-width": 1.5 }));
    parts.push(text(series.direction, frame.width - frame.margin.right - 4,
      frame.margin.top + 14 * (i + 1),
      { "text-anchor": "end", fill: PALETTE[i % PALETTE.length] }));
  });
  return { svg: document(frame.width, frame.height, parts, title), plotted };
}

function renderStacked(data: LaneLoadData, title: string): RenderResult {
  const directions = Object.keys(data).sort();
  const plotted = directions.map((direction) => ({
    direction,
    lane_ids: data[direction].map((r) => r.lane_id),
    shares: data[direction].map((r) => r.share),
  }));
  if (directions.length === 0) {
    return { svg: emptyFigure(title, "no lanes"), plotted };
  }
  const frame = makeFrame([0, 1], [0, directions.length]);
  const parts = axes(frame, "share of vehicle-frames", "");
  const barHeight = (frame.y(0) - frame.y(1)) * 0.6;
  plotted.forEach((row, i) => {
    let cursor = 0;
    const yTop = frame.y(i + 1) + barHeight * 0.33;
    row.shares.forEach((share, k) => {
      const x0 = frame.x(cursor);
      const x1 = frame.x(cursor + share);
      parts.push(el("rect", {
        x: round(x0), y: round(yTop),
        width: round(Math.max(x1 - x0, 0)), height: round(barHeight),
        fill: PALETTE[k % PALETTE.length], stroke: "white",
      }));
      if (share > 0.04) {
        parts.push(text(`lane ${row.lane_ids[k]}`, (x0 + x1) / 2, yTop + barHeight / 2 + 3,
          { "text-anchor": "middle", fill: "white", "font-size": 10 }));
      }
      cursor += share;
    });
    parts.push(text(row.direction, frame.margin.left - 7, yTop + barHeight / 2 + 3,
      { "text-anchor": "end" }));
  });
  return { svg: document(frame.width, frame.height, parts, title), plotted };
}

export function logisticPdf(x: number, location: number, scale: number): number {
  const z = (x - location) / scale;
  const sech = 1 / Math.cosh(z / 2);
  return (sech * sech) / (4 * scale);
}

export function gevPdf(x: number, location: number, scale: number, shape: number): number {
  const z = (x - location) / scale;
  if (Math.abs(shape) < 1e-8) {
    return Math.exp(-z - Math.exp(-z)) / scale;
  }
  const t = 1 + shape * z;
  if (t <= 0) return 0;
  return Math.pow(t, -1 - 1 / shape) * Math.exp(-Math.pow(t, -1 / shape)) / scale;
}

export function pdfCurve(
  fit: FitData,
  lo: number,
  hi: number,
  samples = 257,
): { xs: number[]; ys: number[] } {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let i = 0; i < samples; i++) {
    const x = lo + ((hi - lo) * i) / (samples - 1);
    xs.push(x);
    ys.push(
      fit.family === "logistic"
        ? logisticPdf(x, fit.params[0], fit.params[1])
        : gevPdf(x, fit.params[0], fit.params[1], fit.params[2]),
    );
  }
  return { xs, ys };
}

function renderHistPdf(bundle: Bundle, name: string, title: string): RenderResult {
  const hist = bundle.load<HistogramData>(name).data;
  const fit = hist.fit ? bundle.load<FitData>(hist.fit).data : null;
  const plotted: Record<string, unknown> = {
    edges: hist.edges,
    counts: hist.counts,
    fit_params: fit ? fit.params : null,
  };
  const total = hist.counts.reduce((a, b) => a + b, 0);
  if (total === 0) {
    return { svg: emptyFigure(title, "empty histogram"), plotted };
  }
  // Bars are shown as densities so the fitted pdf shares the vertical scale.
  const densities = hist.counts.map(
    (count, i) => count / (hist.n * (hist.edges[i + 1] - hist.edges[i])),
  );
  const lo = hist.edges[0];
  const hi = hist.edges[hist.edges.length - 1];
  let yMax = Math.max(...densities);
  let curve: { xs: number[]; ys: number[] } | null = null;
  if (fit) {
    curve = pdfCurve(fit, lo, hi);
    yMax = Math.max(yMax, ...curve.ys);
  }
  const frame = makeFrame([lo, hi], [0, yMax * 1.05]);
  const parts = axes(frame, hist.unit ?? "", "density");
  densities.forEach((density, i) => {
    const x0 = frame.x(hist.edges[i]);
    const x1 = frame.x(hist.edges[i + 1]);
    parts.push(el("rect", {
      x: round(x0), y: round(frame.y(density)),
      width: round(Math.max(x1 - x0 - 0.5, 0.5)),
      height: round(frame.y(0) - frame.y(density)),
      fill: PALETTE[0], "fill-opacity": 0.7,
    }));
  });
  if (curve) {
    const path = curve.xs
      .map((x, i) => `${i === 0 ? "M" : "L"}${round(frame.x(x))},${round(frame.y(curve.ys[i]))}`)
      .join("");
    parts.push(el("path", { d: path, fill: "none", stroke: PALETTE[3], "stroke-width": 1.8 }));
  }
  return { svg: document(frame.width, frame.height, parts, title), plotted };
}

function renderHeatmap(data: Histogram2dData, title: string): RenderResult {
  const plotted = { x_edges: data.x_edges, y_edges: data.y_edges, counts: data.counts };
  const maxCount = Math.max(0, ...data.counts.map((row) => Math.max(...row)));
  if (maxCount === 0) {
    return { svg: emptyFigure(title, "no joint observations"), plotted };
  }
  const frame = makeFrame(
    [data.x_edges[0], data.x_edges[data.x_edges.length - 1]],
    [data.y_edges[0], data.y_edges[data.y_edges.length - 1]],
  );
  const parts = axes(frame, data.x_label ?? "x", data.y_label ?? "y");
  const logMax = Math.log1p(maxCount);
  data.counts.forEach((row, i) => {
    row.forEach((count, j) => {
      if (count === 0) return;
      const intensity = Math.log1p(count) / logMax;
      const shade = Math.round(245 - intensity * 200);
      parts.push(el("rect", {
        x: round(frame.x(data.x_edges[i])),
        y: round(frame.y(data.y_edges[j + 1])),
        width: round(frame.x(data.x_edges[i + 1]) - frame.x(data.x_edges[i])),
        height: round(frame.y(data.y_edges[j]) - frame.y(data.y_edges[j + 1])),
        fill: `rgb(${shade},${Math.round(shade * 0.6)},80)`,
      }));
    });
  });
  return { svg: document(frame.width, frame.height, parts, title), plotted };
}

function renderBars3d(data: ContextBinsData, title: string): RenderResult {
  const plotted = {
    row_edges: data.row_edges,
    col_edges: data.col_edges,
    percentages: data.percentages,
    row_n: data.row_n,
  };
  const rows = data.percentages.length;
  const cols = rows > 0 ? data.percentages[0].length : 0;
  if (rows === 0 || cols === 0) {
    return { svg: emptyFigure(title, "no context rows"), plotted };
  }
  const width = 720;
  const height = 460;
  const depthX = 14;
  const depthY = 9;
  const baseX = 70;
  const baseY = height - 70;
  const barWidth = (width - 2 * baseX - rows * depthX) / cols;
  const unit = (height - 150) / 100;
  const parts: string[] = [];
  // Back rows first so nearer bars overdraw them.
  for (let r = rows - 1; r >= 0; r--) {
    const offsetX = baseX + (rows - 1 - r) * depthX;
    const offsetY = baseY - (rows - 1 - r) * depthY;
    const color = PALETTE[r % PALETTE.length];
    for (let c = 0; c < cols; c++) {
      const pct = data.percentages[r][c];
      const h = pct * unit;
      const x = offsetX + c * barWidth;
      parts.push(el("rect", {
        x: round(x), y: round(offsetY - h),
        width: round(barWidth * 0.82), height: round(Math.max(h, 0)),
        fill: color, stroke: "#333", "stroke-width": 0.4,
        "fill-opacity": 0.9,
      }));
    }
    const label = `(${formatTick(data.row_edges[r])}, ${formatTick(data.row_edges[r + 1])}] n=${data.row_n[r]}`;
    parts.push(text(label, width - 8, offsetY - 2,
      { "text-anchor": "end", fill: color, "font-size": 10 }));
  }
  for (let c = 0; c < cols; c++) {
    const edge = data.col_edges[c];
    parts.push(text(formatTick(edge), baseX + c * barWidth + barWidth / 2, baseY + 16,
      { "text-anchor": "middle", "font-size": 10 }));
  }
  parts.push(text(`${data.dimension} bins`, width / 2, baseY + 34,
    { "text-anchor": "middle", "font-size": 12 }));
  parts.push(text(`${data.measure} rows, each summing to 100%`, width / 2, baseY + 50,
    { "text-anchor": "middle", "font-size": 11, fill: "#555" }));
  return { svg: document(width, height, parts, title), plotted };
}

function renderScatter3d(points: FundamentalPoint[], title: string): RenderResult {
  const plotted = points.map((p) => ({
    direction: p.direction,
    rho_veh_km: p.rho_veh_km,
    q_veh_h: p.q_veh_h,
    v_kmh: p.v_kmh,
  }));
  const usable = points.filter((p) => p.v_kmh !== null);
  if (usable.length === 0) {
    return { svg: emptyFigure(title, "no fundamental points"), plotted };
  }
  const width = 640;
  const height = 460;
  // Isometric projection of (rho, q, v) onto the page.
  const maxRho = Math.max(...usable.map((p) => p.rho_veh_km), 1e-9);
  const maxQ = Math.max(...usable.map((p) => p.q_veh_h), 1e-9);
  const maxV = Math.max(...usable.map((p) => p.v_kmh as number), 1e-9);
  const origin = { x: 140, y: height - 90 };
  const ex = { x: 1.0, y: -0.28 };
  const ey = { x: 0.42, y: -0.62 };
  const ez = { x: 0.0, y: -1.0 };
  const sx = 330 / maxRho;
  const sy = 260 / maxQ;
  const sz = 230 / maxV;

  const project = (rho: number, q: number, v: number) => ({
    x: origin.x + rho * sx * ex.x + q * sy * ey.x + v * sz * ez.x,
    y: origin.y + rho * sx * ex.y + q * sy * ey.y + v * sz * ez.y,
  });

  const parts: string[] = [];
  for (const [label, end] of [
    ["rho [veh/km]", project(maxRho, 0, 0)],
    ["q [veh/h]", project(0, maxQ, 0)],
    ["v [km/h]", project(0, 0, maxV)],
  ] as const) {
    parts.push(el("line", {
      x1: origin.x, y1: origin.y, x2: round(end.x), y2: round(end.y),
      stroke: "#777",
    }));
    parts.push(text(label, end.x + 4, end.y - 4, { fill: "#555" }));
  }
  const directions = [...new Set(usable.map((p) => p.direction))].sort();
  usable.forEach((p) => {
    const pos = project(p.rho_veh_km, p.q_veh_h, p.v_kmh as number);
    const color = PALETTE[directions.indexOf(p.direction) % PALETTE.length];
    parts.push(el("circle", {
      cx: round(pos.x), cy: round(pos.y), r: 3.2, fill: color, "fill-opacity": 0.75,
    }));
  });
  directions.forEach((direction, i) => {
    parts.push(text(direction, width - 24, 48 + 14 * i,
      { "text-anchor": "end", fill: PALETTE[i % PALETTE.length] }));
  });
  return { svg: document(width, height, parts, title), plotted };
}
