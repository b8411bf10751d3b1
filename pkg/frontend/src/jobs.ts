/**
 * Default plot-job derivation: one figure per renderable artifact kind.
 */

import type { Bundle } from "./bundle.js";
import type { PlotJob, PlotKind } from "./plots.js";

const KIND_TO_PLOT: Record<string, PlotKind> = {
  slices: "line",
  lane_load: "stacked",
  histogram: "hist_pdf",
  histogram2d: "heatmap",
  context_bins: "bars3d",
  fundamental: "scatter3d",
};

export function defaultJobs(bundle: Bundle): PlotJob[] {
  const jobs: PlotJob[] = [];
  for (const entry of bundle.index.artifacts) {
    const kind = KIND_TO_PLOT[entry.kind];
    if (kind !== undefined) {
      jobs.push({ artifact: entry.name, kind, out: `${entry.name}.svg` });
    }
  }
  return jobs;
}
