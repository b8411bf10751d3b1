/**
 * Typed mirror of the trajcrit report-bundle JSON contract.
 *
 * Every artifact file holds { name, kind, data }; the index lists files with
 * sha256 digests. These types cover exactly the fields the renderers read.
 */

export type ArtifactKind =
  | "histogram"
  | "histogram2d"
  | "fit"
  | "slices"
  | "fundamental"
  | "lane_load"
  | "lane_change_rates"
  | "occurrence_table"
  | "risk_events"
  | "context_bins"
  | "undercut"
  | "ttc6"
  | "rp_grid"
  | "clean_report"
  | "ingest_report"
  | "scalars";

export interface Artifact<T = unknown> {
  name: string;
  kind: ArtifactKind;
  data: T;
}

export interface IndexEntry {
  name: string;
  kind: ArtifactKind;
  file: string;
  sha256: string;
}

export interface BundleIndex {
  manifest: {
    tool: string;
    version: string;
    config_hash: string;
    input_digest: string;
  };
  artifacts: IndexEntry[];
}

export interface HistogramData {
  edges: number[];
  counts: number[];
  underflow: number;
  overflow: number;
  n: number;
  unit?: string;
  fit?: string;
}

export interface Histogram2dData {
  x_edges: number[];
  y_edges: number[];
  counts: number[][];
  n: number;
  dropped: number;
  x_label?: string;
  y_label?: string;
}

export interface FitData {
  family: "logistic" | "gev";
  params: number[];
  log_likelihood: number;
  converged: boolean;
  iterations: number;
  n: number;
}

export interface SliceRow {
  direction: "upper" | "lower";
  index: number;
  t_start: number;
  t_end: number;
  q_veh_h: number;
  rho_veh_km: number;
  v_mean_space_kmh: number | null;
  truck_share: number;
  lane_change_count: number;
}

export interface FundamentalPoint {
  direction: "upper" | "lower";
  index: number;
  rho_veh_km: number;
  q_veh_h: number;
  v_kmh: number | null;
}

export interface LaneLoadRow {
  lane_id: number;
  role: string;
  share: number;
  q_veh_h: number;
}

export type LaneLoadData = Record<string, LaneLoadRow[]>;

export interface ContextBinsData {
  dimension: string;
  measure: string;
  row_edges: number[];
  col_edges: number[];
  percentages: number[][];
  row_n: number[];
}
