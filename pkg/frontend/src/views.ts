/**
 * Pure view-model builders: service payloads in, render-ready structures
 * out. Rendering proper is a thin layer over these, so the logic that
 * decides what appears on screen is testable without a browser.
 */

export interface PcpRow {
  id: number;
  cluster: number;
  values: number[];
  benchmark: boolean;
}

export interface PcpViewModel {
  axes: string[];
  rows: (PcpRow & { highlighted: boolean })[];
}

/** Parallel coordinates: hidden clusters drop rows but never axes. */
export function pcpViewModel(
  payload: { variables: string[]; rows: PcpRow[] },
  hiddenClusters: Set<number>,
  selection: Set<number>,
): PcpViewModel {
  return {
    axes: [...payload.variables],
    rows: payload.rows
      .filter((row) => !hiddenClusters.has(row.cluster))
      .map((row) => ({ ...row, highlighted: selection.has(row.id) })),
  };
}

export interface HistogramSeries {
  name: "overall" | "within" | "between";
  counts: number[];
  background: boolean;
}

/**
 * Distance-breakdown histograms: within and between layered over the
 * overall distribution, which is always drawn in the background.
 */
export function breakdownViewModel(payload: {
  edges: number[];
  overall: number[];
  within: number[];
  between: number[];
}): { edges: number[]; series: HistogramSeries[] } {
  return {
    edges: [...payload.edges],
    series: [
      { name: "overall", counts: [...payload.overall], background: true },
      { name: "within", counts: [...payload.within], background: false },
      { name: "between", counts: [...payload.between], background: false },
    ],
  };
}

export interface ComparisonCell {
  row: number;
  col: number;
  count: number;
  fraction: number;
}

/**
 * Overlap heatmap between two cluster solutions; also reports which rows
 * split across several columns (a nested k -> k+1 cut splits exactly one).
 */
export function comparisonViewModel(table: number[][]): {
  cells: ComparisonCell[];
  splitRows: number[];
} {
  const total = table.flat().reduce((a, b) => a + b, 0);
  const cells: ComparisonCell[] = [];
  const splitRows: number[] = [];
  table.forEach((row, i) => {
    if (row.filter((c) => c > 0).length > 1) splitRows.push(i + 1);
    row.forEach((count, j) => {
      cells.push({ row: i + 1, col: j + 1, count, fraction: total > 0 ? count / total : 0 });
    });
  });
  return { cells, splitRows };
}

/** Slice display: out-of-slice points grey out but stay brushable. */
export function sliceViewModel(
  ids: number[],
  inSlice: boolean[],
): { id: number; greyed: boolean; brushable: true }[] {
  return ids.map((id, i) => ({ id, greyed: !inSlice[i], brushable: true }));
}

/** Per-k line chart series from the statistics sweep. */
export function statsSeries(
  rows: Record<string, number>[],
): { statistic: string; k: number[]; values: number[] }[] {
  if (rows.length === 0) return [];
  const k = rows.map((r) => r.k);
  return Object.keys(rows[0])
    .filter((key) => key !== "k")
    .map((statistic) => ({ statistic, k, values: rows.map((r) => r[statistic]) }));
}
