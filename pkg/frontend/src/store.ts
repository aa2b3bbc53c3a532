/**
 * Client-side view state: tab structure, per-panel display choices, the
 * local selection mirror, and tour staleness tracking.
 *
 * Selection is optimistic-local: a brush highlights immediately and the
 * server broadcast reconciles by revision, so a stale broadcast arriving
 * after a newer one never rolls the highlight back.
 */

import type { SelectionEvent, TourPathDoc } from "./api.js";
import { MAX_CATEGORIES } from "./palette.js";

export const ANALYSIS_TABS = [
  "input",
  "statistics",
  "benchmarks",
  "coordinates",
  "breakdown",
  "dimension-reduction",
  "tour",
  "comparison",
] as const;

export type AnalysisTab = (typeof ANALYSIS_TABS)[number];
export type Tab = "data" | AnalysisTab;
export type Coloring = "cluster" | "group" | "score" | "bin";

export interface PanelChoices {
  space: "clustering" | "linked";
  coloring: Coloring;
  /** Embedding method name or tour kind, depending on the panel's tab. */
  method: string;
}

export interface TabSet {
  data: true;
  analysis: readonly AnalysisTab[];
  active: Tab;
}

/** Data page plus the eight analysis tabs once a session has data. */
export function renderTabs(loaded: boolean, active: Tab = "data"): TabSet {
  if (!loaded) return { data: true, analysis: [], active: "data" };
  return { data: true, analysis: ANALYSIS_TABS, active };
}

export function validateColoring(coloring: Coloring, nCategories: number): void {
  if (coloring !== "score" && nCategories > MAX_CATEGORIES) {
    throw new RangeError(
      `${coloring} coloring needs ${nCategories} categories; at most ${MAX_CATEGORIES} supported`,
    );
  }
}

interface PanelState {
  choices: PanelChoices;
  path: TourPathDoc | null;
  /** Config changed since this panel's tour was last built. */
  stale: boolean;
}

export class ViewStore {
  dataLoaded = false;
  activeTab: Tab = "data";
  selection = new Set<number>();
  selectionOrigin = "";
  appliedRevision = 0;
  private panels = new Map<string, PanelState>();

  tabs(): TabSet {
    return renderTabs(this.dataLoaded, this.activeTab);
  }

  setActiveTab(tab: Tab): void {
    const tabs = this.tabs();
    if (tab !== "data" && !tabs.analysis.includes(tab as AnalysisTab)) {
      throw new RangeError(`tab ${tab} is not available`);
    }
    this.activeTab = tab;
  }

  panel(id: string): PanelState {
    let state = this.panels.get(id);
    if (!state) {
      state = {
        choices: { space: "clustering", coloring: "cluster", method: "grand" },
        path: null,
        stale: false,
      };
      this.panels.set(id, state);
    }
    return state;
  }

  setPanelChoices(id: string, choices: Partial<PanelChoices>): void {
    const state = this.panel(id);
    state.choices = { ...state.choices, ...choices };
  }

  /**
   * Brush landed locally: highlight now, remember the origin, and bump the
   * applied revision optimistically so our own echo is not re-applied.
   */
  applyLocalSelection(ids: Iterable<number>, origin: string, sentRevision?: number): void {
    this.selection = new Set(ids);
    this.selectionOrigin = origin;
    if (sentRevision !== undefined) this.appliedRevision = sentRevision;
  }

  /** Broadcast from the event stream; stale revisions are dropped. */
  applyRemoteSelection(event: SelectionEvent): boolean {
    if (event.revision <= this.appliedRevision) return false;
    this.selection = new Set(event.selected);
    this.selectionOrigin = event.origin;
    this.appliedRevision = event.revision;
    return true;
  }

  /** Highlighted ids as every initialized view should render them. */
  highlightedIn(viewIds: number[]): number[] {
    return viewIds.filter((id) => this.selection.has(id));
  }

  /**
   * A config change refreshes every reactive view but leaves tour paths
   * untouched: panels with a path show a stale badge until rebuilt.
   */
  markConfigChanged(): void {
    for (const state of this.panels.values()) {
      if (state.path !== null) state.stale = true;
    }
  }

  /** Explicit build-tour (or copy) action: attach the fresh path. */
  attachTourPath(id: string, path: TourPathDoc): void {
    const state = this.panel(id);
    state.path = path;
    state.stale = false;
  }

  isStale(id: string): boolean {
    return this.panel(id).stale;
  }
}
