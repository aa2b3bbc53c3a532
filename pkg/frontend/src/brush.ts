/**
 * Brush gestures: rectangles and lassos in view coordinates resolving to
 * observation id sets on whatever view the gesture landed on.
 */

export interface ViewPoints {
  viewId: string;
  /** 1-based observation ids, parallel to x/y. */
  ids: number[];
  x: number[];
  y: number[];
  /** Views render nothing (and ignore gestures) until first initialized. */
  initialized: boolean;
}

export type BrushGesture =
  | { kind: "rect"; viewId: string; x0: number; y0: number; x1: number; y1: number }
  | { kind: "lasso"; viewId: string; vertices: [number, number][] };

function pointInPolygon(x: number, y: number, vertices: [number, number][]): boolean {
  let inside = false;
  for (let i = 0, j = vertices.length - 1; i < vertices.length; j = i++) {
    const [xi, yi] = vertices[i];
    const [xj, yj] = vertices[j];
    const crosses = yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi;
    if (crosses) inside = !inside;
  }
  return inside;
}

/**
 * Observation ids captured by a gesture, or null when the target view is
 * not initialized (gesture is a no-op) or is not the gesture's view.
 */
export function resolveBrush(gesture: BrushGesture, view: ViewPoints): number[] | null {
  if (!view.initialized || view.viewId !== gesture.viewId) return null;
  const hit: number[] = [];
  if (gesture.kind === "rect") {
    const xLo = Math.min(gesture.x0, gesture.x1);
    const xHi = Math.max(gesture.x0, gesture.x1);
    const yLo = Math.min(gesture.y0, gesture.y1);
    const yHi = Math.max(gesture.y0, gesture.y1);
    for (let i = 0; i < view.ids.length; i++) {
      if (view.x[i] >= xLo && view.x[i] <= xHi && view.y[i] >= yLo && view.y[i] <= yHi) {
        hit.push(view.ids[i]);
      }
    }
  } else {
    if (gesture.vertices.length < 3) return [];
    for (let i = 0; i < view.ids.length; i++) {
      if (pointInPolygon(view.x[i], view.y[i], gesture.vertices)) hit.push(view.ids[i]);
    }
  }
  return hit;
}
