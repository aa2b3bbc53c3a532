/**
 * Tour playback over a server-provided frame sequence.
 *
 * The client never synthesizes frames: it only steps through the
 * `interpolated` frames attached to the path, at a fixed frame rate.
 */

import type { TourPathDoc } from "./api.js";

export const DEFAULT_FPS = 60;

export class TourPlayback {
  readonly frames: number[][][];
  playing = false;
  /** 0-based index into the interpolated frame sequence. */
  position = 0;
  private fractional = 0;

  constructor(path: TourPathDoc, readonly fps: number = DEFAULT_FPS) {
    if (!path.interpolated || path.interpolated.length === 0) {
      throw new RangeError("tour path has no interpolated frames attached");
    }
    this.frames = path.interpolated;
  }

  play(): void {
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }

  /** Advance by elapsed wall time; loops at the end of the path. */
  tick(elapsedMs: number): void {
    if (!this.playing) return;
    this.fractional += (elapsedMs / 1000) * this.fps;
    const whole = Math.floor(this.fractional);
    if (whole > 0) {
      this.fractional -= whole;
      this.position = (this.position + whole) % this.frames.length;
    }
  }

  /** Freeze and report the held 1-based frame position for the service. */
  holdFrame(): { position: number; frame: number[][] } {
    this.pause();
    return { position: this.position + 1, frame: this.currentFrame() };
  }

  currentFrame(): number[][] {
    return this.frames[this.position];
  }

  seekEnd(): void {
    this.position = this.frames.length - 1;
  }
}

/** Projected 2-D scatter for the current frame; d=3 renders axes 1-2 with a notice. */
export function projectPoints(coords: number[][], frame: number[][]): { x: number[]; y: number[]; clipped: boolean } {
  const d = frame[0].length;
  const x: number[] = [];
  const y: number[] = [];
  for (const row of coords) {
    let px = 0;
    let py = 0;
    for (let j = 0; j < row.length; j++) {
      px += row[j] * frame[j][0];
      py += row[j] * frame[j][d > 1 ? 1 : 0];
    }
    x.push(px);
    y.push(d > 1 ? py : 0);
  }
  return { x, y, clipped: d > 2 };
}
