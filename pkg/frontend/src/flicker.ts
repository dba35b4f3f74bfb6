// Stimulus patch rendering state. All logic is pure over (view, frameTick)
// so a recorded frame log alone is enough to assert pattern conformance;
// the requestAnimationFrame driver lives in main.ts.

import type { FrameSchedule } from './schedule.js';

// CSS reference pixel density; browsers expose no physical geometry.
const PX_PER_CM = 96 / 2.54;

export interface StimulusPatchView {
  freq: number;
  schedule: FrameSchedule | null; // null when unavailable on this display
  sizePx: number;
  color: string;
}

export type DrawState =
  | { ok: true; visible: boolean; sizePx: number; color: string }
  | { ok: false; reason: string };

/**
 * Patch edge length in pixels for a square subtending `visualAngleDeg` at
 * `viewingDistanceCm`. Approximate: assumes the CSS 96 dpi reference pixel.
 */
export function patchSizePx(visualAngleDeg = 5, viewingDistanceCm = 60): number {
  const sizeCm = 2 * viewingDistanceCm * Math.tan(((visualAngleDeg / 2) * Math.PI) / 180);
  return Math.round(sizeCm * PX_PER_CM);
}

export function makePatchView(
  freq: number,
  schedule: FrameSchedule | null,
  opts: { visualAngleDeg?: number; viewingDistanceCm?: number; color?: string } = {},
): StimulusPatchView {
  return {
    freq,
    schedule,
    sizePx: patchSizePx(opts.visualAngleDeg, opts.viewingDistanceCm),
    color: opts.color ?? '#ffffff',
  };
}

/** Visibility for one display frame: pattern[tick mod pattern length]. */
export function renderFlicker(view: StimulusPatchView, frameTick: number): DrawState {
  const schedule = view.schedule;
  if (schedule === null || schedule.pattern.length === 0) {
    return { ok: false, reason: `no frame schedule for ${view.freq} Hz on this display` };
  }
  const idx = ((frameTick % schedule.pattern.length) + schedule.pattern.length) %
    schedule.pattern.length;
  return {
    ok: true,
    visible: schedule.pattern[idx] === 1,
    sizePx: view.sizePx,
    color: view.color,
  };
}

/**
 * Measured-vs-configured refresh check; flicker frequencies silently drift
 * when the compositor runs at a different rate than the schedule assumes.
 */
export function refreshMismatch(
  measuredHz: number,
  configuredHz: number,
  toleranceHz = 1,
): string | null {
  if (Math.abs(measuredHz - configuredHz) <= toleranceHz) return null;
  return (
    `display refresh ${measuredHz.toFixed(1)} Hz deviates from the configured ` +
    `${configuredHz} Hz; stimulus frequencies will be off`
  );
}

/** Running estimate of the display refresh from rAF timestamp deltas. */
export class RefreshEstimator {
  private lastTs: number | null = null;
  private deltas: number[] = [];

  constructor(private readonly windowSize = 120) {}

  tick(timestampMs: number): void {
    if (this.lastTs !== null) {
      const dt = timestampMs - this.lastTs;
      if (dt > 0) {
        this.deltas.push(dt);
        if (this.deltas.length > this.windowSize) this.deltas.shift();
      }
    }
    this.lastTs = timestampMs;
  }

  estimateHz(): number | null {
    if (this.deltas.length < 30) return null;
    // median is robust to dropped frames
    const sorted = [...this.deltas].sort((a, b) => a - b);
    const mid = sorted[Math.floor(sorted.length / 2)]!;
    return 1000 / mid;
  }
}
