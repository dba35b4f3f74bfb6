// Frame-locked flicker schedules. A stimulation frequency is only rendered
// when the display refresh divides into a whole number of frames per flicker
// period (vsync lock); duties are rounded to the nearest whole-frame duty,
// on-frames contiguous at the pattern start. Mirrors the daemon's schedule
// rule so server and console always agree on the pattern.

export interface FrameSchedule {
  refreshHz: number;
  pattern: readonly (0 | 1)[];
  effectiveFreq: number;
  duty: number;
}

export type ScheduleResult =
  | { available: true; schedule: FrameSchedule }
  | { available: false; reason: string };

export function frameSchedule(
  targetFreq: number,
  refreshHz: number,
  duty: number,
): ScheduleResult {
  if (!(targetFreq > 0) || !(refreshHz > 0)) {
    return { available: false, reason: 'frequencies must be positive' };
  }
  if (!(duty > 0 && duty < 1)) {
    return { available: false, reason: `duty must be in (0, 1), got ${duty}` };
  }
  const period = refreshHz / targetFreq;
  if (Math.abs(period - Math.round(period)) > 1e-9) {
    return {
      available: false,
      reason:
        `${targetFreq} Hz needs ${period.toFixed(3)} frames per period at ` +
        `${refreshHz} Hz refresh; vsync-locked flicker requires an integer frame count`,
    };
  }
  const frames = Math.round(period);
  if (frames < 2) {
    return { available: false, reason: 'flicker period shorter than two frames' };
  }
  let nOn = Math.round(duty * frames);
  nOn = Math.min(Math.max(nOn, 1), frames - 1);
  const pattern: (0 | 1)[] = Array.from({ length: frames }, (_, i) =>
    i < nOn ? 1 : 0,
  );
  return {
    available: true,
    schedule: {
      refreshHz,
      pattern,
      effectiveFreq: refreshHz / frames,
      duty: nOn / frames,
    },
  };
}
