import { describe, expect, it } from 'vitest';
import {
  makePatchView,
  patchSizePx,
  refreshMismatch,
  renderFlicker,
  RefreshEstimator,
} from '../src/flicker.js';
import { frameSchedule } from '../src/schedule.js';

function schedule(freq: number, refresh: number, duty: number) {
  const r = frameSchedule(freq, refresh, duty);
  if (!r.available) throw new Error(r.reason);
  return r.schedule;
}

describe('renderFlicker', () => {
  it('600-frame log of the 15 Hz patch is exactly the repeating on,on,off,off pattern', () => {
    const view = makePatchView(15, schedule(15, 60, 0.5));
    const log: number[] = [];
    for (let tick = 0; tick < 600; tick++) {
      const draw = renderFlicker(view, tick);
      expect(draw.ok).toBe(true);
      if (draw.ok) log.push(draw.visible ? 1 : 0);
    }
    const expected = Array.from({ length: 600 }, (_, i) => [1, 1, 0, 0][i % 4]);
    expect(log).toEqual(expected);
    // exactly 150 on-periods: count rising edges
    let onPeriods = 0;
    for (let i = 0; i < 600; i++) {
      if (log[i] === 1 && (i === 0 || log[i - 1] === 0)) onPeriods++;
    }
    expect(onPeriods).toBe(150);
  });

  it('empty or missing schedule yields an error draw state', () => {
    const none = makePatchView(14, null);
    const draw = renderFlicker(none, 0);
    expect(draw.ok).toBe(false);
    if (!draw.ok) expect(draw.reason).toMatch(/14 Hz/);
  });

  it('visibility is a pure function of tick mod pattern length', () => {
    const view = makePatchView(12, schedule(12, 60, 0.4));
    for (let tick = 0; tick < 50; tick++) {
      const a = renderFlicker(view, tick);
      const b = renderFlicker(view, tick + 5 * 7);
      expect(a).toEqual(b);
    }
  });
});

describe('patch geometry', () => {
  it('5 degrees at 60 cm comes out near 198 px at the CSS reference density', () => {
    // 2 * 60 * tan(2.5deg) = 5.24 cm -> 198 px at 96 dpi
    expect(patchSizePx()).toBe(198);
  });

  it('scales linearly with viewing distance', () => {
    expect(patchSizePx(5, 120)).toBe(396);
  });
});

describe('refresh monitoring', () => {
  it('warns only beyond 1 Hz deviation', () => {
    expect(refreshMismatch(60.4, 60)).toBeNull();
    expect(refreshMismatch(59.2, 60)).toBeNull();
    expect(refreshMismatch(75, 60)).toMatch(/deviates/);
    expect(refreshMismatch(58.5, 60)).toMatch(/deviates/);
  });

  it('estimator converges on the frame-delta median', () => {
    const est = new RefreshEstimator();
    let t = 0;
    for (let i = 0; i < 200; i++) {
      // one dropped frame every 50 must not skew the estimate
      t += i % 50 === 0 ? 33.4 : 16.7;
      est.tick(t);
    }
    const hz = est.estimateHz();
    expect(hz).not.toBeNull();
    expect(hz!).toBeGreaterThan(59);
    expect(hz!).toBeLessThan(61);
  });

  it('estimator returns null before enough samples', () => {
    const est = new RefreshEstimator();
    est.tick(0);
    est.tick(16.7);
    expect(est.estimateHz()).toBeNull();
  });
});
