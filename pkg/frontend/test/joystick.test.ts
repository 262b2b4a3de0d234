import { describe, expect, it } from "vitest";

import { stickToVelocity } from "../src/joystick";

const LIMITS = { maxLinear: 0.45, maxAngular: 1.1 };

describe("joystick mapping", () => {
  it("centered stick produces zero velocity", () => {
    const v = stickToVelocity(0, 0, 0, LIMITS);
    expect(v).toEqual({ vx: 0, vy: -0, wz: 0 });
  });

  it("full forward maps to the reported linear limit", () => {
    const v = stickToVelocity(0, 1, 0, LIMITS);
    expect(v.vx).toBeCloseTo(LIMITS.maxLinear, 12);
    expect(v.vy).toBeCloseTo(0, 12);
  });

  it("right deflection strafes to the right (negative y)", () => {
    const v = stickToVelocity(1, 0, 0, LIMITS);
    expect(v.vy).toBeCloseTo(-LIMITS.maxLinear, 12);
  });

  it("diagonal deflection is normalized onto the limit ellipse", () => {
    const v = stickToVelocity(1, 1, 0, LIMITS);
    const mag = Math.hypot(v.vx, v.vy);
    expect(mag).toBeCloseTo(LIMITS.maxLinear, 9);
    expect(v.vx).toBeCloseTo(LIMITS.maxLinear / Math.SQRT2, 9);
  });

  it("twist knob scales to the angular limit and clamps", () => {
    expect(stickToVelocity(0, 0, 1, LIMITS).wz).toBeCloseTo(LIMITS.maxAngular, 12);
    expect(stickToVelocity(0, 0, -2, LIMITS).wz).toBeCloseTo(-LIMITS.maxAngular, 12);
  });

  it("partial deflections stay inside the limits", () => {
    for (const [x, y] of [[0.3, 0.2], [-0.7, 0.4], [0.9, -0.9]]) {
      const v = stickToVelocity(x, y, 0.5, LIMITS);
      expect(Math.hypot(v.vx, v.vy)).toBeLessThanOrEqual(LIMITS.maxLinear + 1e-12);
      expect(Math.abs(v.wz)).toBeLessThanOrEqual(LIMITS.maxAngular + 1e-12);
    }
  });
});
