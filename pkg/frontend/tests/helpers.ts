// Shared fixtures for the UI tests.

export function sampleFrame(overrides: Record<string, unknown> = {}) {
  return {
    v: 1,
    t: 0.04,
    base_pos: [0.1, -0.2, 0.29],
    base_quat: [1, 0, 0, 0],
    speed_true: 0.5,
    speed_est: null,
    roll: 0.01,
    pitch: -0.02,
    weights: [0.2, 0.2, 0.2, 0.2, 0.2],
    ref_gait: "trot",
    contacts: [true, false, true, false],
    goal_offset: [0.3, 0.0],
    body_contact: false,
    ...overrides,
  };
}
