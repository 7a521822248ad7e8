import { describe, expect, it } from "vitest";

import { StateMessage } from "../src/protocol";
import { ViewModel } from "../src/view";
import { workspaceToCanvas } from "../src/render";

const hello = {
  type: "hello" as const,
  session: "s1",
  config: {
    max_speed: 0.2,
    workspace_side: 0.5,
    goal_count: 3,
    obstacle_radius: 0.06,
    reach_radius: 0.02,
    tick_hz: 20,
    kappa_min: 0.5,
    kappa_scale: 8.0,
    peak_threshold: 0.6,
  },
};

function stateFrame(overrides: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    session: "s1",
    tick: 1,
    gripper: [0.2, 0.1],
    obstacle: [0.25, 0.25],
    goals: [
      [0.1, 0.48],
      [0.25, 0.48],
      [0.4, 0.48],
    ],
    scores: [0.2, 0.5, 0.3],
    sub_actions: [
      [0.1, 0.1],
      [0.0, 0.2],
      [-0.1, 0.1],
    ],
    user_action: [0.0, 0.2],
    arbitrated_action: [0.0, 0.18],
    modality: "unimodal",
    events: {
      obstacle_collision: false,
      boundary_contact: false,
      goal_reached: null,
      terminated: false,
    },
    episode: { index: 0, steps: 1, done: false, success: false },
    ...overrides,
  };
}

describe("ViewModel", () => {
  it("opens on hello and tracks state", () => {
    const vm = new ViewModel();
    vm.apply(hello);
    expect(vm.connection).toBe("open");
    expect(vm.config?.goal_count).toBe(3);
    vm.apply(stateFrame());
    expect(vm.episodeActive).toBe(true);
    expect(vm.controlsEnabled).toBe(false);
  });

  it("maps modality to the authority badge", () => {
    const vm = new ViewModel();
    vm.apply(hello);
    vm.apply(stateFrame({ modality: "multimodal" }));
    expect(vm.modalityBadge).toBe("YOUR CALL");
    vm.apply(stateFrame({ modality: "unimodal" }));
    expect(vm.modalityBadge).toBe("ROBOT ASSIST");
  });

  it("counts one arrow per sub-policy plus user and arbitrated", () => {
    const vm = new ViewModel();
    vm.apply(hello);
    vm.apply(stateFrame());
    expect(vm.arrowCount).toBe(5);
  });

  it("tallies each episode once, with successes and collisions", () => {
    const vm = new ViewModel();
    vm.apply(hello);
    vm.apply(stateFrame());
    vm.apply(
      stateFrame({
        events: {
          obstacle_collision: true,
          boundary_contact: false,
          goal_reached: null,
          terminated: false,
        },
      }),
    );
    vm.apply(
      stateFrame({
        episode: { index: 0, steps: 3, done: true, success: true },
      }),
    );
    vm.apply(
      stateFrame({
        episode: { index: 0, steps: 3, done: true, success: true },
      }),
    );
    expect(vm.hud).toEqual({ episodes: 1, successes: 1, collisions: 1 });
    expect(vm.controlsEnabled).toBe(true);
  });

  it("keeps HUD tallies across reconnects but drops live state", () => {
    const vm = new ViewModel();
    vm.apply(hello);
    vm.apply(stateFrame({ episode: { index: 0, steps: 2, done: true, success: true } }));
    vm.resetConnection();
    expect(vm.state).toBeNull();
    expect(vm.connection).toBe("connecting");
    expect(vm.hud.episodes).toBe(1);
  });

  it("records error frames", () => {
    const vm = new ViewModel();
    vm.apply({ type: "error", session: "s1", reason: "cannot switch mode mid-episode" });
    expect(vm.lastError).toContain("mid-episode");
  });
});

describe("workspaceToCanvas", () => {
  it("maps corners with a flipped y axis", () => {
    const frame = { width: 560, height: 560, margin: 20 };
    expect(workspaceToCanvas([0, 0], 0.5, frame)).toEqual([20, 540]);
    expect(workspaceToCanvas([0.5, 0.5], 0.5, frame)).toEqual([540, 20]);
  });
});
