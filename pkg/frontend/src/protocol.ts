// Wire messages exchanged with the teleoperation service.

export interface HelloConfig {
  max_speed: number;
  workspace_side: number;
  goal_count: number;
  obstacle_radius: number;
  reach_radius: number;
  tick_hz: number;
  kappa_min: number;
  kappa_scale: number;
  peak_threshold: number;
}

export interface HelloMessage {
  type: "hello";
  session: string;
  config: HelloConfig;
}

export interface EpisodeInfo {
  index: number;
  steps: number;
  done: boolean;
  success: boolean;
  env_seed?: number | null;
}

export interface EventsInfo {
  obstacle_collision: boolean;
  boundary_contact: boolean;
  goal_reached: number | null;
  terminated: boolean;
}

export interface StateMessage {
  type: "state";
  session: string;
  tick: number;
  gripper: [number, number];
  obstacle: [number, number];
  goals: [number, number][];
  scores: number[];
  sub_actions: [number, number][];
  user_action: [number, number];
  arbitrated_action: [number, number];
  modality: "unimodal" | "multimodal";
  events: EventsInfo;
  episode: EpisodeInfo;
}

export interface ErrorMessage {
  type: "error";
  session: string;
  reason: string;
}

export type ServerMessage = HelloMessage | StateMessage | ErrorMessage;

export interface InputMessage {
  type: "input";
  vx: number;
  vy: number;
}

export interface ControlMessage {
  type: "control";
  command: "start" | "reset" | "set_mode";
  mode?: "shared" | "direct";
  goal?: number;
  user?: string;
}

const isVec = (v: unknown): v is [number, number] =>
  Array.isArray(v) && v.length === 2 && v.every((x) => typeof x === "number" && isFinite(x));

const isVecList = (v: unknown): v is [number, number][] =>
  Array.isArray(v) && v.every(isVec);

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new Error("not JSON");
  }
  if (typeof data !== "object" || data === null || !("type" in data)) {
    throw new Error("missing type");
  }
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "hello": {
      if (typeof msg.session !== "string" || typeof msg.config !== "object" || msg.config === null) {
        throw new Error("bad hello");
      }
      return msg as unknown as HelloMessage;
    }
    case "error": {
      if (typeof msg.reason !== "string") throw new Error("bad error frame");
      return msg as unknown as ErrorMessage;
    }
    case "state": {
      if (
        typeof msg.tick !== "number" ||
        !isVec(msg.gripper) ||
        !isVec(msg.obstacle) ||
        !isVecList(msg.goals) ||
        !isVecList(msg.sub_actions) ||
        !isVec(msg.user_action) ||
        !isVec(msg.arbitrated_action) ||
        !Array.isArray(msg.scores) ||
        (msg.modality !== "unimodal" && msg.modality !== "multimodal") ||
        typeof msg.episode !== "object" ||
        msg.episode === null
      ) {
        throw new Error("bad state frame");
      }
      if ((msg.goals as unknown[]).length !== (msg.sub_actions as unknown[]).length) {
        throw new Error("goal/sub-action count mismatch");
      }
      return msg as unknown as StateMessage;
    }
    default:
      throw new Error(`unknown message type ${String(msg.type)}`);
  }
}
