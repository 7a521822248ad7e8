// View model: everything rendered derives from server-confirmed messages.

import { HelloConfig, ServerMessage, StateMessage } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface HudTallies {
  episodes: number;
  successes: number;
  collisions: number;
}

export class ViewModel {
  connection: Connection = "connecting";
  session: string | null = null;
  config: HelloConfig | null = null;
  state: StateMessage | null = null;
  lastError: string | null = null;
  mode: "shared" | "direct" = "shared";
  intendedGoal = 0;
  hud: HudTallies = { episodes: 0, successes: 0, collisions: 0 };
  private tallied = new Set<number>();
  private collisionSeen = new Set<number>();

  /** HUD tallies survive reconnects; live state does not. */
  resetConnection(): void {
    this.connection = "connecting";
    this.session = null;
    this.config = null;
    this.state = null;
  }

  apply(message: ServerMessage): void {
    if (message.type === "hello") {
      this.connection = "open";
      this.session = message.session;
      this.config = message.config;
      return;
    }
    if (message.type === "error") {
      this.lastError = message.reason;
      return;
    }
    this.state = message;
    const episode = message.episode;
    if (message.events.obstacle_collision) {
      this.collisionSeen.add(episode.index);
    }
    if (episode.done && !this.tallied.has(episode.index)) {
      this.tallied.add(episode.index);
      this.hud.episodes += 1;
      if (episode.success) this.hud.successes += 1;
      if (this.collisionSeen.has(episode.index)) this.hud.collisions += 1;
    }
  }

  get episodeActive(): boolean {
    return this.state !== null && !this.state.episode.done;
  }

  /** Mode and goal selection are only offered between episodes. */
  get controlsEnabled(): boolean {
    return this.connection === "open" && !this.episodeActive;
  }

  get modalityBadge(): string {
    if (!this.state) return "";
    return this.state.modality === "multimodal" ? "YOUR CALL" : "ROBOT ASSIST";
  }

  get arrowCount(): number {
    if (!this.state) return 0;
    // one per sub-policy plus the user and arbitrated arrows
    return this.state.sub_actions.length + 2;
  }
}
