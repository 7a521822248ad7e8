// Keyboard and pointer capture producing velocity commands.

const KEY_DIRECTIONS: Record<string, [number, number]> = {
  ArrowUp: [0, 1],
  ArrowDown: [0, -1],
  ArrowLeft: [-1, 0],
  ArrowRight: [1, 0],
  w: [0, 1],
  s: [0, -1],
  a: [-1, 0],
  d: [1, 0],
};

export class KeyState {
  private pressed = new Set<string>();

  keyDown(key: string): void {
    if (key in KEY_DIRECTIONS) this.pressed.add(key);
  }

  keyUp(key: string): void {
    this.pressed.delete(key);
  }

  clear(): void {
    this.pressed.clear();
  }

  /** Unit direction from held keys, scaled by max speed; zero when idle. */
  velocity(maxSpeed: number): [number, number] {
    let vx = 0;
    let vy = 0;
    for (const key of this.pressed) {
      const [dx, dy] = KEY_DIRECTIONS[key];
      vx += dx;
      vy += dy;
    }
    const norm = Math.hypot(vx, vy);
    if (norm === 0) return [0, 0];
    return [(vx / norm) * maxSpeed, (vy / norm) * maxSpeed];
  }
}

/** Map a pointer drag (pixels) to a velocity command, saturating at maxSpeed. */
export function dragToVelocity(
  dxPixels: number,
  dyPixels: number,
  maxSpeed: number,
  fullSpeedRadiusPx = 80,
): [number, number] {
  // canvas y grows downward; workspace y grows upward
  const gain = maxSpeed / fullSpeedRadiusPx;
  let vx = dxPixels * gain;
  let vy = -dyPixels * gain;
  const speed = Math.hypot(vx, vy);
  if (speed > maxSpeed) {
    vx *= maxSpeed / speed;
    vy *= maxSpeed / speed;
  }
  return [vx, vy];
}

/** Rate limiter: at most one send per tick period. */
export class Throttle {
  private lastSent = -Infinity;

  constructor(private readonly ratePerSecond: number) {}

  ready(nowMs: number): boolean {
    if (nowMs - this.lastSent >= 1000 / this.ratePerSecond) {
      this.lastSent = nowMs;
      return true;
    }
    return false;
  }
}
