// Canvas drawing. Pure geometry helpers are exported for tests; the drawing
// itself is a thin pass over the latest state message.

import { densitySamples, mixtureFromActions } from "./density.js";
import { StateMessage } from "./protocol.js";
import { ViewModel } from "./view.js";

export const GOAL_COLORS = ["#e4572e", "#2e86ab", "#73a839", "#b95fab", "#c9a227"];

export interface Frame {
  width: number;
  height: number;
  margin: number;
}

export function workspaceToCanvas(
  point: [number, number],
  side: number,
  frame: Frame,
): [number, number] {
  const span = Math.min(frame.width, frame.height) - 2 * frame.margin;
  const scale = span / side;
  return [
    frame.margin + point[0] * scale,
    frame.height - frame.margin - point[1] * scale,
  ];
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  from: [number, number],
  velocity: [number, number],
  scale: number,
  color: string,
): void {
  const to: [number, number] = [from[0] + velocity[0] * scale, from[1] - velocity[1] * scale];
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(from[0], from[1]);
  ctx.lineTo(to[0], to[1]);
  ctx.stroke();
  const angle = Math.atan2(to[1] - from[1], to[0] - from[0]);
  ctx.beginPath();
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - 7 * Math.cos(angle - 0.4), to[1] - 7 * Math.sin(angle - 0.4));
  ctx.lineTo(to[0] - 7 * Math.cos(angle + 0.4), to[1] - 7 * Math.sin(angle + 0.4));
  ctx.closePath();
  ctx.fill();
}

export function render(ctx: CanvasRenderingContext2D, vm: ViewModel, frame: Frame): void {
  ctx.clearRect(0, 0, frame.width, frame.height);
  if (vm.connection !== "open" || !vm.config) {
    ctx.fillStyle = "#444";
    ctx.font = "16px sans-serif";
    ctx.fillText("disconnected", frame.width / 2 - 40, frame.height / 2);
    return;
  }
  const side = vm.config.workspace_side;
  const span = Math.min(frame.width, frame.height) - 2 * frame.margin;
  const scale = span / side;

  ctx.strokeStyle = "#888";
  ctx.strokeRect(frame.margin, frame.height - frame.margin - span, span, span);

  const state = vm.state;
  if (!state) return;

  state.goals.forEach((goal, g) => {
    const [x, y] = workspaceToCanvas(goal, side, frame);
    ctx.fillStyle = GOAL_COLORS[g % GOAL_COLORS.length];
    ctx.beginPath();
    ctx.arc(x, y, vm.config!.reach_radius * scale, 0, 2 * Math.PI);
    ctx.fill();
  });

  const [ox, oy] = workspaceToCanvas(state.obstacle, side, frame);
  ctx.fillStyle = "#555";
  ctx.beginPath();
  ctx.arc(ox, oy, vm.config.obstacle_radius * scale, 0, 2 * Math.PI);
  ctx.fill();

  const gripper = workspaceToCanvas(state.gripper, side, frame);
  ctx.fillStyle = "#111";
  ctx.beginPath();
  ctx.arc(gripper[0], gripper[1], 5, 0, 2 * Math.PI);
  ctx.fill();

  const arrowScale = scale * 0.8;
  state.sub_actions.forEach((action, g) => {
    drawArrow(ctx, gripper, action, arrowScale, GOAL_COLORS[g % GOAL_COLORS.length]);
  });
  drawArrow(ctx, gripper, state.user_action, arrowScale, "#111");
  drawArrow(ctx, gripper, state.arbitrated_action, arrowScale, "#e0a800");

  drawPolarInset(ctx, vm, state, frame);
  drawScoreBars(ctx, state, frame);
  drawBadge(ctx, vm, frame);
}

function drawPolarInset(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  state: StateMessage,
  frame: Frame,
): void {
  const radius = 52;
  const cx = frame.width - radius - 14;
  const cy = radius + 14;
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.arc(cx, cy, radius, 0, 2 * Math.PI);
  ctx.stroke();
  const components = mixtureFromActions(
    state.sub_actions,
    state.scores,
    vm.config!.kappa_min,
    vm.config!.kappa_scale,
  );
  const { angles, values } = densitySamples(components, 180);
  const peak = Math.max(...values, 1e-9);
  ctx.strokeStyle = "#333";
  ctx.beginPath();
  angles.forEach((angle, i) => {
    const r = (radius * 0.9 * values[i]) / peak;
    const x = cx + r * Math.cos(angle);
    const y = cy - r * Math.sin(angle);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.closePath();
  ctx.stroke();
}

function drawScoreBars(ctx: CanvasRenderingContext2D, state: StateMessage, frame: Frame): void {
  const width = 70;
  const x0 = 14;
  state.scores.forEach((score, g) => {
    const y = 16 + g * 16;
    ctx.fillStyle = GOAL_COLORS[g % GOAL_COLORS.length];
    ctx.fillRect(x0, y, width * score, 10);
    ctx.strokeStyle = "#999";
    ctx.strokeRect(x0, y, width, 10);
    ctx.fillStyle = "#333";
    ctx.font = "10px sans-serif";
    ctx.fillText(score.toFixed(2), x0 + width + 6, y + 9);
  });
}

function drawBadge(ctx: CanvasRenderingContext2D, vm: ViewModel, frame: Frame): void {
  const badge = vm.modalityBadge;
  if (!badge) return;
  const multimodal = badge === "YOUR CALL";
  ctx.fillStyle = multimodal ? "#b3261e" : "#2e6f40";
  ctx.font = "bold 14px sans-serif";
  ctx.fillText(badge, frame.width / 2 - 36, 22);
}
