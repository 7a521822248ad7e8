// Wiring: WebSocket, keyboard/pointer listeners, send loop, render loop.

import { KeyState, Throttle, dragToVelocity } from "./input.js";
import { parseServerMessage } from "./protocol.js";
import { Frame, render } from "./render.js";
import { ViewModel } from "./view.js";

const canvas = document.getElementById("workspace") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const frame: Frame = { width: canvas.width, height: canvas.height, margin: 20 };

const statusLine = document.getElementById("status")!;
const hudLine = document.getElementById("hud")!;
const startButton = document.getElementById("start") as HTMLButtonElement;
const modeSelect = document.getElementById("mode") as HTMLSelectElement;
const goalSelect = document.getElementById("goal") as HTMLSelectElement;

const vm = new ViewModel();
const keys = new KeyState();
let pointerVelocity: [number, number] | null = null;
let socket: WebSocket | null = null;
let throttle = new Throttle(20);

function connect(): void {
  vm.resetConnection();
  keys.clear();
  const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/session`;
  socket = new WebSocket(url);
  socket.onmessage = (event) => {
    try {
      vm.apply(parseServerMessage(String(event.data)));
    } catch (error) {
      console.warn("dropped frame:", error);
    }
    if (vm.config && goalSelect.options.length !== vm.config.goal_count) {
      goalSelect.innerHTML = "";
      for (let g = 0; g < vm.config.goal_count; g++) {
        const option = document.createElement("option");
        option.value = String(g);
        option.textContent = `goal ${g}`;
        goalSelect.append(option);
      }
    }
    if (vm.config) throttle = new Throttle(vm.config.tick_hz);
  };
  socket.onclose = () => {
    vm.connection = "closed";
    setTimeout(connect, 1000);
  };
}

startButton.onclick = () => {
  if (!socket || !vm.controlsEnabled) return;
  vm.mode = modeSelect.value === "direct" ? "direct" : "shared";
  vm.intendedGoal = Number(goalSelect.value || 0);
  socket.send(JSON.stringify({ type: "control", command: "set_mode", mode: vm.mode }));
  socket.send(JSON.stringify({ type: "control", command: "start", goal: vm.intendedGoal }));
};

window.addEventListener("keydown", (event) => keys.keyDown(event.key));
window.addEventListener("keyup", (event) => keys.keyUp(event.key));

let dragOrigin: [number, number] | null = null;
canvas.addEventListener("pointerdown", (event) => {
  dragOrigin = [event.offsetX, event.offsetY];
});
canvas.addEventListener("pointermove", (event) => {
  if (dragOrigin && vm.config) {
    pointerVelocity = dragToVelocity(
      event.offsetX - dragOrigin[0],
      event.offsetY - dragOrigin[1],
      vm.config.max_speed,
    );
  }
});
const endDrag = () => {
  dragOrigin = null;
  pointerVelocity = null;
};
canvas.addEventListener("pointerup", endDrag);
canvas.addEventListener("pointerleave", endDrag);

function sendInput(nowMs: number): void {
  if (!socket || socket.readyState !== WebSocket.OPEN || !vm.config) return;
  if (!vm.episodeActive || !throttle.ready(nowMs)) return;
  const velocity = pointerVelocity ?? keys.velocity(vm.config.max_speed);
  socket.send(JSON.stringify({ type: "input", vx: velocity[0], vy: velocity[1] }));
}

function tick(nowMs: number): void {
  sendInput(nowMs);
  render(ctx, vm, frame);
  statusLine.textContent =
    vm.connection === "open"
      ? `session ${vm.session} | ${vm.mode} | ${vm.episodeActive ? "episode running" : "idle"}` +
        (vm.lastError ? ` | last error: ${vm.lastError}` : "")
      : vm.connection;
  hudLine.textContent =
    `episodes ${vm.hud.episodes} | successes ${vm.hud.successes} | collisions ${vm.hud.collisions}`;
  startButton.disabled = !vm.controlsEnabled;
  modeSelect.disabled = !vm.controlsEnabled;
  goalSelect.disabled = !vm.controlsEnabled;
  requestAnimationFrame(tick);
}

connect();
requestAnimationFrame(tick);
