// Console wiring: socket -> store -> views, widgets -> commands.

import { ConsoleClient } from "./client.js";
import { JoystickWidget, stickToVelocity } from "./joystick.js";
import { Panels } from "./panels.js";
import { buildCharts, buildGantt, buildSide, buildTopDown } from "./scene.js";
import { Store } from "./store.js";
import { drawChart, drawGantt, drawSide, drawTopDown } from "./views.js";

const COMMAND_RATE_HZ = 10;

function wsUrl(): string {
  const loc = window.location;
  const scheme = loc.protocol === "https:" ? "wss:" : "ws:";
  const params = new URLSearchParams(loc.search);
  return params.get("server") ?? `${scheme}//${loc.host}/ws`;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const store = new Store();
const statusEl = el<HTMLSpanElement>("status");
const banner = el<HTMLDivElement>("banner");

const client = new ConsoleClient(wsUrl(), {
  onHello: (hello) => {
    store.setHello(hello);
    panels.populate(hello);
    banner.style.display = "none";
  },
  onState: (state) => store.setState(state),
  onError: (detail) => {
    banner.textContent = detail;
    banner.style.display = "block";
  },
  onStatus: (status) => {
    statusEl.textContent = status;
    statusEl.className = status;
    if (status !== "open") {
      banner.textContent = "connection lost, retrying";
      banner.style.display = "block";
    }
  },
});

const panels = new Panels(document.body, client);
const joystickCanvas = el<HTMLCanvasElement>("joystick");
const twistSlider = el<HTMLInputElement>("twist");
const joystick = new JoystickWidget(joystickCanvas, () => undefined);

let wasEngaged = false;
setInterval(() => {
  const hello = store.hello;
  if (!hello || !client.connected) return;
  const engaged = joystick.engaged || Number(twistSlider.value) !== 0;
  if (engaged || wasEngaged) {
    const v = stickToVelocity(joystick.stickX, joystick.stickY,
      Number(twistSlider.value), {
        maxLinear: hello.limits.max_linear_speed,
        maxAngular: hello.limits.max_angular_speed,
      });
    // release sends exactly one zero command, then goes silent
    client.send({
      type: "velocity",
      linear: [v.vx, v.vy, 0],
      angular: [0, 0, v.wz],
    });
  }
  wasEngaged = engaged;
  panels.pump(0.02, 0.05, 0.04);
}, 1000 / COMMAND_RATE_HZ);

twistSlider.addEventListener("pointerup", () => {
  twistSlider.value = "0";
});

const topdownCanvas = el<HTMLCanvasElement>("topdown");
const sideCanvas = el<HTMLCanvasElement>("side");
const ganttCanvas = el<HTMLCanvasElement>("gantt");
const powerCanvas = el<HTMLCanvasElement>("chart-power");
const cotCanvas = el<HTMLCanvasElement>("chart-cot");
const modeEl = el<HTMLSpanElement>("mode");
const speedEl = el<HTMLSpanElement>("speed");

function render() {
  joystick.draw();
  const hello = store.hello;
  const state = store.state;
  if (hello && state) {
    drawTopDown(topdownCanvas, buildTopDown(hello, state));
    drawSide(sideCanvas, buildSide(hello, state));
    drawGantt(ganttCanvas, buildGantt(store.phaseHistory), 6);
    const charts = buildCharts(store.metricHistory);
    drawChart(powerCanvas, charts, "power");
    drawChart(cotCanvas, charts, "cot");
    modeEl.textContent = `${state.mode} / ${state.gait}`;
    speedEl.textContent = `${state.metrics.speed.toFixed(2)} m/s, ` +
      `${state.metrics.power.toFixed(0)} W`;
    panels.reflectMode(state);
  }
  requestAnimationFrame(render);
}

client.connect();
requestAnimationFrame(render);
