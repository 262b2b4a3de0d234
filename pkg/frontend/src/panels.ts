// Control panels: 6-DOF pose nudges, gait selection, startup/shutdown,
// per-leg manipulation. Panels emit commands only on explicit input and
// grey themselves out in modes where they are invalid.

import { ConsoleClient } from "./client.js";
import { Hello, StateMessage } from "./protocol.js";

const POSE_AXES = ["x", "y", "z", "roll", "pitch", "yaw"] as const;

export class Panels {
  private gaitSelect: HTMLSelectElement;
  private legSelect: HTMLSelectElement;
  private startupBtn: HTMLButtonElement;
  private shutdownBtn: HTMLButtonElement;
  private legUpBtn: HTMLButtonElement;
  private legDownBtn: HTMLButtonElement;
  private legOffBtn: HTMLButtonElement;
  private poseHeld: number[] = [0, 0, 0, 0, 0, 0];
  private legHeld = 0;

  constructor(private root: HTMLElement, private client: ConsoleClient) {
    this.gaitSelect = root.querySelector("#gait-select")!;
    this.legSelect = root.querySelector("#leg-select")!;
    this.startupBtn = root.querySelector("#btn-startup")!;
    this.shutdownBtn = root.querySelector("#btn-shutdown")!;
    this.legUpBtn = root.querySelector("#btn-leg-up")!;
    this.legDownBtn = root.querySelector("#btn-leg-down")!;
    this.legOffBtn = root.querySelector("#btn-leg-off")!;

    this.gaitSelect.addEventListener("change", () => {
      this.client.send({ type: "gait_select", gait: this.gaitSelect.value });
    });
    this.startupBtn.addEventListener("click", () => {
      this.client.send({ type: "mode", mode: "startup" });
    });
    this.shutdownBtn.addEventListener("click", () => {
      this.client.send({ type: "mode", mode: "shutdown" });
    });
    this.bindHold(this.legUpBtn, () => (this.legHeld = 1));
    this.bindHold(this.legDownBtn, () => (this.legHeld = -1));
    this.legOffBtn.addEventListener("click", () => {
      this.client.send({
        type: "legipulate", leg: Number(this.legSelect.value),
        action: "off", vector: null, frame: "leg",
      });
    });

    for (const axis of POSE_AXES) {
      const minus = root.querySelector<HTMLButtonElement>(`#pose-${axis}-minus`)!;
      const plus = root.querySelector<HTMLButtonElement>(`#pose-${axis}-plus`)!;
      const i = POSE_AXES.indexOf(axis);
      this.bindHold(minus, () => (this.poseHeld[i] = -1), () => (this.poseHeld[i] = 0));
      this.bindHold(plus, () => (this.poseHeld[i] = 1), () => (this.poseHeld[i] = 0));
    }
  }

  private bindHold(btn: HTMLButtonElement, press: () => void, release?: () => void) {
    const stop = () => {
      if (release) release();
      else this.legHeld = 0;
    };
    btn.addEventListener("pointerdown", (ev) => {
      btn.setPointerCapture(ev.pointerId);
      press();
    });
    btn.addEventListener("pointerup", stop);
    btn.addEventListener("pointercancel", stop);
  }

  populate(hello: Hello) {
    this.gaitSelect.innerHTML = "";
    for (const gait of hello.gaits) {
      const opt = document.createElement("option");
      opt.value = gait;
      opt.textContent = gait;
      if (gait === "tripod") opt.selected = true;
      this.gaitSelect.appendChild(opt);
    }
    this.legSelect.innerHTML = "";
    for (const leg of hello.robot.legs) {
      const opt = document.createElement("option");
      opt.value = String(leg.id);
      opt.textContent = `leg ${leg.id}`;
      this.legSelect.appendChild(opt);
    }
  }

  // called at the command cadence: emits held pose / leg nudges
  pump(translationRate: number, rotationRate: number, legRate: number) {
    if (this.poseHeld.some((v) => v !== 0)) {
      const lin = this.poseHeld.slice(0, 3).map((v) => v * translationRate);
      const ang = this.poseHeld.slice(3).map((v) => v * rotationRate);
      this.client.send({ type: "pose_velocity", linear: lin, angular: ang });
    }
    if (this.legHeld !== 0) {
      this.client.send({
        type: "legipulate", leg: Number(this.legSelect.value),
        action: "velocity", vector: [0, 0, this.legHeld * legRate], frame: "leg",
      });
    }
  }

  reflectMode(state: StateMessage) {
    const walking = state.mode === "walking";
    const ready = state.mode === "ready";
    this.startupBtn.disabled = state.mode !== "packed";
    this.shutdownBtn.disabled = !(ready || walking);
    // manipulation only while standing
    for (const btn of [this.legUpBtn, this.legDownBtn, this.legOffBtn]) {
      btn.disabled = !ready;
    }
    this.legSelect.disabled = !ready;
  }
}
