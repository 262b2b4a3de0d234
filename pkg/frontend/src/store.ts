// Latest-snapshot store plus short histories for the gait strip and the
// energy charts. Rendering reads from here only.

import { Hello, StateMessage } from "./protocol.js";

export interface PhaseSample {
  simTime: number;
  gait: string;
  phases: Map<number, "stance" | "swing">;
}

export interface MetricSample {
  simTime: number;
  power: number;
  cot: number | null;
  speed: number;
}

export class Store {
  hello: Hello | null = null;
  state: StateMessage | null = null;
  phaseHistory: PhaseSample[] = [];
  metricHistory: MetricSample[] = [];
  historySeconds = 12;
  private listeners: Array<() => void> = [];

  setHello(hello: Hello) {
    this.hello = hello;
    this.phaseHistory = [];
    this.metricHistory = [];
    this.notify();
  }

  setState(state: StateMessage) {
    this.state = state;
    const phases = new Map<number, "stance" | "swing">();
    for (const leg of state.legs) phases.set(leg.id, leg.phase);
    this.phaseHistory.push({ simTime: state.sim_time, gait: state.gait, phases });
    this.metricHistory.push({
      simTime: state.sim_time,
      power: state.metrics.power,
      cot: state.metrics.cot,
      speed: state.metrics.speed,
    });
    const cutoff = state.sim_time - this.historySeconds;
    while (this.phaseHistory.length > 1 && this.phaseHistory[0].simTime < cutoff) {
      this.phaseHistory.shift();
    }
    while (this.metricHistory.length > 1 && this.metricHistory[0].simTime < cutoff) {
      this.metricHistory.shift();
    }
    this.notify();
  }

  subscribe(fn: () => void) {
    this.listeners.push(fn);
  }

  private notify() {
    for (const fn of this.listeners) fn();
  }
}
