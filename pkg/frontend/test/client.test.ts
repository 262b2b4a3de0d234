import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import { ConsoleClient, SocketLike } from "../src/client";

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = JSON.parse(
  readFileSync(join(here, "fixtures", "frames.json"), "utf-8"));

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  send(data: string) {
    this.sent.push(data);
  }
  close() {
    this.onclose?.();
  }
}

function makeClient(callbacks = {}) {
  const sock = new FakeSocket();
  const client = new ConsoleClient("ws://test/ws", callbacks, () => sock);
  client.connect();
  sock.onopen?.();
  return { client, sock };
}

describe("console client", () => {
  it("delivers hello and state frames to callbacks", () => {
    let hello: unknown = null;
    let states = 0;
    const { sock } = makeClient({
      onHello: (h: unknown) => (hello = h),
      onState: () => states++,
    });
    sock.onmessage?.({ data: JSON.stringify(fixtures.hello) });
    for (const frame of fixtures.frames_walk_forward) {
      sock.onmessage?.({ data: JSON.stringify(frame) });
    }
    expect(hello).not.toBeNull();
    expect(states).toBe(fixtures.frames_walk_forward.length);
  });

  it("numbers outgoing commands with increasing seq", () => {
    const { client, sock } = makeClient();
    client.send({ type: "gait_select", gait: "wave" });
    client.send({ type: "mode", mode: "startup" });
    const sent = sock.sent.map((s) => JSON.parse(s));
    expect(sent.map((m) => m.seq)).toEqual([1, 2]);
    expect(sent[0].proto).toBe(1);
  });

  it("refuses to send non-finite values", () => {
    const errors: string[] = [];
    const { client, sock } = makeClient({
      onError: (d: string) => errors.push(d),
    });
    const seq = client.send({
      type: "velocity",
      linear: [Number.NaN, 0, 0],
      angular: [0, 0, 0],
    });
    expect(seq).toBeNull();
    expect(sock.sent.length).toBe(0);
    expect(errors.length).toBe(1);
  });

  it("surfaces server error frames", () => {
    const errors: string[] = [];
    const { sock } = makeClient({ onError: (d: string) => errors.push(d) });
    sock.onmessage?.({
      data: JSON.stringify({ type: "error", proto: 1, seq: 3, detail: "nope" }),
    });
    expect(errors).toEqual(["nope"]);
  });

  it("reports closed status and does not send while disconnected", () => {
    const statuses: string[] = [];
    const { client, sock } = makeClient({
      onStatus: (s: string) => statuses.push(s),
    });
    sock.close();
    expect(statuses).toContain("closed");
    expect(client.send({ type: "gait_select", gait: "wave" })).toBeNull();
    client.close();
  });
});
