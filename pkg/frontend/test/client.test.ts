import { describe, expect, it } from "vitest";

import { backoffDelay, TeleopClient, type SocketLike } from "../src/client.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  receive(doc: unknown): void {
    this.onmessage?.({ data: JSON.stringify(doc) });
  }

  drop(): void {
    this.onclose?.();
  }
}

function connectedClient() {
  const sockets: FakeSocket[] = [];
  const delays: number[] = [];
  const scheduled: (() => void)[] = [];
  const client = new TeleopClient(
    "ws://test/ws",
    () => {
      const socket = new FakeSocket();
      sockets.push(socket);
      return socket;
    },
    { baseMs: 100, maxMs: 1000 },
    (fn, ms) => {
      delays.push(ms);
      scheduled.push(fn);
    },
    () => 1234,
  );
  client.connect();
  sockets[0]!.open();
  sockets[0]!.receive({
    ok: true,
    type: "hello",
    role: "driver",
    caps: { max_position_step: 0.02, max_rotation_step: 0.2 },
  });
  return { client, sockets, delays, scheduled };
}

describe("backoffDelay", () => {
  it("doubles until the cap", () => {
    const opts = { baseMs: 100, maxMs: 1000 };
    expect([0, 1, 2, 3, 4, 5].map((a) => backoffDelay(a, opts)))
      .toEqual([100, 200, 400, 800, 1000, 1000]);
  });
});

describe("TeleopClient", () => {
  it("stores role and caps from the hello frame", () => {
    const { client } = connectedClient();
    expect(client.status).toBe("connected");
    expect(client.role).toBe("driver");
    expect(client.caps).toEqual({ max_position_step: 0.02, max_rotation_step: 0.2 });
  });

  it("matches responses to requests by id", async () => {
    const { client, sockets } = connectedClient();
    const pending = client.request({ type: "step", n: 1 });
    const sent = JSON.parse(sockets[0]!.sent[0]!);
    expect(sent.type).toBe("step");
    expect(typeof sent.id).toBe("number");
    sockets[0]!.receive({ ok: true, id: sent.id, attached: 1 });
    const response = await pending;
    expect(response.ok).toBe(true);
  });

  it("keeps only the latest state frame out of the log", () => {
    const { client, sockets } = connectedClient();
    const frame = (step: number) => ({
      type: "state", t: step / 120, step, stride: 1, effectors: [],
      positions: [0, 0, step],
    });
    sockets[0]!.receive(frame(1));
    sockets[0]!.receive(frame(2));
    expect(client.latestFrame?.step).toBe(2);
    expect(client.points()).toEqual([[0, 0, 2]]);
    // state frames are not part of the session log
    expect(client.log.every((e) => (e.message as { type?: string }).type !== "state")).toBe(true);
  });

  it("logs sent commands and received acknowledgements in order", async () => {
    const { client, sockets } = connectedClient();
    const pending = client.request({ type: "grasp", point: [0, 0, 0.1] });
    const sent = JSON.parse(sockets[0]!.sent[0]!);
    sockets[0]!.receive({ ok: true, id: sent.id, attached: 2 });
    await pending;
    const directions = client.log.map((e) => e.direction);
    expect(directions).toEqual(["received", "sent", "received"]); // hello, grasp, ack
    expect(client.log[2]!.message).toMatchObject({ ok: true, attached: 2 });
  });

  it("surfaces server errors as responses, not exceptions", async () => {
    const { client, sockets } = connectedClient();
    const pending = client.request({ type: "grasp", point: [9, 9, 9] });
    const sent = JSON.parse(sockets[0]!.sent[0]!);
    sockets[0]!.receive({
      ok: false, id: sent.id,
      error: { code: "NoParticleInRange", message: "nothing near that point" },
    });
    const response = await pending;
    expect(response.ok).toBe(false);
    if (!response.ok) expect(response.error.code).toBe("NoParticleInRange");
  });

  it("reconnects with exponential backoff after a drop", () => {
    const { client, sockets, delays, scheduled } = connectedClient();
    sockets[0]!.drop();
    expect(client.status).toBe("reconnecting");
    expect(delays).toEqual([100]);
    scheduled[0]!(); // fire the first retry
    expect(sockets.length).toBe(2);
    sockets[1]!.drop(); // still down
    expect(delays).toEqual([100, 200]);
    scheduled[1]!();
    sockets[2]!.open(); // back up
    expect(client.status).toBe("connected");
    sockets[2]!.drop(); // counter reset after a successful connection
    expect(delays).toEqual([100, 200, 100]);
  });

  it("fails pending requests when the connection drops", async () => {
    const { client, sockets } = connectedClient();
    const pending = client.request({ type: "step", n: 1 });
    sockets[0]!.drop();
    const response = await pending;
    expect(response.ok).toBe(false);
    if (!response.ok) expect(response.error.code).toBe("Disconnected");
  });

  it("rejects requests while disconnected instead of throwing", async () => {
    const client = new TeleopClient("ws://test/ws", () => new FakeSocket());
    const response = await client.request({ type: "step", n: 1 });
    expect(response.ok).toBe(false);
  });

  it("does not reconnect after an explicit close", () => {
    const { client, sockets, scheduled } = connectedClient();
    client.close();
    expect(client.status).toBe("closed");
    sockets[0]!.drop();
    for (const fn of scheduled) fn();
    expect(sockets.length).toBe(1);
  });
});
