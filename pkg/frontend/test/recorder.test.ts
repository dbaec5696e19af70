import { describe, expect, it } from "vitest";

import { EpisodeRecorder } from "../src/recorder.js";
import type { TeleopClient } from "../src/client.js";
import type { Request, Response } from "../src/protocol.js";

/** Client stub answering record_start / record_stop like the server. */
function stubClient(episode: Record<string, unknown>) {
  const requests: Request[] = [];
  const client = {
    request(req: Request): Promise<Response> {
      requests.push(req);
      if (req.type === "record_start") return Promise.resolve({ ok: true });
      if (req.type === "record_stop") return Promise.resolve({ ok: true, episode });
      return Promise.resolve({
        ok: false,
        error: { code: "UnknownType", message: "stub" },
      });
    },
  } as unknown as TeleopClient;
  return { client, requests };
}

const EPISODE = { header: { version: "1.0" }, commands: [], snapshots: {} };

describe("EpisodeRecorder", () => {
  it("walks idle -> recording -> stopped and captures the episode", async () => {
    const { client } = stubClient(EPISODE);
    const recorder = new EpisodeRecorder(client);
    expect(recorder.canStop).toBe(false);
    expect(await recorder.start()).toBe(true);
    expect(recorder.state).toBe("recording");
    expect(await recorder.stop()).toBe(true);
    expect(recorder.state).toBe("stopped");
    expect(JSON.parse(recorder.downloadPayload()!)).toEqual(EPISODE);
  });

  it("disables download while recording", async () => {
    const { client } = stubClient(EPISODE);
    const recorder = new EpisodeRecorder(client);
    await recorder.start();
    await recorder.stop();
    expect(recorder.canDownload).toBe(true);
    await recorder.start(); // record again: stale episode no longer offered
    expect(recorder.canDownload).toBe(false);
    expect(recorder.downloadPayload()).toBeNull();
  });

  it("treats stop without start as a no-op", async () => {
    const { client, requests } = stubClient(EPISODE);
    const recorder = new EpisodeRecorder(client);
    expect(await recorder.stop()).toBe(false);
    expect(requests.length).toBe(0);
    expect(recorder.state).toBe("idle");
  });

  it("ignores a second start while recording", async () => {
    const { client, requests } = stubClient(EPISODE);
    const recorder = new EpisodeRecorder(client);
    await recorder.start();
    expect(await recorder.start()).toBe(false);
    expect(requests.filter((r) => r.type === "record_start").length).toBe(1);
  });
});
