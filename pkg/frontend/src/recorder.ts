/** Episode recording state machine wrapping record_start / record_stop.
 *
 * Download is only available after a completed recording; the stop button is
 * disabled when idle and the download button is disabled while recording.
 */
import type { TeleopClient } from "./client.js";

export type RecorderState = "idle" | "recording" | "stopped";

export class EpisodeRecorder {
  state: RecorderState = "idle";
  /** Episode document returned by the last successful record_stop. */
  episode: Record<string, unknown> | null = null;

  constructor(private client: TeleopClient) {}

  get canStart(): boolean {
    return this.state !== "recording";
  }

  get canStop(): boolean {
    return this.state === "recording";
  }

  get canDownload(): boolean {
    return this.state !== "recording" && this.episode !== null;
  }

  async start(): Promise<boolean> {
    if (!this.canStart) return false;
    const response = await this.client.request({ type: "record_start" });
    if (response.ok) {
      this.state = "recording";
      this.episode = null;
      return true;
    }
    return false;
  }

  async stop(): Promise<boolean> {
    if (!this.canStop) return false; // stop without start is a no-op
    const response = await this.client.request({ type: "record_stop" });
    if (response.ok && typeof response["episode"] === "object" && response["episode"] !== null) {
      this.state = "stopped";
      this.episode = response["episode"] as Record<string, unknown>;
      return true;
    }
    this.state = "idle";
    return false;
  }

  /** Serialized episode for download; replayable by the headless CLI. */
  downloadPayload(): string | null {
    if (!this.canDownload) return null;
    return JSON.stringify(this.episode);
  }
}
