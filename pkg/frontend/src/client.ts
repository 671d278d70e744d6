/**
 * ClientEnv: a gym-style adapter over the lockstep wire protocol.
 * connect() performs the handshake and caches the layout manifests;
 * step()/reset() exchange ACT/RESET for OBS frames.
 */

import * as net from "node:net";
import { createHash } from "node:crypto";

import {
  Frame,
  FrameBuffer,
  MsgType,
  PROTOCOL_VERSION,
  ProtocolError,
  encodeFrame,
} from "./protocol.js";
import {
  Observation,
  ObservationLayout,
  unpackObservation,
} from "./obs.js";

export const N_MOTORS = 53;

export class VersionMismatchError extends Error {}
export class ServerError extends Error {
  constructor(public code: string, message: string) {
    super(`${code}: ${message}`);
  }
}

export interface Manifests {
  motor: { motor_count: number; vocal_slot: number; slots: unknown[] };
  touch: { touch_count: number; regions: unknown[] };
  observation: ObservationLayout;
}

class FrameStream {
  private pending: Frame[] = [];
  private waiters: Array<{
    resolve: (f: Frame) => void;
    reject: (e: Error) => void;
  }> = [];
  private buffer = new FrameBuffer();
  private closed: Error | null = null;

  constructor(private sock: net.Socket) {
    sock.on("data", (chunk: Buffer) => {
      this.buffer.push(chunk);
      try {
        for (;;) {
          const frame = this.buffer.next();
          if (frame === null) break;
          const waiter = this.waiters.shift();
          if (waiter) waiter.resolve(frame);
          else this.pending.push(frame);
        }
      } catch (e) {
        this.fail(e as Error);
      }
    });
    sock.on("error", (e) => this.fail(e));
    sock.on("close", () => this.fail(new Error("connection closed")));
  }

  private fail(e: Error): void {
    if (this.closed) return;
    this.closed = e;
    for (const w of this.waiters.splice(0)) w.reject(e);
  }

  recv(): Promise<Frame> {
    const frame = this.pending.shift();
    if (frame) return Promise.resolve(frame);
    if (this.closed) return Promise.reject(this.closed);
    return new Promise((resolve, reject) =>
      this.waiters.push({ resolve, reject }),
    );
  }

  send(type: MsgType, body: Record<string, unknown>): void {
    this.sock.write(encodeFrame(type, body));
  }
}

export class ClientEnv {
  private stream!: FrameStream;
  private sock!: net.Socket;
  manifests!: Manifests;
  serverSeed!: number;
  lastObservation: Observation | null = null;
  /** sha256 over every raw OBS frame received, matching the server's
   * recorder hash */
  private obsHash = createHash("sha256");

  static async connect(host: string, port: number): Promise<ClientEnv> {
    const env = new ClientEnv();
    await env.open(host, port);
    return env;
  }

  private open(host: string, port: number): Promise<void> {
    return new Promise<void>((resolve, reject) => {
      const sock = net.createConnection({ host, port }, () => resolve());
      sock.on("error", reject);
      this.sock = sock;
      this.stream = new FrameStream(sock);
    }).then(async () => {
      this.stream.send(MsgType.HELLO, {
        version: PROTOCOL_VERSION,
        role: "agent",
      });
      const hello = await this.stream.recv();
      if (hello.type === MsgType.ERROR) {
        const b = hello.body as { code: string; message: string };
        if (b.code === "version_mismatch") {
          throw new VersionMismatchError(b.message);
        }
        throw new ServerError(b.code, b.message);
      }
      if (hello.type !== MsgType.HELLO) {
        throw new ProtocolError(`expected HELLO, got ${MsgType[hello.type]}`);
      }
      const config = await this.stream.recv();
      if (config.type !== MsgType.CONFIG) {
        throw new ProtocolError(`expected CONFIG, got ${MsgType[config.type]}`);
      }
      this.manifests = (config.body as any).manifests as Manifests;
      this.serverSeed = (config.body as any).seed as number;
      await this.expectObs();
    });
  }

  private async expectObs(): Promise<Observation> {
    const frame = await this.stream.recv();
    if (frame.type === MsgType.ERROR) {
      const b = frame.body as { code: string; message: string };
      throw new ServerError(b.code, b.message);
    }
    if (frame.type !== MsgType.OBS) {
      throw new ProtocolError(`expected OBS, got ${MsgType[frame.type]}`);
    }
    this.obsHash.update(frame.raw);
    const obs = unpackObservation(frame, this.manifests.observation);
    this.lastObservation = obs;
    return obs;
  }

  /** Send one 53-value action; resolves with the next observation. */
  async step(action: ArrayLike<number>): Promise<Observation> {
    if (action.length !== N_MOTORS) {
      throw new RangeError(
        `action must have ${N_MOTORS} values, got ${action.length}`,
      );
    }
    this.stream.send(MsgType.ACT, { values: Array.from(action) });
    return this.expectObs();
  }

  async reset(
    seed?: number,
    overrides?: Record<string, unknown>,
  ): Promise<Observation> {
    this.stream.send(MsgType.RESET, {
      seed: seed ?? null,
      overrides: overrides ?? {},
    });
    return this.expectObs();
  }

  /**
   * Ask the server to run an experiment preset with this connection as
   * the agent. `act` is called for every observation until the server
   * reports the result.
   */
  async runEvaluation(
    preset: string,
    seed: number,
    makeAgent: (briefing: Record<string, unknown>) => (obs: Observation) => number[],
  ): Promise<Record<string, unknown>> {
    this.stream.send(MsgType.EVAL_START, { preset, seed });
    const start = await this.stream.recv();
    if (start.type === MsgType.ERROR) {
      const b = start.body as { code: string; message: string };
      throw new ServerError(b.code, b.message);
    }
    if (start.type !== MsgType.EVAL_START) {
      throw new ProtocolError(`expected EVAL_START ack, got ${MsgType[start.type]}`);
    }
    const briefing = (start.body as any).briefing as Record<string, unknown>;
    const act = makeAgent(briefing);
    for (;;) {
      const frame = await this.stream.recv();
      if (frame.type === MsgType.EVAL_RESULT) {
        return (frame.body as any).report as Record<string, unknown>;
      }
      if (frame.type === MsgType.ERROR) {
        const b = frame.body as { code: string; message: string };
        throw new ServerError(b.code, b.message);
      }
      if (frame.type !== MsgType.OBS) {
        throw new ProtocolError(`expected OBS, got ${MsgType[frame.type]}`);
      }
      this.obsHash.update(frame.raw);
      const obs = unpackObservation(frame, this.manifests.observation);
      this.lastObservation = obs;
      this.stream.send(MsgType.ACT, { values: act(obs) });
    }
  }

  /** Hex digest over all raw OBS frames received so far. */
  observationHashHex(): string {
    return this.obsHash.copy().digest("hex");
  }

  async bye(): Promise<void> {
    this.stream.send(MsgType.BYE, {});
    try {
      await this.stream.recv(); // server's BYE
    } catch {
      // server may close first; fine
    }
    this.sock.destroy();
  }

  close(): void {
    this.sock.destroy();
  }
}
