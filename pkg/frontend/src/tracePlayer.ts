/**
 * Replays a recorded landmark trace (JSONL) at its own timestamps.
 * The offline stand-in for the webcam estimator: same payloads, same pacing.
 */

import { LandmarkFramePayload } from "./protocol.js";

export interface TraceRecord {
  v: number;
  user: string;
  hand: "Left" | "Right";
  ts: number;
  conf: number;
  lm: [number, number, number][];
}

export function parseTrace(text: string): TraceRecord[] {
  const records: TraceRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    const obj = JSON.parse(trimmed) as TraceRecord;
    if (obj.v !== 1 || !Array.isArray(obj.lm) || obj.lm.length !== 21) {
      throw new Error("not a landmark trace line");
    }
    records.push(obj);
  }
  return records;
}

export function toPayload(record: TraceRecord, user?: string): LandmarkFramePayload {
  return {
    user: user ?? record.user,
    hand: record.hand,
    ts: record.ts,
    conf: record.conf,
    lm: record.lm,
  };
}

/**
 * Drives a callback with each frame at trace pacing; returns a stop handle.
 */
export function playTrace(
  records: TraceRecord[],
  emit: (payload: LandmarkFramePayload) => void,
  user?: string,
  speed = 1.0,
): { stop(): void } {
  let index = 0;
  let timer: ReturnType<typeof setTimeout> | null = null;
  const started = Date.now();
  const base = records.length > 0 ? records[0].ts : 0;

  const pump = () => {
    const elapsed = (Date.now() - started) * speed;
    while (index < records.length && records[index].ts - base <= elapsed) {
      emit(toPayload(records[index], user));
      index += 1;
    }
    if (index < records.length) {
      timer = setTimeout(pump, 5);
    }
  };
  pump();
  return {
    stop() {
      if (timer !== null) clearTimeout(timer);
      index = records.length;
    },
  };
}
