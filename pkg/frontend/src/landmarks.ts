/**
 * Adapter from the in-browser hand estimator to landmark-frame payloads.
 *
 * The estimator emits 21 normalized landmarks per hand. Its ordering
 * (wrist, then four points per finger, thumb to pinky) already matches the
 * wire convention, so the permutation table is the identity; it stays
 * explicit so a different estimator only needs a new table.
 */

import { HandSide, LandmarkFramePayload } from "./protocol.js";

/** estimatorIndex -> wire index */
export const ESTIMATOR_TO_WIRE: readonly number[] = Object.freeze(
  Array.from({ length: 21 }, (_, i) => i),
);

export interface EstimatedLandmark {
  x: number;
  y: number;
  z: number;
}

export interface EstimatedHand {
  landmarks: EstimatedLandmark[];
  handedness: HandSide;
  score: number;
}

const clamp01 = (v: number) => Math.min(Math.max(v, 0), 1);

export function toFramePayload(
  hand: EstimatedHand,
  user: string,
  ts: number,
): LandmarkFramePayload {
  if (hand.landmarks.length !== 21) {
    throw new Error(`estimator produced ${hand.landmarks.length} landmarks`);
  }
  const lm: [number, number, number][] = new Array(21);
  hand.landmarks.forEach((point, estimatorIndex) => {
    const wireIndex = ESTIMATOR_TO_WIRE[estimatorIndex];
    lm[wireIndex] = [clamp01(point.x), clamp01(point.y), point.z];
  });
  return {
    user,
    hand: hand.handedness,
    ts: Math.round(ts),
    conf: clamp01(hand.score),
    lm,
  };
}

/**
 * Shape of the results object produced by the CDN-loaded estimator
 * (window.Hands). Only the fields this adapter touches.
 */
export interface EstimatorResults {
  multiHandLandmarks?: EstimatedLandmark[][];
  multiHandedness?: { label: string; score: number }[];
}

export function handsFromResults(results: EstimatorResults): EstimatedHand[] {
  const landmarks = results.multiHandLandmarks ?? [];
  const handedness = results.multiHandedness ?? [];
  const out: EstimatedHand[] = [];
  landmarks.forEach((points, i) => {
    const info = handedness[i];
    if (!info || points.length !== 21) return;
    const side: HandSide = info.label === "Left" ? "Left" : "Right";
    out.push({ landmarks: points, handedness: side, score: info.score });
  });
  return out;
}
