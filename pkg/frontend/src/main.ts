/**
 * Browser entry point: webcam -> hand estimator -> landmark frames over the
 * wire; render loop draws the latest robot state, tactile heatmap, and
 * session banner. Configuration comes from the URL query:
 *
 *   ?server=ws://host:port/ws&session=lab&user=me
 *   &trace=/path/to/trace.jsonl   (optional: replay instead of webcam)
 */

import { TeleopClient, connectWebSocket } from "./client.js";
import { EstimatorResults, handsFromResults, toFramePayload } from "./landmarks.js";
import { RobotStatePayload, TactilePayload } from "./protocol.js";
import { CellScene, drawScene } from "./render.js";
import { parseTrace, playTrace } from "./tracePlayer.js";

declare global {
  interface Window {
    Hands?: new (config: { locateFile(file: string): string }) => {
      setOptions(options: Record<string, unknown>): void;
      onResults(cb: (results: EstimatorResults) => void): void;
      send(input: { image: HTMLVideoElement }): Promise<void>;
    };
  }
}

function query(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

async function startWebcam(client: TeleopClient, statusEl: HTMLElement): Promise<boolean> {
  if (!window.Hands || !navigator.mediaDevices?.getUserMedia) return false;
  const video = document.getElementById("camera") as HTMLVideoElement;
  try {
    video.srcObject = await navigator.mediaDevices.getUserMedia({
      video: { width: 640, height: 480 },
    });
    await video.play();
  } catch {
    return false;
  }
  const hands = new window.Hands({
    locateFile: (file) => `https://cdn.jsdelivr.net/npm/@mediapipe/hands/${file}`,
  });
  hands.setOptions({
    maxNumHands: 2,
    modelComplexity: 1,
    minDetectionConfidence: 0.6,
    minTrackingConfidence: 0.6,
  });
  hands.onResults((results) => {
    // No hand in view -> nothing sent; the server's absence timeout
    // resolves the gesture to NoGesture.
    for (const hand of handsFromResults(results)) {
      client.sendFrame(toFramePayload(hand, client.view.user, client.nowMs()));
    }
  });
  let frames = 0;
  let windowStart = performance.now();
  const pump = async () => {
    await hands.send({ image: video });
    frames += 1;
    const now = performance.now();
    if (now - windowStart >= 1000) {
      statusEl.textContent = `webcam ${frames} fps`;
      frames = 0;
      windowStart = now;
    }
    requestAnimationFrame(pump);
  };
  requestAnimationFrame(pump);
  return true;
}

async function startTracePlayback(client: TeleopClient, url: string, statusEl: HTMLElement) {
  const response = await fetch(url);
  const records = parseTrace(await response.text());
  statusEl.textContent = `replaying ${records.length} trace frames`;
  playTrace(records, (payload) => client.sendFrame(payload), client.view.user);
}

function main(): void {
  const session = query("session", "lab");
  const user = query("user", `web-${Math.floor(Math.random() * 10000)}`);
  const defaultServer = `ws://${window.location.hostname || "127.0.0.1"}:8700/ws`;
  const server = query("server", defaultServer);
  const trace = query("trace", "");

  const canvas = document.getElementById("cell") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  const statusEl = document.getElementById("capture-status")!;

  const client = new TeleopClient(session, user);
  connectWebSocket(client, server);

  document.getElementById("request-control")!.addEventListener("click", () => {
    client.requestControl();
  });

  const scene: CellScene = { state: null, tactile: null, view: client.view };
  const render = () => {
    scene.state = client.mail.latest<RobotStatePayload>("robot_state")?.payload ?? scene.state;
    scene.tactile = client.mail.latest<TactilePayload>("tactile_frame")?.payload ?? scene.tactile;
    drawScene(ctx, scene);
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);

  if (trace) {
    void startTracePlayback(client, trace, statusEl);
  } else {
    void startWebcam(client, statusEl).then((ok) => {
      if (!ok) {
        statusEl.textContent =
          "no webcam/estimator available; pass ?trace=<url> to replay a recording";
      }
    });
  }
}

main();
