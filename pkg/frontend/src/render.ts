/**
 * Canvas rendering: orthographic line views of the arm, the gripper jaws,
 * the 10x10 tactile heatmap, gesture badges, and the token banner.
 */

import { forwardKinematics, Vec3 } from "./fk.js";
import { SessionView } from "./client.js";
import { RobotStatePayload, TactilePayload } from "./protocol.js";

export interface Viewport {
  x: number;
  y: number;
  width: number;
  height: number;
  scale: number; // pixels per meter
}

/** Orthographic projection of a world point into a viewport. */
export function project(
  point: Vec3,
  axes: [number, number], // world axis index for canvas (right, up)
  viewport: Viewport,
): [number, number] {
  const cx = viewport.x + viewport.width / 2;
  const cy = viewport.y + viewport.height * 0.72;
  return [
    cx + point[axes[0]] * viewport.scale,
    cy - point[axes[1]] * viewport.scale,
  ];
}

export function heatColor(value: number, maxValue: number): string {
  if (value <= 0) return "#10202c";
  const t = Math.min(value / Math.max(maxValue, 1e-9), 1);
  const red = Math.round(40 + 215 * t);
  const green = Math.round(60 + 120 * (1 - t));
  return `rgb(${red},${green},60)`;
}

export interface CellScene {
  state: RobotStatePayload | null;
  tactile: TactilePayload | null;
  view: SessionView;
}

export function drawScene(ctx: CanvasRenderingContext2D, scene: CellScene): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#0b1118";
  ctx.fillRect(0, 0, width, height);

  const side: Viewport = { x: 0, y: 0, width: width * 0.4, height, scale: height * 0.45 };
  const top: Viewport = { x: width * 0.4, y: 0, width: width * 0.3, height, scale: height * 0.45 };
  drawArmView(ctx, scene, side, [0, 2], "side (x-z)");
  drawArmView(ctx, scene, top, [0, 1], "top (x-y)");
  drawHeatmap(ctx, scene, { x: width * 0.72, y: height * 0.08, size: width * 0.24 });
  drawBanner(ctx, scene, width, height);
}

function drawArmView(
  ctx: CanvasRenderingContext2D,
  scene: CellScene,
  viewport: Viewport,
  axes: [number, number],
  label: string,
): void {
  ctx.strokeStyle = "#2a3a4a";
  ctx.strokeRect(viewport.x + 1, viewport.y + 1, viewport.width - 2, viewport.height - 2);
  ctx.fillStyle = "#7f97ab";
  ctx.font = "12px monospace";
  ctx.fillText(label, viewport.x + 8, viewport.y + 16);
  if (!scene.state) return;

  const fk = forwardKinematics(scene.state.q);
  const points = fk.joints.map((p) => project(p, axes, viewport));
  ctx.strokeStyle = "#58c4ff";
  ctx.lineWidth = 3;
  ctx.beginPath();
  points.forEach(([px, py], i) => (i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py)));
  ctx.stroke();
  ctx.fillStyle = "#9fd8ff";
  points.forEach(([px, py]) => {
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, Math.PI * 2);
    ctx.fill();
  });

  // gripper jaws: two short strokes split by the commanded opening
  const tcp = project(fk.position, axes, viewport);
  const jawGap = (scene.state.gripper * viewport.scale) / 2 + 2;
  ctx.strokeStyle = scene.state.gripper < 1e-4 ? "#ffb44f" : "#7fe08f";
  ctx.lineWidth = 2;
  for (const side of [-1, 1]) {
    ctx.beginPath();
    ctx.moveTo(tcp[0] + side * jawGap, tcp[1] - 7);
    ctx.lineTo(tcp[0] + side * jawGap, tcp[1] + 7);
    ctx.stroke();
  }
}

function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  scene: CellScene,
  box: { x: number; y: number; size: number },
): void {
  ctx.fillStyle = "#7f97ab";
  ctx.font = "12px monospace";
  ctx.fillText("tactile 10x10", box.x, box.y - 6);
  const grid = scene.tactile?.grid;
  const cell = box.size / 10;
  let peak = 0;
  grid?.forEach((row) => row.forEach((v) => (peak = Math.max(peak, v))));
  for (let r = 0; r < 10; r++) {
    for (let c = 0; c < 10; c++) {
      ctx.fillStyle = heatColor(grid?.[r]?.[c] ?? 0, Math.max(peak, 100));
      ctx.fillRect(box.x + c * cell, box.y + r * cell, cell - 1, cell - 1);
    }
  }
}

function drawBanner(
  ctx: CanvasRenderingContext2D,
  scene: CellScene,
  width: number,
  height: number,
): void {
  const view = scene.view;
  ctx.font = "13px monospace";
  const holder = view.tokenHolder ?? "nobody";
  const mine = view.tokenHolder === view.user;
  ctx.fillStyle = mine ? "#7fe08f" : "#ffb44f";
  ctx.fillText(`control: ${holder}${mine ? " (you)" : ""}`, 10, height - 32);
  ctx.fillStyle = "#c7d6e4";
  const left = view.lastGesture.Left?.class ?? "-";
  const right = view.lastGesture.Right?.class ?? "-";
  ctx.fillText(`gesture L:${left} R:${right}`, 10, height - 14);
  ctx.fillStyle = "#7f97ab";
  ctx.fillText(
    `${view.status} | frames sent ${view.framesSent} | drops ${view.droppedByServer}`,
    width * 0.4,
    height - 14,
  );
}
