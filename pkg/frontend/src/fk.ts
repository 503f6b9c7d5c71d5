/**
 * Client-side forward kinematics, mirroring the server's DH math so the
 * rendered arm agrees with the broadcast TCP pose (tested to 1e-6 m on
 * fixture states).
 */

export interface DhRow {
  a: number;
  d: number;
  alpha: number;
  theta_offset: number;
}

/** Same constants as the server's default chain. */
export const DEFAULT_CHAIN: DhRow[] = [
  { a: 0.0, d: 0.128, alpha: Math.PI / 2, theta_offset: 0.0 },
  { a: -0.612, d: 0.0, alpha: 0.0, theta_offset: 0.0 },
  { a: -0.572, d: 0.0, alpha: 0.0, theta_offset: 0.0 },
  { a: 0.0, d: 0.164, alpha: Math.PI / 2, theta_offset: 0.0 },
  { a: 0.0, d: 0.116, alpha: -Math.PI / 2, theta_offset: 0.0 },
  { a: 0.0, d: 0.092, alpha: 0.0, theta_offset: 0.0 },
];

export type Mat4 = number[]; // 16 entries, row-major
export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // (w, x, y, z), w >= 0

export function identity4(): Mat4 {
  return [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1];
}

export function matMul4(a: Mat4, b: Mat4): Mat4 {
  const out = new Array(16).fill(0);
  for (let i = 0; i < 4; i++) {
    for (let j = 0; j < 4; j++) {
      let sum = 0;
      for (let k = 0; k < 4; k++) sum += a[i * 4 + k] * b[k * 4 + j];
      out[i * 4 + j] = sum;
    }
  }
  return out;
}

export function dhTransform(row: DhRow, q: number): Mat4 {
  const theta = q + row.theta_offset;
  const ct = Math.cos(theta);
  const st = Math.sin(theta);
  const ca = Math.cos(row.alpha);
  const sa = Math.sin(row.alpha);
  return [
    ct, -st * ca, st * sa, row.a * ct,
    st, ct * ca, -ct * sa, row.a * st,
    0, sa, ca, row.d,
    0, 0, 0, 1,
  ];
}

/** Base-frame position of every joint plus the TCP (for the line render). */
export function jointPositions(q: number[], chain: DhRow[] = DEFAULT_CHAIN): Vec3[] {
  let T = identity4();
  const points: Vec3[] = [[0, 0, 0]];
  chain.forEach((row, i) => {
    T = matMul4(T, dhTransform(row, q[i] ?? 0));
    points.push([T[3], T[7], T[11]]);
  });
  return points;
}

export function quatFromMatrix(T: Mat4): Quat {
  const m = (r: number, c: number) => T[r * 4 + c];
  const trace = m(0, 0) + m(1, 1) + m(2, 2);
  let w: number, x: number, y: number, z: number;
  if (trace > 0) {
    const s = Math.sqrt(trace + 1) * 2;
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    const s = Math.sqrt(1 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) >= m(2, 2)) {
    const s = Math.sqrt(1 - m(0, 0) + m(1, 1) - m(2, 2)) * 2;
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const s = Math.sqrt(1 - m(0, 0) - m(1, 1) + m(2, 2)) * 2;
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  let quat: Quat = [w, x, y, z];
  const norm = Math.hypot(...quat);
  quat = quat.map((v) => v / norm) as Quat;
  if (quat[0] < 0) quat = quat.map((v) => -v) as Quat;
  return quat;
}

export interface FkResult {
  position: Vec3;
  quaternion: Quat;
  joints: Vec3[];
}

export function forwardKinematics(q: number[], chain: DhRow[] = DEFAULT_CHAIN): FkResult {
  let T = identity4();
  const joints: Vec3[] = [[0, 0, 0]];
  chain.forEach((row, i) => {
    T = matMul4(T, dhTransform(row, q[i] ?? 0));
    joints.push([T[3], T[7], T[11]]);
  });
  return {
    position: [T[3], T[7], T[11]],
    quaternion: quatFromMatrix(T),
    joints,
  };
}
