import { ParsedMesh } from "./obj";

export interface PlacedMesh {
  mesh: ParsedMesh;
  scale: number;
  translation: [number, number, number];
}

export interface Orbit {
  azimuth: number; // degrees around +z
  elevation: number; // degrees above the xy plane
  distance: number;
}

export interface ScreenTri {
  xs: [number, number, number];
  ys: [number, number, number];
  depth: number;
  fill: string;
}

const LIGHT = normalize([0.4, 0.25, 0.88]);
const NEAR = 0.05;

function normalize(v: [number, number, number]): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** Project placed meshes through a z-up orbit camera looking at the origin.
 * Returns screen triangles sorted back to front (painter's order) with flat
 * per-face shading baked into the fill color. Pure math, no DOM. */
export function projectScene(meshes: PlacedMesh[], orbit: Orbit, size: number, fovY = 49.1): ScreenTri[] {
  const az = (orbit.azimuth * Math.PI) / 180;
  const el = (orbit.elevation * Math.PI) / 180;
  const eye = [
    orbit.distance * Math.cos(el) * Math.cos(az),
    orbit.distance * Math.cos(el) * Math.sin(az),
    orbit.distance * Math.sin(el),
  ];
  const forward = normalize([-eye[0], -eye[1], -eye[2]]);
  let right = [forward[1], -forward[0], 0] as [number, number, number]; // forward x (0,0,1), degenerate at the poles
  if (Math.hypot(right[0], right[1]) < 1e-9) right = [1, 0, 0];
  right = normalize(right);
  const down: [number, number, number] = [
    forward[1] * right[2] - forward[2] * right[1],
    forward[2] * right[0] - forward[0] * right[2],
    forward[0] * right[1] - forward[1] * right[0],
  ];
  const focal = size / 2 / Math.tan((fovY * Math.PI) / 360);
  const half = size / 2;

  const out: ScreenTri[] = [];
  for (const placed of meshes) {
    const { positions, colors, triangles } = placed.mesh;
    const [tx, ty, tz] = placed.translation;
    const count = positions.length / 3;
    const u = new Float32Array(count);
    const v = new Float32Array(count);
    const z = new Float32Array(count);
    const world = new Float32Array(positions.length);
    for (let i = 0; i < count; i++) {
      const wx = positions[3 * i] * placed.scale + tx;
      const wy = positions[3 * i + 1] * placed.scale + ty;
      const wz = positions[3 * i + 2] * placed.scale + tz;
      world[3 * i] = wx;
      world[3 * i + 1] = wy;
      world[3 * i + 2] = wz;
      const qx = wx - eye[0];
      const qy = wy - eye[1];
      const qz = wz - eye[2];
      const depth = qx * forward[0] + qy * forward[1] + qz * forward[2];
      z[i] = depth;
      u[i] = half + (focal * (qx * right[0] + qy * right[1] + qz * right[2])) / depth;
      v[i] = half + (focal * (qx * down[0] + qy * down[1] + qz * down[2])) / depth;
    }
    for (let f = 0; f < triangles.length; f += 3) {
      const a = triangles[f];
      const b = triangles[f + 1];
      const c = triangles[f + 2];
      if (z[a] <= NEAR || z[b] <= NEAR || z[c] <= NEAR) continue;
      // flat shade off the world-space normal, double sided
      const e1 = [world[3 * b] - world[3 * a], world[3 * b + 1] - world[3 * a + 1], world[3 * b + 2] - world[3 * a + 2]];
      const e2 = [world[3 * c] - world[3 * a], world[3 * c + 1] - world[3 * a + 1], world[3 * c + 2] - world[3 * a + 2]];
      const n = normalize([
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
      ]);
      const lit = 0.35 + 0.65 * Math.abs(n[0] * LIGHT[0] + n[1] * LIGHT[1] + n[2] * LIGHT[2]);
      let cr = 0.7;
      let cg = 0.7;
      let cb = 0.7;
      if (colors) {
        cr = (colors[3 * a] + colors[3 * b] + colors[3 * c]) / 3;
        cg = (colors[3 * a + 1] + colors[3 * b + 1] + colors[3 * c + 1]) / 3;
        cb = (colors[3 * a + 2] + colors[3 * b + 2] + colors[3 * c + 2]) / 3;
      }
      out.push({
        xs: [u[a], u[b], u[c]],
        ys: [v[a], v[b], v[c]],
        depth: (z[a] + z[b] + z[c]) / 3,
        fill: `rgb(${Math.round(255 * cr * lit)},${Math.round(255 * cg * lit)},${Math.round(255 * cb * lit)})`,
      });
    }
  }
  out.sort((p, q) => q.depth - p.depth);
  return out;
}

/** Camera distance that comfortably frames every placed vertex. */
export function fitDistance(meshes: PlacedMesh[]): number {
  let radius = 0;
  for (const placed of meshes) {
    const { positions } = placed.mesh;
    for (let i = 0; i < positions.length; i += 3) {
      const x = positions[i] * placed.scale + placed.translation[0];
      const y = positions[i + 1] * placed.scale + placed.translation[1];
      const z = positions[i + 2] * placed.scale + placed.translation[2];
      radius = Math.max(radius, Math.hypot(x, y, z));
    }
  }
  return Math.max(0.5, 2.6 * radius);
}

/** Canvas mesh preview with drag-to-orbit and wheel zoom. */
export class MeshView {
  readonly canvas: HTMLCanvasElement;
  readonly status: HTMLElement;
  orbit: Orbit = { azimuth: 30, elevation: 25, distance: 2.5 };
  lastTriangleCount = 0;
  private meshes: PlacedMesh[] = [];
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(container: HTMLElement, size = 240) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = size;
    this.canvas.height = size;
    this.canvas.className = "mesh-canvas";
    this.status = document.createElement("div");
    this.status.className = "mesh-status";
    this.status.textContent = "no mesh";
    container.appendChild(this.canvas);
    container.appendChild(this.status);

    this.canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    window.addEventListener("mouseup", () => {
      this.dragging = false;
    });
    this.canvas.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      this.orbit.azimuth -= (e.clientX - this.lastX) * 0.6;
      this.orbit.elevation = Math.max(-89, Math.min(89, this.orbit.elevation + (e.clientY - this.lastY) * 0.6));
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.render();
    });
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.distance = Math.max(0.2, this.orbit.distance * (e.deltaY > 0 ? 1.12 : 1 / 1.12));
      this.render();
    });
  }

  setMeshes(meshes: PlacedMesh[], refit = true): void {
    this.meshes = meshes;
    if (refit && meshes.length) this.orbit.distance = fitDistance(meshes);
    this.render();
  }

  render(): void {
    const tris = projectScene(this.meshes, this.orbit, this.canvas.width);
    this.lastTriangleCount = tris.length;
    this.status.textContent = tris.length ? `${tris.length} triangles` : "no mesh";
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#0b1220";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    for (const t of tris) {
      ctx.beginPath();
      ctx.moveTo(t.xs[0], t.ys[0]);
      ctx.lineTo(t.xs[1], t.ys[1]);
      ctx.lineTo(t.xs[2], t.ys[2]);
      ctx.closePath();
      ctx.fillStyle = t.fill;
      ctx.fill();
    }
  }
}
