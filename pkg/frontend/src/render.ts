/**
 * Orthographic voxel renderer on a 2D canvas: orbit camera (drag), five
 * canonical view presets matching the instruction perspectives, and a
 * cardinal compass painted on the ground plane. Axis convention: x east,
 * y up, z south.
 */
import type { GridMap } from "./mirror.js";

export const PALETTE_COLORS: Record<number, string> = {
  50: "#3b6fd4", // blue
  51: "#4caf50", // green
  52: "#d8413c", // red
  53: "#ef8c2e", // orange
  54: "#8e5bc0", // purple
  57: "#e9d44a", // yellow
};

export interface Camera {
  yawDeg: number; // rotation about the vertical axis
  pitchDeg: number; // downward tilt
  zoom: number;
}

/** Viewing presets: named for where the viewer stands, looking at center. */
export const VIEW_PRESETS: Record<string, Camera> = {
  north: { yawDeg: 180, pitchDeg: 28, zoom: 1 },
  south: { yawDeg: 0, pitchDeg: 28, zoom: 1 },
  east: { yawDeg: 90, pitchDeg: 28, zoom: 1 },
  west: { yawDeg: -90, pitchDeg: 28, zoom: 1 },
  top: { yawDeg: 0, pitchDeg: 89, zoom: 1 },
};

const X_MIN = -5, X_MAX = 5, Z_MIN = -5, Z_MAX = 5;

interface Projected {
  sx: number;
  sy: number;
  depth: number;
}

function project(x: number, y: number, z: number, cam: Camera): Projected {
  const yaw = (cam.yawDeg * Math.PI) / 180;
  const pitch = (cam.pitchDeg * Math.PI) / 180;
  const rx = x * Math.cos(yaw) - z * Math.sin(yaw);
  const rz = x * Math.sin(yaw) + z * Math.cos(yaw);
  const sy = y * Math.cos(pitch) - rz * Math.sin(pitch);
  const depth = y * Math.sin(pitch) + rz * Math.cos(pitch);
  return { sx: rx, sy, depth };
}

function shade(hex: string, factor: number): string {
  const n = parseInt(hex.slice(1), 16);
  const channel = (shift: number) =>
    Math.max(0, Math.min(255, Math.round(((n >> shift) & 0xff) * factor)));
  return `rgb(${channel(16)}, ${channel(8)}, ${channel(0)})`;
}

export class VoxelView {
  readonly canvas: HTMLCanvasElement;
  camera: Camera = { ...VIEW_PRESETS.south };
  private grid: GridMap | null = null;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    canvas.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      this.camera.yawDeg += (e.clientX - this.lastX) * 0.5;
      this.camera.pitchDeg = Math.max(
        5, Math.min(89, this.camera.pitchDeg + (e.clientY - this.lastY) * 0.5),
      );
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.draw();
    });
    for (const kind of ["mouseup", "mouseleave"]) {
      canvas.addEventListener(kind, () => {
        this.dragging = false;
      });
    }
  }

  setPreset(name: string): void {
    const preset = VIEW_PRESETS[name];
    if (preset) {
      this.camera = { ...preset };
      this.draw();
    }
  }

  show(grid: GridMap): void {
    this.grid = grid;
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return; // jsdom canvases have no 2D context; rendering is visual-only
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const scale = (Math.min(width, height) / 16) * this.camera.zoom;
    const toScreen = (p: Projected): [number, number] => [
      width / 2 + p.sx * scale,
      height / 2 - p.sy * scale + scale * 1.5,
    ];

    // ground plane grid
    ctx.strokeStyle = "#d5d9de";
    ctx.lineWidth = 1;
    for (let x = X_MIN; x <= X_MAX + 1; x++) {
      this.line(ctx, toScreen, [x, 0, Z_MIN], [x, 0, Z_MAX + 1]);
    }
    for (let z = Z_MIN; z <= Z_MAX + 1; z++) {
      this.line(ctx, toScreen, [X_MIN, 0, z], [X_MAX + 1, 0, z]);
    }

    // compass letters just outside the footprint
    ctx.fillStyle = "#49505a";
    ctx.font = "bold 14px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    const compass: Array<[string, number, number]> = [
      ["N", 0.5, Z_MIN - 1],
      ["S", 0.5, Z_MAX + 2],
      ["E", X_MAX + 2, 0.5],
      ["W", X_MIN - 1, 0.5],
    ];
    for (const [label, cx, cz] of compass) {
      const [sx, sy] = toScreen(project(cx, 0, cz, this.camera));
      ctx.fillText(label, sx, sy);
    }

    if (!this.grid) return;
    const cubes = this.grid.entries().map(([x, y, z, id]) => ({
      x, y, z, id,
      depth: project(x + 0.5, y + 0.5, z + 0.5, this.camera).depth,
    }));
    cubes.sort((a, b) => a.depth - b.depth);
    for (const cube of cubes) {
      this.drawCube(ctx, toScreen, cube.x, cube.y, cube.z, cube.id);
    }
  }

  private line(
    ctx: CanvasRenderingContext2D,
    toScreen: (p: Projected) => [number, number],
    a: [number, number, number],
    b: [number, number, number],
  ): void {
    const [ax, ay] = toScreen(project(a[0], a[1], a[2], this.camera));
    const [bx, by] = toScreen(project(b[0], b[1], b[2], this.camera));
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  private drawCube(
    ctx: CanvasRenderingContext2D,
    toScreen: (p: Projected) => [number, number],
    x: number,
    y: number,
    z: number,
    id: number,
  ): void {
    const color = PALETTE_COLORS[id] ?? "#9aa0a8";
    const c = (dx: number, dy: number, dz: number) =>
      toScreen(project(x + dx, y + dy, z + dz, this.camera));
    const faces: Array<{ corners: Array<[number, number]>; factor: number; facing: number }> = [
      // top face always; side faces by camera yaw quadrant
      { corners: [c(0, 1, 0), c(1, 1, 0), c(1, 1, 1), c(0, 1, 1)], factor: 1.0, facing: 1 },
    ];
    const yaw = ((this.camera.yawDeg % 360) + 360) % 360;
    const southFacing = yaw < 90 || yaw > 270; // viewer south of the block
    const eastFacing = yaw > 180;
    faces.push(
      southFacing
        ? { corners: [c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)], factor: 0.8, facing: 1 }
        : { corners: [c(0, 0, 0), c(1, 0, 0), c(1, 1, 0), c(0, 1, 0)], factor: 0.8, facing: 1 },
      eastFacing
        ? { corners: [c(1, 0, 0), c(1, 0, 1), c(1, 1, 1), c(1, 1, 0)], factor: 0.62, facing: 1 }
        : { corners: [c(0, 0, 0), c(0, 0, 1), c(0, 1, 1), c(0, 1, 0)], factor: 0.62, facing: 1 },
    );
    for (const face of faces) {
      ctx.beginPath();
      ctx.moveTo(face.corners[0][0], face.corners[0][1]);
      for (const [px, py] of face.corners.slice(1)) ctx.lineTo(px, py);
      ctx.closePath();
      ctx.fillStyle = shade(color, face.factor);
      ctx.fill();
      ctx.strokeStyle = "rgba(30, 34, 40, 0.35)";
      ctx.stroke();
    }
  }
}
