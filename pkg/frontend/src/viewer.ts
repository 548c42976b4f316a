/** Dependency-free orbit/zoom point-cloud view on a 2D canvas.
 * Pure projection math is exported separately so it can be unit tested. */

export interface Camera {
  yaw: number;
  pitch: number;
  zoom: number;
}

export interface Projected {
  x: number;
  y: number;
  depth: number;
  index: number;
}

/** Rotate a point by the camera yaw (about +y) then pitch (about +x). */
export function rotate(
  p: [number, number, number],
  cam: Camera,
): [number, number, number] {
  const [x, y, z] = p;
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const x1 = cy * x + sy * z;
  const z1 = -sy * x + cy * z;
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  const y2 = cp * y - sp * z1;
  const z2 = sp * y + cp * z1;
  return [x1, y2, z2];
}

/** Orthographic projection of a flat xyz array into canvas pixels,
 * back-to-front sorted for painter's-algorithm drawing. */
export function project(
  points: number[],
  cam: Camera,
  width: number,
  height: number,
): Projected[] {
  const n = Math.floor(points.length / 3);
  const scale = (Math.min(width, height) / 2) * 0.85 * cam.zoom;
  const out: Projected[] = [];
  for (let i = 0; i < n; i++) {
    const [x, y, z] = rotate(
      [points[3 * i], points[3 * i + 1], points[3 * i + 2]],
      cam,
    );
    out.push({
      x: width / 2 + x * scale,
      y: height / 2 - y * scale,
      depth: z,
      index: i,
    });
  }
  out.sort((a, b) => a.depth - b.depth);
  return out;
}

export class CloudViewer {
  cam: Camera = { yaw: 0.6, pitch: 0.4, zoom: 1 };
  private points: number[] = [];
  private colors: string[] = [];
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private canvas: HTMLCanvasElement) {
    canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    window.addEventListener("mouseup", () => (this.dragging = false));
    window.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      this.cam.yaw += (e.clientX - this.lastX) * 0.01;
      this.cam.pitch += (e.clientY - this.lastY) * 0.01;
      this.cam.pitch = Math.max(-1.5, Math.min(1.5, this.cam.pitch));
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      this.draw();
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.cam.zoom *= e.deltaY < 0 ? 1.1 : 1 / 1.1;
      this.cam.zoom = Math.max(0.1, Math.min(10, this.cam.zoom));
      this.draw();
    });
  }

  setCloud(points: number[], colors: string[]): void {
    this.points = points;
    this.colors = colors;
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#101014";
    ctx.fillRect(0, 0, width, height);
    for (const p of project(this.points, this.cam, width, height)) {
      ctx.fillStyle = this.colors[p.index] ?? "#ffffff";
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
