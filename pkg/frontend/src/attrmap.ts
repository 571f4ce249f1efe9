// Client-side attribute map: three float planes in [0,1], full image
// resolution (the map must match the image dimensions exactly).

export type Channel = 0 | 1 | 2;

export const CHANNEL_NAMES = ["noise", "scale", "jpeg"] as const;

export interface Rect {
  x0: number;
  y0: number;
  x1: number; // exclusive
  y1: number; // exclusive
}

export interface BrushState {
  channel: Channel;
  value: number;    // [0,1] target painted toward
  radius: number;   // px
  softness: number; // 0 = hard disc, 1 = fully feathered
}

export interface Point {
  x: number;
  y: number;
}

const clamp01 = (v: number) => (v < 0 ? 0 : v > 1 ? 1 : v);

export class AttributeMap {
  readonly width: number;
  readonly height: number;
  readonly planes: [Float32Array, Float32Array, Float32Array];

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) {
      throw new Error(`degenerate map size ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.planes = [
      new Float32Array(width * height),
      new Float32Array(width * height),
      new Float32Array(width * height),
    ];
  }

  clone(): AttributeMap {
    const out = new AttributeMap(this.width, this.height);
    for (let c = 0; c < 3; c++) out.planes[c].set(this.planes[c]);
    return out;
  }

  get(channel: Channel, x: number, y: number): number {
    return this.planes[channel][y * this.width + x];
  }

  set(channel: Channel, x: number, y: number, value: number): void {
    this.planes[channel][y * this.width + x] = clamp01(value);
  }

  fillChannel(channel: Channel, value: number): void {
    this.planes[channel].fill(clamp01(value));
  }

  gradientFill(channel: Channel, vStart: number, vEnd: number,
               axis: "horizontal" | "vertical"): void {
    const a = clamp01(vStart);
    const b = clamp01(vEnd);
    const n = axis === "horizontal" ? this.width : this.height;
    const plane = this.planes[channel];
    for (let y = 0; y < this.height; y++) {
      for (let x = 0; x < this.width; x++) {
        const i = axis === "horizontal" ? x : y;
        const t = n === 1 ? 0 : i / (n - 1);
        plane[y * this.width + x] = a + (b - a) * t;
      }
    }
  }
}

// Bounding box a stroke can touch; clipped to the map, empty rect when the
// path misses the canvas entirely.
export function strokeBounds(map: AttributeMap, brush: BrushState,
                             points: Point[]): Rect {
  if (points.length === 0) return { x0: 0, y0: 0, x1: 0, y1: 0 };
  const r = Math.ceil(brush.radius) + 1;
  let x0 = Infinity, y0 = Infinity, x1 = -Infinity, y1 = -Infinity;
  for (const p of points) {
    x0 = Math.min(x0, Math.floor(p.x) - r);
    y0 = Math.min(y0, Math.floor(p.y) - r);
    x1 = Math.max(x1, Math.ceil(p.x) + r + 1);
    y1 = Math.max(y1, Math.ceil(p.y) + r + 1);
  }
  return {
    x0: Math.max(0, x0),
    y0: Math.max(0, y0),
    x1: Math.min(map.width, x1),
    y1: Math.min(map.height, y1),
  };
}

function stamp(map: AttributeMap, brush: BrushState, cx: number, cy: number): void {
  const plane = map.planes[brush.channel];
  const r = brush.radius;
  const hardCore = r * (1 - brush.softness);
  const x0 = Math.max(0, Math.floor(cx - r));
  const x1 = Math.min(map.width - 1, Math.ceil(cx + r));
  const y0 = Math.max(0, Math.floor(cy - r));
  const y1 = Math.min(map.height - 1, Math.ceil(cy + r));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const d = Math.hypot(x - cx, y - cy);
      if (d > r) continue;
      let w: number;
      if (d <= hardCore || r === hardCore) {
        w = 1;
      } else {
        // cosine falloff from the hard core to the rim
        const t = (d - hardCore) / (r - hardCore);
        w = 0.5 * (1 + Math.cos(Math.PI * t));
      }
      const i = y * map.width + x;
      plane[i] = clamp01(plane[i] + w * (brush.value - plane[i]));
    }
  }
}

// Blend the selected plane toward the brush value along the stroke path.
// Out-of-bounds points are clipped by the stamp itself; other planes are
// untouched; a zero-length path changes nothing.
export function paintStroke(map: AttributeMap, brush: BrushState,
                            points: Point[]): Rect {
  const bounds = strokeBounds(map, brush, points);
  if (points.length === 0) return bounds;
  const step = Math.max(1, brush.radius / 2);
  let prev: Point | null = null;
  for (const p of points) {
    if (prev === null) {
      stamp(map, brush, p.x, p.y);
    } else {
      const dist = Math.hypot(p.x - prev.x, p.y - prev.y);
      const n = Math.max(1, Math.ceil(dist / step));
      for (let k = 1; k <= n; k++) {
        stamp(map, brush,
              prev.x + ((p.x - prev.x) * k) / n,
              prev.y + ((p.y - prev.y) * k) / n);
      }
    }
    prev = p;
  }
  return bounds;
}

export function snapshot(map: AttributeMap, channel: Channel,
                         rect: Rect): Float32Array {
  const w = rect.x1 - rect.x0;
  const h = rect.y1 - rect.y0;
  const out = new Float32Array(Math.max(0, w) * Math.max(0, h));
  const plane = map.planes[channel];
  let k = 0;
  for (let y = rect.y0; y < rect.y1; y++) {
    for (let x = rect.x0; x < rect.x1; x++) out[k++] = plane[y * map.width + x];
  }
  return out;
}

export function blit(map: AttributeMap, channel: Channel, rect: Rect,
                     data: Float32Array): void {
  const plane = map.planes[channel];
  let k = 0;
  for (let y = rect.y0; y < rect.y1; y++) {
    for (let x = rect.x0; x < rect.x1; x++) plane[y * map.width + x] = data[k++];
  }
}
