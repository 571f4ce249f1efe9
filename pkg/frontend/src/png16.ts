// Minimal PNG codec for the 16-bit 3-plane attribute-map wire format.
//
// Encoding writes stored (uncompressed) deflate blocks, which every PNG
// reader accepts, so no compression library is needed.  Decoding handles
// arbitrary zlib streams via the platform DecompressionStream (browser and
// Node 18+), because the server compresses its PNGs for real.

import { AttributeMap } from "./attrmap.js";

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

let crcTable: Uint32Array | null = null;

function crc32(data: Uint8Array): number {
  if (!crcTable) {
    crcTable = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      crcTable[n] = c >>> 0;
    }
  }
  let crc = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    crc = crcTable[(crc ^ data[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + payload.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, payload.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(payload, 8);
  view.setUint32(8 + payload.length, crc32(out.subarray(4, 8 + payload.length)));
  return out;
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  for (let off = 0; off < raw.length || off === 0; off += 65535) {
    const len = Math.min(65535, raw.length - off);
    const head = new Uint8Array(5);
    head[0] = off + len >= raw.length ? 1 : 0; // BFINAL on the last block
    head[1] = len & 0xff;
    head[2] = len >>> 8;
    head[3] = ~len & 0xff;
    head[4] = (~len >>> 8) & 0xff;
    blocks.push(head, raw.subarray(off, off + len));
    if (off + len >= raw.length) break;
  }
  const tail = new Uint8Array(4);
  new DataView(tail.buffer).setUint32(0, adler32(raw));
  blocks.push(tail);
  let total = 0;
  for (const b of blocks) total += b.length;
  const out = new Uint8Array(total);
  let pos = 0;
  for (const b of blocks) {
    out.set(b, pos);
    pos += b.length;
  }
  return out;
}

// 16-bit RGB PNG with the fixed channel order R,G,B = noise, scale, jpeg.
export function encodePng16(map: AttributeMap): Uint8Array {
  const { width: w, height: h } = map;
  const row = 1 + w * 6;
  const raw = new Uint8Array(h * row);
  for (let y = 0; y < h; y++) {
    const base = y * row;
    raw[base] = 0; // filter: none
    for (let x = 0; x < w; x++) {
      let o = base + 1 + x * 6;
      for (let c = 0 as 0 | 1 | 2; c < 3; c++) {
        const v = Math.min(1, Math.max(0, map.planes[c][y * w + x]));
        const q = Math.floor(v * 65535 + 0.5);
        raw[o++] = q >>> 8;
        raw[o++] = q & 0xff;
      }
    }
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, w);
  view.setUint32(4, h);
  ihdr[8] = 16; // bit depth
  ihdr[9] = 2;  // truecolor
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

// 8-bit grayscale PNG (test images and canvas-free clients).
export function encodePng8Gray(pixels: Uint8Array, width: number,
                               height: number): Uint8Array {
  const row = 1 + width;
  const raw = new Uint8Array(height * row);
  for (let y = 0; y < height; y++) {
    raw[y * row] = 0;
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * row + 1);
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  ihdr[8] = 8;
  ihdr[9] = 0; // grayscale
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  let total = 0;
  for (const p of parts) total += p.length;
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

async function inflate(zlibData: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream("deflate");
  const stream = new Blob([zlibData as BlobPart]).stream().pipeThrough(ds);
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  return pa <= pb && pa <= pc ? a : pb <= pc ? b : c;
}

function unfilter(raw: Uint8Array, width: number, height: number,
                  bpp: number): Uint8Array {
  const stride = width * bpp;
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    for (let x = 0; x < stride; x++) {
      const rawByte = raw[src + x];
      const left = x >= bpp ? out[dst + x - bpp] : 0;
      const up = y > 0 ? out[dst + x - stride] : 0;
      const upLeft = y > 0 && x >= bpp ? out[dst + x - stride - bpp] : 0;
      let value: number;
      switch (filter) {
        case 0: value = rawByte; break;
        case 1: value = rawByte + left; break;
        case 2: value = rawByte + up; break;
        case 3: value = rawByte + ((left + up) >> 1); break;
        case 4: value = rawByte + paeth(left, up, upLeft); break;
        default: throw new Error(`unsupported PNG filter ${filter}`);
      }
      out[dst + x] = value & 0xff;
    }
  }
  return out;
}

export async function decodePng16(data: Uint8Array): Promise<AttributeMap> {
  for (let i = 0; i < 8; i++) {
    if (data[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  while (pos < data.length) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(...data.subarray(pos + 4, pos + 8));
    const payload = data.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      const hv = new DataView(payload.buffer, payload.byteOffset, 13);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      if (payload[8] !== 16 || payload[9] !== 2) {
        throw new Error(
          `attribute map PNG must be 16-bit RGB, got depth ${payload[8]} ` +
          `color type ${payload[9]}`);
      }
      if (payload[12] !== 0) throw new Error("interlaced PNG unsupported");
    } else if (type === "IDAT") {
      idat.push(payload);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  let total = 0;
  for (const p of idat) total += p.length;
  const z = new Uint8Array(total);
  let off = 0;
  for (const p of idat) {
    z.set(p, off);
    off += p.length;
  }
  const raw = await inflate(z);
  const bytes = unfilter(raw, width, height, 6);
  const map = new AttributeMap(width, height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const o = (y * width + x) * 6;
      for (let c = 0 as 0 | 1 | 2; c < 3; c++) {
        const q = (bytes[o + c * 2] << 8) | bytes[o + c * 2 + 1];
        map.planes[c][y * width + x] = q / 65535;
      }
    }
  }
  return map;
}
