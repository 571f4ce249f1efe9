// Thin client for the /v1/ restoration service.  Requests are multipart
// form-data; the restore response is multipart/mixed with a JSON part and
// PNG parts, parsed here without any library.

export interface RestoreOptions {
  attributes?: { noise?: number; scale?: number; jpeg?: number };
  attrMapPng?: Uint8Array;
  referencePng?: Uint8Array;
  returnResidual?: boolean;
}

export interface RestoreResult {
  restoredPng: Uint8Array;
  residualPng?: Uint8Array;
  meta: Record<string, unknown>;
  timingMs: number;
}

export interface Part {
  type: string;
  data: Uint8Array;
}

function asciiIndexOf(haystack: Uint8Array, needle: string, from: number): number {
  outer: for (let i = from; i <= haystack.length - needle.length; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (haystack[i + j] !== needle.charCodeAt(j)) continue outer;
    }
    return i;
  }
  return -1;
}

export function parseMultipartMixed(body: Uint8Array,
                                    contentType: string): Map<string, Part> {
  const match = /boundary=([^;]+)/.exec(contentType);
  if (!match) throw new Error(`no boundary in content type ${contentType}`);
  const delim = `--${match[1].trim()}`;
  const parts = new Map<string, Part>();
  let pos = asciiIndexOf(body, delim, 0);
  while (pos >= 0) {
    pos += delim.length;
    if (body[pos] === 0x2d && body[pos + 1] === 0x2d) break; // closing --
    const headerEnd = asciiIndexOf(body, "\r\n\r\n", pos);
    if (headerEnd < 0) break;
    const headerText = new TextDecoder().decode(body.subarray(pos, headerEnd));
    const headers = new Map<string, string>();
    for (const line of headerText.split("\r\n")) {
      const idx = line.indexOf(":");
      if (idx > 0) {
        headers.set(line.slice(0, idx).trim().toLowerCase(),
                    line.slice(idx + 1).trim());
      }
    }
    const disposition = headers.get("content-disposition") ?? "";
    const nameMatch = /name="([^"]+)"/.exec(disposition);
    const length = Number(headers.get("content-length") ?? NaN);
    if (!nameMatch || !Number.isFinite(length)) {
      throw new Error("malformed multipart part headers");
    }
    const start = headerEnd + 4;
    parts.set(nameMatch[1], {
      type: headers.get("content-type") ?? "application/octet-stream",
      data: body.subarray(start, start + length),
    });
    pos = asciiIndexOf(body, delim, start + length);
  }
  return parts;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class RestoreClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string; model_loaded: boolean }> {
    const r = await fetch(this.url("/v1/health"));
    if (!r.ok) throw new ServiceError(r.status, await r.text());
    return r.json();
  }

  async modelInfo(): Promise<Record<string, unknown>> {
    const r = await fetch(this.url("/v1/model/info"));
    if (!r.ok) throw new ServiceError(r.status, await r.text());
    return r.json();
  }

  async restore(imagePng: Uint8Array, options: RestoreOptions): Promise<RestoreResult> {
    const form = new FormData();
    form.append("image", new Blob([imagePng as BlobPart], { type: "image/png" }),
                "image.png");
    const meta: Record<string, unknown> = {};
    if (options.attributes) meta.attributes = options.attributes;
    if (options.returnResidual) meta.return_residual = true;
    form.append("meta", JSON.stringify(meta));
    if (options.attrMapPng) {
      form.append("attr_map",
                  new Blob([options.attrMapPng as BlobPart], { type: "image/png" }),
                  "map.png");
    }
    if (options.referencePng) {
      form.append("reference",
                  new Blob([options.referencePng as BlobPart], { type: "image/png" }),
                  "reference.png");
    }
    const t0 = performance.now();
    const r = await fetch(this.url("/v1/restore"), { method: "POST", body: form });
    if (!r.ok) {
      let detail = await r.text();
      try {
        detail = (JSON.parse(detail) as { detail?: string }).detail ?? detail;
      } catch {
        // plain-text error body
      }
      throw new ServiceError(r.status, detail);
    }
    const body = new Uint8Array(await r.arrayBuffer());
    const parts = parseMultipartMixed(body, r.headers.get("content-type") ?? "");
    const metaPart = parts.get("meta");
    const restored = parts.get("restored");
    if (!metaPart || !restored) throw new ServiceError(502, "incomplete response");
    return {
      restoredPng: restored.data,
      residualPng: parts.get("residual")?.data,
      meta: JSON.parse(new TextDecoder().decode(metaPart.data)),
      timingMs: performance.now() - t0,
    };
  }

  async echoAttrMap(mapPng: Uint8Array): Promise<Uint8Array> {
    const form = new FormData();
    form.append("attr_map", new Blob([mapPng as BlobPart], { type: "image/png" }),
                "map.png");
    const r = await fetch(this.url("/v1/debug/attr-map-echo"),
                          { method: "POST", body: form });
    if (!r.ok) throw new ServiceError(r.status, await r.text());
    return new Uint8Array(await r.arrayBuffer());
  }
}
