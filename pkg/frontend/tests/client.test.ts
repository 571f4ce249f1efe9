import { describe, expect, it } from "vitest";

import { parseMultipartMixed } from "../src/client.js";

const BOUNDARY = "nbrestore-5c2b1f9e";

function buildBody(parts: Array<[string, string, Uint8Array]>): Uint8Array {
  const chunks: Uint8Array[] = [];
  const push = (s: string) => chunks.push(new TextEncoder().encode(s));
  for (const [name, type, data] of parts) {
    push(`--${BOUNDARY}\r\nContent-Type: ${type}\r\n` +
         `Content-Disposition: inline; name="${name}"\r\n` +
         `Content-Length: ${data.length}\r\n\r\n`);
    chunks.push(data);
    push("\r\n");
  }
  push(`--${BOUNDARY}--\r\n`);
  let total = 0;
  for (const c of chunks) total += c.length;
  const out = new Uint8Array(total);
  let pos = 0;
  for (const c of chunks) {
    out.set(c, pos);
    pos += c.length;
  }
  return out;
}

describe("parseMultipartMixed", () => {
  it("parses the service response layout", () => {
    const meta = new TextEncoder().encode('{"psnr": 42.0}');
    const png = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0, 1, 2, 3]);
    const body = buildBody([
      ["meta", "application/json", meta],
      ["restored", "image/png", png],
    ]);
    const parts = parseMultipartMixed(body,
      `multipart/mixed; boundary=${BOUNDARY}`);
    expect([...parts.keys()].sort()).toEqual(["meta", "restored"]);
    expect(parts.get("meta")!.type).toBe("application/json");
    expect(Array.from(parts.get("restored")!.data)).toEqual(Array.from(png));
  });

  it("binary payloads may contain CRLF and dashes", () => {
    const tricky = new TextEncoder().encode("\r\n--fake--\r\nstill data");
    const body = buildBody([["blob", "application/octet-stream", tricky]]);
    const parts = parseMultipartMixed(body,
      `multipart/mixed; boundary=${BOUNDARY}`);
    expect(new TextDecoder().decode(parts.get("blob")!.data))
      .toBe("\r\n--fake--\r\nstill data");
  });

  it("rejects a content type without a boundary", () => {
    expect(() => parseMultipartMixed(new Uint8Array(0), "text/plain"))
      .toThrow("boundary");
  });

  it("empty body yields no parts", () => {
    const parts = parseMultipartMixed(
      new TextEncoder().encode(`--${BOUNDARY}--\r\n`),
      `multipart/mixed; boundary=${BOUNDARY}`);
    expect(parts.size).toBe(0);
  });
});
