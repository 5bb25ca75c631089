import { describe, expect, it } from "vitest";
import * as zlib from "node:zlib";

import { decodePng, encodePng, fromBase64, inflateStored, RawImage, toBase64 } from "../src/png.js";

const nodeInflate = (data: Uint8Array) => new Uint8Array(zlib.inflateSync(data));

function randomImage(width: number, height: number, channels: 1 | 3 | 4, seed = 1): RawImage {
  let state = seed >>> 0;
  const next = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state & 0xff;
  };
  const data = new Uint8Array(width * height * channels);
  for (let i = 0; i < data.length; i++) data[i] = next();
  return { width, height, channels, data };
}

describe("png round trip", () => {
  it.each([[1], [3], [4]] as const)("encodes and decodes %i-channel images", (channels) => {
    const img = randomImage(17, 9, channels);
    const decoded = decodePng(encodePng(img));
    expect(decoded.width).toBe(17);
    expect(decoded.height).toBe(9);
    expect(decoded.channels).toBe(channels);
    expect(decoded.data).toEqual(img.data);
  });

  it("is bit-stable: same pixels always produce the same bytes", () => {
    const img = randomImage(16, 16, 1, 7);
    const a = encodePng(img);
    const b = encodePng({ ...img, data: img.data.slice() });
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("inflateStored agrees with node zlib on our own streams", () => {
    const img = randomImage(33, 21, 3, 3);
    const png = encodePng(img);
    expect(decodePng(png, inflateStored).data).toEqual(decodePng(png, nodeInflate).data);
  });

  it("handles images larger than one stored block", () => {
    const img = randomImage(256, 128, 3, 9); // raw stream > 65535 bytes
    expect(decodePng(encodePng(img)).data).toEqual(img.data);
  });

  it("rejects wrong buffer sizes", () => {
    expect(() =>
      encodePng({ width: 4, height: 4, channels: 1, data: new Uint8Array(3) }),
    ).toThrow(/pixel buffer/);
  });

  it("rejects non-PNG bytes", () => {
    expect(() => decodePng(new Uint8Array([1, 2, 3, 4, 5, 6, 7, 8]))).toThrow(/not a PNG/);
  });
});

describe("png filters", () => {
  function filterRow(
    filter: number,
    row: Uint8Array,
    prev: Uint8Array | null,
    channels: number,
  ): Uint8Array {
    const out = new Uint8Array(row.length);
    const paeth = (a: number, b: number, c: number) => {
      const p = a + b - c;
      const pa = Math.abs(p - a);
      const pb = Math.abs(p - b);
      const pc = Math.abs(p - c);
      if (pa <= pb && pa <= pc) return a;
      if (pb <= pc) return b;
      return c;
    };
    for (let x = 0; x < row.length; x++) {
      const a = x >= channels ? row[x - channels] : 0;
      const b = prev ? prev[x] : 0;
      const c = x >= channels && prev ? prev[x - channels] : 0;
      let pred = 0;
      if (filter === 1) pred = a;
      else if (filter === 2) pred = b;
      else if (filter === 3) pred = (a + b) >> 1;
      else if (filter === 4) pred = paeth(a, b, c);
      out[x] = (row[x] - pred) & 0xff;
    }
    return out;
  }

  it.each([[0], [1], [2], [3], [4]])("defilters type %i scanlines", (filter) => {
    const img = randomImage(12, 6, 3, filter + 11);
    const stride = img.width * img.channels;
    const raw = new Uint8Array((stride + 1) * img.height);
    for (let y = 0; y < img.height; y++) {
      const row = img.data.subarray(y * stride, (y + 1) * stride);
      const prev = y > 0 ? img.data.subarray((y - 1) * stride, y * stride) : null;
      raw[y * (stride + 1)] = filter;
      raw.set(filterRow(filter, row, prev, img.channels), y * (stride + 1) + 1);
    }
    // splice the filtered stream into a hand-built PNG with real zlib compression
    const reference = encodePng(img);
    const rebuilt = rebuildWithIdat(reference, new Uint8Array(zlib.deflateSync(raw)));
    expect(decodePng(rebuilt, nodeInflate).data).toEqual(img.data);
  });

  function rebuildWithIdat(template: Uint8Array, idatPayload: Uint8Array): Uint8Array {
    // copy signature + IHDR from the template, then write fresh IDAT/IEND
    const ihdrEnd = 8 + 4 + 4 + 13 + 4;
    const head = template.subarray(0, ihdrEnd);
    const crcTable = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      crcTable[n] = c >>> 0;
    }
    const crc32 = (bytes: Uint8Array) => {
      let crc = 0xffffffff;
      for (const b of bytes) crc = crcTable[(crc ^ b) & 0xff] ^ (crc >>> 8);
      return (crc ^ 0xffffffff) >>> 0;
    };
    const chunk = (type: string, payload: Uint8Array) => {
      const t = new TextEncoder().encode(type);
      const body = new Uint8Array(t.length + payload.length);
      body.set(t);
      body.set(payload, 4);
      const out = new Uint8Array(4 + body.length + 4);
      new DataView(out.buffer).setUint32(0, payload.length);
      out.set(body, 4);
      new DataView(out.buffer).setUint32(4 + body.length, crc32(body));
      return out;
    };
    const idat = chunk("IDAT", idatPayload);
    const iend = chunk("IEND", new Uint8Array(0));
    const out = new Uint8Array(head.length + idat.length + iend.length);
    out.set(head);
    out.set(idat, head.length);
    out.set(iend, head.length + idat.length);
    return out;
  }
});

describe("base64", () => {
  it("round trips arbitrary bytes", () => {
    const data = randomImage(11, 7, 3, 5).data;
    expect(fromBase64(toBase64(data))).toEqual(data);
  });

  it("matches Buffer's base64", () => {
    const data = randomImage(5, 5, 1, 2).data;
    expect(toBase64(data)).toBe(Buffer.from(data).toString("base64"));
    const fromNode = Buffer.from("aGVsbG8gd29ybGQ=", "base64");
    expect(fromBase64("aGVsbG8gd29ybGQ=")).toEqual(new Uint8Array(fromNode));
  });

  it("rejects invalid characters", () => {
    expect(() => fromBase64("@@@@")).toThrow(/invalid base64/);
  });
});
