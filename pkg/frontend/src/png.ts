/**
 * Minimal PNG codec for the two shapes the service produces: 8-bit
 * grayscale frames and 8-bit indexed (palette) masks. Masks round-trip
 * pixel-exact: the label array IS the palette-index array.
 *
 * zlib (de)compression uses the web-standard CompressionStream /
 * DecompressionStream, available in browsers and Node alike, so the
 * package needs no dependencies.
 */

export interface DecodedPng {
  width: number;
  height: number;
  /** 0 = grayscale, 3 = indexed. */
  colorType: number;
  /** One byte per pixel, row-major: gray levels or palette indices. */
  pixels: Uint8Array;
  /** RGB triples, 256 entries, for indexed images; null for grayscale. */
  palette: Uint8Array | null;
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

/**
 * The palette the service writes: label 0 is black and each label id
 * spreads its bits across the RGB channels from the top bit down, so
 * small ids get saturated, easily distinguished colors (1 -> 128,0,0;
 * 2 -> 0,128,0; ...).
 */
export function maskPalette(): Uint8Array {
  const pal = new Uint8Array(256 * 3);
  for (let id = 0; id < 256; id++) {
    for (let shift = 0; shift < 8; shift++) {
      for (let c = 0; c < 3; c++) {
        pal[id * 3 + c] |= ((id >> (3 * shift + c)) & 1) << (7 - shift);
      }
    }
  }
  return pal;
}

/** RGB color assigned to a label id by the mask palette. */
export function labelColor(id: number): [number, number, number] {
  const pal = maskPalette();
  return [pal[id * 3], pal[id * 3 + 1], pal[id * 3 + 2]];
}

// --- zlib via web streams ---------------------------------------------------

async function pipe(
  data: Uint8Array,
  stream: CompressionStream | DecompressionStream,
): Promise<Uint8Array> {
  const body = new Blob([data as BlobPart]).stream().pipeThrough(stream);
  return new Uint8Array(await new Response(body).arrayBuffer());
}

const inflate = (d: Uint8Array) => pipe(d, new DecompressionStream("deflate"));
const deflate = (d: Uint8Array) => pipe(d, new CompressionStream("deflate"));

// --- CRC32 for chunk writing --------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

// --- decoding -----------------------------------------------------------------

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function unfilter(raw: Uint8Array, width: number, height: number): Uint8Array {
  // one byte per pixel for both supported color types
  const stride = width;
  const out = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    for (let x = 0; x < width; x++) {
      const value = raw[src + x];
      const left = x > 0 ? out[dst + x - 1] : 0;
      const up = y > 0 ? out[dst + x - stride] : 0;
      const upLeft = x > 0 && y > 0 ? out[dst + x - stride - 1] : 0;
      let recon: number;
      switch (filter) {
        case 0: recon = value; break;
        case 1: recon = value + left; break;
        case 2: recon = value + up; break;
        case 3: recon = value + ((left + up) >> 1); break;
        case 4: recon = value + paeth(left, up, upLeft); break;
        default: throw new Error(`unsupported PNG filter ${filter}`);
      }
      out[dst + x] = recon & 0xff;
    }
  }
  return out;
}

function readU32(bytes: Uint8Array, at: number): number {
  return ((bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3]) >>> 0;
}

/** Decode a PNG produced by the service (8-bit grayscale or indexed). */
export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  if (bytes.length < 8 || SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("not a PNG file");
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let palette: Uint8Array | null = null;
  const idat: Uint8Array[] = [];
  let at = 8;
  while (at + 8 <= bytes.length) {
    const length = readU32(bytes, at);
    const type = String.fromCharCode(...bytes.subarray(at + 4, at + 8));
    const data = bytes.subarray(at + 8, at + 8 + length);
    if (type === "IHDR") {
      width = readU32(data, 0);
      height = readU32(data, 4);
      bitDepth = data[8];
      colorType = data[9];
      if (data[12] !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "PLTE") {
      palette = new Uint8Array(768);
      palette.set(data.subarray(0, Math.min(768, data.length)));
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    at += 12 + length;
  }
  if (width === 0 || height === 0) throw new Error("not a PNG file");
  if (bitDepth !== 8 || (colorType !== 0 && colorType !== 3)) {
    throw new Error(
      `unsupported PNG layout (bit depth ${bitDepth}, color type ${colorType})`,
    );
  }
  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let offset = 0;
  for (const chunk of idat) {
    compressed.set(chunk, offset);
    offset += chunk.length;
  }
  const raw = await inflate(compressed);
  if (raw.length !== height * (width + 1)) {
    throw new Error("corrupt PNG pixel data");
  }
  return { width, height, colorType, pixels: unfilter(raw, width, height), palette };
}

// --- encoding -----------------------------------------------------------------

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, data.length);
  const typeBytes = new TextEncoder().encode(type);
  out.set(typeBytes, 4);
  out.set(data, 8);
  view.setUint32(8 + data.length, crc32(typeBytes, data));
  return out;
}

/**
 * Encode a label array as an 8-bit indexed PNG with the service's
 * palette — byte-compatible with what the propagation engine writes.
 */
export async function encodeIndexedPng(
  labels: Uint8Array,
  width: number,
  height: number,
): Promise<Uint8Array> {
  if (labels.length !== width * height) {
    throw new Error(`label array has ${labels.length} entries, expected ${width * height}`);
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  ihdr[8] = 8;  // bit depth
  ihdr[9] = 3;  // indexed
  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw.set(labels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const idat = await deflate(raw);
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("PLTE", maskPalette()),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ];
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}
