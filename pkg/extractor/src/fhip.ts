/** FHIP1 bundle files: the byte layout consumed by the training pipeline.
 *
 * Header (24 bytes, little-endian): magic "FHIP", u32 version = 1,
 * u64 sample count N, u32 feature dim m, u32 class count d. Then N*m
 * float32 features row-major, then N uint32 label indices. Writing is
 * atomic (temp file + rename) so a crash never leaves a partial bundle.
 */

import { readFileSync, renameSync, rmSync, writeFileSync } from 'node:fs'

import {
  BundleDimensionError,
  BundleFormatError,
  BundleMagicError,
  BundleTruncatedError,
  BundleVersionError,
} from './errors.js'

export const BUNDLE_MAGIC = 'FHIP'
export const BUNDLE_VERSION = 1
export const BUNDLE_HEADER_BYTES = 24

export interface Bundle {
  /** Row-major N*m feature values. */
  features: Float32Array
  /** N class indices, each < classCount. */
  labels: Uint32Array
  featureDim: number
  classCount: number
}

export function sampleCount(bundle: Bundle): number {
  return bundle.labels.length
}

export function encodeBundle(bundle: Bundle): Buffer {
  const n = bundle.labels.length
  const m = bundle.featureDim
  const d = bundle.classCount
  if (n < 1 || m < 1 || d < 1) {
    throw new BundleDimensionError(`refusing to encode empty bundle (${n}, ${m}, ${d})`)
  }
  if (bundle.features.length !== n * m) {
    throw new BundleDimensionError(
      `features hold ${bundle.features.length} values, expected ${n * m}`,
    )
  }
  for (const label of bundle.labels) {
    if (label >= d) {
      throw new BundleDimensionError(`label ${label} out of range for ${d} classes`)
    }
  }
  const out = Buffer.alloc(BUNDLE_HEADER_BYTES + 4 * n * m + 4 * n)
  out.write(BUNDLE_MAGIC, 0, 'ascii')
  out.writeUInt32LE(BUNDLE_VERSION, 4)
  out.writeBigUInt64LE(BigInt(n), 8)
  out.writeUInt32LE(m, 16)
  out.writeUInt32LE(d, 20)
  Buffer.from(bundle.features.buffer, bundle.features.byteOffset, 4 * n * m).copy(
    out,
    BUNDLE_HEADER_BYTES,
  )
  Buffer.from(bundle.labels.buffer, bundle.labels.byteOffset, 4 * n).copy(
    out,
    BUNDLE_HEADER_BYTES + 4 * n * m,
  )
  return out
}

/** Write the bundle through a temp file so readers never see a torn write. */
export function writeBundle(path: string, bundle: Bundle): void {
  const tmp = `${path}.tmp`
  try {
    writeFileSync(tmp, encodeBundle(bundle))
    renameSync(tmp, path)
  } catch (err) {
    rmSync(tmp, { force: true })
    throw err
  }
}

export function decodeBundle(raw: Buffer, source = 'bundle'): Bundle {
  if (raw.subarray(0, 4).toString('ascii') !== BUNDLE_MAGIC) {
    throw new BundleMagicError(`${source}: not a feature bundle (bad magic)`)
  }
  if (raw.length < BUNDLE_HEADER_BYTES) {
    throw new BundleTruncatedError(`${source}: truncated header`)
  }
  const version = raw.readUInt32LE(4)
  if (version !== BUNDLE_VERSION) {
    throw new BundleVersionError(
      `${source}: unsupported bundle version ${version} (expected ${BUNDLE_VERSION})`,
    )
  }
  const big = raw.readBigUInt64LE(8)
  if (big > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new BundleDimensionError(`${source}: sample count ${big} overflows`)
  }
  const n = Number(big)
  const m = raw.readUInt32LE(16)
  const d = raw.readUInt32LE(20)
  if (n < 1 || m < 1 || d < 1) {
    throw new BundleDimensionError(`${source}: zero dimension in header (${n}, ${m}, ${d})`)
  }
  const expected = BUNDLE_HEADER_BYTES + 4 * n * m + 4 * n
  if (raw.length < expected) {
    throw new BundleTruncatedError(`${source}: expected ${expected} bytes, found ${raw.length}`)
  }
  if (raw.length > expected) {
    throw new BundleFormatError(`${source}: ${raw.length - expected} trailing bytes`)
  }
  const features = new Float32Array(n * m)
  for (let i = 0; i < n * m; i++) features[i] = raw.readFloatLE(BUNDLE_HEADER_BYTES + 4 * i)
  const labels = new Uint32Array(n)
  const tail = BUNDLE_HEADER_BYTES + 4 * n * m
  for (let i = 0; i < n; i++) labels[i] = raw.readUInt32LE(tail + 4 * i)
  for (const label of labels) {
    if (label >= d) {
      throw new BundleDimensionError(`${source}: label ${label} out of range for ${d} classes`)
    }
  }
  return { features, labels, featureDim: m, classCount: d }
}

export function readBundle(path: string): Bundle {
  return decodeBundle(readFileSync(path), path)
}
