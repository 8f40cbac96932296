import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import { describe, expect, it } from 'vitest'

import {
  BundleDimensionError,
  BundleFormatError,
  BundleMagicError,
  BundleTruncatedError,
  BundleVersionError,
} from '../src/errors.js'
import { Bundle, decodeBundle, encodeBundle, readBundle, writeBundle } from '../src/fhip.js'

function smallBundle(): Bundle {
  return {
    features: new Float32Array([1.5, -2.0, 0.25, 8.0, 3.0, 0.125]),
    labels: new Uint32Array([1, 0, 1]),
    featureDim: 2,
    classCount: 2,
  }
}

/** The documented layout assembled by hand, byte for byte. */
function goldenBytes(): Buffer {
  const buf = Buffer.alloc(24 + 6 * 4 + 3 * 4)
  buf.write('FHIP', 0, 'ascii')
  buf.writeUInt32LE(1, 4)
  buf.writeBigUInt64LE(3n, 8)
  buf.writeUInt32LE(2, 16)
  buf.writeUInt32LE(2, 20)
  const features = [1.5, -2.0, 0.25, 8.0, 3.0, 0.125]
  features.forEach((v, i) => buf.writeFloatLE(v, 24 + 4 * i))
  const labels = [1, 0, 1]
  labels.forEach((v, i) => buf.writeUInt32LE(v, 24 + 24 + 4 * i))
  return buf
}

describe('bundle encoding', () => {
  it('matches the golden byte layout', () => {
    expect(encodeBundle(smallBundle()).equals(goldenBytes())).toBe(true)
  })

  it('round-trips through a file', () => {
    const dir = mkdtempSync(join(tmpdir(), 'fhip-'))
    const path = join(dir, 'client_0.fhip')
    writeBundle(path, smallBundle())
    const back = readBundle(path)
    expect(Array.from(back.features)).toEqual([1.5, -2.0, 0.25, 8.0, 3.0, 0.125])
    expect(Array.from(back.labels)).toEqual([1, 0, 1])
    expect(back.featureDim).toBe(2)
    expect(back.classCount).toBe(2)
  })

  it('is byte-deterministic', () => {
    expect(encodeBundle(smallBundle()).equals(encodeBundle(smallBundle()))).toBe(true)
  })

  it('rejects labels outside the class range', () => {
    const bad = smallBundle()
    bad.labels = new Uint32Array([1, 0, 5])
    expect(() => encodeBundle(bad)).toThrow(BundleDimensionError)
  })

  it('rejects inconsistent feature length', () => {
    const bad = smallBundle()
    bad.features = new Float32Array(5)
    expect(() => encodeBundle(bad)).toThrow(BundleDimensionError)
  })
})

describe('bundle decoding errors', () => {
  it('bad magic', () => {
    const raw = goldenBytes()
    raw.write('NOPE', 0, 'ascii')
    expect(() => decodeBundle(raw)).toThrow(BundleMagicError)
  })

  it('version mismatch', () => {
    const raw = goldenBytes()
    raw.writeUInt32LE(9, 4)
    expect(() => decodeBundle(raw)).toThrow(BundleVersionError)
  })

  it('truncation mid-payload leaves no partial bundle', () => {
    const raw = goldenBytes().subarray(0, 30)
    expect(() => decodeBundle(raw)).toThrow(BundleTruncatedError)
  })

  it('zero dimension in header', () => {
    const raw = goldenBytes()
    raw.writeUInt32LE(0, 16)
    expect(() => decodeBundle(raw)).toThrow(BundleDimensionError)
  })

  it('trailing bytes', () => {
    const raw = Buffer.concat([goldenBytes(), Buffer.from('xx')])
    expect(() => decodeBundle(raw)).toThrow(BundleFormatError)
  })

  it('label out of range on read', () => {
    const raw = goldenBytes()
    raw.writeUInt32LE(7, raw.length - 4)
    expect(() => decodeBundle(raw)).toThrow(BundleDimensionError)
  })

  it('names the file in the error', () => {
    const dir = mkdtempSync(join(tmpdir(), 'fhip-'))
    const path = join(dir, 'alien.fhip')
    writeFileSync(path, Buffer.from('NOPE....rest'))
    expect(() => readBundle(path)).toThrow(/alien\.fhip/)
  })

  it('written files carry no temp suffix', () => {
    const dir = mkdtempSync(join(tmpdir(), 'fhip-'))
    const path = join(dir, 'atomic.fhip')
    writeBundle(path, smallBundle())
    expect(readFileSync(path).equals(goldenBytes())).toBe(true)
  })
})
