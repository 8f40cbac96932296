/** Image-dataset readers that need no image-decoding dependency.
 *
 * The CIFAR binary layouts are fixed-length records of raw planar RGB
 * bytes, so plain buffer slicing is enough: CIFAR-10 records are
 * 1 label byte + 3072 pixels; CIFAR-100 records are coarse byte, fine
 * byte, 3072 pixels. Labels keep the dataset's canonical class indices
 * (fine labels for CIFAR-100).
 */

import { readFileSync, readdirSync, statSync } from 'node:fs'
import { join } from 'node:path'

import { DatasetError } from './errors.js'

export type DatasetFormat = 'cifar10' | 'cifar100' | 'auto'

const PIXELS = 32 * 32 * 3
const RECORD10 = 1 + PIXELS
const RECORD100 = 2 + PIXELS

export interface ImageDataset {
  name: string
  format: 'cifar10' | 'cifar100'
  width: number
  height: number
  channels: number
  classCount: number
  labelOrder: string
  labels: Uint32Array
  /** Planar CIFAR pixel bytes of one image (length 3072). */
  imageBytes(index: number): Uint8Array
  sampleCount: number
}

function binFiles(dir: string): string[] {
  let entries: string[]
  try {
    entries = readdirSync(dir)
  } catch {
    throw new DatasetError(`dataset path ${dir} is not a readable directory`)
  }
  const bins = entries.filter((f) => f.endsWith('.bin')).sort()
  if (bins.length === 0) {
    throw new DatasetError(`no .bin files under ${dir}`)
  }
  return bins.map((f) => join(dir, f))
}

function sniffFormat(paths: string[]): 'cifar10' | 'cifar100' {
  const size = statSync(paths[0]).size
  if (size > 0 && size % RECORD100 === 0 && size % RECORD10 !== 0) return 'cifar100'
  if (size > 0 && size % RECORD10 === 0) return 'cifar10'
  throw new DatasetError(
    `${paths[0]}: size ${size} fits neither CIFAR-10 (${RECORD10}B) nor CIFAR-100 (${RECORD100}B) records`,
  )
}

export function loadCifar(dir: string, format: DatasetFormat = 'auto'): ImageDataset {
  const paths = binFiles(dir)
  const resolved = format === 'auto' ? sniffFormat(paths) : format
  const record = resolved === 'cifar10' ? RECORD10 : RECORD100
  const labelOffset = resolved === 'cifar10' ? 0 : 1 // fine label for CIFAR-100
  const classCount = resolved === 'cifar10' ? 10 : 100

  const buffers = paths.map((p) => {
    const raw = readFileSync(p)
    if (raw.length === 0 || raw.length % record !== 0) {
      throw new DatasetError(`${p}: size ${raw.length} is not a multiple of ${record}`)
    }
    return raw
  })
  const counts = buffers.map((b) => b.length / record)
  const total = counts.reduce((a, b) => a + b, 0)

  const labels = new Uint32Array(total)
  let at = 0
  for (const buf of buffers) {
    for (let off = 0; off < buf.length; off += record) {
      const label = buf[off + labelOffset]
      if (label >= classCount) {
        throw new DatasetError(`label ${label} out of range for ${resolved}`)
      }
      labels[at++] = label
    }
  }

  return {
    name: dir,
    format: resolved,
    width: 32,
    height: 32,
    channels: 3,
    classCount,
    labelOrder:
      resolved === 'cifar10'
        ? 'CIFAR-10 canonical label indices (0..9)'
        : 'CIFAR-100 canonical fine-label indices (0..99)',
    labels,
    sampleCount: total,
    imageBytes(index: number): Uint8Array {
      if (index < 0 || index >= total) {
        throw new DatasetError(`image index ${index} out of range (${total} samples)`)
      }
      let i = index
      for (let f = 0; f < buffers.length; f++) {
        if (i < counts[f]) {
          const start = i * record + labelOffset + 1
          return buffers[f].subarray(start, start + PIXELS)
        }
        i -= counts[f]
      }
      throw new DatasetError('unreachable index arithmetic')
    },
  }
}

/** Planar CIFAR bytes -> interleaved HWC floats scaled to [0, 1]. */
export function toHwcFloats(planar: Uint8Array): Float32Array {
  const out = new Float32Array(PIXELS)
  const plane = 32 * 32
  for (let y = 0; y < 32; y++) {
    for (let x = 0; x < 32; x++) {
      const p = y * 32 + x
      const o = p * 3
      out[o] = planar[p] / 255
      out[o + 1] = planar[plane + p] / 255
      out[o + 2] = planar[2 * plane + p] / 255
    }
  }
  return out
}
