/** The extraction job: dataset in, FHIP1 bundle + sidecar JSON out. */

import { writeFileSync } from 'node:fs'

import * as tf from '@tensorflow/tfjs'

import { Backbone, loadBackbone } from './backbone.js'
import { DatasetFormat, ImageDataset, loadCifar, toHwcFloats } from './dataset.js'
import { DimensionMismatchError } from './errors.js'
import { writeBundle } from './fhip.js'

export interface ExtractJob {
  /** Directory holding the dataset's binary files. */
  dataset: string
  /** Backbone registry id or a tfjs model directory. */
  backbone: string
  /** Output bundle path (sidecar lands next to it as <out>.meta.json). */
  out: string
  batchSize?: number
  /** tfjs backend; plain "cpu" is always available. */
  device?: string
  format?: DatasetFormat
  /** Optional cap on the number of images (keeps smoke runs fast). */
  limit?: number
}

export interface ExtractResult {
  out: string
  sidecar: string
  sampleCount: number
  embedDim: number
  classCount: number
}

async function embedAll(
  ds: ImageDataset,
  backbone: Backbone,
  total: number,
  batchSize: number,
): Promise<Float32Array> {
  const features = new Float32Array(total * backbone.embedDim)
  for (let start = 0; start < total; start += batchSize) {
    const count = Math.min(batchSize, total - start)
    const pixels = new Float32Array(count * 32 * 32 * 3)
    for (let i = 0; i < count; i++) {
      pixels.set(toHwcFloats(ds.imageBytes(start + i)), i * 32 * 32 * 3)
    }
    const batch = tf.tensor4d(pixels, [count, 32, 32, 3])
    const embedded = backbone.embed(batch)
    if (embedded.shape[1] !== backbone.embedDim) {
      tf.dispose([batch, embedded])
      throw new DimensionMismatchError(
        `batch produced width ${embedded.shape[1]}, expected ${backbone.embedDim}`,
      )
    }
    features.set(await embedded.data<'float32'>(), start * backbone.embedDim)
    tf.dispose([batch, embedded])
  }
  return features
}

export async function extract(job: ExtractJob): Promise<ExtractResult> {
  await tf.setBackend(job.device ?? 'cpu')
  const ds = loadCifar(job.dataset, job.format ?? 'auto')
  const backbone = await loadBackbone(job.backbone)
  try {
    const total = Math.min(ds.sampleCount, job.limit ?? ds.sampleCount)
    const features = await embedAll(ds, backbone, total, job.batchSize ?? 64)

    writeBundle(job.out, {
      features,
      labels: ds.labels.slice(0, total),
      featureDim: backbone.embedDim,
      classCount: ds.classCount,
    })

    const sidecar = `${job.out}.meta.json`
    const meta = {
      format: 'FHIP1',
      backbone: backbone.id,
      embed_dim: backbone.embedDim,
      pooling: backbone.pooling,
      preprocessing:
        'planar CIFAR bytes to HWC float32 scaled by 1/255' +
        (backbone.inputSize !== 32
          ? `, bilinear resize 32 -> ${backbone.inputSize}`
          : ''),
      deterministic_eval: true,
      dataset: ds.name,
      dataset_format: ds.format,
      label_order: ds.labelOrder,
      sample_count: total,
      class_count: ds.classCount,
    }
    writeFileSync(sidecar, JSON.stringify(meta, null, 2) + '\n')
    return {
      out: job.out,
      sidecar,
      sampleCount: total,
      embedDim: backbone.embedDim,
      classCount: ds.classCount,
    }
  } finally {
    backbone.dispose()
  }
}
