/** Frozen vision backbones behind one tiny interface.
 *
 * A backbone is any saved tfjs model directory (model.json + weight
 * shards). Inference always runs in eval mode; outputs with token or
 * spatial axes are mean-pooled down to one vector per image, and the
 * pooling choice is reported so the sidecar can record it.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import * as tf from '@tensorflow/tfjs'

import { DimensionMismatchError, MissingWeightsError } from './errors.js'

/** Known backbone ids and where their converted weights are expected.
 * Weights are never downloaded here: convert the encoder once (e.g. with
 * the tensorflowjs converter), drop it under models/<id>, and the id
 * becomes usable. */
export const BACKBONE_REGISTRY: Record<string, { dir: string; note: string }> = {
  'vit-mae-base': {
    dir: 'models/vit-mae-base',
    note: 'self-supervised ViT encoder, base size (embedding width 768)',
  },
}

export interface Backbone {
  id: string
  embedDim: number
  /** Square input side the model expects; images are resized to it. */
  inputSize: number
  pooling: string
  /** [n, h, w, c] float batch in [0,1] -> [n, embedDim]. */
  embed(batch: tf.Tensor4D): tf.Tensor2D
  dispose(): void
}

function fileIOHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const modelJSON = JSON.parse(readFileSync(join(dir, 'model.json'), 'utf8'))
      return tf.io.getModelArtifactsForJSON(modelJSON, async (manifest) => {
        const specs: tf.io.WeightsManifestEntry[] = []
        const chunks: Buffer[] = []
        for (const group of manifest) {
          for (const path of group.paths) chunks.push(readFileSync(join(dir, path)))
          specs.push(...group.weights)
        }
        const whole = Buffer.concat(chunks)
        return [
          specs,
          whole.buffer.slice(whole.byteOffset, whole.byteOffset + whole.byteLength),
        ]
      })
    },
  }
}

/** Persist a tfjs Layers model as model.json + weights.bin (test fixtures
 * and offline conversion both use this layout). */
export async function saveModelToDir(model: tf.LayersModel, dir: string): Promise<void> {
  mkdirSync(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer
      writeFileSync(join(dir, 'weights.bin'), Buffer.from(weightData))
      const modelJSON = {
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        generatedBy: 'fedhip-extractor',
        convertedBy: null,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      writeFileSync(join(dir, 'model.json'), JSON.stringify(modelJSON))
      return { modelArtifactsInfo: tf.io.getModelArtifactsInfoForJSON(artifacts) }
    }),
  )
}

function poolToVectors(raw: tf.Tensor): { pooled: tf.Tensor2D; pooling: string } {
  if (raw.rank === 2) {
    return { pooled: raw as tf.Tensor2D, pooling: 'model output used as-is' }
  }
  if (raw.rank === 3) {
    // [n, tokens, channels]: average over the token axis.
    return { pooled: tf.mean(raw, 1) as tf.Tensor2D, pooling: 'mean over patch tokens' }
  }
  if (raw.rank === 4) {
    return {
      pooled: tf.mean(raw, [1, 2]) as tf.Tensor2D,
      pooling: 'mean over spatial positions',
    }
  }
  throw new DimensionMismatchError(`cannot pool a rank-${raw.rank} backbone output`)
}

function resolveDir(idOrPath: string): { id: string; dir: string } {
  const entry = BACKBONE_REGISTRY[idOrPath]
  if (entry !== undefined) {
    if (!existsSync(join(entry.dir, 'model.json'))) {
      throw new MissingWeightsError(
        `backbone "${idOrPath}" (${entry.note}) has no weights under ${entry.dir}; ` +
          'convert the encoder to tfjs format and place model.json there',
      )
    }
    return { id: idOrPath, dir: entry.dir }
  }
  if (existsSync(join(idOrPath, 'model.json'))) {
    return { id: idOrPath, dir: idOrPath }
  }
  throw new MissingWeightsError(
    `backbone "${idOrPath}" is neither a registry id (${Object.keys(BACKBONE_REGISTRY).join(', ')}) ` +
      'nor a directory containing model.json',
  )
}

export async function loadBackbone(idOrPath: string): Promise<Backbone> {
  const { id, dir } = resolveDir(idOrPath)
  let model: tf.LayersModel | tf.GraphModel
  try {
    model = await tf.loadLayersModel(fileIOHandler(dir))
  } catch {
    try {
      model = await tf.loadGraphModel(fileIOHandler(dir))
    } catch (err) {
      throw new MissingWeightsError(`failed to load model from ${dir}: ${err}`)
    }
  }

  const shape = model.inputs[0].shape
  const inputSize = shape && shape.length === 4 && shape[1] ? Number(shape[1]) : 32
  const channels = shape && shape.length === 4 && shape[3] ? Number(shape[3]) : 3

  const embed = (batch: tf.Tensor4D): tf.Tensor2D =>
    tf.tidy(() => {
      const sized =
        batch.shape[1] === inputSize && batch.shape[2] === inputSize
          ? batch
          : tf.image.resizeBilinear(batch, [inputSize, inputSize])
      const raw = model.predict(sized) as tf.Tensor
      return poolToVectors(Array.isArray(raw) ? raw[0] : raw).pooled
    })

  // One probe pass fixes the embedding width and the pooling label.
  const probeIn = tf.zeros([1, inputSize, inputSize, channels]) as tf.Tensor4D
  const probeRaw = model.predict(probeIn) as tf.Tensor
  const probe = poolToVectors(Array.isArray(probeRaw) ? probeRaw[0] : probeRaw)
  const embedDim = probe.pooled.shape[1]
  const pooling = probe.pooling
  tf.dispose([probeIn, probeRaw, probe.pooled])
  if (!embedDim || embedDim < 1) {
    throw new DimensionMismatchError(`backbone ${id} produced an empty embedding`)
  }

  return {
    id,
    embedDim,
    inputSize,
    pooling,
    embed,
    dispose: () => model.dispose(),
  }
}
