import { existsSync, mkdtempSync, readFileSync, readdirSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import * as tf from '@tensorflow/tfjs'
import { beforeAll, describe, expect, it } from 'vitest'

import { loadBackbone, saveModelToDir } from '../src/backbone.js'
import { MissingWeightsError } from '../src/errors.js'
import { extract } from '../src/extract.js'
import { readBundle } from '../src/fhip.js'
import { fakeCifarDir } from './dataset.test.js'

let modelDir: string
let pooledModelDir: string

beforeAll(async () => {
  await tf.setBackend('cpu')
  // A miniature stand-in with the same output geometry as a real encoder:
  // a grid of patch tokens, each carrying a fixed-width channel vector.
  const tokens = tf.sequential({
    layers: [
      tf.layers.conv2d({ filters: 6, kernelSize: 5, strides: 3, inputShape: [32, 32, 3] }),
      tf.layers.reshape({ targetShape: [100, 6] }),
    ],
  })
  modelDir = mkdtempSync(join(tmpdir(), 'backbone-'))
  await saveModelToDir(tokens, modelDir)
  tokens.dispose()

  // A model that pools internally, to cover the as-is path.
  const pooled = tf.sequential({
    layers: [
      tf.layers.conv2d({ filters: 6, kernelSize: 5, strides: 3, inputShape: [32, 32, 3] }),
      tf.layers.globalAveragePooling2d({ dataFormat: 'channelsLast' }),
    ],
  })
  pooledModelDir = mkdtempSync(join(tmpdir(), 'backbone-pooled-'))
  await saveModelToDir(pooled, pooledModelDir)
  pooled.dispose()
})

describe('backbone loading', () => {
  it('loads a saved model dir and probes its embedding width', async () => {
    const backbone = await loadBackbone(modelDir)
    expect(backbone.embedDim).toBe(6)
    expect(backbone.inputSize).toBe(32)
    expect(backbone.pooling).toBe('mean over patch tokens')
    backbone.dispose()
  })

  it('passes through outputs that are already pooled', async () => {
    const backbone = await loadBackbone(pooledModelDir)
    expect(backbone.embedDim).toBe(6)
    expect(backbone.pooling).toBe('model output used as-is')
    backbone.dispose()
  })

  it('registry ids without weights raise MissingWeightsError', async () => {
    await expect(loadBackbone('vit-mae-base')).rejects.toThrow(MissingWeightsError)
  })

  it('unknown ids raise MissingWeightsError', async () => {
    await expect(loadBackbone('/nope/nothing')).rejects.toThrow(MissingWeightsError)
  })
})

describe('extract', () => {
  it('single image keeps the shape contract', async () => {
    const data = fakeCifarDir('cifar10', [1], () => 3)
    const out = join(mkdtempSync(join(tmpdir(), 'out-')), 'one.fhip')
    const result = await extract({ dataset: data, backbone: modelDir, out })
    expect(result.sampleCount).toBe(1)
    expect(result.embedDim).toBe(6)
    const bundle = readBundle(out)
    expect(bundle.featureDim).toBe(6)
    expect(bundle.classCount).toBe(10)
    expect(Array.from(bundle.labels)).toEqual([3])
  })

  it('is byte-identical across two runs', async () => {
    const data = fakeCifarDir('cifar10', [7], (i) => i % 10)
    const dir = mkdtempSync(join(tmpdir(), 'out-'))
    const a = join(dir, 'a.fhip')
    const b = join(dir, 'b.fhip')
    await extract({ dataset: data, backbone: modelDir, out: a, batchSize: 3 })
    await extract({ dataset: data, backbone: modelDir, out: b, batchSize: 3 })
    expect(readFileSync(a).equals(readFileSync(b))).toBe(true)
  })

  it('records the pipeline in the sidecar', async () => {
    const data = fakeCifarDir('cifar100', [5], (i) => i)
    const out = join(mkdtempSync(join(tmpdir(), 'out-')), 'c100.fhip')
    const result = await extract({ dataset: data, backbone: modelDir, out })
    const meta = JSON.parse(readFileSync(result.sidecar, 'utf8'))
    expect(meta.format).toBe('FHIP1')
    expect(meta.embed_dim).toBe(6)
    expect(meta.pooling).toContain('mean')
    expect(meta.preprocessing).toContain('1/255')
    expect(meta.label_order).toContain('fine-label')
    expect(meta.class_count).toBe(100)
    expect(meta.deterministic_eval).toBe(true)
  })

  it('honours the sample limit', async () => {
    const data = fakeCifarDir('cifar10', [9], (i) => i % 10)
    const out = join(mkdtempSync(join(tmpdir(), 'out-')), 'lim.fhip')
    const result = await extract({ dataset: data, backbone: modelDir, out, limit: 4 })
    expect(result.sampleCount).toBe(4)
    expect(readBundle(out).labels.length).toBe(4)
  })

  it('failure leaves no partial bundle behind', async () => {
    const data = fakeCifarDir('cifar10', [3], (i) => i)
    const dir = mkdtempSync(join(tmpdir(), 'out-'))
    const out = join(dir, 'never.fhip')
    await expect(
      extract({ dataset: data, backbone: 'vit-mae-base', out }),
    ).rejects.toThrow(MissingWeightsError)
    expect(existsSync(out)).toBe(false)
    expect(readdirSync(dir)).toEqual([])
  })
})
