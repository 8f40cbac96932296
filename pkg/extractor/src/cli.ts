#!/usr/bin/env node
/** CLI: extract --dataset <dir> --backbone <id|dir> --out <file.fhip> */

import { extract } from './extract.js'
import { ExtractError } from './errors.js'
import { DatasetFormat } from './dataset.js'

const USAGE = `usage: fedhip-extract --dataset <dir> --backbone <id|model-dir> --out <file.fhip>
                      [--batch-size N] [--format cifar10|cifar100|auto]
                      [--device cpu] [--limit N]`

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {}
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]
    if (!arg.startsWith('--')) throw new ExtractError(`unexpected argument ${arg}`)
    const value = argv[i + 1]
    if (value === undefined || value.startsWith('--')) {
      throw new ExtractError(`missing value for ${arg}`)
    }
    out[arg.slice(2)] = value
    i++
  }
  return out
}

export async function main(argv: string[]): Promise<number> {
  let flags: Record<string, string>
  try {
    flags = parseArgs(argv)
  } catch (err) {
    console.error(String(err))
    console.error(USAGE)
    return 2
  }
  for (const required of ['dataset', 'backbone', 'out']) {
    if (!(required in flags)) {
      console.error(`missing --${required}`)
      console.error(USAGE)
      return 2
    }
  }
  try {
    const result = await extract({
      dataset: flags['dataset'],
      backbone: flags['backbone'],
      out: flags['out'],
      batchSize: flags['batch-size'] ? Number(flags['batch-size']) : undefined,
      device: flags['device'],
      format: (flags['format'] as DatasetFormat) ?? 'auto',
      limit: flags['limit'] ? Number(flags['limit']) : undefined,
    })
    console.log(
      `wrote ${result.sampleCount} x ${result.embedDim} features ` +
        `(${result.classCount} classes) to ${result.out}`,
    )
    console.log(`sidecar: ${result.sidecar}`)
    return 0
  } catch (err) {
    if (err instanceof ExtractError) {
      console.error(`error: ${err.message}`)
      return 1
    }
    throw err
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop()!)
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code))
}
