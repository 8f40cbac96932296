export { extract } from './extract.js'
export type { ExtractJob, ExtractResult } from './extract.js'
export { loadBackbone, saveModelToDir, BACKBONE_REGISTRY } from './backbone.js'
export type { Backbone } from './backbone.js'
export { loadCifar, toHwcFloats } from './dataset.js'
export type { ImageDataset, DatasetFormat } from './dataset.js'
export {
  encodeBundle,
  decodeBundle,
  readBundle,
  writeBundle,
  BUNDLE_HEADER_BYTES,
  BUNDLE_MAGIC,
  BUNDLE_VERSION,
} from './fhip.js'
export type { Bundle } from './fhip.js'
export {
  BundleDimensionError,
  BundleFormatError,
  BundleMagicError,
  BundleTruncatedError,
  BundleVersionError,
  DatasetError,
  DimensionMismatchError,
  ExtractError,
  MissingWeightsError,
} from './errors.js'
