/** Error taxonomy for the extractor. Each failure mode gets its own class
 * so callers (and tests) can tell a missing model from a broken dataset. */

export class ExtractError extends Error {
  constructor(message: string) {
    super(message)
    this.name = new.target.name
  }
}

/** The requested backbone has no weights on disk. */
export class MissingWeightsError extends ExtractError {}

/** The dataset path is missing, unreadable, or malformed. */
export class DatasetError extends ExtractError {}

/** The backbone produced embeddings of an unexpected width. */
export class DimensionMismatchError extends ExtractError {}

/** Bundle-file parse errors (mirrors the consumer's taxonomy). */
export class BundleFormatError extends ExtractError {}
export class BundleMagicError extends BundleFormatError {}
export class BundleVersionError extends BundleFormatError {}
export class BundleTruncatedError extends BundleFormatError {}
export class BundleDimensionError extends BundleFormatError {}
