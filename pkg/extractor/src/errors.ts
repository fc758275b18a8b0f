/** Error taxonomy mirrored onto process exit codes by the CLI:
 *  config/validation problems exit 2, unreadable or malformed data exits 3,
 *  model construction problems and anything unexpected exit 4. */

export class ConfigError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConfigError";
  }
}

export class DataError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DataError";
  }
}

export class FormatError extends DataError {
  constructor(message: string) {
    super(message);
    this.name = "FormatError";
  }
}

export class ModelError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ModelError";
  }
}
