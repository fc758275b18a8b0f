#!/usr/bin/env node
/** Command-line entry point.
 *
 * Exit codes follow the benchmark suite's convention: 0 success,
 * 2 configuration errors, 3 data errors, 4 anything else.
 */

import { fileURLToPath } from "node:url";

import yargs from "yargs";

import { ConfigError, DataError, ModelError } from "./errors.js";
import { extract } from "./extract.js";
import { MODEL_REGISTRY } from "./registry.js";

export async function main(argv: string[]): Promise<number> {
  let failed = false;
  const parser = yargs(argv)
    .scriptName("attention-extract")
    .command(
      "extract",
      "run a seeded backbone over a directory of images",
      (cmd) =>
        cmd
          .option("model", {
            type: "string",
            demandOption: true,
            describe: `backbone id (${Object.keys(MODEL_REGISTRY).sort().join(", ")})`,
          })
          .option("weights", {
            type: "string",
            demandOption: true,
            describe: 'weights source, "seed:<n>"',
          })
          .option("images", {
            type: "string",
            demandOption: true,
            describe: "directory of .npy image files",
          })
          .option("out", {
            type: "string",
            demandOption: true,
            describe: "output directory for feature tensors",
          })
          .option("dense", {
            type: "boolean",
            default: false,
            describe: "emit the dense embedding head instead of attention maps",
          }),
      (args) => {
        const report = extract({
          modelId: args.model,
          weights: args.weights,
          imagesDir: args.images,
          outDir: args.out,
          dense: args.dense,
        });
        for (const entry of report.entries) {
          process.stdout.write(`${entry.id} -> ${entry.file}\n`);
        }
        process.stdout.write(
          `wrote ${report.entries.length} tensor(s) and ${report.fragmentPath}\n`
        );
      }
    )
    .demandCommand(1, "pick a command")
    .strict()
    .fail((msg, err) => {
      failed = true;
      if (err !== undefined && err !== null && !(err instanceof Error && "yargs" in err)) {
        throw err;
      }
      process.stderr.write(`error: ${msg}\n`);
    })
    .exitProcess(false);

  try {
    await parser.parseAsync();
  } catch (err) {
    if (err instanceof ConfigError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof DataError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 3;
    }
    if (err instanceof ModelError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 4;
    }
    process.stderr.write(`internal error: ${err}\n`);
    return 4;
  }
  return failed ? 2 : 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  fileURLToPath(import.meta.url) === process.argv[1];
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
