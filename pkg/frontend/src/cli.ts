/**
 * Subprocess plumbing: every bound operation shells out to the native `bild`
 * command-line tool and parses its --json output. The native process owns
 * all numeric work, so bound calls are reentrant and hold no lock in this
 * runtime; concurrent callers simply spawn independent processes.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** The native tool reported an error; the message is its stderr text. */
export class CliError extends Error {
  constructor(message: string, readonly exitCode: number) {
    super(message);
  }
}

/**
 * How to start the native tool. Defaults to `python3 -m bild`, which works
 * wherever the Python package is importable; override with the BILD_CLI
 * environment variable (whitespace-separated argv prefix).
 */
export function cliCommand(): string[] {
  const override = process.env["BILD_CLI"];
  if (override !== undefined && override.trim() !== "") {
    return override.trim().split(/\s+/);
  }
  return ["python3", "-m", "bild"];
}

/** Run one subcommand with --json and return the parsed payload. */
export function runCliJson(args: string[]): any {
  const [executable, ...prefix] = cliCommand();
  const result = spawnSync(executable!, [...prefix, ...args, "--json"],
    { encoding: "utf8", maxBuffer: 256 * 1024 * 1024 });
  if (result.error !== undefined) {
    throw new CliError(`failed to start ${executable}: ${result.error.message}`, -1);
  }
  if (result.status !== 0) {
    const detail = (result.stderr ?? "").trim() || `exit code ${result.status}`;
    throw new CliError(detail, result.status ?? -1);
  }
  return JSON.parse(result.stdout);
}

/** Create a scratch directory, hand it to `body`, and always clean it up. */
export function withScratchDir<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "bild-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
