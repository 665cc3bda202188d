/**
 * Entry point: reads one JSON request per stdin line and writes one JSON
 * reply per stdout line until a shutdown request or end of input.
 *
 * Usage: node dist/main.js --config '{"family":"gradient-boosting"}'
 */

import { createInterface } from "node:readline";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { Session } from "./protocol.js";

const argv = yargs(hideBin(process.argv))
  .option("config", {
    type: "string",
    describe: "adapter configuration as a JSON object",
  })
  .strict()
  .parseSync();

let rawConfig: unknown = {};
if (argv.config !== undefined) {
  try {
    rawConfig = JSON.parse(argv.config);
  } catch {
    process.stderr.write("adapter: cannot parse --config as JSON\n");
    process.exit(2);
  }
}

const log = (line: string) => process.stderr.write(`adapter: ${line}\n`);
const session = new Session(rawConfig, log);
log("started");

const rl = createInterface({ input: process.stdin, crlfDelay: Infinity });

rl.on("line", (line) => {
  if (line.trim() === "") {
    return;
  }
  const { reply, done } = session.handle(line);
  if (done) {
    rl.close();
    process.stdout.write(`${reply}\n`, () => process.exit(0));
  } else {
    process.stdout.write(`${reply}\n`);
  }
});

rl.on("close", () => {
  process.stdout.write("", () => process.exit(0));
});
